#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "causalsem/mmd.hpp"
#include "causalsem/nn.hpp"
#include "causalsem/rng.hpp"
#include "oracles.hpp"

using namespace causalsem;

TEST_SUITE_BEGIN("mmd");

namespace {

Matrix col(std::vector<double> v) {
  Matrix m(static_cast<Eigen::Index>(v.size()), 1);
  for (std::size_t i = 0; i < v.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = v[i];
  return m;
}

Matrix random_matrix(std::size_t n, std::size_t d, Rng& rng) {
  Matrix m(n, d);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rng.normal();
  return m;
}

}  // namespace

TEST_CASE("kernel_matrix: point values") {
  CHECK(kernel_matrix(col({0.0}), col({0.0}), KernelSpec::single(1.0))(0, 0) == 1.0);
  CHECK(kernel_matrix(col({0.0}), col({1.0}), KernelSpec::single(1.0))(0, 0) ==
        doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
  // mixture {1,2} at |x-y| = 1: e^{-1/2} + e^{-1/8}
  const double expected = std::exp(-0.5) + std::exp(-0.125);
  CHECK(expected == doctest::Approx(1.4890275623).epsilon(1e-9));
  CHECK(kernel_matrix(col({0.0}), col({1.0}), KernelSpec::mixture({1.0, 2.0}))(0, 0) ==
        doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("kernel_matrix: symmetry and range for identical inputs") {
  Rng rng(3);
  Matrix X = random_matrix(20, 3, rng);
  KernelSpec spec = KernelSpec::mixture({0.5, 1.0, 2.0});
  Matrix K = kernel_matrix(X, X, spec);
  CHECK((K - K.transpose()).cwiseAbs().maxCoeff() == 0.0);
  for (Eigen::Index i = 0; i < K.rows(); ++i) {
    CHECK(K(i, i) == doctest::Approx(3.0));  // |bandwidths| on the diagonal
    for (Eigen::Index j = 0; j < K.cols(); ++j) {
      CHECK(K(i, j) > 0.0);
      CHECK(K(i, j) <= 3.0);
    }
  }
}

TEST_CASE("kernel_matrix rejects dimension mismatch and bad bandwidths") {
  Rng rng(5);
  CHECK_THROWS_AS(
      kernel_matrix(random_matrix(3, 2, rng), random_matrix(3, 3, rng), KernelSpec::single(1)),
      DimensionError);
  CHECK_THROWS_AS(kernel_matrix(col({0.0}), col({0.0}), KernelSpec{{}}), ConfigError);
  CHECK_THROWS_AS(kernel_matrix(col({0.0}), col({0.0}), KernelSpec{{-1.0}}), ConfigError);
}

TEST_CASE("mmd2: identical sets are exactly zero (biased)") {
  Rng rng(7);
  Matrix X = random_matrix(30, 2, rng);
  CHECK(mmd2(X, X, KernelSpec::mixture({0.5, 1.0})) == 0.0);
}

TEST_CASE("mmd2: one-point hand value") {
  const double got = mmd2(col({0.0}), col({1.0}), KernelSpec::single(1.0));
  CHECK(got == doctest::Approx(2.0 - 2.0 * std::exp(-0.5)).epsilon(1e-12));
  CHECK(got == doctest::Approx(0.7869386806).epsilon(1e-7));
}

TEST_CASE("mmd2: unbiased needs two samples per set") {
  CHECK_THROWS_AS(mmd2(col({0.0}), col({1.0}), KernelSpec::single(1.0), true), Error);
}

TEST_CASE("mmd2: same-distribution pairs look null under permutation") {
  Rng rng(11);
  Matrix X = random_matrix(500, 1, rng);
  Matrix Y = random_matrix(500, 1, rng);
  KernelSpec spec = KernelSpec::median_heuristic(X);
  const double observed = mmd2(X, Y, spec, true);
  CHECK(std::fabs(observed) < 0.01);

  // 200-shuffle permutation oracle.
  Matrix pool(1000, 1);
  pool << X, Y;
  std::vector<int> idx(1000);
  for (int i = 0; i < 1000; ++i) idx[i] = i;
  int greater = 0;
  const int shuffles = 200;
  Rng prm(13);
  for (int s = 0; s < shuffles; ++s) {
    for (int i = 999; i > 0; --i)
      std::swap(idx[i], idx[prm.uniform_int(static_cast<std::uint64_t>(i + 1))]);
    Matrix A(500, 1), B(500, 1);
    for (int i = 0; i < 500; ++i) {
      A(i, 0) = pool(idx[i], 0);
      B(i, 0) = pool(idx[500 + i], 0);
    }
    if (mmd2(A, B, spec, true) >= observed) ++greater;
  }
  const double p = static_cast<double>(greater) / shuffles;
  CHECK(p > 0.05);
}

TEST_CASE("mmd2: separated distributions look non-null") {
  Rng rng(17);
  Matrix X = random_matrix(400, 1, rng);
  Matrix Y = random_matrix(400, 1, rng);
  Y.array() += 1.0;
  KernelSpec spec = KernelSpec::median_heuristic(X);
  CHECK(mmd2(X, Y, spec, true) > 0.05);
}

TEST_CASE("cmmd2: identical targets cancel exactly") {
  Rng rng(19);
  Matrix C = random_matrix(16, 3, rng);
  Matrix T = random_matrix(16, 1, rng);
  CmmdConfig cfg = CmmdConfig::defaults(C, T);
  CHECK(cmmd2(C, T, T, cfg) == 0.0);
}

TEST_CASE("cmmd2: one-point hand value") {
  CmmdConfig cfg;
  cfg.lambda_reg = 1.0;
  cfg.cond_kernel = KernelSpec::single(1.0);
  cfg.target_kernel = KernelSpec::single(1.0);
  // K = [1], Kt = [2], P = 1/4; value = (1 + 1 - 2 e^{-1/2}) / 4
  const double got = cmmd2(col({0.0}), col({0.0}), col({1.0}), cfg);
  CHECK(got == doctest::Approx(0.25 * (2.0 - 2.0 * std::exp(-0.5))).epsilon(1e-12));
  CHECK(got == doctest::Approx(0.1967346701).epsilon(1e-7));
}

TEST_CASE("cmmd2: row-permutation invariance") {
  Rng rng(23);
  const int n = 12;
  Matrix C = random_matrix(n, 2, rng);
  Matrix Tr = random_matrix(n, 1, rng);
  Matrix Tg = random_matrix(n, 1, rng);
  CmmdConfig cfg = CmmdConfig::defaults(C, Tr);
  const double base = cmmd2(C, Tr, Tg, cfg);

  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  for (int i = n - 1; i > 0; --i)
    std::swap(perm[i], perm[rng.uniform_int(static_cast<std::uint64_t>(i + 1))]);
  Matrix C2(n, 2), Tr2(n, 1), Tg2(n, 1);
  for (int i = 0; i < n; ++i) {
    C2.row(i) = C.row(perm[i]);
    Tr2.row(i) = Tr.row(perm[i]);
    Tg2.row(i) = Tg.row(perm[i]);
  }
  CHECK(cmmd2(C2, Tr2, Tg2, cfg) == doctest::Approx(base).epsilon(1e-9));
}

TEST_CASE("cmmd2: constant conditioning ranks pairs like biased mmd2") {
  Rng rng(29);
  const int n = 24;
  Matrix C = Matrix::Ones(n, 1);
  Matrix Tr = random_matrix(n, 1, rng);
  KernelSpec tk = KernelSpec::median_heuristic(Tr);
  CmmdConfig cfg;
  cfg.lambda_reg = 0.1 * n;
  cfg.cond_kernel = KernelSpec::single(1.0);
  cfg.target_kernel = tk;

  int agree = 0;
  const int trials = 20;
  for (int t = 0; t < trials; ++t) {
    Rng r = rng.split(t);
    Matrix A = random_matrix(n, 1, r);
    Matrix B = random_matrix(n, 1, r);
    B.array() += r.uniform(0.0, 2.0);
    const bool cm = cmmd2(C, Tr, A, cfg) < cmmd2(C, Tr, B, cfg);
    const bool mm = mmd2(A, Tr, tk) < mmd2(B, Tr, tk);
    if (cm == mm) ++agree;
  }
  CHECK(agree >= 18);  // rank agreement up to estimator noise
}

TEST_CASE("kernel_op gradient matches finite differences") {
  Rng rng(31);
  Tensor X = Tensor::zeros({5, 2});
  Tensor Y = Tensor::zeros({4, 2});
  for (double& v : X.values) v = rng.normal();
  for (double& v : Y.values) v = rng.normal();
  KernelSpec spec = KernelSpec::mixture({0.7, 1.3});
  auto f = [&spec](Tape& tape, const std::vector<Var>& vs) {
    return tape.sum(tape.square(kernel_op(tape, vs[0], vs[1], spec)));
  };
  CHECK(grad_check(f, {X, Y}, 1e-6) < 1e-5);
}

TEST_CASE("kernel_op gradient with shared operand (K(X,X))") {
  Rng rng(37);
  Tensor X = Tensor::zeros({6, 2});
  for (double& v : X.values) v = rng.normal();
  KernelSpec spec = KernelSpec::single(1.1);
  auto f = [&spec](Tape& tape, const std::vector<Var>& vs) {
    return tape.sum(kernel_op(tape, vs[0], vs[0], spec));
  };
  CHECK(grad_check(f, {X}, 1e-6) < 1e-5);
}

TEST_CASE("mmd2_op value matches the plain estimator and differentiates") {
  Rng rng(41);
  Tensor X = Tensor::zeros({8, 2});
  Tensor Y = Tensor::zeros({8, 2});
  for (double& v : X.values) v = rng.normal();
  for (double& v : Y.values) v = rng.normal() + 0.5;
  KernelSpec spec = KernelSpec::mixture({0.5, 1.0, 2.0});

  Tape t;
  Var vx = t.param(X), vy = t.constant(Y);
  Var m = mmd2_op(t, vx, vy, spec);
  CHECK(t.value(m).values[0] ==
        doctest::Approx(mmd2(to_matrix(X), to_matrix(Y), spec)).epsilon(1e-12));

  auto f = [&Y, &spec](Tape& tape, const std::vector<Var>& vs) {
    return mmd2_op(tape, vs[0], tape.constant(Y), spec);
  };
  CHECK(grad_check(f, {X}, 1e-6) < 1e-5);
}

TEST_CASE("cmmd2_op value matches the plain estimator; gradient vs finite differences") {
  Rng rng(43);
  const int n = 8;
  Matrix C = random_matrix(n, 3, rng);
  Tensor Tr = Tensor::zeros({static_cast<std::size_t>(n), 1});
  Tensor Tg = Tensor::zeros({static_cast<std::size_t>(n), 1});
  for (double& v : Tr.values) v = rng.normal();
  for (double& v : Tg.values) v = rng.normal();
  CmmdConfig cfg = CmmdConfig::defaults(C, to_matrix(Tr));

  Tape t;
  Var vr = t.param(Tr), vg = t.param(Tg);
  Var c = cmmd2_op(t, C, vr, vg, cfg);
  CHECK(t.value(c).values[0] ==
        doctest::Approx(cmmd2(C, to_matrix(Tr), to_matrix(Tg), cfg)).epsilon(1e-12));

  auto f = [&C, &cfg](Tape& tape, const std::vector<Var>& vs) {
    return cmmd2_op(tape, C, vs[0], vs[1], cfg);
  };
  CHECK(grad_check(f, {Tr, Tg}, 1e-6) < 1e-5);
}

TEST_CASE("median heuristic is positive and scales with the data") {
  Rng rng(47);
  Matrix X = random_matrix(50, 1, rng);
  const double med = median_pairwise_distance(X);
  CHECK(med > 0.0);
  Matrix X10 = 10.0 * X;
  CHECK(median_pairwise_distance(X10) == doctest::Approx(10.0 * med).epsilon(1e-9));
  KernelSpec spec = KernelSpec::median_heuristic(X);
  CHECK(spec.bandwidths.size() == 5);
  CHECK(spec.bandwidths[2] == doctest::Approx(med));
}

TEST_CASE("property: biased mmd2 is non-negative") {
  Rng rng(53);
  for (int trial = 0; trial < 30; ++trial) {
    Rng r = rng.split(trial);
    Matrix X = random_matrix(5 + r.uniform_int(20), 2, r);
    Matrix Y = random_matrix(5 + r.uniform_int(20), 2, r);
    Y.array() += r.uniform(-1.0, 1.0);
    CHECK(mmd2(X, Y, KernelSpec::median_heuristic(X)) >= -1e-12);
  }
}

TEST_SUITE_END();
