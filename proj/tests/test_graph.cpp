#include <doctest.h>

#include <cmath>
#include <set>

#include "causalsem/graph.hpp"
#include "causalsem/nn.hpp"
#include "causalsem/rng.hpp"
#include "oracles.hpp"

using namespace causalsem;

TEST_SUITE_BEGIN("graph");

namespace {

// chain 2 -> 1 -> 0
Matrix chain3() {
  Matrix W = Matrix::Zero(3, 3);
  W(1, 2) = 1.0;
  W(0, 1) = 1.0;
  return W;
}

}  // namespace

TEST_CASE("mask_from_weights: zero weights give empty mask") {
  CausalMask m = mask_from_weights(WeightedAdjacency(3));
  CHECK(m.M.cwiseAbs().maxCoeff() == 0.0);
  for (int v = 0; v < 3; ++v) CHECK(m.parents[v].empty());
  CHECK(m.longest_path == 0);
}

TEST_CASE("mask_from_weights: nonzero weight binarizes to one") {
  WeightedAdjacency W(2);
  W.W(0, 1) = 1.7;
  CausalMask m = mask_from_weights(W, 1e-8);
  CHECK(m.M(0, 1) == 1.0);
  CHECK(m.parents[0] == std::vector<int>{1});
  CHECK(m.children[1] == std::vector<int>{0});
}

TEST_CASE("mask_from_weights: 2-cycle rejected with witness") {
  WeightedAdjacency W(2);
  W.W(0, 1) = 0.5;
  W.W(1, 0) = 0.5;
  try {
    mask_from_weights(W);
    FAIL("expected AcyclicityError");
  } catch (const AcyclicityError& e) {
    CHECK(e.cycle.size() == 2);
  }
}

TEST_CASE("parental_mask rows carry exactly the parent values") {
  CausalMask m = mask_from_binary(chain3());
  Eigen::VectorXd x(3);
  x << 10, 11, 12;
  Matrix pm = parental_mask(m, x);
  CHECK(pm(1, 2) == 12.0);  // node 1's parent is node 2
  CHECK(pm(0, 1) == 11.0);
  CHECK(pm(1, 0) == 0.0);
  CHECK(pm(0, 0) == 0.0);
  CHECK(pm.row(2).cwiseAbs().maxCoeff() == 0.0);

  CausalMask empty = mask_from_weights(WeightedAdjacency(3));
  CHECK(parental_mask(empty, x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("parental_mask: full DAG on 3 nodes") {
  Matrix M = Matrix::Zero(3, 3);
  M(0, 1) = M(0, 2) = M(1, 2) = 1.0;
  CausalMask m = mask_from_binary(M);
  Eigen::VectorXd x(3);
  x << 1, 2, 3;
  Matrix pm = parental_mask(m, x);
  CHECK(pm(0, 0) == 0.0);
  CHECK(pm(0, 1) == 2.0);
  CHECK(pm(0, 2) == 3.0);
}

TEST_CASE("parental_mask length mismatch") {
  CausalMask m = mask_from_binary(chain3());
  Eigen::VectorXd x(2);
  x << 1, 2;
  CHECK_THROWS_AS(parental_mask(m, x), DimensionError);
}

TEST_CASE("acyclicity_h: zero matrix and strict DAGs sit at zero") {
  CHECK(acyclicity_h(Matrix::Zero(4, 4)).h == 0.0);
  Rng rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    Rng r = rng.split(trial);
    Matrix W = oracles::random_dag_weights(6, 0.4, r);
    CHECK(std::fabs(acyclicity_h(W).h) < 1e-9);
  }
}

TEST_CASE("acyclicity_h: unit 2-cycle equals 2cosh(1) - 2") {
  Matrix W = Matrix::Zero(2, 2);
  W(0, 1) = 1.0;
  W(1, 0) = 1.0;
  // Truncated power-series oracle for e^{W o W}.
  const Matrix E = oracles::series_expm(W.cwiseProduct(W), 40);
  const double expected = E.trace() - 2.0;
  CHECK(std::fabs(expected - (2.0 * std::cosh(1.0) - 2.0)) < 1e-12);
  CHECK(acyclicity_h(W).h == doctest::Approx(expected).epsilon(1e-12));
  CHECK(acyclicity_h(W).h == doctest::Approx(1.0861612696304874).epsilon(1e-9));
}

TEST_CASE("acyclicity_h gradient matches finite differences") {
  Rng rng(31);
  Matrix W = oracles::random_sparse_matrix(5, 0.5, rng, 0.2, 1.0);
  const AcyclicityResult base = acyclicity_h(W);
  const double step = 1e-6;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) {
      Matrix Wp = W, Wm = W;
      Wp(i, j) += step;
      Wm(i, j) -= step;
      const double fd = (acyclicity_h(Wp).h - acyclicity_h(Wm).h) / (2 * step);
      const double g = base.grad(i, j);
      CHECK(std::fabs(g - fd) / std::max({std::fabs(g), std::fabs(fd), 1e-6}) < 1e-6);
    }
}

TEST_CASE("acyclicity_op backpropagates the analytic gradient") {
  Rng rng(37);
  Tensor W = Tensor::zeros({4, 4});
  for (double& v : W.values) v = 0.4 * rng.normal();
  for (int i = 0; i < 4; ++i) W.values[i * 4 + i] = 0.0;
  auto f = [](Tape& tape, const std::vector<Var>& vs) {
    return tape.square(acyclicity_op(tape, vs[0]));
  };
  CHECK(grad_check(f, {W}, 1e-6) < 1e-5);
}

TEST_CASE("matrix_exp: basics and nilpotent exactness") {
  CHECK((matrix_exp(Matrix::Zero(3, 3)) - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() ==
        0.0);

  Matrix D = Matrix::Zero(2, 2);
  D(0, 0) = 1.0;
  D(1, 1) = 1.0;
  const Matrix E = matrix_exp(D);
  CHECK(E(0, 0) == doctest::Approx(std::exp(1.0)).epsilon(1e-14));
  CHECK(E(0, 1) == 0.0);

  Matrix N = Matrix::Zero(3, 3);  // single superdiagonal
  N(0, 1) = 1.0;
  N(1, 2) = 1.0;
  const Matrix expN = matrix_exp(N);
  Matrix expect = Matrix::Identity(3, 3) + N + 0.5 * (N * N);
  CHECK((expN - expect).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("matrix_exp matches the series oracle on random matrices") {
  Rng rng(43);
  for (int trial = 0; trial < 10; ++trial) {
    Rng r = rng.split(trial);
    const int V = 3 + static_cast<int>(r.uniform_int(10));  // up to 12
    Matrix A(V, V);
    for (int i = 0; i < V; ++i)
      for (int j = 0; j < V; ++j) A(i, j) = 0.4 * r.normal();
    const Matrix got = matrix_exp(A);
    const Matrix want = oracles::series_expm(A, 80);
    const double rel =
        (got - want).cwiseAbs().maxCoeff() / std::max(1.0, want.cwiseAbs().maxCoeff());
    CHECK(rel < 1e-10);
  }
}

TEST_CASE("topological_order: chain, empty, cycle") {
  CHECK(topological_order(chain3()) == std::vector<int>{2, 1, 0});
  CHECK(topological_order(Matrix::Zero(4, 4)) == std::vector<int>{0, 1, 2, 3});
  Matrix C = Matrix::Zero(2, 2);
  C(0, 1) = 1.0;
  C(1, 0) = 1.0;
  CHECK_THROWS_AS(topological_order(C), AcyclicityError);
}

TEST_CASE("mutilate removes exactly the in-going edges") {
  WeightedAdjacency W(3);
  W.W = chain3();
  WeightedAdjacency cut = mutilate(W, 1);
  CHECK(cut.W(1, 2) == 0.0);
  CHECK(cut.W(0, 1) == 1.0);  // out-going edge survives

  // parentless node: no change
  WeightedAdjacency same = mutilate(W, 2);
  CHECK((same.W - W.W).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(mutilate(W, 7), DimensionError);
}

TEST_CASE("mutilate is idempotent and only removes entries") {
  Rng rng(53);
  Matrix W = oracles::random_dag_weights(6, 0.5, rng);
  WeightedAdjacency adj(W);
  for (int node = 0; node < 6; ++node) {
    WeightedAdjacency once = mutilate(adj, node);
    WeightedAdjacency twice = mutilate(once, node);
    CHECK((once.W - twice.W).cwiseAbs().maxCoeff() == 0.0);
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j)
        if (once.W(i, j) != 0.0) CHECK(once.W(i, j) == adj.W(i, j));
  }
}

TEST_CASE("gen_graph: GraphA edge counts and mutilation arithmetic") {
  WeightedAdjacency a1 = gen_graph(GraphFamily::graph_a(1, 7));
  CHECK((a1.W.array() != 0.0).count() == 4);  // 2 spine + S1->X2 + S1->X0

  for (int n : {1, 2, 5}) {
    WeightedAdjacency a = gen_graph(GraphFamily::graph_a(n, 11));
    CHECK((a.W.array() != 0.0).count() == n + 3);
    const auto count = [](const WeightedAdjacency& w) {
      return (w.W.array() != 0.0).count();
    };
    // intervening on X2 cuts exactly 1 edge, X1 cuts 1, the pair cuts 2
    CHECK(count(a) - count(mutilate(a, 2)) == 1);
    CHECK(count(a) - count(mutilate(a, 1)) == 1);
    CHECK(count(a) - count(mutilate(mutilate(a, 1), 2)) == 2);
  }
}

TEST_CASE("gen_graph: GraphB edge counts and confounder mutilation") {
  WeightedAdjacency b3 = gen_graph(GraphFamily::graph_b(3, 13));
  CHECK((b3.W.array() != 0.0).count() == 2 + 2 * 3);

  for (int n : {1, 3, 4}) {
    WeightedAdjacency b = gen_graph(GraphFamily::graph_b(n, 17));
    const auto count = (b.W.array() != 0.0).count();
    WeightedAdjacency cut = mutilate(b, 2);
    // X2's in-going edges: n confounder links plus nothing else
    CHECK(count - (cut.W.array() != 0.0).count() == n);
  }
}

TEST_CASE("gen_graph: weights respect the magnitude range and seeding") {
  GraphFamily f = GraphFamily::graph_b(4, 99);
  WeightedAdjacency w1 = gen_graph(f);
  WeightedAdjacency w2 = gen_graph(f);
  CHECK((w1.W - w2.W).cwiseAbs().maxCoeff() == 0.0);
  for (int i = 0; i < w1.size(); ++i)
    for (int j = 0; j < w1.size(); ++j)
      if (w1.W(i, j) != 0.0) {
        CHECK(std::fabs(w1.W(i, j)) >= 0.5);
        CHECK(std::fabs(w1.W(i, j)) <= 2.0);
      }
  WeightedAdjacency w3 = gen_graph(GraphFamily::graph_b(4, 100));
  CHECK((w1.W - w3.W).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("gen_graph: Erdos-Renyi graphs are acyclic DAGs") {
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    WeightedAdjacency W = gen_graph(GraphFamily::erdos_renyi(8, 0.3, seed));
    CHECK(!oracles::has_cycle(mask_from_weights(W).M));
  }
}

TEST_CASE("node names follow the documented convention") {
  CHECK(GraphFamily::graph_a(2, 0).node_names() ==
        std::vector<std::string>{"X0", "X1", "X2", "S1", "S2"});
  CHECK(GraphFamily::erdos_renyi(3, 0.5, 0).node_names() ==
        std::vector<std::string>{"X0", "X1", "X2"});
}

TEST_CASE("shd: identity, insertion, reversal") {
  Matrix M = chain3();
  CausalMask a = mask_from_binary(M);
  CHECK(shd(a, a) == 0);

  Matrix extra = M;
  extra(0, 2) = 1.0;
  CHECK(shd(mask_from_binary(extra), a) == 1);

  Matrix rev = M;
  rev(0, 1) = 0.0;
  rev(1, 0) = 1.0;
  CHECK(shd(mask_from_binary(rev), a) == 1);

  CHECK_THROWS_AS(shd(Matrix::Zero(2, 2), Matrix::Zero(3, 3)), DimensionError);
}

TEST_CASE("shd matches the brute-force edit oracle on all 3-node DAG pairs") {
  // Enumerate 3-node binary masks (64 digraphs), keep the acyclic ones.
  std::vector<Matrix> dags;
  for (int bits = 0; bits < 64; ++bits) {
    Matrix M = Matrix::Zero(3, 3);
    int b = bits;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        if (i == j) continue;
        M(i, j) = (b & 1) ? 1.0 : 0.0;
        b >>= 1;
      }
    if (!oracles::has_cycle(M)) dags.push_back(M);
  }
  REQUIRE(dags.size() == 25);
  for (const Matrix& a : dags)
    for (const Matrix& b : dags) CHECK(shd(a, b) == oracles::shd_bfs(a, b));
}

TEST_CASE("property: shd is symmetric and satisfies the triangle inequality") {
  Rng rng(71);
  for (int trial = 0; trial < 40; ++trial) {
    Rng r = rng.split(trial);
    const int V = 3 + static_cast<int>(r.uniform_int(4));
    Matrix A = oracles::random_dag_weights(V, 0.5, r);
    Matrix B = oracles::random_dag_weights(V, 0.5, r);
    Matrix C = oracles::random_dag_weights(V, 0.5, r);
    auto bin = [](const Matrix& W) {
      Matrix M = (W.array() != 0.0).cast<double>();
      return M;
    };
    const int ab = shd(bin(A), bin(B));
    const int ba = shd(bin(B), bin(A));
    const int ac = shd(bin(A), bin(C));
    const int cb = shd(bin(C), bin(B));
    CHECK(ab == ba);
    CHECK(ab <= ac + cb);
  }
}

TEST_CASE("property: acyclicity_h zero iff topological order exists (200 random 6-node)") {
  Rng rng(83);
  int cyclic_seen = 0, acyclic_seen = 0;
  for (int trial = 0; trial < 200; ++trial) {
    Rng r = rng.split(trial);
    const double fill = r.uniform(0.05, 0.5);
    Matrix W = oracles::random_sparse_matrix(6, fill, r);
    Matrix M = (W.array() != 0.0).cast<double>();
    const bool cyc = oracles::has_cycle(M);
    const double h = acyclicity_h(W).h;
    if (cyc) {
      ++cyclic_seen;
      CHECK(h > 1e-9);
    } else {
      ++acyclic_seen;
      CHECK(std::fabs(h) < 1e-9);
      CHECK_NOTHROW(topological_order(M));
    }
  }
  CHECK(cyclic_seen > 20);
  CHECK(acyclic_seen > 20);
}

TEST_CASE("property: parental_mask support equals the parent sets") {
  Rng rng(91);
  for (int trial = 0; trial < 20; ++trial) {
    Rng r = rng.split(trial);
    const int V = 4 + static_cast<int>(r.uniform_int(4));
    CausalMask m = mask_from_binary(
        (oracles::random_dag_weights(V, 0.4, r).array() != 0.0).cast<double>());
    Eigen::VectorXd x(V);
    for (int i = 0; i < V; ++i) x(i) = r.uniform(0.5, 2.0);  // nonzero everywhere
    Matrix pm = parental_mask(m, x);
    for (int mu = 0; mu < V; ++mu) {
      std::set<int> support;
      for (int j = 0; j < V; ++j)
        if (pm(mu, j) != 0.0) support.insert(j);
      CHECK(support == std::set<int>(m.parents[mu].begin(), m.parents[mu].end()));
    }
  }
}

TEST_SUITE_END();
