#include <doctest.h>

#include <cmath>

#include "causalsem/nn.hpp"
#include "causalsem/rng.hpp"
#include "causalsem/tensor.hpp"
#include "oracles.hpp"

using namespace causalsem;

TEST_SUITE_BEGIN("tensor");

TEST_CASE("tensor shape invariants") {
  CHECK_THROWS_AS(Tensor({2, 3}, {1.0, 2.0}), DimensionError);
  Tensor t = Tensor::matrix(2, 2, {1, 2, 3, 4});
  CHECK(t.at(1, 0) == 3.0);
  t.ensure_grad();
  CHECK(t.grad->size() == t.values.size());
}

TEST_CASE("matrix round trip") {
  Matrix m(2, 3);
  m << 1, 2, 3, 4, 5, 6;
  CHECK((to_matrix(from_matrix(m)) - m).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("add/sub/mul forward and gradient") {
  Tape t;
  Var a = t.param(Tensor::vector({1.0, -2.0, 3.0}));
  Var b = t.param(Tensor::vector({0.5, 4.0, -1.0}));
  Var loss = t.sum(t.mul(t.add(a, b), t.sub(a, b)));  // sum(a^2 - b^2)
  t.backward(loss);
  CHECK(t.value(loss).values[0] == doctest::Approx(1.0 - 0.25 + 4 - 16 + 9 - 1));
  for (int i = 0; i < 3; ++i) {
    CHECK(t.grad(a)[i] == doctest::Approx(2.0 * t.value(a).values[i]));
    CHECK(t.grad(b)[i] == doctest::Approx(-2.0 * t.value(b).values[i]));
  }
}

TEST_CASE("backward requires scalar root") {
  Tape t;
  Var a = t.param(Tensor::vector({1.0, 2.0}));
  CHECK_THROWS_AS(t.backward(a), Error);
}

TEST_CASE("backward rejects non-finite root") {
  Tape t;
  Var a = t.param(Tensor::scalar(1e308));
  Var bad = t.mul(a, a);
  CHECK(!std::isfinite(t.value(bad).values[0]));
  CHECK_THROWS_AS(t.backward(bad), NumericError);
}

TEST_CASE("matmul against hand result and finite differences") {
  Tape t;
  Var a = t.param(Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6}));
  Var b = t.param(Tensor::matrix(3, 2, {7, 8, 9, 10, 11, 12}));
  Var c = t.matmul(a, b);
  CHECK(t.value(c).at(0, 0) == doctest::Approx(58));
  CHECK(t.value(c).at(1, 1) == doctest::Approx(154));

  auto f = [](Tape& tape, const std::vector<Var>& vs) {
    return tape.sum(tape.square(tape.matmul(vs[0], vs[1])));
  };
  const double err = grad_check(
      f, {Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6}), Tensor::matrix(3, 2, {7, 8, 9, 10, 11, 12})},
      1e-5);
  CHECK(err < 1e-6);
}

TEST_CASE("matmul_nt matches matmul with transpose") {
  Rng rng(7);
  Tensor a = Tensor::zeros({3, 4});
  Tensor b = Tensor::zeros({5, 4});
  for (double& v : a.values) v = rng.normal();
  for (double& v : b.values) v = rng.normal();
  Tape t;
  Var va = t.constant(a), vb = t.constant(b);
  Var c1 = t.matmul_nt(va, vb);
  Var c2 = t.matmul(va, t.transpose(vb));
  CHECK((to_matrix(t.value(c1)) - to_matrix(t.value(c2))).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("elementwise op gradients match finite differences") {
  Rng rng(11);
  Tensor x = Tensor::zeros({2, 3});
  for (double& v : x.values) v = rng.uniform(0.3, 1.5);  // positive, away from kinks

  auto make = [](auto op) {
    return [op](Tape& tape, const std::vector<Var>& vs) {
      return tape.sum(op(tape, vs[0]));
    };
  };
  CHECK(grad_check(make([](Tape& t, Var v) { return t.relu(v); }), {x}, 1e-6) < 1e-6);
  CHECK(grad_check(make([](Tape& t, Var v) { return t.tanh_(v); }), {x}, 1e-6) < 1e-6);
  CHECK(grad_check(make([](Tape& t, Var v) { return t.sin_(v); }), {x}, 1e-6) < 1e-6);
  CHECK(grad_check(make([](Tape& t, Var v) { return t.cos_(v); }), {x}, 1e-6) < 1e-6);
  CHECK(grad_check(make([](Tape& t, Var v) { return t.exp_(v); }), {x}, 1e-6) < 1e-6);
  CHECK(grad_check(make([](Tape& t, Var v) { return t.log_(v); }), {x}, 1e-6) < 1e-6);
  CHECK(grad_check(make([](Tape& t, Var v) { return t.square(v); }), {x}, 1e-6) < 1e-6);
  CHECK(grad_check(make([](Tape& t, Var v) { return t.abs_(v); }), {x}, 1e-6) < 1e-6);
}

TEST_CASE("broadcast ops") {
  Tape t;
  Var m = t.param(Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6}));
  Var r = t.param(Tensor::vector({10, 20, 30}));
  Var s = t.sum(t.add_rowvec(m, r));
  t.backward(s);
  CHECK(t.value(s).values[0] == doctest::Approx(21 + 120));
  CHECK(t.grad(r)[0] == doctest::Approx(2.0));

  auto f = [](Tape& tape, const std::vector<Var>& vs) {
    return tape.sum(tape.square(tape.mul_rowvec(vs[0], vs[1])));
  };
  CHECK(grad_check(f, {Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6}),
                       Tensor::vector({0.5, -1.5, 2.0})},
                   1e-5) < 1e-6);

  auto g = [](Tape& tape, const std::vector<Var>& vs) {
    return tape.sum(tape.square(tape.mul_bcast_scalar(vs[0], vs[1])));
  };
  CHECK(grad_check(g, {Tensor::matrix(2, 2, {1, -2, 3, 4}), Tensor::scalar(0.7)}, 1e-5) <
        1e-6);
}

TEST_CASE("slice, concat and reshape round trip gradients") {
  auto f = [](Tape& tape, const std::vector<Var>& vs) {
    Var c0 = tape.slice_col(vs[0], 0);
    Var c2 = tape.slice_col(vs[0], 2);
    Var cat = tape.concat_cols({c2, c0});
    Var flat = tape.reshape(cat, {std::size_t(6)});
    return tape.sum(tape.square(flat));
  };
  CHECK(grad_check(f, {Tensor::matrix(3, 3, {1, 2, 3, 4, 5, 6, 7, 8, 9})}, 1e-5) < 1e-6);
}

TEST_CASE("solve_right value and gradient") {
  Matrix B(2, 2);
  B << 3, 1, 0, 2;
  Matrix Z(2, 2);
  Z << 6, 2, 3, 4;
  Tape t;
  Var vz = t.param(from_matrix(Z));
  Var vb = t.param(from_matrix(B));
  Var y = t.solve_right(vz, vb);
  const Matrix Y = to_matrix(t.value(y));
  CHECK((Y * B - Z).cwiseAbs().maxCoeff() < 1e-12);

  auto f = [](Tape& tape, const std::vector<Var>& vs) {
    return tape.sum(tape.square(tape.solve_right(vs[0], vs[1])));
  };
  CHECK(grad_check(f, {from_matrix(Z), from_matrix(B)}, 1e-6) < 1e-5);
}

TEST_CASE("solve_right rejects singular matrices") {
  Tape t;
  Var z = t.constant(Tensor::matrix(1, 2, {1, 2}));
  Var b = t.constant(Tensor::matrix(2, 2, {1, 2, 2, 4}));
  CHECK_THROWS_AS(t.solve_right(z, b), NumericError);
}

TEST_CASE("gradients accumulate across shared subexpressions") {
  Tape t;
  Var a = t.param(Tensor::scalar(3.0));
  Var y = t.add(t.mul(a, a), t.scale(a, 2.0));  // a^2 + 2a
  t.backward(y);
  CHECK(t.grad(a)[0] == doctest::Approx(2.0 * 3.0 + 2.0));
}

TEST_CASE("constants receive no gradient buffers") {
  Tape t;
  Var a = t.param(Tensor::scalar(2.0));
  Var c = t.constant(Tensor::scalar(5.0));
  Var y = t.mul(a, c);
  t.backward(y);
  CHECK(t.grad(c).empty());
  CHECK(t.grad(a)[0] == doctest::Approx(5.0));
}

TEST_CASE("tape reset bounds memory across steps") {
  Tape t;
  std::size_t first_size = 0;
  for (int step = 0; step < 3; ++step) {
    t.reset();
    Var a = t.param(Tensor::vector({1.0, 2.0}));
    Var loss = t.sum(t.square(a));
    t.backward(loss);
    if (step == 0) first_size = t.size();
    CHECK(t.size() == first_size);
  }
}

TEST_CASE("forward pass is deterministic") {
  auto run = [] {
    Tape t;
    Var a = t.constant(Tensor::vector({0.3, -1.2, 2.2}));
    Var y = t.sum(t.exp_(t.sin_(a)));
    return t.value(y).values[0];
  };
  const double v1 = run(), v2 = run();
  CHECK(v1 == v2);
}

TEST_SUITE_END();
