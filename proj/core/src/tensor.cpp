#include "causalsem/tensor.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace causalsem {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

Eigen::Map<const Matrix> map2(const Tensor& t) {
  return {t.values.data(), static_cast<Eigen::Index>(t.rows()),
          static_cast<Eigen::Index>(t.cols())};
}

void check(bool ok, const std::string& msg) {
  if (!ok) throw DimensionError(msg);
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape_, std::vector<double> values_)
    : shape(std::move(shape_)), values(std::move(values_)) {
  if (shape_product(shape) != values.size())
    throw DimensionError("tensor: values length does not match shape product");
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  std::size_t n = shape_product(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::full(std::vector<std::size_t> shape, double v) {
  std::size_t n = shape_product(shape);
  return Tensor(std::move(shape), std::vector<double>(n, v));
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

Tensor Tensor::vector(std::vector<double> v) {
  std::size_t n = v.size();
  return Tensor({n}, std::move(v));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> v) {
  return Tensor({rows, cols}, std::move(v));
}

std::size_t Tensor::rows() const {
  if (rank() == 2) return shape[0];
  if (rank() == 1) return 1;
  throw DimensionError("tensor: rows() on rank " + std::to_string(rank()));
}

std::size_t Tensor::cols() const {
  if (rank() == 2) return shape[1];
  if (rank() == 1) return shape[0];
  throw DimensionError("tensor: cols() on rank " + std::to_string(rank()));
}

double& Tensor::at(std::size_t r, std::size_t c) { return values[r * cols() + c]; }
double Tensor::at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }

void Tensor::ensure_grad() {
  if (!grad) grad.emplace(values.size(), 0.0);
}

void Tensor::zero_grad() {
  if (grad) std::fill(grad->begin(), grad->end(), 0.0);
}

Matrix to_matrix(const Tensor& t) {
  return map2(t);
}

Tensor from_matrix(const Matrix& m) {
  Tensor t = Tensor::zeros({static_cast<std::size_t>(m.rows()),
                            static_cast<std::size_t>(m.cols())});
  Eigen::Map<Matrix>(t.values.data(), m.rows(), m.cols()) = m;
  return t;
}

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

const Tape::Node& Tape::node(int id) const {
  if (id < 0 || id >= static_cast<int>(nodes_.size()))
    throw Error("tape: detached or foreign tensor (missing tape node)");
  return nodes_[static_cast<std::size_t>(id)];
}

Tape::Node& Tape::node(int id) {
  return const_cast<Node&>(static_cast<const Tape*>(this)->node(id));
}

bool Tape::any_requires(const std::vector<Var>& parents) const {
  for (Var p : parents)
    if (node(p.id).requires_grad) return true;
  return false;
}

Var Tape::push(Tensor value, std::vector<Var> parents, Backward back) {
  Node n;
  n.requires_grad = !parents.empty() && any_requires(parents);
  n.value = std::move(value);
  n.parents = std::move(parents);
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::param(const Tensor& t) {
  Var v = push(t, {}, nullptr);
  nodes_.back().requires_grad = true;
  return v;
}

Var Tape::constant(const Tensor& t) { return push(t, {}, nullptr); }
Var Tape::constant(Tensor&& t) { return push(std::move(t), {}, nullptr); }

const std::vector<double>& Tape::grad(Var v) const {
  static const std::vector<double> empty;
  if (v.id < 0 || v.id >= static_cast<int>(grads_.size())) return empty;
  return grads_[static_cast<std::size_t>(v.id)];
}

Tensor Tape::grad_tensor(Var v) const {
  const Tensor& val = value(v);
  Tensor g = Tensor::zeros(val.shape);
  const auto& buf = grad(v);
  if (!buf.empty()) g.values = buf;
  return g;
}

void Tape::accumulate(Var v, const double* g, std::size_t n) {
  Node& nd = node(v.id);
  if (!nd.requires_grad) return;
  auto& buf = grads_[static_cast<std::size_t>(v.id)];
  if (buf.empty()) buf.assign(nd.value.size(), 0.0);
  if (buf.size() != n) throw DimensionError("tape: gradient length mismatch");
  for (std::size_t i = 0; i < n; ++i) buf[i] += g[i];
}

void Tape::backward(Var root) {
  const Node& r = node(root.id);
  if (!r.value.is_scalar())
    throw Error("tape: backward requires a scalar root");
  if (!std::isfinite(r.value.values[0]))
    throw NumericError("tape: non-finite loss at backward root");

  grads_.assign(nodes_.size(), {});
  grads_[static_cast<std::size_t>(root.id)] = {1.0};
  for (int id = root.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    const auto& g = grads_[static_cast<std::size_t>(id)];
    if (g.empty() || !n.back) continue;
    n.back(*this, Var{id}, g);
  }
}

void Tape::reset() {
  nodes_.clear();
  grads_.clear();
}

// --- elementwise -----------------------------------------------------------

Var Tape::add(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  check(ta.same_shape(tb), "add: shape mismatch");
  Tensor out = ta;
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] += tb.values[i];
  return push(std::move(out), {a, b},
              [a, b](Tape& t, Var, const std::vector<double>& up) {
                t.accumulate(a, up.data(), up.size());
                t.accumulate(b, up.data(), up.size());
              });
}

Var Tape::sub(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  check(ta.same_shape(tb), "sub: shape mismatch");
  Tensor out = ta;
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] -= tb.values[i];
  return push(std::move(out), {a, b},
              [a, b](Tape& t, Var, const std::vector<double>& up) {
                t.accumulate(a, up.data(), up.size());
                std::vector<double> gneg(up.size());
                for (std::size_t i = 0; i < up.size(); ++i) gneg[i] = -up[i];
                t.accumulate(b, gneg.data(), gneg.size());
              });
}

Var Tape::mul(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  check(ta.same_shape(tb), "mul: shape mismatch");
  Tensor out = ta;
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] *= tb.values[i];
  return push(std::move(out), {a, b},
              [a, b](Tape& t, Var, const std::vector<double>& up) {
                const auto& va = t.value(a).values;
                const auto& vb = t.value(b).values;
                std::vector<double> g(up.size());
                for (std::size_t i = 0; i < up.size(); ++i) g[i] = up[i] * vb[i];
                t.accumulate(a, g.data(), g.size());
                for (std::size_t i = 0; i < up.size(); ++i) g[i] = up[i] * va[i];
                t.accumulate(b, g.data(), g.size());
              });
}

Var Tape::scale(Var a, double c) {
  Tensor out = value(a);
  for (double& v : out.values) v *= c;
  return push(std::move(out), {a},
              [a, c](Tape& t, Var, const std::vector<double>& up) {
                std::vector<double> g(up.size());
                for (std::size_t i = 0; i < up.size(); ++i) g[i] = c * up[i];
                t.accumulate(a, g.data(), g.size());
              });
}

Var Tape::add_scalar(Var a, double c) {
  Tensor out = value(a);
  for (double& v : out.values) v += c;
  return push(std::move(out), {a},
              [a](Tape& t, Var, const std::vector<double>& up) {
                t.accumulate(a, up.data(), up.size());
              });
}

Var Tape::unary(Var a, double (*f)(double), double (*df)(double, double)) {
  Tensor out = value(a);
  for (double& v : out.values) v = f(v);
  return push(std::move(out), {a},
              [a, df](Tape& t, Var self, const std::vector<double>& up) {
                const auto& x = t.value(a).values;
                const auto& y = t.value(self).values;
                std::vector<double> g(up.size());
                for (std::size_t i = 0; i < up.size(); ++i)
                  g[i] = up[i] * df(x[i], y[i]);
                t.accumulate(a, g.data(), g.size());
              });
}

Var Tape::relu(Var a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var Tape::tanh_(Var a) {
  return unary(
      a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Var Tape::sin_(Var a) {
  return unary(
      a, [](double x) { return std::sin(x); },
      [](double x, double) { return std::cos(x); });
}

Var Tape::cos_(Var a) {
  return unary(
      a, [](double x) { return std::cos(x); },
      [](double x, double) { return -std::sin(x); });
}

Var Tape::exp_(Var a) {
  return unary(
      a, [](double x) { return std::exp(x); },
      [](double, double y) { return y; });
}

Var Tape::log_(Var a) {
  return unary(
      a, [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; });
}

Var Tape::abs_(Var a) {
  return unary(
      a, [](double x) { return std::fabs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var Tape::square(Var a) {
  return unary(
      a, [](double x) { return x * x; },
      [](double x, double) { return 2.0 * x; });
}

Var Tape::sqrt_(Var a) {
  return unary(
      a, [](double x) { return std::sqrt(x); },
      [](double, double y) { return 0.5 / y; });
}

Var Tape::div(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  check(ta.same_shape(tb), "div: shape mismatch");
  Tensor out = ta;
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] /= tb.values[i];
  return push(std::move(out), {a, b},
              [a, b](Tape& t, Var, const std::vector<double>& up) {
                const auto& va = t.value(a).values;
                const auto& vb = t.value(b).values;
                std::vector<double> g(up.size());
                for (std::size_t i = 0; i < up.size(); ++i) g[i] = up[i] / vb[i];
                t.accumulate(a, g.data(), g.size());
                for (std::size_t i = 0; i < up.size(); ++i)
                  g[i] = -up[i] * va[i] / (vb[i] * vb[i]);
                t.accumulate(b, g.data(), g.size());
              });
}

// --- broadcasts ------------------------------------------------------------

Var Tape::add_rowvec(Var m, Var r) {
  const Tensor& tm = value(m);
  const Tensor& tr = value(r);
  check(tm.rank() == 2, "add_rowvec: matrix operand must be rank 2");
  check(tr.size() == tm.cols(), "add_rowvec: row length mismatch");
  Tensor out = tm;
  const std::size_t n = tm.rows(), k = tm.cols();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) out.values[i * k + j] += tr.values[j];
  return push(std::move(out), {m, r},
              [m, r, n, k](Tape& t, Var, const std::vector<double>& up) {
                t.accumulate(m, up.data(), up.size());
                std::vector<double> gr(k, 0.0);
                for (std::size_t i = 0; i < n; ++i)
                  for (std::size_t j = 0; j < k; ++j) gr[j] += up[i * k + j];
                t.accumulate(r, gr.data(), gr.size());
              });
}

Var Tape::mul_rowvec(Var m, Var r) {
  const Tensor& tm = value(m);
  const Tensor& tr = value(r);
  check(tm.rank() == 2, "mul_rowvec: matrix operand must be rank 2");
  check(tr.size() == tm.cols(), "mul_rowvec: row length mismatch");
  Tensor out = tm;
  const std::size_t n = tm.rows(), k = tm.cols();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) out.values[i * k + j] *= tr.values[j];
  return push(std::move(out), {m, r},
              [m, r, n, k](Tape& t, Var, const std::vector<double>& up) {
                const auto& vm = t.value(m).values;
                const auto& vr = t.value(r).values;
                std::vector<double> gm(up.size());
                for (std::size_t i = 0; i < n; ++i)
                  for (std::size_t j = 0; j < k; ++j)
                    gm[i * k + j] = up[i * k + j] * vr[j];
                t.accumulate(m, gm.data(), gm.size());
                std::vector<double> gr(k, 0.0);
                for (std::size_t i = 0; i < n; ++i)
                  for (std::size_t j = 0; j < k; ++j)
                    gr[j] += up[i * k + j] * vm[i * k + j];
                t.accumulate(r, gr.data(), gr.size());
              });
}

Var Tape::mul_bcast_scalar(Var a, Var s) {
  const Tensor& ta = value(a);
  const Tensor& ts = value(s);
  check(ts.is_scalar(), "mul_bcast_scalar: s must be scalar");
  Tensor out = ta;
  const double sv = ts.values[0];
  for (double& v : out.values) v *= sv;
  return push(std::move(out), {a, s},
              [a, s, sv](Tape& t, Var, const std::vector<double>& up) {
                const auto& va = t.value(a).values;
                std::vector<double> g(up.size());
                for (std::size_t i = 0; i < up.size(); ++i) g[i] = up[i] * sv;
                t.accumulate(a, g.data(), g.size());
                double gs = 0.0;
                for (std::size_t i = 0; i < up.size(); ++i) gs += up[i] * va[i];
                t.accumulate(s, &gs, 1);
              });
}

// --- linear algebra ---------------------------------------------------------

Var Tape::matmul(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  check(ta.rank() == 2 && tb.rank() == 2, "matmul: operands must be rank 2");
  check(ta.cols() == tb.rows(), "matmul: inner dimension mismatch");
  Tensor out = Tensor::zeros({ta.rows(), tb.cols()});
  Eigen::Map<Matrix>(out.values.data(), ta.rows(), tb.cols()) = map2(ta) * map2(tb);
  return push(std::move(out), {a, b},
              [a, b](Tape& t, Var self, const std::vector<double>& up) {
                const Tensor& ta2 = t.value(a);
                const Tensor& tb2 = t.value(b);
                const Tensor& to = t.value(self);
                Eigen::Map<const Matrix> G(up.data(),
                                           static_cast<Eigen::Index>(to.rows()),
                                           static_cast<Eigen::Index>(to.cols()));
                if (t.requires_grad(a)) {
                  Matrix ga = G * map2(tb2).transpose();
                  t.accumulate(a, ga.data(), static_cast<std::size_t>(ga.size()));
                }
                if (t.requires_grad(b)) {
                  Matrix gb = map2(ta2).transpose() * G;
                  t.accumulate(b, gb.data(), static_cast<std::size_t>(gb.size()));
                }
              });
}

Var Tape::matmul_nt(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  check(ta.rank() == 2 && tb.rank() == 2, "matmul_nt: operands must be rank 2");
  check(ta.cols() == tb.cols(), "matmul_nt: inner dimension mismatch");
  Tensor out = Tensor::zeros({ta.rows(), tb.rows()});
  Eigen::Map<Matrix>(out.values.data(), ta.rows(), tb.rows()) =
      map2(ta) * map2(tb).transpose();
  return push(std::move(out), {a, b},
              [a, b](Tape& t, Var self, const std::vector<double>& up) {
                const Tensor& ta2 = t.value(a);
                const Tensor& tb2 = t.value(b);
                const Tensor& to = t.value(self);
                Eigen::Map<const Matrix> G(up.data(),
                                           static_cast<Eigen::Index>(to.rows()),
                                           static_cast<Eigen::Index>(to.cols()));
                if (t.requires_grad(a)) {
                  Matrix ga = G * map2(tb2);
                  t.accumulate(a, ga.data(), static_cast<std::size_t>(ga.size()));
                }
                if (t.requires_grad(b)) {
                  Matrix gb = G.transpose() * map2(ta2);
                  t.accumulate(b, gb.data(), static_cast<std::size_t>(gb.size()));
                }
              });
}

Var Tape::affine(Var x, Var w, Var b) {
  const Tensor& tx = value(x);
  const Tensor& tw = value(w);
  const Tensor& tb = value(b);
  check(tx.rank() == 2 && tw.rank() == 2, "affine: x and w must be rank 2");
  check(tx.cols() == tw.cols(), "affine: inner dimension mismatch");
  check(tb.size() == tw.rows(), "affine: bias length mismatch");
  const std::size_t n = tx.rows(), out_w = tw.rows();
  Tensor out = Tensor::zeros({n, out_w});
  {
    Eigen::Map<Matrix> O(out.values.data(), n, out_w);
    O.noalias() = map2(tx) * map2(tw).transpose();
    O.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(tb.values.data(), out_w);
  }
  return push(std::move(out), {x, w, b},
              [x, w, b, n, out_w](Tape& t, Var, const std::vector<double>& up) {
                Eigen::Map<const Matrix> G(up.data(), n, out_w);
                if (t.requires_grad(x)) {
                  Matrix gx = G * map2(t.value(w));
                  t.accumulate(x, gx.data(), static_cast<std::size_t>(gx.size()));
                }
                if (t.requires_grad(w)) {
                  Matrix gw = G.transpose() * map2(t.value(x));
                  t.accumulate(w, gw.data(), static_cast<std::size_t>(gw.size()));
                }
                if (t.requires_grad(b)) {
                  Eigen::RowVectorXd gb = G.colwise().sum();
                  t.accumulate(b, gb.data(), static_cast<std::size_t>(gb.size()));
                }
              });
}

Var Tape::transpose(Var a) {
  const Tensor& ta = value(a);
  check(ta.rank() == 2, "transpose: operand must be rank 2");
  Tensor out = Tensor::zeros({ta.cols(), ta.rows()});
  Eigen::Map<Matrix>(out.values.data(), ta.cols(), ta.rows()) = map2(ta).transpose();
  return push(std::move(out), {a},
              [a](Tape& t, Var self, const std::vector<double>& up) {
                const Tensor& to = t.value(self);
                Eigen::Map<const Matrix> G(up.data(),
                                           static_cast<Eigen::Index>(to.rows()),
                                           static_cast<Eigen::Index>(to.cols()));
                Matrix g = G.transpose();
                t.accumulate(a, g.data(), static_cast<std::size_t>(g.size()));
              });
}

Var Tape::solve_right(Var z, Var b) {
  const Tensor& tz = value(z);
  const Tensor& tb = value(b);
  check(tz.rank() == 2 && tb.rank() == 2, "solve_right: operands must be rank 2");
  check(tb.rows() == tb.cols(), "solve_right: b must be square");
  check(tz.cols() == tb.rows(), "solve_right: dimension mismatch");

  Matrix B = map2(tb);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(B.transpose());
  const double det = std::fabs(lu.determinant());
  if (!(det > 1e-300) || !std::isfinite(det))
    throw NumericError("solve_right: singular matrix");
  Matrix Y = lu.solve(map2(tz).transpose().eval()).transpose();

  Tensor out = from_matrix(Y);
  return push(std::move(out), {z, b},
              [z, b](Tape& t, Var self, const std::vector<double>& up) {
                const Tensor& to = t.value(self);
                Eigen::Map<const Matrix> G(up.data(),
                                           static_cast<Eigen::Index>(to.rows()),
                                           static_cast<Eigen::Index>(to.cols()));
                Eigen::MatrixXd B2 = map2(t.value(b));
                // dZ = G B^{-T};  dB = -Yᵀ dZ
                Eigen::PartialPivLU<Eigen::MatrixXd> lu2{B2};
                Matrix dZ = lu2.solve(G.transpose().eval()).transpose();
                if (t.requires_grad(z))
                  t.accumulate(z, dZ.data(), static_cast<std::size_t>(dZ.size()));
                if (t.requires_grad(b)) {
                  Matrix dB = -(map2(to).transpose() * dZ);
                  t.accumulate(b, dB.data(), static_cast<std::size_t>(dB.size()));
                }
              });
}

// --- reductions & shaping ----------------------------------------------------

Var Tape::sum(Var a) {
  const Tensor& ta = value(a);
  double s = 0.0;
  for (double v : ta.values) s += v;
  return push(Tensor::scalar(s), {a},
              [a](Tape& t, Var, const std::vector<double>& up) {
                const std::size_t n = t.value(a).size();
                std::vector<double> g(n, up[0]);
                t.accumulate(a, g.data(), n);
              });
}

Var Tape::mean(Var a) {
  const std::size_t n = value(a).size();
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var Tape::slice_col(Var a, std::size_t j) {
  const Tensor& ta = value(a);
  check(ta.rank() == 2, "slice_col: operand must be rank 2");
  check(j < ta.cols(), "slice_col: column out of range");
  const std::size_t n = ta.rows(), k = ta.cols();
  Tensor out = Tensor::zeros({n, 1});
  for (std::size_t i = 0; i < n; ++i) out.values[i] = ta.values[i * k + j];
  return push(std::move(out), {a},
              [a, j, n, k](Tape& t, Var, const std::vector<double>& up) {
                std::vector<double> g(n * k, 0.0);
                for (std::size_t i = 0; i < n; ++i) g[i * k + j] = up[i];
                t.accumulate(a, g.data(), g.size());
              });
}

Var Tape::concat_cols(const std::vector<Var>& cols) {
  check(!cols.empty(), "concat_cols: empty input");
  const std::size_t n = value(cols[0]).rows();
  const std::size_t k = cols.size();
  Tensor out = Tensor::zeros({n, k});
  for (std::size_t j = 0; j < k; ++j) {
    const Tensor& c = value(cols[j]);
    check(c.rank() == 2 && c.cols() == 1 && c.rows() == n,
          "concat_cols: every input must be {n,1}");
    for (std::size_t i = 0; i < n; ++i) out.values[i * k + j] = c.values[i];
  }
  return push(std::move(out), cols,
              [cols, n, k](Tape& t, Var, const std::vector<double>& up) {
                std::vector<double> g(n);
                for (std::size_t j = 0; j < k; ++j) {
                  for (std::size_t i = 0; i < n; ++i) g[i] = up[i * k + j];
                  t.accumulate(cols[j], g.data(), n);
                }
              });
}

Var Tape::reshape(Var a, std::vector<std::size_t> shape) {
  const Tensor& ta = value(a);
  check(shape_product(shape) == ta.size(), "reshape: size mismatch");
  Tensor out(std::move(shape), ta.values);
  return push(std::move(out), {a},
              [a](Tape& t, Var, const std::vector<double>& up) {
                t.accumulate(a, up.data(), up.size());
              });
}

Var Tape::custom(Tensor value, std::vector<Var> parents, Backward back) {
  return push(std::move(value), std::move(parents), std::move(back));
}

}  // namespace causalsem
