#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "causalsem/errors.hpp"

namespace causalsem {

/// Row-major dense matrix; the plain (non-differentiated) numeric type used
/// across the library for datasets, adjacency matrices and kernel matrices.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense 64-bit array with an optional gradient buffer of the same length.
/// Rank 1 and rank 2 cover everything in this library; a scalar is shape {1}.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> values;
  std::optional<std::vector<double>> grad;

  Tensor() = default;
  Tensor(std::vector<std::size_t> shape_, std::vector<double> values_);

  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor full(std::vector<std::size_t> shape, double v);
  static Tensor scalar(double v);
  static Tensor vector(std::vector<double> v);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> v);

  std::size_t size() const { return values.size(); }
  std::size_t rank() const { return shape.size(); }
  bool is_scalar() const { return size() == 1; }

  std::size_t rows() const;
  std::size_t cols() const;
  double& at(std::size_t r, std::size_t c);
  double at(std::size_t r, std::size_t c) const;

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  void ensure_grad();
  void zero_grad();
};

Matrix to_matrix(const Tensor& t);
Tensor from_matrix(const Matrix& m);

/// Handle to a node on a Tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Reverse-mode autodiff tape.
///
/// A Tape records one forward computation as a flat list of nodes. Calling
/// backward(root) on a scalar root walks the list once in reverse and
/// accumulates gradients into per-node buffers. Tapes are single-use per
/// forward pass; reset() reclaims storage between training steps.
class Tape {
 public:
  using Backward = std::function<void(Tape&, Var self, const std::vector<double>& upstream)>;

  /// Leaf that participates in gradients (model parameters).
  Var param(const Tensor& t);
  /// Leaf treated as data: no gradient is ever accumulated into it.
  Var constant(const Tensor& t);
  Var constant(Tensor&& t);
  Var constant_scalar(double v) { return constant(Tensor::scalar(v)); }

  const Tensor& value(Var v) const { return node(v.id).value; }
  bool requires_grad(Var v) const { return node(v.id).requires_grad; }

  /// Gradient buffer of v after backward(); zero-length if untouched.
  const std::vector<double>& grad(Var v) const;
  Tensor grad_tensor(Var v) const;

  /// Reverse sweep from a scalar root. Throws Error if root is not scalar,
  /// NumericError if the root value is not finite.
  void backward(Var root);

  std::size_t size() const { return nodes_.size(); }
  void reset();

  // --- elementwise ---
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double c);
  Var add_scalar(Var a, double c);
  Var neg(Var a) { return scale(a, -1.0); }
  Var relu(Var a);
  Var tanh_(Var a);
  Var sin_(Var a);
  Var cos_(Var a);
  Var exp_(Var a);
  Var log_(Var a);
  Var abs_(Var a);
  Var square(Var a);
  Var sqrt_(Var a);
  Var div(Var a, Var b);

  // --- broadcasts ---
  /// m: {n,k} plus row vector r: {k} added to every row.
  Var add_rowvec(Var m, Var r);
  /// m: {n,k} times row vector r: {k}, elementwise per row.
  Var mul_rowvec(Var m, Var r);
  /// a times scalar s (shape {1}); gradient flows to both.
  Var mul_bcast_scalar(Var a, Var s);

  // --- linear algebra ---
  Var matmul(Var a, Var b);
  /// a · bᵀ  (a: {n,k}, b: {m,k} -> {n,m})
  Var matmul_nt(Var a, Var b);
  /// Fused dense layer x · wᵀ + b (x: {n,in}, w: {out,in}, b: {out}).
  Var affine(Var x, Var w, Var b);
  Var transpose(Var a);
  /// z · b⁻¹ for square b; throws NumericError when b is singular.
  Var solve_right(Var z, Var b);

  // --- reductions & shaping ---
  Var sum(Var a);
  Var mean(Var a);
  Var slice_col(Var a, std::size_t j);
  Var concat_cols(const std::vector<Var>& cols);
  Var reshape(Var a, std::vector<std::size_t> shape);

  /// Extension point for ops with hand-written backward passes.
  Var custom(Tensor value, std::vector<Var> parents, Backward back);
  /// Accumulate g (length n) into v's gradient buffer; no-op when v does not
  /// require gradients.
  void accumulate(Var v, const double* g, std::size_t n);

 private:
  struct Node {
    Tensor value;
    std::vector<Var> parents;
    Backward back;
    bool requires_grad = false;
  };

  const Node& node(int id) const;
  Node& node(int id);
  bool any_requires(const std::vector<Var>& parents) const;
  Var push(Tensor value, std::vector<Var> parents, Backward back);
  Var unary(Var a, double (*f)(double), double (*df)(double x, double y));

  std::vector<Node> nodes_;
  std::vector<std::vector<double>> grads_;
};

}  // namespace causalsem
