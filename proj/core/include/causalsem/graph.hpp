#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "causalsem/tensor.hpp"

namespace causalsem {

/// Weighted adjacency over V nodes. Entry W(i,j) != 0 encodes the edge
/// j -> i with that weight: ROW = child, COLUMN = parent, so that a linear
/// structural model reads x = W x + noise terms. Note this is the transpose
/// of the convention used in parts of the structure-learning literature.
struct WeightedAdjacency {
  Matrix W;

  explicit WeightedAdjacency(int V) : W(Matrix::Zero(V, V)) {}
  explicit WeightedAdjacency(Matrix W_);

  int size() const { return static_cast<int>(W.rows()); }
};

/// Binary mask plus derived topology metadata. Always acyclic.
struct CausalMask {
  Matrix M;  // entries in {0,1}, M(i,j)=1 meaning j -> i
  std::vector<int> topo;
  std::vector<std::vector<int>> parents;
  std::vector<std::vector<int>> children;
  int longest_path = 0;

  int size() const { return static_cast<int>(M.rows()); }
};

enum class FamilyKind { kGraphA, kGraphB, kErdosRenyi };

/// Ground-truth graph generators.
///
/// GraphA(n): spine X2 -> X1 -> X0 with a confounder chain
/// S1 -> S2 -> ... -> Sn plus S1 -> X2 and Sn -> X0. Intervening on the
/// spine cuts a fixed number of edges regardless of n.
///
/// GraphB(n): spine X2 -> X1 -> X0 with independent confounders, each
/// Si -> X2 and Si -> X0. Intervening on X2 cuts n edges.
///
/// Node indexing for both: X0=0, X1=1, X2=2, S1..Sn = 3..n+2.
struct GraphFamily {
  FamilyKind kind = FamilyKind::kErdosRenyi;
  int confounders = 0;   // GraphA / GraphB
  int nodes = 0;         // ErdosRenyi
  double edge_prob = 0;  // ErdosRenyi
  double weight_low = 0.5;
  double weight_high = 2.0;
  std::uint64_t seed = 0;

  static GraphFamily graph_a(int n_confounders, std::uint64_t seed);
  static GraphFamily graph_b(int n_confounders, std::uint64_t seed);
  static GraphFamily erdos_renyi(int nodes, double edge_prob, std::uint64_t seed);

  int node_count() const;
  std::vector<std::string> node_names() const;
  void validate() const;
};

/// Smooth binarization |W|/(|W|+eps) rounded at 0.5, then topology metadata.
/// Throws AcyclicityError (with a witness cycle) if the result is cyclic.
CausalMask mask_from_weights(const WeightedAdjacency& W, double eps = 1e-8);

/// Metadata for an already-binary matrix (entries rounded at 0.5).
CausalMask mask_from_binary(const Matrix& M01);

/// M · diag(x): row mu holds x restricted to mu's parents, zero elsewhere.
Matrix parental_mask(const CausalMask& mask, const Eigen::VectorXd& x);

struct AcyclicityResult {
  double h = 0.0;
  Matrix grad;  // d h / d W = (e^{W∘W})ᵀ ∘ 2W
};

/// h(W) = tr e^{W∘W} − V. Zero iff the binarized graph is acyclic.
AcyclicityResult acyclicity_h(const Matrix& W);
AcyclicityResult acyclicity_h(const WeightedAdjacency& W);

/// Differentiable acyclicity penalty for a V×V tape tensor.
Var acyclicity_op(Tape& tape, Var W);

/// e^A by scaling-and-squaring with a truncated Taylor series.
Matrix matrix_exp(const Matrix& A);

/// Kahn's algorithm, lowest index first among ready nodes.
/// Throws AcyclicityError carrying one witness cycle.
std::vector<int> topological_order(const Matrix& M01);

/// Remove all in-going edges of `node` (row zeroed).
WeightedAdjacency mutilate(const WeightedAdjacency& W, int node);
CausalMask mutilate(const CausalMask& mask, int node);

WeightedAdjacency gen_graph(const GraphFamily& family);

/// Structural Hamming distance; a reversed edge counts one.
int shd(const CausalMask& pred, const CausalMask& truth);
int shd(const Matrix& pred, const Matrix& truth);

}  // namespace causalsem
