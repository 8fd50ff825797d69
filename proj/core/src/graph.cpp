#include "causalsem/graph.hpp"

#include <algorithm>
#include <cmath>

#include "causalsem/errors.hpp"
#include "causalsem/rng.hpp"

namespace causalsem {

WeightedAdjacency::WeightedAdjacency(Matrix W_) : W(std::move(W_)) {
  if (W.rows() != W.cols())
    throw DimensionError("adjacency: matrix must be square");
  for (Eigen::Index i = 0; i < W.rows(); ++i) {
    if (W(i, i) != 0.0)
      throw Error("adjacency: nonzero diagonal entry at node " + std::to_string(i));
    for (Eigen::Index j = 0; j < W.cols(); ++j)
      if (!std::isfinite(W(i, j)))
        throw NumericError("adjacency: non-finite weight");
  }
}

GraphFamily GraphFamily::graph_a(int n_confounders, std::uint64_t seed) {
  GraphFamily f;
  f.kind = FamilyKind::kGraphA;
  f.confounders = n_confounders;
  f.seed = seed;
  return f;
}

GraphFamily GraphFamily::graph_b(int n_confounders, std::uint64_t seed) {
  GraphFamily f;
  f.kind = FamilyKind::kGraphB;
  f.confounders = n_confounders;
  f.seed = seed;
  return f;
}

GraphFamily GraphFamily::erdos_renyi(int nodes, double edge_prob, std::uint64_t seed) {
  GraphFamily f;
  f.kind = FamilyKind::kErdosRenyi;
  f.nodes = nodes;
  f.edge_prob = edge_prob;
  f.seed = seed;
  return f;
}

int GraphFamily::node_count() const {
  return kind == FamilyKind::kErdosRenyi ? nodes : confounders + 3;
}

std::vector<std::string> GraphFamily::node_names() const {
  std::vector<std::string> names;
  if (kind == FamilyKind::kErdosRenyi) {
    for (int i = 0; i < nodes; ++i) names.push_back("X" + std::to_string(i));
  } else {
    names = {"X0", "X1", "X2"};
    for (int i = 1; i <= confounders; ++i) names.push_back("S" + std::to_string(i));
  }
  return names;
}

void GraphFamily::validate() const {
  if (kind == FamilyKind::kErdosRenyi) {
    if (nodes <= 0) throw ConfigError("graph family: node count must be positive");
    if (edge_prob < 0.0 || edge_prob > 1.0)
      throw ConfigError("graph family: edge probability must lie in [0,1]");
  } else if (confounders < 0) {
    throw ConfigError("graph family: confounder count must be non-negative");
  }
  if (!(0.0 < weight_low && weight_low <= weight_high))
    throw ConfigError("graph family: need 0 < weight_low <= weight_high");
}

std::vector<int> topological_order(const Matrix& M01) {
  const int V = static_cast<int>(M01.rows());
  std::vector<int> indeg(V, 0);
  for (int i = 0; i < V; ++i)
    for (int j = 0; j < V; ++j)
      if (M01(i, j) >= 0.5) ++indeg[i];

  std::vector<int> order;
  std::vector<bool> placed(V, false);
  for (int step = 0; step < V; ++step) {
    int pick = -1;
    for (int i = 0; i < V; ++i) {
      if (!placed[i] && indeg[i] == 0) {
        pick = i;
        break;
      }
    }
    if (pick < 0) break;
    placed[pick] = true;
    order.push_back(pick);
    for (int i = 0; i < V; ++i)
      if (!placed[i] && M01(i, pick) >= 0.5) --indeg[i];
  }

  if (static_cast<int>(order.size()) == V) return order;

  // Walk parent links inside the leftover set until a node repeats.
  std::vector<int> seen_at(V, -1);
  std::vector<int> walk;
  int u = 0;
  while (placed[u]) ++u;
  while (seen_at[u] < 0) {
    seen_at[u] = static_cast<int>(walk.size());
    walk.push_back(u);
    int next = -1;
    for (int j = 0; j < V; ++j) {
      if (!placed[j] && M01(u, j) >= 0.5) {
        next = j;
        break;
      }
    }
    u = next;
  }
  std::vector<int> cycle(walk.begin() + seen_at[u], walk.end());
  std::string msg = "cycle detected:";
  for (int n : cycle) msg += " " + std::to_string(n);
  throw AcyclicityError(msg, cycle);
}

namespace {

CausalMask build_mask(Matrix M01) {
  CausalMask mask;
  const int V = static_cast<int>(M01.rows());
  for (int i = 0; i < V; ++i)
    for (int j = 0; j < V; ++j) M01(i, j) = M01(i, j) >= 0.5 ? 1.0 : 0.0;
  mask.topo = topological_order(M01);
  mask.M = std::move(M01);
  mask.parents.assign(V, {});
  mask.children.assign(V, {});
  for (int i = 0; i < V; ++i)
    for (int j = 0; j < V; ++j)
      if (mask.M(i, j) == 1.0) {
        mask.parents[i].push_back(j);
        mask.children[j].push_back(i);
      }
  std::vector<int> depth(V, 0);
  int d = 0;
  for (int node : mask.topo) {
    for (int p : mask.parents[node])
      depth[node] = std::max(depth[node], depth[p] + 1);
    d = std::max(d, depth[node]);
  }
  mask.longest_path = d;
  return mask;
}

}  // namespace

CausalMask mask_from_weights(const WeightedAdjacency& W, double eps) {
  const int V = W.size();
  Matrix M(V, V);
  for (int i = 0; i < V; ++i)
    for (int j = 0; j < V; ++j) {
      const double a = std::fabs(W.W(i, j));
      M(i, j) = a / (a + eps);
    }
  return build_mask(std::move(M));
}

CausalMask mask_from_binary(const Matrix& M01) {
  if (M01.rows() != M01.cols()) throw DimensionError("mask: matrix must be square");
  return build_mask(M01);
}

Matrix parental_mask(const CausalMask& mask, const Eigen::VectorXd& x) {
  const int V = mask.size();
  if (x.size() != V)
    throw DimensionError("parental_mask: vector length " + std::to_string(x.size()) +
                         " does not match node count " + std::to_string(V));
  Matrix out(V, V);
  for (int i = 0; i < V; ++i)
    for (int j = 0; j < V; ++j) out(i, j) = mask.M(i, j) * x(j);
  return out;
}

Matrix matrix_exp(const Matrix& A) {
  if (A.rows() != A.cols()) throw DimensionError("matrix_exp: matrix must be square");
  const int V = static_cast<int>(A.rows());
  const double norm = A.cwiseAbs().rowwise().sum().maxCoeff();
  int squarings = 0;
  if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));

  Matrix T = A / std::pow(2.0, squarings);
  Matrix X = Matrix::Identity(V, V);
  Matrix term = Matrix::Identity(V, V);
  for (int k = 1; k <= 60; ++k) {
    term = (term * T / static_cast<double>(k)).eval();
    X += term;
    if (term.cwiseAbs().maxCoeff() < 1e-19 * std::max(1.0, X.cwiseAbs().maxCoeff()))
      break;
  }
  for (int s = 0; s < squarings; ++s) X = (X * X).eval();
  return X;
}

AcyclicityResult acyclicity_h(const Matrix& W) {
  if (W.rows() != W.cols()) throw DimensionError("acyclicity: matrix must be square");
  const int V = static_cast<int>(W.rows());
  Matrix E = matrix_exp(W.cwiseProduct(W));
  AcyclicityResult r;
  r.h = E.trace() - static_cast<double>(V);
  r.grad = E.transpose().cwiseProduct(2.0 * W);
  return r;
}

AcyclicityResult acyclicity_h(const WeightedAdjacency& W) { return acyclicity_h(W.W); }

Var acyclicity_op(Tape& tape, Var W) {
  const Tensor& tw = tape.value(W);
  if (tw.rank() != 2 || tw.rows() != tw.cols())
    throw DimensionError("acyclicity_op: operand must be square");
  AcyclicityResult r = acyclicity_h(to_matrix(tw));
  Matrix grad = r.grad;
  return tape.custom(Tensor::scalar(r.h), {W},
                     [W, grad](Tape& t, Var, const std::vector<double>& up) {
                       Matrix g = up[0] * grad;
                       t.accumulate(W, g.data(), static_cast<std::size_t>(g.size()));
                     });
}

WeightedAdjacency mutilate(const WeightedAdjacency& W, int node) {
  if (node < 0 || node >= W.size())
    throw DimensionError("mutilate: node index out of range");
  WeightedAdjacency out = W;
  out.W.row(node).setZero();
  return out;
}

CausalMask mutilate(const CausalMask& mask, int node) {
  if (node < 0 || node >= mask.size())
    throw DimensionError("mutilate: node index out of range");
  Matrix M = mask.M;
  M.row(node).setZero();
  return mask_from_binary(M);
}

WeightedAdjacency gen_graph(const GraphFamily& family) {
  family.validate();
  Rng rng = Rng(family.seed).split("gen_graph");
  auto draw_weight = [&]() {
    const double mag = rng.uniform(family.weight_low, family.weight_high);
    return rng.uniform() < 0.5 ? -mag : mag;
  };

  const int V = family.node_count();
  WeightedAdjacency adj(V);

  if (family.kind == FamilyKind::kErdosRenyi) {
    // Random topological order, then independent edges parent -> child.
    std::vector<int> perm(V);
    for (int i = 0; i < V; ++i) perm[i] = i;
    for (int i = V - 1; i > 0; --i)
      std::swap(perm[i], perm[rng.uniform_int(static_cast<std::uint64_t>(i + 1))]);
    for (int i = 0; i < V; ++i)
      for (int j = i + 1; j < V; ++j)
        if (rng.uniform() < family.edge_prob)
          adj.W(perm[j], perm[i]) = draw_weight();
    return adj;
  }

  const int n = family.confounders;
  auto s = [](int k) { return 2 + k; };  // S1=3, ..., Sn=n+2
  // Spine X2 -> X1 -> X0.
  adj.W(1, 2) = draw_weight();
  adj.W(0, 1) = draw_weight();
  if (n == 0) return adj;

  if (family.kind == FamilyKind::kGraphA) {
    adj.W(2, s(1)) = draw_weight();           // S1 -> X2
    adj.W(0, s(n)) = draw_weight();           // Sn -> X0
    for (int k = 1; k < n; ++k)
      adj.W(s(k + 1), s(k)) = draw_weight();  // Sk -> Sk+1
  } else {
    for (int k = 1; k <= n; ++k) {
      adj.W(2, s(k)) = draw_weight();         // Sk -> X2
      adj.W(0, s(k)) = draw_weight();         // Sk -> X0
    }
  }
  return adj;
}

namespace {

// Pair state: 0 none, 1 forward only, 2 backward only, 3 both.
int pair_state(const Matrix& M, int i, int j) {
  const bool fwd = M(j, i) >= 0.5;  // i -> j
  const bool bwd = M(i, j) >= 0.5;  // j -> i
  return (fwd ? 1 : 0) | (bwd ? 2 : 0);
}

}  // namespace

int shd(const Matrix& pred, const Matrix& truth) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols())
    throw DimensionError("shd: size mismatch");
  const int V = static_cast<int>(pred.rows());
  int dist = 0;
  for (int i = 0; i < V; ++i)
    for (int j = i + 1; j < V; ++j) {
      const int a = pair_state(pred, i, j);
      const int b = pair_state(truth, i, j);
      if (a == b) continue;
      // none <-> both needs an insertion and a deletion; everything else is
      // one insertion, deletion or reversal.
      dist += ((a == 0 && b == 3) || (a == 3 && b == 0)) ? 2 : 1;
    }
  return dist;
}

int shd(const CausalMask& pred, const CausalMask& truth) { return shd(pred.M, truth.M); }

}  // namespace causalsem
