#include "causalsem/semgen.hpp"

#include <cmath>
#include <set>

#include "causalsem/errors.hpp"
#include "causalsem/rng.hpp"

namespace causalsem {

std::string to_string(SemKind kind) {
  switch (kind) {
    case SemKind::kLinear: return "linear";
    case SemKind::kNonLinear1: return "nonlinear1";
    case SemKind::kNonLinear2: return "nonlinear2";
    case SemKind::kNonLinear3: return "nonlinear3";
  }
  throw Error("sem kind: unknown enum value");
}

SemKind sem_kind_from_string(const std::string& s) {
  if (s == "linear") return SemKind::kLinear;
  if (s == "nonlinear1") return SemKind::kNonLinear1;
  if (s == "nonlinear2") return SemKind::kNonLinear2;
  if (s == "nonlinear3") return SemKind::kNonLinear3;
  throw ConfigError("sem kind: unknown value '" + s + "'");
}

namespace {

void check_interventions(const std::vector<Intervention>& interventions, int V) {
  std::set<int> seen;
  for (const Intervention& iv : interventions) {
    if (iv.node < 0 || iv.node >= V)
      throw DimensionError("intervention: node index out of range");
    if (!seen.insert(iv.node).second)
      throw Error("intervention: duplicate node " + std::to_string(iv.node));
  }
}

}  // namespace

Matrix ancestral_eval(const WeightedAdjacency& W, SemKind kind, const Matrix& xi,
                      const std::vector<Intervention>& interventions) {
  const int V = W.size();
  if (xi.cols() != V) throw DimensionError("ancestral_eval: noise column count mismatch");
  check_interventions(interventions, V);

  WeightedAdjacency Wm = W;
  for (const Intervention& iv : interventions) Wm = mutilate(Wm, iv.node);
  const CausalMask mask = mask_from_weights(Wm);

  const Eigen::Index n = xi.rows();
  Matrix X = Matrix::Zero(n, V);
  std::vector<bool> clamped(V, false);
  for (const Intervention& iv : interventions) {
    clamped[iv.node] = true;
    X.col(iv.node).setConstant(iv.value);
  }

  for (int node : mask.topo) {
    if (clamped[node]) continue;
    const auto w = Wm.W.row(node);
    Eigen::VectorXd acc;
    switch (kind) {
      case SemKind::kLinear:
        acc = X * w.transpose();
        break;
      case SemKind::kNonLinear1:
        acc = (X.array() + 1.0).cos().matrix() * w.transpose();
        break;
      case SemKind::kNonLinear2: {
        Eigen::VectorXd u = (X.array() + 0.5).matrix() * w.transpose();
        acc = 2.0 * u.array().sin() + u.array();
        break;
      }
      case SemKind::kNonLinear3: {
        Eigen::VectorXd u = ((X.array() + 1.0).cos() + 0.5).matrix() * w.transpose();
        acc = 2.0 * u.array().sin() + u.array();
        break;
      }
    }
    X.col(node) = acc - xi.col(node);
  }
  return X;
}

Dataset ancestral_sample(const WeightedAdjacency& W, SemKind kind, const NoiseSpec& noise,
                         std::size_t n, std::uint64_t seed,
                         std::vector<Intervention> interventions,
                         std::vector<std::string> node_names) {
  const int V = W.size();
  if (noise.sigma <= 0.0) throw ConfigError("noise: sigma must be positive");

  // The full noise matrix is drawn regardless of interventions so that the
  // same seed gives identical noise per (sample, node) pair.
  Rng rng = Rng(seed).split("xi");
  Matrix xi(n, V);
  for (int v = 0; v < V; ++v)
    for (std::size_t i = 0; i < n; ++i)
      xi(static_cast<Eigen::Index>(i), v) = noise.sigma * rng.normal();

  Dataset ds;
  ds.data = ancestral_eval(W, kind, xi, interventions);
  if (node_names.empty())
    for (int v = 0; v < V; ++v) node_names.push_back("X" + std::to_string(v));
  if (static_cast<int>(node_names.size()) != V)
    throw DimensionError("ancestral_sample: node name count mismatch");
  ds.node_names = std::move(node_names);
  ds.prov.kind = kind;
  ds.prov.seed = seed;
  ds.prov.noise = noise;
  ds.prov.interventions = std::move(interventions);
  return ds;
}

Matrix linear_closed_form(const WeightedAdjacency& W, const Matrix& xi) {
  const int V = W.size();
  if (xi.cols() != V) throw DimensionError("linear_closed_form: column count mismatch");
  Eigen::MatrixXd A = W.W;
  A.diagonal().array() -= 1.0;  // -I + W
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
  if (!(std::fabs(lu.determinant()) > 1e-300))
    throw NumericError("linear_closed_form: singular (-I + W)");
  // X row-wise: x = A^{-1} xi  =>  X = xi A^{-T}
  return lu.solve(Matrix(xi).transpose().eval()).transpose();
}

std::vector<double> ground_truth_conditional(const WeightedAdjacency& W, SemKind kind,
                                             const NoiseSpec& noise,
                                             const Intervention& intervention, int target,
                                             std::size_t n, std::uint64_t seed) {
  if (target < 0 || target >= W.size())
    throw DimensionError("ground_truth_conditional: target out of range");
  Dataset ds = ancestral_sample(W, kind, noise, n, seed, {intervention});
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = ds.data(static_cast<Eigen::Index>(i), target);
  return out;
}

SliceResult conditional_slice(const Dataset& dataset, int cond_node, double value,
                              double half_width) {
  if (cond_node < 0 || cond_node >= dataset.node_count())
    throw DimensionError("conditional_slice: node out of range");
  if (!(half_width > 0.0)) throw Error("conditional_slice: half_width must be positive");
  SliceResult result;
  for (std::size_t i = 0; i < dataset.n(); ++i) {
    const double x = dataset.data(static_cast<Eigen::Index>(i), cond_node);
    if (std::fabs(x - value) <= half_width) result.rows.push_back(i);
  }
  return result;
}

std::vector<double> project_column(const Dataset& dataset, const SliceResult& slice,
                                   int column) {
  if (column < 0 || column >= dataset.node_count())
    throw DimensionError("project_column: column out of range");
  std::vector<double> out;
  out.reserve(slice.rows.size());
  for (std::size_t r : slice.rows)
    out.push_back(dataset.data(static_cast<Eigen::Index>(r), column));
  return out;
}

}  // namespace causalsem
