#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "causalsem/graph.hpp"

namespace causalsem {

/// Ground-truth generator families of increasing nonlinearity:
///   linear:      X = -xi + W·X
///   nonlinear1:  X = -xi + W·cos(X + 1)
///   nonlinear2:  X = -xi + 2 sin(W·(X + 1/2)) + W·(X + 1/2)
///   nonlinear3:  X = -xi + 2 sin(W·(cos(X+1) + 1/2)) + W·(cos(X+1) + 1/2)
/// cos applies elementwise to the node vector, sin elementwise to W·(·).
enum class SemKind { kLinear, kNonLinear1, kNonLinear2, kNonLinear3 };

std::string to_string(SemKind kind);
SemKind sem_kind_from_string(const std::string& s);

/// Additive gaussian node noise with scale sigma.
struct NoiseSpec {
  double sigma = 1.0;
};

/// Clamp one node to a fixed value; incoming edges are cut and the node's
/// noise is suppressed (graph mutilation semantics).
struct Intervention {
  int node = 0;
  double value = 0.0;
};

struct Provenance {
  std::string family;
  SemKind kind = SemKind::kLinear;
  std::uint64_t seed = 0;
  NoiseSpec noise;
  std::vector<Intervention> interventions;
};

struct Dataset {
  Matrix data;  // n x V
  std::vector<std::string> node_names;
  Provenance prov;

  std::size_t n() const { return static_cast<std::size_t>(data.rows()); }
  int node_count() const { return static_cast<int>(data.cols()); }
};

/// Topological evaluation of the SEM on injected noise rows. Interventions
/// mutilate the graph first; clamped nodes ignore their noise column.
Matrix ancestral_eval(const WeightedAdjacency& W, SemKind kind, const Matrix& xi,
                      const std::vector<Intervention>& interventions = {});

Dataset ancestral_sample(const WeightedAdjacency& W, SemKind kind, const NoiseSpec& noise,
                         std::size_t n, std::uint64_t seed,
                         std::vector<Intervention> interventions = {},
                         std::vector<std::string> node_names = {});

/// Exact linear solution X = (-I + W)^{-1} xi applied row-wise; the oracle
/// counterpart of ancestral_eval for SemKind::kLinear.
Matrix linear_closed_form(const WeightedAdjacency& W, const Matrix& xi);

/// Target column of an interventional sample: P(X_target | slashed X_j = x).
std::vector<double> ground_truth_conditional(const WeightedAdjacency& W, SemKind kind,
                                             const NoiseSpec& noise,
                                             const Intervention& intervention, int target,
                                             std::size_t n, std::uint64_t seed);

/// Row indices with |X_cond - value| <= half_width. Empty is a valid result.
struct SliceResult {
  std::vector<std::size_t> rows;
  std::size_t count() const { return rows.size(); }
};

SliceResult conditional_slice(const Dataset& dataset, int cond_node, double value,
                              double half_width);

/// Project one column of the dataset onto a row subset.
std::vector<double> project_column(const Dataset& dataset, const SliceResult& slice,
                                   int column);

}  // namespace causalsem
