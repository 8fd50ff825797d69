#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "causalsem/causalae.hpp"
#include "causalsem/semgen.hpp"

namespace causalsem {

/// Gaussian KDE with the normal-reference bandwidth 1.06 sigma n^{-1/5}.
struct KdeModel {
  std::vector<double> samples;
  double bandwidth = 0.0;
};

KdeModel kde_fit(const std::vector<double>& samples);

/// Named alias: model outputs are smoothed before any KL comparison.
inline KdeModel smooth_predictions(const std::vector<double>& samples) {
  return kde_fit(samples);
}

std::vector<double> kde_pdf(const KdeModel& model, const std::vector<double>& grid);

struct KlConfig {
  std::size_t grid_points = 512;
  double pad_bandwidths = 3.0;
  double density_floor = 1e-12;
};

/// KL(p || q) between two sample sets: KDE both, evaluate on a shared grid
/// spanning the union range padded by pad_bandwidths times the larger
/// bandwidth, floor densities, renormalize p on the grid, integrate.
double kl_divergence(const std::vector<double>& p_samples,
                     const std::vector<double>& q_samples, const KlConfig& config = {});

struct TruthSpec {
  WeightedAdjacency W;
  SemKind kind = SemKind::kLinear;
  NoiseSpec noise;
};

struct SigmaRow {
  double sigma = 0.0;
  double clamp_value = 0.0;
  std::optional<double> kl_model_truth;
  std::optional<double> kl_baseline_truth;
  std::size_t model_count = 0;
  std::size_t truth_count = 0;
  std::size_t baseline_count = 0;
  bool baseline_starved = false;
};

struct SigmaContourReport {
  int intervention_node = 0;
  int target_node = 0;
  std::string intervention_name;
  std::string target_name;
  std::uint64_t seed = 0;
  std::size_t samples_per_point = 0;
  std::vector<SigmaRow> rows;
};

struct EvalConfig {
  std::vector<double> sigmas = {0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5};
  std::size_t samples_per_point = 8000;
  double slice_half_width_factor = 0.1;  // times the observational std
  std::size_t starve_threshold = 50;
  KlConfig kl;
};

/// KL-vs-sigma protocol for one (intervention j, target i) pair.
///
/// For every s: clamp x_j at mu_j + s*sigma_j (moments from a fresh
/// observational sample), sample the mutilated ground truth and the model,
/// slice the observational data as the unintervened baseline, and report
/// KL(model||truth) plus KL(baseline||truth); a starved baseline slice is
/// flagged instead of extrapolated.
SigmaContourReport sigma_contours(const CausalModel& model, const TruthSpec& truth,
                                  int intervention_node, int target_node,
                                  const EvalConfig& config, std::uint64_t seed,
                                  const std::vector<std::string>& node_names = {});

}  // namespace causalsem
