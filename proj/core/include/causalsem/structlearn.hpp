#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "causalsem/graph.hpp"
#include "causalsem/nn.hpp"
#include "causalsem/semgen.hpp"

namespace causalsem {

/// Encoder/decoder variants for continuous structure learning:
///   NoTears:  Z = X,         Xhat = D(W·Z), MSE
///   Gnn:      Z = (-I+W)·E(X), Xhat = D((-I+W)^{-1}·Z), negative ELBO
///   Gae:      Z = E(X),      Xhat = D(W·Z), MSE
/// E and D are shared scalar MLPs applied to every node channel.
enum class StructAlgo { kNoTears, kGnn, kGae };

std::string to_string(StructAlgo algo);
StructAlgo struct_algo_from_string(const std::string& s);

struct StructConfig {
  StructAlgo algo = StructAlgo::kGae;
  std::size_t hidden = 16;
  std::size_t latent_dim = 1;  // only 1 is supported (scalar-node setting)
  double lr = 1e-2;
  std::size_t inner_steps = 300;
  std::size_t inner_batch = 512;  // rows per inner step; >= n means full batch
  double growth = 10.0;
  double eta = 0.25;
  double h_tol = 1e-8;
  std::size_t max_outer = 20;
  double threshold = 0.3;
  std::size_t min_samples = 100;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Augmented-Lagrangian multiplier state.
struct AugLagState {
  double lambda = 0.0;
  double c = 1.0;
  double h_prev = std::numeric_limits<double>::infinity();
  std::size_t outer_iter = 0;
};

/// recon + lambda·|h(W)| + (c/2)·|h(W)|^2
double aug_lagrangian(double recon, const Matrix& W, const AugLagState& state);

/// lambda += c·h_new; c grows when h stalls (h_new > eta·h_prev).
/// Throws NumericError when c would overflow its 1e16 budget.
void dual_update(AugLagState& state, double h_new, double growth = 10.0,
                 double eta = 0.25);

/// Parameters of one learner instance.
struct StructModel {
  StructAlgo algo = StructAlgo::kGae;
  int V = 0;
  Tensor W;  // V×V, diagonal pinned to zero through an off-diagonal mask
  Mlp enc;
  Mlp dec;
};

StructModel init_struct_model(StructAlgo algo, int V, const StructConfig& config);

/// Reconstruction loss on the tape; used by training and by tests.
struct BoundStruct {
  Var W;      // raw parameter
  Var W_eff;  // diagonal-masked view used by every consumer
  BoundMlp enc;
  BoundMlp dec;
};

BoundStruct bind_struct(Tape& tape, const StructModel& model, bool as_params);

/// Builds the algo's reconstruction term for one batch. For Gnn the noise
/// tensor must hold batch-shaped standard normal draws; other algos ignore it.
Var struct_recon_op(Tape& tape, const StructModel& model, const BoundStruct& bound,
                    const Matrix& batch, const Matrix* gnn_noise);

/// Plain evaluation of the reconstruction loss (constant binding).
double struct_recon_loss(const StructModel& model, const Matrix& batch,
                         const Matrix* gnn_noise = nullptr);

struct OuterRecord {
  std::size_t outer_iter = 0;
  double h = 0.0;
  double recon = 0.0;
  double lambda = 0.0;
  double c = 0.0;
};

struct StructResult {
  WeightedAdjacency W_hat;
  std::vector<OuterRecord> history;
  bool converged = false;  // h fell below tolerance
  bool centered = true;    // columns were mean-centered before learning
};

/// Full augmented-Lagrangian loop. Columns are mean-centered internally
/// (variances are kept: they carry the direction information for
/// equal-noise linear models); weights refer to the centered variables.
StructResult learn_structure(const Dataset& dataset, const StructConfig& config);

/// Thresholded, binarized, self-healing mask extraction: while a cycle
/// remains, the weakest edge on a witness cycle is removed and recorded.
struct ThresholdResult {
  CausalMask mask;
  std::vector<std::pair<int, int>> removed_edges;  // (parent, child)
};

ThresholdResult threshold_weights(const WeightedAdjacency& W, double tau);

}  // namespace causalsem
