#pragma once

#include <cstdint>
#include <vector>

#include "causalsem/graph.hpp"
#include "causalsem/mmd.hpp"
#include "causalsem/nn.hpp"
#include "causalsem/semgen.hpp"

namespace causalsem {

struct CaeTrainConfig {
  double beta = 1.0;
  double gamma = 300.0;
  std::size_t epochs = 300;
  std::size_t batch = 128;
  double lr = 1e-3;
  std::size_t enc_hidden = 16;
  std::size_t dec_hidden = 16;
  std::size_t block_hidden = 64;
  std::vector<double> kernel_scales = {0.25, 0.5, 1.0, 2.0, 4.0};
  double cmmd_lambda_factor = 0.1;  // diagonal load = factor * batch rows
  double block_logvar_init = -6.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Autoencoder with a causal latent block.
///
/// One scalar encoder (outputs per-node mean and log-variance) and one scalar
/// decoder are shared across node channels. The block holds one network per
/// node whose input is the node's parental-mask row, plus a learned per-node
/// noise log-variance. Parentless nodes bypass their network entirely: the
/// block passes their latent through and only adds noise.
struct CausalModel {
  CausalMask mask;
  Mlp encoder;                      // 1 -> enc_hidden -> 2
  Mlp decoder;                      // 1 -> dec_hidden -> 1
  std::vector<Mlp> block;           // V nets, V -> block_hidden -> 1
  std::vector<Tensor> block_logvar; // V learned scalars
  Eigen::VectorXd latent_mean;      // per-node latent marginal, set by train()
  Eigen::VectorXd latent_std;
  CaeTrainConfig config;

  int node_count() const { return mask.size(); }
};

CausalModel init_model(const CausalMask& mask, const CaeTrainConfig& config);

struct EncodeResult {
  Matrix z;
  Matrix mean;
  Matrix logvar;
};

/// Reparameterized per-node encoding; with_noise=false returns the means.
EncodeResult encode(const CausalModel& model, const Matrix& X, Rng& rng,
                    bool with_noise = true);

/// One pass of the causal block over a batch of latents.
Matrix causal_block_forward(const CausalModel& model, const Matrix& Z, bool noise_on,
                            Rng* rng);

Matrix decode(const CausalModel& model, const Matrix& Z);

/// Deterministic latent clamp value: the encoder mean at x_value.
double clamp_in_latent(const CausalModel& model, int node, double x_value);

struct CaeLossParts {
  double total = 0.0;
  double recon = 0.0;
  double mmd = 0.0;
  double cmmd = 0.0;
};

/// Tape construction of the full loss
///   beta·MMD(Z, prior) + gamma·sum_child CMMD(parent row, Z_child, Zhat_child)
///   + MSE(X, decode(Z)),
/// reporting the component values through parts.
struct CaeBound {
  BoundMlp enc;
  BoundMlp dec;
  std::vector<BoundMlp> block;
  std::vector<Var> block_logvar;
};

CaeBound bind_cae(Tape& tape, const CausalModel& model, bool as_params);

Var cae_loss_op(Tape& tape, const CausalModel& model, const CaeBound& bound,
                const Matrix& X, Rng& step_rng, double beta, double gamma,
                CaeLossParts* parts);

/// Plain (constant-bound) loss evaluation.
CaeLossParts cae_loss(const CausalModel& model, const Matrix& X, Rng step_rng,
                      double beta, double gamma);

struct CaeTrainResult {
  CausalModel model;
  std::vector<CaeLossParts> epoch_history;
};

/// Minibatch Adam over encoder, decoder and block under the combined loss.
CaeTrainResult train(const Dataset& dataset, const CausalMask& mask,
                     const CaeTrainConfig& config);

struct InterventionSample {
  Matrix z;  // latents after cycling
  Matrix x;  // decoded observables
};

/// Ancestral sampling by cycling the causal block. Latents start from the
/// clamped values (interventions), learned marginals (parentless nodes) or
/// the standard normal prior; intervened nodes are re-clamped after every
/// cycle. depth < 0 selects the mask's longest path length.
InterventionSample intervene_sample(const CausalModel& model,
                                    const std::vector<Intervention>& interventions,
                                    std::size_t n, std::uint64_t seed, int depth = -1);

}  // namespace causalsem
