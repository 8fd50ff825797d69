#include "causalsem/causalae.hpp"

#include <cmath>
#include <optional>
#include <set>

#include "causalsem/errors.hpp"

namespace causalsem {

void CaeTrainConfig::validate() const {
  if (!(beta > 0.0) || !(gamma >= beta))
    throw ConfigError("cae: loss weights must satisfy gamma >= beta > 0");
  if (batch < 2) throw ConfigError("cae: batch size must be at least 2");
  if (epochs == 0) throw ConfigError("cae: epochs must be positive");
  if (enc_hidden == 0 || dec_hidden == 0 || block_hidden == 0)
    throw ConfigError("cae: hidden widths must be positive");
  if (!(cmmd_lambda_factor > 0.0))
    throw ConfigError("cae: cmmd_lambda_factor must be positive");
  if (kernel_scales.empty()) throw ConfigError("cae: kernel scale list is empty");
}

CausalModel init_model(const CausalMask& mask, const CaeTrainConfig& config) {
  config.validate();
  const int V = mask.size();
  CausalModel m;
  m.mask = mask;
  m.config = config;
  Rng rng = Rng(config.seed).split("cae_init");
  m.encoder = Mlp::make({1, config.enc_hidden, 2}, rng.split("enc"));
  m.decoder = Mlp::make({1, config.dec_hidden, 1}, rng.split("dec"));
  for (int v = 0; v < V; ++v) {
    m.block.push_back(Mlp::make({static_cast<std::size_t>(V), config.block_hidden, 1},
                                rng.split("block").split(static_cast<std::uint64_t>(v))));
    m.block_logvar.push_back(Tensor::scalar(config.block_logvar_init));
  }
  m.latent_mean = Eigen::VectorXd::Zero(V);
  m.latent_std = Eigen::VectorXd::Ones(V);
  return m;
}

CaeBound bind_cae(Tape& tape, const CausalModel& model, bool as_params) {
  CaeBound b;
  b.enc = as_params ? bind_params(tape, model.encoder) : bind_const(tape, model.encoder);
  b.dec = as_params ? bind_params(tape, model.decoder) : bind_const(tape, model.decoder);
  for (std::size_t v = 0; v < model.block.size(); ++v) {
    b.block.push_back(as_params ? bind_params(tape, model.block[v])
                                : bind_const(tape, model.block[v]));
    b.block_logvar.push_back(as_params ? tape.param(model.block_logvar[v])
                                       : tape.constant(model.block_logvar[v]));
  }
  return b;
}

namespace {

// Per-channel shared scalar MLP over a {n,V} tensor.
Var per_channel(Tape& tape, const BoundMlp& net, Var x) {
  const Tensor& tx = tape.value(x);
  const std::size_t n = tx.rows(), V = tx.cols();
  Var out = mlp_forward(tape, net, tape.reshape(x, {n * V, 1}));
  if (tape.value(out).cols() == 1) return tape.reshape(out, {n, V});
  return out;
}

Tensor mask_row_tensor(const CausalMask& mask, int mu) {
  const int V = mask.size();
  Tensor t = Tensor::zeros({static_cast<std::size_t>(V)});
  for (int j = 0; j < V; ++j) t.values[static_cast<std::size_t>(j)] = mask.M(mu, j);
  return t;
}

// Zhat_mu for one node: parental-masked network output, or the residual
// pass-through for parentless nodes, plus optional reparameterized noise.
Var block_node_op(Tape& tape, const CausalModel& model, const CaeBound& bound, int mu,
                  Var Z, std::optional<Var> eta) {
  Var out;
  if (model.mask.parents[mu].empty()) {
    out = tape.slice_col(Z, static_cast<std::size_t>(mu));
  } else {
    Var in = tape.mul_rowvec(Z, tape.constant(mask_row_tensor(model.mask, mu)));
    out = mlp_forward(tape, bound.block[static_cast<std::size_t>(mu)], in);
  }
  if (eta.has_value()) {
    Var sd = tape.exp_(tape.scale(bound.block_logvar[static_cast<std::size_t>(mu)], 0.5));
    out = tape.add(out, tape.mul_bcast_scalar(*eta, sd));
  }
  return out;
}

Tensor normal_tensor(Rng& rng, std::size_t rows, std::size_t cols) {
  Tensor t = Tensor::zeros({rows, cols});
  for (double& v : t.values) v = rng.normal();
  return t;
}

}  // namespace

EncodeResult encode(const CausalModel& model, const Matrix& X, Rng& rng,
                    bool with_noise) {
  const std::size_t n = static_cast<std::size_t>(X.rows());
  const std::size_t V = static_cast<std::size_t>(X.cols());
  Tape tape;
  BoundMlp enc = bind_const(tape, model.encoder);
  Var Xc = tape.constant(from_matrix(X));
  Var enc_out = mlp_forward(tape, enc, tape.reshape(Xc, {n * V, 1}));
  Var mu = tape.reshape(tape.slice_col(enc_out, 0), {n, V});
  Var lv = tape.reshape(tape.slice_col(enc_out, 1), {n, V});

  EncodeResult r;
  r.mean = to_matrix(tape.value(mu));
  r.logvar = to_matrix(tape.value(lv));
  r.z = r.mean;
  if (with_noise) {
    for (Eigen::Index j = 0; j < r.z.cols(); ++j)
      for (Eigen::Index i = 0; i < r.z.rows(); ++i)
        r.z(i, j) += std::exp(0.5 * r.logvar(i, j)) * rng.normal();
  }
  return r;
}

Matrix causal_block_forward(const CausalModel& model, const Matrix& Z, bool noise_on,
                            Rng* rng) {
  const int V = model.node_count();
  if (static_cast<int>(Z.cols()) != V)
    throw DimensionError("causal_block_forward: latent column count mismatch");
  if (noise_on && rng == nullptr)
    throw Error("causal_block_forward: noise_on requires a generator");
  const std::size_t n = static_cast<std::size_t>(Z.rows());

  Tape tape;
  CaeBound bound = bind_cae(tape, model, false);
  Var Zc = tape.constant(from_matrix(Z));
  std::vector<Var> cols;
  for (int mu = 0; mu < V; ++mu) {
    std::optional<Var> eta;
    if (noise_on) eta = tape.constant(normal_tensor(*rng, n, 1));
    cols.push_back(block_node_op(tape, model, bound, mu, Zc, eta));
  }
  return to_matrix(tape.value(tape.concat_cols(cols)));
}

Matrix decode(const CausalModel& model, const Matrix& Z) {
  const std::size_t n = static_cast<std::size_t>(Z.rows());
  const std::size_t V = static_cast<std::size_t>(Z.cols());
  Tape tape;
  BoundMlp dec = bind_const(tape, model.decoder);
  Var Zc = tape.constant(from_matrix(Z));
  Var out = mlp_forward(tape, dec, tape.reshape(Zc, {n * V, 1}));
  return to_matrix(tape.value(tape.reshape(out, {n, V})));
}

double clamp_in_latent(const CausalModel& model, int node, double x_value) {
  if (node < 0 || node >= model.node_count())
    throw DimensionError("clamp_in_latent: node out of range");
  Tensor out = mlp_eval(model.encoder, Tensor::vector({x_value}));
  return out.values[0];
}

Var cae_loss_op(Tape& tape, const CausalModel& model, const CaeBound& bound,
                const Matrix& X, Rng& step_rng, double beta, double gamma,
                CaeLossParts* parts) {
  const int V = model.node_count();
  if (static_cast<int>(X.cols()) != V)
    throw DimensionError("cae_loss: batch column count does not match mask");
  const std::size_t n = static_cast<std::size_t>(X.rows());
  if (n < 2) throw Error("cae_loss: batch must hold at least 2 rows");
  const std::size_t nv = n * static_cast<std::size_t>(V);

  Var Xc = tape.constant(from_matrix(X));
  Var enc_out = mlp_forward(tape, bound.enc, tape.reshape(Xc, {nv, 1}));
  Var mu = tape.slice_col(enc_out, 0);
  Var lv = tape.slice_col(enc_out, 1);
  Var eta = tape.constant(normal_tensor(step_rng, nv, 1));
  Var zflat = tape.add(mu, tape.mul(tape.exp_(tape.scale(lv, 0.5)), eta));
  Var Z = tape.reshape(zflat, {n, static_cast<std::size_t>(V)});

  Var xhat = tape.reshape(mlp_forward(tape, bound.dec, zflat),
                          {n, static_cast<std::size_t>(V)});
  Var recon = tape.mean(tape.square(tape.sub(xhat, Xc)));

  const Matrix Zval = to_matrix(tape.value(Z));
  Var prior = tape.constant(normal_tensor(step_rng, n, static_cast<std::size_t>(V)));
  Matrix pooled(2 * Zval.rows(), Zval.cols());
  pooled << Zval, to_matrix(tape.value(prior));
  KernelSpec mmd_spec = KernelSpec::median_heuristic(pooled, model.config.kernel_scales);
  Var mmd = mmd2_op(tape, Z, prior, mmd_spec);

  std::optional<Var> cmmd;
  for (int m = 0; m < V; ++m) {
    if (model.mask.parents[m].empty()) continue;
    Var eta_m = tape.constant(normal_tensor(step_rng, n, 1));
    Var zhat = block_node_op(tape, model, bound, m, Z, eta_m);
    Var treal = tape.slice_col(Z, static_cast<std::size_t>(m));

    Matrix C = Zval;
    for (int j = 0; j < V; ++j)
      if (model.mask.M(m, j) == 0.0) C.col(j).setZero();

    CmmdConfig cfg;
    cfg.lambda_reg = model.config.cmmd_lambda_factor * static_cast<double>(n);
    cfg.cond_kernel = KernelSpec::median_heuristic(C, model.config.kernel_scales);
    cfg.target_kernel = KernelSpec::median_heuristic(to_matrix(tape.value(treal)),
                                                     model.config.kernel_scales);
    Var term = cmmd2_op(tape, C, treal, zhat, cfg);
    cmmd = cmmd.has_value() ? tape.add(*cmmd, term) : term;
  }
  if (!cmmd.has_value()) cmmd = tape.constant_scalar(0.0);

  Var total = tape.add(tape.add(recon, tape.scale(mmd, beta)), tape.scale(*cmmd, gamma));
  if (parts != nullptr) {
    parts->total = tape.value(total).values[0];
    parts->recon = tape.value(recon).values[0];
    parts->mmd = tape.value(mmd).values[0];
    parts->cmmd = tape.value(*cmmd).values[0];
  }
  return total;
}

CaeLossParts cae_loss(const CausalModel& model, const Matrix& X, Rng step_rng,
                      double beta, double gamma) {
  Tape tape;
  CaeBound bound = bind_cae(tape, model, false);
  CaeLossParts parts;
  cae_loss_op(tape, model, bound, X, step_rng, beta, gamma, &parts);
  return parts;
}

CaeTrainResult train(const Dataset& dataset, const CausalMask& mask,
                     const CaeTrainConfig& config) {
  config.validate();
  if (dataset.node_count() != mask.size())
    throw DimensionError("cae train: dataset has " + std::to_string(dataset.node_count()) +
                         " columns but mask has " + std::to_string(mask.size()) + " nodes");
  if (dataset.n() < config.batch)
    throw ConfigError("cae train: dataset smaller than one batch");

  CaeTrainResult result{init_model(mask, config), {}};
  CausalModel& model = result.model;

  std::vector<ParamRef> params;
  collect_params(model.encoder, "enc", params);
  collect_params(model.decoder, "dec", params);
  for (int v = 0; v < mask.size(); ++v) {
    collect_params(model.block[static_cast<std::size_t>(v)],
                   "block" + std::to_string(v), params);
    params.push_back({"block" + std::to_string(v) + ".logvar",
                      &model.block_logvar[static_cast<std::size_t>(v)]});
  }
  AdamState adam = AdamState::init(params, {config.lr});

  Rng shuffle_rng = Rng(config.seed).split("shuffle");
  Rng noise_rng = Rng(config.seed).split("noise");

  const std::size_t n = dataset.n();
  const std::size_t batches = n / config.batch;
  if (batches == 0) throw ConfigError("cae train: empty batch plan");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  Tape tape;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Rng er = shuffle_rng.split(epoch);
    for (std::size_t i = n - 1; i > 0; --i)
      std::swap(order[i], order[er.uniform_int(i + 1)]);

    CaeLossParts epoch_avg;
    for (std::size_t b = 0; b < batches; ++b) {
      Matrix batch(config.batch, mask.size());
      for (std::size_t r = 0; r < config.batch; ++r)
        batch.row(static_cast<Eigen::Index>(r)) =
            dataset.data.row(static_cast<Eigen::Index>(order[b * config.batch + r]));

      tape.reset();
      CaeBound bound = bind_cae(tape, model, true);
      CaeLossParts parts;
      Var total = cae_loss_op(tape, model, bound, batch, noise_rng, config.beta,
                              config.gamma, &parts);
      try {
        tape.backward(total);
      } catch (const NumericError&) {
        throw NumericError("cae train: non-finite loss at epoch " + std::to_string(epoch) +
                           " (recon=" + std::to_string(parts.recon) +
                           ", mmd=" + std::to_string(parts.mmd) +
                           ", cmmd=" + std::to_string(parts.cmmd) + ")");
      }

      pull_grads(tape, bound.enc, model.encoder);
      pull_grads(tape, bound.dec, model.decoder);
      for (int v = 0; v < mask.size(); ++v) {
        pull_grads(tape, bound.block[static_cast<std::size_t>(v)],
                   model.block[static_cast<std::size_t>(v)]);
        model.block_logvar[static_cast<std::size_t>(v)].grad =
            tape.grad_tensor(bound.block_logvar[static_cast<std::size_t>(v)]).values;
      }
      adam_step(params, adam);

      epoch_avg.total += parts.total;
      epoch_avg.recon += parts.recon;
      epoch_avg.mmd += parts.mmd;
      epoch_avg.cmmd += parts.cmmd;
    }
    const double inv = 1.0 / static_cast<double>(batches);
    epoch_avg.total *= inv;
    epoch_avg.recon *= inv;
    epoch_avg.mmd *= inv;
    epoch_avg.cmmd *= inv;
    result.epoch_history.push_back(epoch_avg);
  }

  // Latent marginals used to seed parentless nodes during intervention.
  Rng marg_rng = Rng(config.seed).split("marginal");
  EncodeResult enc = encode(model, dataset.data, marg_rng, true);
  for (int v = 0; v < mask.size(); ++v) {
    model.latent_mean(v) = enc.z.col(v).mean();
    const double var =
        (enc.z.col(v).array() - model.latent_mean(v)).square().sum() /
        std::max<double>(1.0, static_cast<double>(enc.z.rows() - 1));
    model.latent_std(v) = std::sqrt(var);
  }
  return result;
}

InterventionSample intervene_sample(const CausalModel& model,
                                    const std::vector<Intervention>& interventions,
                                    std::size_t n, std::uint64_t seed, int depth) {
  const int V = model.node_count();
  std::set<int> nodes;
  for (const Intervention& iv : interventions) {
    if (iv.node < 0 || iv.node >= V)
      throw DimensionError("intervene_sample: node out of range");
    if (!nodes.insert(iv.node).second)
      throw Error("intervene_sample: duplicate intervention node");
  }
  if (depth < 0) depth = std::max(model.mask.longest_path, 1);
  if (depth < 1) throw Error("intervene_sample: depth must be at least 1");

  Rng rng = Rng(seed).split("intervene");
  Matrix Z(n, V);
  // Initial draws happen for every node in index order so that runs with and
  // without a given intervention stay aligned on all other columns.
  for (int v = 0; v < V; ++v) {
    const bool parentless = model.mask.parents[v].empty();
    for (std::size_t i = 0; i < n; ++i) {
      const double u = rng.normal();
      Z(static_cast<Eigen::Index>(i), v) =
          parentless ? model.latent_mean(v) + model.latent_std(v) * u : u;
    }
  }
  std::vector<std::pair<int, double>> clamps;
  for (const Intervention& iv : interventions)
    clamps.emplace_back(iv.node, clamp_in_latent(model, iv.node, iv.value));
  auto apply_clamps = [&]() {
    for (const auto& [node, z] : clamps) Z.col(node).setConstant(z);
  };
  apply_clamps();

  for (int d = 0; d < depth; ++d) {
    Z = causal_block_forward(model, Z, true, &rng);
    apply_clamps();
  }

  InterventionSample out;
  out.z = Z;
  out.x = decode(model, Z);
  return out;
}

}  // namespace causalsem
