#include "causalsem/structlearn.hpp"

#include <cmath>

#include "causalsem/errors.hpp"
#include "causalsem/rng.hpp"

namespace causalsem {

std::string to_string(StructAlgo algo) {
  switch (algo) {
    case StructAlgo::kNoTears: return "notears";
    case StructAlgo::kGnn: return "gnn";
    case StructAlgo::kGae: return "gae";
  }
  throw Error("struct algo: unknown enum value");
}

StructAlgo struct_algo_from_string(const std::string& s) {
  if (s == "notears") return StructAlgo::kNoTears;
  if (s == "gnn") return StructAlgo::kGnn;
  if (s == "gae") return StructAlgo::kGae;
  throw ConfigError("struct algo: unknown value '" + s + "'");
}

void StructConfig::validate() const {
  if (hidden == 0) throw ConfigError("structure: hidden width must be positive");
  if (latent_dim != 1)
    throw ConfigError("structure: only latent_dim = 1 is supported");
  if (!(eta > 0.0 && eta < 1.0)) throw ConfigError("structure: eta must lie in (0,1)");
  if (!(growth > 1.0)) throw ConfigError("structure: growth must exceed 1");
  if (!(h_tol > 0.0)) throw ConfigError("structure: h_tol must be positive");
  if (threshold < 0.0) throw ConfigError("structure: threshold must be non-negative");
  if (inner_steps == 0 || max_outer == 0)
    throw ConfigError("structure: iteration budgets must be positive");
}

double aug_lagrangian(double recon, const Matrix& W, const AugLagState& state) {
  const double h = std::fabs(acyclicity_h(W).h);
  return recon + state.lambda * h + 0.5 * state.c * h * h;
}

void dual_update(AugLagState& state, double h_new, double growth, double eta) {
  if (h_new < 0.0) throw Error("dual_update: h must be non-negative");
  state.lambda += state.c * h_new;
  if (std::isfinite(state.h_prev) && h_new > eta * state.h_prev) {
    if (state.c > 1e16 / growth)
      throw NumericError("dual_update: penalty coefficient overflow");
    state.c *= growth;
  }
  state.h_prev = h_new;
  state.outer_iter += 1;
}

StructModel init_struct_model(StructAlgo algo, int V, const StructConfig& config) {
  config.validate();
  StructModel m;
  m.algo = algo;
  m.V = V;
  Rng rng = Rng(config.seed).split("struct_init");
  // Small nonzero start: at W = 0 every ReLU preactivation behind W·Z sits
  // exactly on the dead side of the kink and W receives no gradient.
  m.W = Tensor::zeros({static_cast<std::size_t>(V), static_cast<std::size_t>(V)});
  Rng wr = rng.split("W");
  for (std::size_t i = 0; i < m.W.values.size(); ++i)
    m.W.values[i] = wr.uniform(-0.1, 0.1);
  for (int i = 0; i < V; ++i) m.W.values[static_cast<std::size_t>(i) * V + i] = 0.0;
  const std::size_t h = config.hidden;
  switch (algo) {
    case StructAlgo::kNoTears:
      m.dec = Mlp::make({1, h, 1}, rng.split("dec"));
      break;
    case StructAlgo::kGae:
      m.enc = Mlp::make({1, h, 1}, rng.split("enc"));
      m.dec = Mlp::make({1, h, 1}, rng.split("dec"));
      break;
    case StructAlgo::kGnn:
      m.enc = Mlp::make({1, h, 2}, rng.split("enc"));
      m.dec = Mlp::make({1, h, 1}, rng.split("dec"));
      break;
  }
  return m;
}

namespace {

Tensor offdiag_mask(int V) {
  Tensor t = Tensor::full({static_cast<std::size_t>(V), static_cast<std::size_t>(V)}, 1.0);
  for (int i = 0; i < V; ++i) t.values[static_cast<std::size_t>(i) * V + i] = 0.0;
  return t;
}

// Shared scalar MLP applied to every node channel of a {n,V} tensor.
Var per_channel(Tape& tape, const BoundMlp& net, Var x) {
  const Tensor& tx = tape.value(x);
  const std::size_t n = tx.rows(), V = tx.cols();
  Var flat = tape.reshape(x, {n * V, 1});
  Var out = mlp_forward(tape, net, flat);
  const std::size_t width = tape.value(out).cols();
  if (width == 1) return tape.reshape(out, {n, V});
  return out;  // {n·V, width}; caller slices and reshapes
}

}  // namespace

BoundStruct bind_struct(Tape& tape, const StructModel& model, bool as_params) {
  BoundStruct b;
  b.W = as_params ? tape.param(model.W) : tape.constant(model.W);
  b.W_eff = tape.mul(b.W, tape.constant(offdiag_mask(model.V)));
  if (!model.enc.widths.empty())
    b.enc = as_params ? bind_params(tape, model.enc) : bind_const(tape, model.enc);
  if (!model.dec.widths.empty())
    b.dec = as_params ? bind_params(tape, model.dec) : bind_const(tape, model.dec);
  return b;
}

Var struct_recon_op(Tape& tape, const StructModel& model, const BoundStruct& bound,
                    const Matrix& batch, const Matrix* gnn_noise) {
  if (static_cast<int>(batch.cols()) != model.V)
    throw DimensionError("struct_recon_op: batch column count mismatch");
  const std::size_t n = static_cast<std::size_t>(batch.rows());
  const std::size_t V = static_cast<std::size_t>(model.V);
  Var X = tape.constant(from_matrix(batch));

  switch (model.algo) {
    case StructAlgo::kNoTears: {
      // Xhat = D(W·X) row-wise: X Wᵀ then the scalar decoder per channel.
      Var wz = tape.matmul_nt(X, bound.W_eff);
      Var xhat = per_channel(tape, bound.dec, wz);
      return tape.mean(tape.square(tape.sub(xhat, X)));
    }
    case StructAlgo::kGae: {
      // The encoder gain is a gauge freedom: scaling E up while scaling W
      // down leaves the reconstruction unchanged but drives the acyclicity
      // penalty to zero, letting cycles hide at tiny |W|. Rescaling each
      // latent channel to the data channel's spread quotients that out, so
      // W carries the regression scale the threshold is calibrated for.
      Var z_raw = per_channel(tape, bound.enc, X);
      std::vector<Var> cols;
      for (std::size_t mu = 0; mu < V; ++mu) {
        Var col = tape.slice_col(z_raw, mu);
        Var mu_z = tape.mean(col);
        Var centered = tape.add(col, tape.mul_bcast_scalar(
                                         tape.constant(Tensor::full({n, 1}, -1.0)), mu_z));
        Var var_z = tape.mean(tape.square(centered));
        Var sd_z = tape.sqrt_(tape.add_scalar(var_z, 1e-12));
        const double sd_x = std::sqrt(
            (batch.col(static_cast<Eigen::Index>(mu)).array() -
             batch.col(static_cast<Eigen::Index>(mu)).mean())
                .square()
                .mean());
        Var gain = tape.div(tape.constant_scalar(sd_x), sd_z);
        cols.push_back(tape.mul_bcast_scalar(col, gain));
      }
      Var z = tape.concat_cols(cols);
      Var wz = tape.matmul_nt(z, bound.W_eff);
      // The decoder gain is the other half of the same gauge freedom, so it
      // is pinned to unit batch gain per channel: the prediction keeps the
      // spread of its W·Z input and D contributes shape only.
      Var raw = per_channel(tape, bound.dec, wz);
      std::vector<Var> xcols;
      for (std::size_t mu = 0; mu < V; ++mu) {
        Var ucol = tape.slice_col(wz, mu);
        Var rcol = tape.slice_col(raw, mu);
        Var var_u = tape.mean(tape.square(
            tape.add(ucol, tape.mul_bcast_scalar(
                               tape.constant(Tensor::full({n, 1}, -1.0)), tape.mean(ucol)))));
        Var var_r = tape.mean(tape.square(
            tape.add(rcol, tape.mul_bcast_scalar(
                               tape.constant(Tensor::full({n, 1}, -1.0)), tape.mean(rcol)))));
        Var gain = tape.sqrt_(tape.div(tape.add_scalar(var_u, 1e-12),
                                       tape.add_scalar(var_r, 1e-12)));
        xcols.push_back(tape.mul_bcast_scalar(rcol, gain));
      }
      Var xhat = tape.concat_cols(xcols);
      return tape.mean(tape.square(tape.sub(xhat, X)));
    }
    case StructAlgo::kGnn: {
      if (gnn_noise == nullptr)
        throw Error("struct_recon_op: Gnn requires a noise matrix");
      // Encoder emits (mean, logvar) per channel.
      Var enc_out = per_channel(tape, bound.enc, X);  // {n·V, 2}
      Var mu = tape.reshape(tape.slice_col(enc_out, 0), {n, V});
      Var logvar = tape.reshape(tape.slice_col(enc_out, 1), {n, V});
      // A = (-I + W)ᵀ so that per-sample W-mixing is a right-multiplication.
      Var A = tape.sub(tape.transpose(bound.W_eff),
                       tape.constant(from_matrix(Matrix::Identity(model.V, model.V))));
      Var zmu = tape.matmul(mu, A);
      Var eps = tape.constant(from_matrix(*gnn_noise));
      Var z = tape.add(zmu, tape.mul(tape.exp_(tape.scale(logvar, 0.5)), eps));
      Var dec_in = tape.solve_right(z, A);
      Var xhat = per_channel(tape, bound.dec, dec_in);
      // Negative ELBO, unit-gaussian prior and unit-variance likelihood:
      // mean over batch of sum over nodes.
      Var nll = tape.scale(tape.sum(tape.square(tape.sub(xhat, X))),
                           0.5 / static_cast<double>(n));
      Var kl_terms =
          tape.sub(tape.add(tape.square(zmu), tape.exp_(logvar)),
                   tape.add_scalar(logvar, 1.0));
      Var kl = tape.scale(tape.sum(kl_terms), 0.5 / static_cast<double>(n));
      return tape.add(nll, kl);
    }
  }
  throw Error("struct_recon_op: unknown algorithm");
}

double struct_recon_loss(const StructModel& model, const Matrix& batch,
                         const Matrix* gnn_noise) {
  Tape tape;
  BoundStruct bound = bind_struct(tape, model, false);
  Var recon = struct_recon_op(tape, model, bound, batch, gnn_noise);
  return tape.value(recon).values[0];
}

namespace {

// Columns are centered but deliberately NOT variance-normalized: with equal
// noise scales across nodes, raw variances carry the information that makes
// linear-gaussian edge directions identifiable, and normalizing them away
// leaves whole Markov classes tied.
Matrix center_columns(const Matrix& data) {
  Matrix out = data;
  for (Eigen::Index j = 0; j < out.cols(); ++j) out.col(j).array() -= out.col(j).mean();
  return out;
}

Matrix current_W(const StructModel& model) {
  Matrix W = to_matrix(model.W);
  W.diagonal().setZero();
  return W;
}

}  // namespace

StructResult learn_structure(const Dataset& dataset, const StructConfig& config) {
  config.validate();
  if (dataset.n() < config.min_samples)
    throw ConfigError("learn_structure: need at least " +
                      std::to_string(config.min_samples) + " samples");

  const Matrix data = center_columns(dataset.data);
  const int V = dataset.node_count();
  StructModel model = init_struct_model(config.algo, V, config);

  std::vector<ParamRef> params;
  params.push_back({"W", &model.W});
  if (!model.enc.widths.empty()) collect_params(model.enc, "enc", params);
  if (!model.dec.widths.empty()) collect_params(model.dec, "dec", params);

  Rng noise_rng = Rng(config.seed).split("gnn_noise");
  Rng batch_rng = Rng(config.seed).split("inner_batch");
  AugLagState state;
  StructResult result{WeightedAdjacency(V), {}, false, true};
  Matrix best_W = current_W(model);
  double best_h = acyclicity_h(best_W).h;
  double last_recon = 0.0;

  const std::size_t n = dataset.n();
  const std::size_t rows_per_step = std::min(config.inner_batch, n);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  Tape tape;
  for (std::size_t outer = 0; outer < config.max_outer; ++outer) {
    AdamState adam = AdamState::init(params, {config.lr});
    std::size_t cursor = n;  // force a reshuffle at the start of each outer
    for (std::size_t inner = 0; inner < config.inner_steps; ++inner) {
      Matrix batch;
      if (rows_per_step == n) {
        batch = data;
      } else {
        if (cursor + rows_per_step > n) {
          for (std::size_t i = n - 1; i > 0; --i)
            std::swap(order[i], order[batch_rng.uniform_int(i + 1)]);
          cursor = 0;
        }
        batch.resize(rows_per_step, V);
        for (std::size_t r = 0; r < rows_per_step; ++r)
          batch.row(static_cast<Eigen::Index>(r)) =
              data.row(static_cast<Eigen::Index>(order[cursor + r]));
        cursor += rows_per_step;
      }

      Matrix gnn_noise;
      if (config.algo == StructAlgo::kGnn) {
        gnn_noise.resize(batch.rows(), V);
        for (Eigen::Index r = 0; r < gnn_noise.rows(); ++r)
          for (Eigen::Index c = 0; c < gnn_noise.cols(); ++c)
            gnn_noise(r, c) = noise_rng.normal();
      }

      auto run_step = [&]() {
        tape.reset();
        BoundStruct bound = bind_struct(tape, model, true);
        Var recon = struct_recon_op(tape, model, bound, batch,
                                    config.algo == StructAlgo::kGnn ? &gnn_noise : nullptr);
        Var h = tape.abs_(acyclicity_op(tape, bound.W_eff));
        Var total = tape.add(tape.add(recon, tape.scale(h, state.lambda)),
                             tape.scale(tape.square(h), 0.5 * state.c));
        last_recon = tape.value(recon).values[0];
        if (!std::isfinite(tape.value(total).values[0]))
          throw NumericError("learn_structure: non-finite loss at outer " +
                             std::to_string(outer) + " inner " + std::to_string(inner));
        tape.backward(total);
        model.W.grad = tape.grad_tensor(bound.W).values;
        if (!model.enc.widths.empty()) pull_grads(tape, bound.enc, model.enc);
        if (!model.dec.widths.empty()) pull_grads(tape, bound.dec, model.dec);
      };

      try {
        run_step();
      } catch (const NumericError& err) {
        if (std::string(err.what()).find("singular") == std::string::npos) throw;
        // Singular (-I+W) solve: pull W back towards the identity-dominant
        // region once and retry; a second failure aborts.
        for (double& w : model.W.values) w *= 0.99;
        run_step();
      }
      adam_step(params, adam);
    }

    // Numerically dead edges (orders of magnitude under the decision
    // threshold) hold h above tolerance forever at the Adam equilibrium, so
    // they are projected out after each outer solve. The inner loop can
    // regrow any of them if the reconstruction wants them back.
    for (double& w : model.W.values)
      if (std::fabs(w) < 1e-3) w = 0.0;

    const Matrix W_now = current_W(model);
    const double h_now = acyclicity_h(W_now).h;
    result.history.push_back({outer, h_now, last_recon, state.lambda, state.c});
    if (h_now <= best_h) {
      best_h = h_now;
      best_W = W_now;
    }
    if (h_now < config.h_tol) {
      result.converged = true;
      break;
    }
    try {
      dual_update(state, h_now, config.growth, config.eta);
    } catch (const NumericError&) {
      break;  // penalty schedule exhausted; report the best iterate
    }
  }

  result.W_hat = WeightedAdjacency(best_W);
  return result;
}

ThresholdResult threshold_weights(const WeightedAdjacency& W, double tau) {
  if (tau < 0.0) throw ConfigError("threshold_weights: tau must be non-negative");
  const int V = W.size();
  Matrix kept = W.W;
  for (int i = 0; i < V; ++i)
    for (int j = 0; j < V; ++j)
      if (std::fabs(kept(i, j)) < tau) kept(i, j) = 0.0;

  ThresholdResult result;
  for (;;) {
    Matrix M01(V, V);
    for (int i = 0; i < V; ++i)
      for (int j = 0; j < V; ++j) M01(i, j) = kept(i, j) != 0.0 ? 1.0 : 0.0;
    try {
      result.mask = mask_from_binary(M01);
      return result;
    } catch (const AcyclicityError& err) {
      // Remove the weakest edge on the witness cycle and retry.
      const auto& cyc = err.cycle;
      int bp = -1, bc = -1;
      double bw = std::numeric_limits<double>::infinity();
      const std::size_t k = cyc.size();
      for (std::size_t t = 0; t < k; ++t) {
        const int child = cyc[t];
        const int parent = cyc[(t + 1) % k];
        const double w = std::fabs(kept(child, parent));
        if (w > 0.0 && w < bw) {
          bw = w;
          bp = parent;
          bc = child;
        }
      }
      if (bp < 0) throw;  // malformed witness; re-raise
      kept(bc, bp) = 0.0;
      result.removed_edges.emplace_back(bp, bc);
    }
  }
}

}  // namespace causalsem
