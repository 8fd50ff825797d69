#include "causalsem/nn.hpp"

#include <cmath>
#include <limits>

namespace causalsem {

Mlp Mlp::make(const std::vector<std::size_t>& widths, Rng rng,
              Activation hidden, Activation output) {
  if (widths.size() < 2) throw DimensionError("mlp: need at least input and output widths");
  for (std::size_t w : widths)
    if (w == 0) throw DimensionError("mlp: zero layer width");

  Mlp net;
  net.widths = widths;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const std::size_t fan_in = widths[l], fan_out = widths[l + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Tensor w = Tensor::zeros({fan_out, fan_in});
    for (double& v : w.values) v = rng.uniform(-bound, bound);
    net.weights.push_back(std::move(w));
    net.biases.push_back(Tensor::zeros({fan_out}));
    net.activations.push_back(l + 2 < widths.size() ? hidden : output);
  }
  return net;
}

BoundMlp bind_params(Tape& tape, const Mlp& net) {
  BoundMlp b;
  b.net = &net;
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    b.weights.push_back(tape.param(net.weights[l]));
    b.biases.push_back(tape.param(net.biases[l]));
  }
  return b;
}

BoundMlp bind_const(Tape& tape, const Mlp& net) {
  BoundMlp b;
  b.net = &net;
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    b.weights.push_back(tape.constant(net.weights[l]));
    b.biases.push_back(tape.constant(net.biases[l]));
  }
  return b;
}

namespace {

Var apply_activation(Tape& tape, Var h, Activation act) {
  switch (act) {
    case Activation::kRelu: return tape.relu(h);
    case Activation::kTanh: return tape.tanh_(h);
    case Activation::kIdentity: return h;
  }
  throw Error("mlp: unknown activation");
}

}  // namespace

Var mlp_forward(Tape& tape, const BoundMlp& net, Var x) {
  const Mlp& m = *net.net;
  const Tensor& tx = tape.value(x);
  const bool one_dim = tx.rank() == 1;
  Var h = one_dim ? tape.reshape(x, {1, tx.size()}) : x;

  for (std::size_t l = 0; l < m.layer_count(); ++l) {
    const Tensor& th = tape.value(h);
    if (th.cols() != m.widths[l])
      throw DimensionError("mlp: layer " + std::to_string(l) + " expects input width " +
                           std::to_string(m.widths[l]) + ", got " +
                           std::to_string(th.cols()));
    h = tape.affine(h, net.weights[l], net.biases[l]);
    h = apply_activation(tape, h, m.activations[l]);
  }
  if (one_dim) h = tape.reshape(h, {m.output_width()});
  return h;
}

Tensor mlp_eval(const Mlp& net, const Tensor& x) {
  Tape tape;
  BoundMlp b = bind_const(tape, net);
  Var out = mlp_forward(tape, b, tape.constant(x));
  return tape.value(out);
}

void pull_grads(const Tape& tape, const BoundMlp& bound, Mlp& net) {
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    net.weights[l].grad = tape.grad_tensor(bound.weights[l]).values;
    net.biases[l].grad = tape.grad_tensor(bound.biases[l]).values;
  }
}

void collect_params(Mlp& net, const std::string& prefix, std::vector<ParamRef>& out) {
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    out.push_back({prefix + ".W" + std::to_string(l), &net.weights[l]});
    out.push_back({prefix + ".b" + std::to_string(l), &net.biases[l]});
  }
}

AdamState AdamState::init(const std::vector<ParamRef>& params, AdamConfig cfg) {
  AdamState st;
  st.hyper = cfg;
  for (const ParamRef& p : params) {
    st.m.push_back(Tensor::zeros(p.tensor->shape));
    st.v.push_back(Tensor::zeros(p.tensor->shape));
  }
  return st;
}

void adam_step(const std::vector<ParamRef>& params, AdamState& state) {
  if (params.size() != state.m.size())
    throw DimensionError("adam: parameter count differs from moment state");
  state.step_count += 1;
  const AdamConfig& c = state.hyper;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step_count));

  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& t = *params[i].tensor;
    if (!t.same_shape(state.m[i]))
      throw DimensionError("adam: shape changed for parameter " + params[i].name);
    if (!t.grad) continue;
    const std::vector<double>& g = *t.grad;
    auto& m = state.m[i].values;
    auto& v = state.v[i].values;
    for (std::size_t j = 0; j < g.size(); ++j) {
      if (!std::isfinite(g[j]))
        throw NumericError("adam: non-finite gradient for parameter " + params[i].name);
      m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
      v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      t.values[j] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
    }
  }
}

double grad_check(const ScalarFn& f, const std::vector<Tensor>& params, double step) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (const Tensor& p : params) vars.push_back(tape.param(p));
  Var root = f(tape, vars);
  tape.backward(root);
  std::vector<std::vector<double>> tape_grads;
  for (Var v : vars) tape_grads.push_back(tape.grad_tensor(v).values);

  auto eval_at = [&](const std::vector<Tensor>& pts) {
    Tape t2;
    std::vector<Var> vs;
    for (const Tensor& p : pts) vs.push_back(t2.param(p));
    return t2.value(f(t2, vs)).values[0];
  };

  double worst = 0.0;
  std::vector<Tensor> probe = params;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t j = 0; j < params[p].size(); ++j) {
      const double orig = probe[p].values[j];
      probe[p].values[j] = orig + step;
      const double fp = eval_at(probe);
      probe[p].values[j] = orig - step;
      const double fm = eval_at(probe);
      probe[p].values[j] = orig;
      const double fd = (fp - fm) / (2.0 * step);
      const double g = tape_grads[p][j];
      const double diff = std::fabs(g - fd);
      if (!std::isfinite(diff))
        return std::numeric_limits<double>::infinity();
      const double rel = diff / std::max({std::fabs(g), std::fabs(fd), 1e-6});
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace causalsem
