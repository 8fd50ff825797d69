#pragma once

#include <functional>
#include <string>
#include <vector>

#include "causalsem/rng.hpp"
#include "causalsem/tensor.hpp"

namespace causalsem {

enum class Activation { kRelu, kTanh, kIdentity };

/// Fully connected net with per-layer activations. Weights are {out,in},
/// biases {out}. Initialization is uniform in ±sqrt(6/(fan_in+fan_out)),
/// biases zero, drawn from the supplied generator.
struct Mlp {
  std::vector<std::size_t> widths;
  std::vector<Tensor> weights;
  std::vector<Tensor> biases;
  std::vector<Activation> activations;

  static Mlp make(const std::vector<std::size_t>& widths, Rng rng,
                  Activation hidden = Activation::kRelu,
                  Activation output = Activation::kIdentity);

  std::size_t input_width() const { return widths.front(); }
  std::size_t output_width() const { return widths.back(); }
  std::size_t layer_count() const { return weights.size(); }
};

/// An Mlp whose parameters have been placed on a tape.
struct BoundMlp {
  const Mlp* net = nullptr;
  std::vector<Var> weights;
  std::vector<Var> biases;
};

/// Bind as gradient-carrying leaves (training).
BoundMlp bind_params(Tape& tape, const Mlp& net);
/// Bind as constants (inference through the same code path).
BoundMlp bind_const(Tape& tape, const Mlp& net);

/// Forward pass; x is {n,in} (or rank-1 {in}, promoted to one row).
/// Throws DimensionError naming the offending layer on width mismatch.
Var mlp_forward(Tape& tape, const BoundMlp& net, Var x);

/// Tape-free evaluation for sampling paths; same arithmetic as mlp_forward.
Tensor mlp_eval(const Mlp& net, const Tensor& x);

/// Copy tape gradients of a bound net back into the Mlp's grad buffers.
void pull_grads(const Tape& tape, const BoundMlp& bound, Mlp& net);

/// Named handle on an externally owned parameter tensor.
struct ParamRef {
  std::string name;
  Tensor* tensor = nullptr;
};

/// Append "<prefix>.W<l>" / "<prefix>.b<l>" refs for every layer of net.
void collect_params(Mlp& net, const std::string& prefix, std::vector<ParamRef>& out);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam. Moment tensors mirror the parameter list they were
/// initialized from; step() consumes the grad buffers on the referenced
/// tensors.
struct AdamState {
  AdamConfig hyper;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  long step_count = 0;

  static AdamState init(const std::vector<ParamRef>& params, AdamConfig cfg);
};

/// One in-place update. Missing grad buffers count as zero gradients;
/// non-finite gradients raise NumericError carrying the parameter name.
void adam_step(const std::vector<ParamRef>& params, AdamState& state);

/// Scalar function of a parameter pack, built on a tape.
using ScalarFn = std::function<Var(Tape&, const std::vector<Var>&)>;

/// Max relative deviation between tape gradients and central finite
/// differences over every entry of every parameter. Non-finite comparisons
/// surface as an infinite return value rather than an exception.
double grad_check(const ScalarFn& f, const std::vector<Tensor>& params, double step);

}  // namespace causalsem
