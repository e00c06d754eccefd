#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "actseg/rng.hpp"
#include "actseg/tensor.hpp"

namespace actseg {

enum class Activation { kIdentity, kTanh, kRelu };

Activation parse_activation(const std::string& name);
std::string to_string(Activation a);

/// Fully-connected layer y = x W + b with W stored (in x out).
struct Linear {
  ParamArray weight;
  ParamArray bias;

  std::size_t in() const { return weight.shape[0]; }
  std::size_t out() const { return weight.shape[1]; }
};

/// Stack of Linear layers. The activation is applied after every layer except
/// the last, whose output is returned raw (logits).
struct Mlp {
  std::vector<Linear> layers;
  Activation activation = Activation::kTanh;

  std::size_t in() const { return layers.front().in(); }
  std::size_t out() const { return layers.back().out(); }
  std::vector<ParamArray*> params();
  std::vector<const ParamArray*> params() const;
};

Mlp make_mlp(const std::string& name, std::size_t in, std::span<const std::size_t> hidden,
             std::size_t out, Activation activation);

/// Zero-mean uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)] for weights and
/// biases. With zero_output_layer the last layer starts at exactly zero, so
/// the initial output distribution is uniform for every input.
void init_uniform(Mlp& mlp, Rng& rng, bool zero_output_layer = false);

/// Per-call record of layer inputs and pre-activations, enough to replay the
/// exact backward pass.
struct MlpTrace {
  std::vector<std::vector<double>> inputs;
  std::vector<std::vector<double>> pre;
};

/// Forward pass. Throws DimensionError naming the offending layer when x or
/// the layer chain does not line up.
std::vector<double> mlp_apply(std::span<const double> x, const Mlp& mlp,
                              MlpTrace* trace = nullptr);

/// Accumulates parameter gradients into mlp and returns dLoss/dx.
std::vector<double> mlp_backward(Mlp& mlp, const MlpTrace& trace,
                                 std::span<const double> grad_out);

std::vector<double> softmax(std::span<const double> logits);
double log_sum_exp(std::span<const double> logits);
std::size_t argmax(std::span<const double> v);

/// dL/dlogits given the softmax output p and dL/dp.
std::vector<double> softmax_backward(std::span<const double> p,
                                     std::span<const double> grad_p);

struct GumbelSample {
  std::vector<double> noise;   ///< the Gumbel(0,1) draws, kept for replay
  std::vector<double> soft;    ///< softmax((logits + noise) / tau)
  std::vector<double> output;  ///< soft, or one-hot(argmax soft) when hard
  std::size_t index = 0;       ///< argmax of soft
};

/// Relaxed categorical sample. With hard=true the forward value is one-hot
/// while gumbel_softmax_backward differentiates the soft sample
/// (straight-through). Throws ParameterError unless tau > 0.
GumbelSample gumbel_softmax_sample(std::span<const double> logits, double temperature,
                                   Rng& rng, bool hard);
GumbelSample gumbel_softmax_from_noise(std::span<const double> logits,
                                       std::span<const double> noise, double temperature,
                                       bool hard);
std::vector<double> gumbel_softmax_backward(const GumbelSample& sample, double temperature,
                                            std::span<const double> grad_output);

struct LossWithGrad {
  double loss = 0.0;
  Matrix grad;  ///< same shape as the input rows
};

/// Mean over rows of -log softmax(logits)[target]. Throws LabelError for
/// out-of-range targets.
LossWithGrad cross_entropy_logits(const Matrix& logits, std::span<const int> targets);
/// Mean over rows of -log probs[target]; probabilities are clamped at 1e-300.
LossWithGrad cross_entropy_probs(const Matrix& probs, std::span<const int> targets);

}  // namespace actseg
