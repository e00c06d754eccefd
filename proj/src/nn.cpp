#include "actseg/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "actseg/error.hpp"

namespace actseg {

Activation parse_activation(const std::string& name) {
  if (name == "identity") return Activation::kIdentity;
  if (name == "tanh") return Activation::kTanh;
  if (name == "relu") return Activation::kRelu;
  throw ParameterError("unknown activation '" + name + "' (expected identity|tanh|relu)");
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::kIdentity: return "identity";
    case Activation::kTanh: return "tanh";
    case Activation::kRelu: return "relu";
  }
  return "?";
}

std::vector<ParamArray*> Mlp::params() {
  std::vector<ParamArray*> out;
  for (auto& l : layers) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

std::vector<const ParamArray*> Mlp::params() const {
  std::vector<const ParamArray*> out;
  for (const auto& l : layers) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

Mlp make_mlp(const std::string& name, std::size_t in, std::span<const std::size_t> hidden,
             std::size_t out, Activation activation) {
  Mlp mlp;
  mlp.activation = activation;
  std::size_t prev = in;
  for (std::size_t i = 0; i <= hidden.size(); ++i) {
    const std::size_t next = i < hidden.size() ? hidden[i] : out;
    const std::string prefix = name + ".l" + std::to_string(i);
    mlp.layers.push_back({ParamArray(prefix + ".weight", {prev, next}),
                          ParamArray(prefix + ".bias", {next})});
    prev = next;
  }
  return mlp;
}

void init_uniform(Mlp& mlp, Rng& rng, bool zero_output_layer) {
  for (std::size_t li = 0; li < mlp.layers.size(); ++li) {
    Linear& l = mlp.layers[li];
    if (zero_output_layer && li + 1 == mlp.layers.size()) {
      std::fill(l.weight.values.begin(), l.weight.values.end(), 0.0);
      std::fill(l.bias.values.begin(), l.bias.values.end(), 0.0);
      continue;
    }
    const double bound = 1.0 / std::sqrt(static_cast<double>(l.in()));
    for (auto& w : l.weight.values) w = (2.0 * rng.uniform() - 1.0) * bound;
    for (auto& b : l.bias.values) b = (2.0 * rng.uniform() - 1.0) * bound;
  }
}

namespace {

inline double activate(Activation a, double x) {
  switch (a) {
    case Activation::kIdentity: return x;
    case Activation::kTanh: return std::tanh(x);
    case Activation::kRelu: return x > 0.0 ? x : 0.0;
  }
  return x;
}

inline double activate_grad(Activation a, double pre) {
  switch (a) {
    case Activation::kIdentity: return 1.0;
    case Activation::kTanh: {
      const double t = std::tanh(pre);
      return 1.0 - t * t;
    }
    case Activation::kRelu: return pre > 0.0 ? 1.0 : 0.0;
  }
  return 1.0;
}

}  // namespace

std::vector<double> mlp_apply(std::span<const double> x, const Mlp& mlp, MlpTrace* trace) {
  if (mlp.layers.empty()) throw DimensionError("mlp has no layers");
  if (trace) {
    trace->inputs.clear();
    trace->pre.clear();
  }
  std::vector<double> cur(x.begin(), x.end());
  for (std::size_t li = 0; li < mlp.layers.size(); ++li) {
    const Linear& l = mlp.layers[li];
    if (l.weight.shape.size() != 2 || l.bias.size() != l.out()) {
      throw DimensionError("layer " + std::to_string(li) + ": malformed weight/bias shapes");
    }
    if (cur.size() != l.in()) {
      throw DimensionError("layer " + std::to_string(li) + ": input dim " +
                           std::to_string(cur.size()) + " != weight rows " +
                           std::to_string(l.in()));
    }
    const std::size_t n_out = l.out();
    std::vector<double> y(l.bias.values);
    const double* w = l.weight.values.data();
    for (std::size_t i = 0; i < cur.size(); ++i) {
      const double xi = cur[i];
      const double* wrow = w + i * n_out;
      for (std::size_t j = 0; j < n_out; ++j) y[j] += xi * wrow[j];
    }
    const bool last = li + 1 == mlp.layers.size();
    if (trace) {
      trace->inputs.push_back(cur);
      trace->pre.push_back(y);
    }
    if (!last) {
      for (auto& v : y) v = activate(mlp.activation, v);
    }
    cur = std::move(y);
  }
  return cur;
}

std::vector<double> mlp_backward(Mlp& mlp, const MlpTrace& trace,
                                 std::span<const double> grad_out) {
  if (trace.inputs.size() != mlp.layers.size()) {
    throw DimensionError("mlp trace does not match layer count");
  }
  std::vector<double> g(grad_out.begin(), grad_out.end());
  for (std::size_t li = mlp.layers.size(); li-- > 0;) {
    Linear& l = mlp.layers[li];
    const bool last = li + 1 == mlp.layers.size();
    if (!last) {
      const auto& pre = trace.pre[li];
      for (std::size_t j = 0; j < g.size(); ++j) g[j] *= activate_grad(mlp.activation, pre[j]);
    }
    const auto& in = trace.inputs[li];
    const std::size_t n_out = l.out();
    std::vector<double> gin(in.size(), 0.0);
    double* gw = l.weight.grad.data();
    const double* w = l.weight.values.data();
    for (std::size_t i = 0; i < in.size(); ++i) {
      const double xi = in[i];
      double acc = 0.0;
      for (std::size_t j = 0; j < n_out; ++j) {
        gw[i * n_out + j] += xi * g[j];
        acc += w[i * n_out + j] * g[j];
      }
      gin[i] = acc;
    }
    for (std::size_t j = 0; j < n_out; ++j) l.bias.grad[j] += g[j];
    g = std::move(gin);
  }
  return g;
}

double log_sum_exp(std::span<const double> logits) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : logits) m = std::max(m, v);
  double s = 0.0;
  for (double v : logits) s += std::exp(v - m);
  return m + std::log(s);
}

std::vector<double> softmax(std::span<const double> logits) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : logits) m = std::max(m, v);
  std::vector<double> p(logits.size());
  double s = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    s += p[i];
  }
  for (auto& v : p) v /= s;
  return p;
}

std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

std::vector<double> softmax_backward(std::span<const double> p,
                                     std::span<const double> grad_p) {
  double dot = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) dot += p[i] * grad_p[i];
  std::vector<double> g(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) g[i] = p[i] * (grad_p[i] - dot);
  return g;
}

GumbelSample gumbel_softmax_from_noise(std::span<const double> logits,
                                       std::span<const double> noise, double temperature,
                                       bool hard) {
  if (!(temperature > 0.0)) {
    throw ParameterError("gumbel-softmax temperature must be > 0, got " +
                         std::to_string(temperature));
  }
  if (noise.size() != logits.size()) {
    throw DimensionError("gumbel noise size does not match logits");
  }
  GumbelSample s;
  s.noise.assign(noise.begin(), noise.end());
  std::vector<double> z(logits.size());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = (logits[i] + noise[i]) / temperature;
  s.soft = softmax(z);
  s.index = argmax(s.soft);
  if (hard) {
    s.output.assign(z.size(), 0.0);
    s.output[s.index] = 1.0;
  } else {
    s.output = s.soft;
  }
  return s;
}

GumbelSample gumbel_softmax_sample(std::span<const double> logits, double temperature,
                                   Rng& rng, bool hard) {
  if (!(temperature > 0.0)) {
    throw ParameterError("gumbel-softmax temperature must be > 0, got " +
                         std::to_string(temperature));
  }
  std::vector<double> noise(logits.size());
  for (auto& g : noise) g = rng.gumbel();
  return gumbel_softmax_from_noise(logits, noise, temperature, hard);
}

std::vector<double> gumbel_softmax_backward(const GumbelSample& sample, double temperature,
                                            std::span<const double> grad_output) {
  auto g = softmax_backward(sample.soft, grad_output);
  for (auto& v : g) v /= temperature;
  return g;
}

namespace {

void check_targets(const Matrix& m, std::span<const int> targets) {
  if (targets.size() != m.rows()) {
    throw LabelError("cross-entropy: " + std::to_string(targets.size()) + " targets for " +
                     std::to_string(m.rows()) + " rows");
  }
  for (std::size_t t = 0; t < targets.size(); ++t) {
    if (targets[t] < 0 || static_cast<std::size_t>(targets[t]) >= m.cols()) {
      throw LabelError("cross-entropy: target " + std::to_string(targets[t]) + " at row " +
                       std::to_string(t) + " outside [0, " + std::to_string(m.cols()) + ")");
    }
  }
}

}  // namespace

LossWithGrad cross_entropy_logits(const Matrix& logits, std::span<const int> targets) {
  check_targets(logits, targets);
  LossWithGrad out{0.0, Matrix(logits.rows(), logits.cols())};
  if (logits.rows() == 0) return out;
  const double inv_n = 1.0 / static_cast<double>(logits.rows());
  for (std::size_t t = 0; t < logits.rows(); ++t) {
    const auto row = logits.row(t);
    const auto p = softmax(row);
    const auto y = static_cast<std::size_t>(targets[t]);
    out.loss += (log_sum_exp(row) - row[y]) * inv_n;
    auto g = out.grad.row(t);
    for (std::size_t c = 0; c < p.size(); ++c) g[c] = (p[c] - (c == y ? 1.0 : 0.0)) * inv_n;
  }
  return out;
}

LossWithGrad cross_entropy_probs(const Matrix& probs, std::span<const int> targets) {
  check_targets(probs, targets);
  LossWithGrad out{0.0, Matrix(probs.rows(), probs.cols())};
  if (probs.rows() == 0) return out;
  const double inv_n = 1.0 / static_cast<double>(probs.rows());
  for (std::size_t t = 0; t < probs.rows(); ++t) {
    const auto y = static_cast<std::size_t>(targets[t]);
    const double p = std::max(probs(t, y), 1e-300);
    out.loss += -std::log(p) * inv_n;
    out.grad(t, y) = -inv_n / p;
  }
  return out;
}

}  // namespace actseg
