#include "actseg/model.hpp"

#include <algorithm>
#include <cmath>

#include "actseg/error.hpp"

namespace actseg {

void ModelConfig::validate() const {
  if (num_actions < 1) throw ParameterError("num_actions must be >= 1");
  if (state_dim < 1) throw ParameterError("state_dim must be >= 1");
  if (feature_dim < 1) throw ParameterError("feature_dim must be >= 1");
  for (std::size_t h : hidden_dims) {
    if (h < 1) throw ParameterError("hidden_dims entries must be >= 1");
  }
  const std::size_t r = rules();
  if (r < num_actions) throw ParameterError("num_rules must be >= num_actions");
  if (r % num_actions != 0) throw ParameterError("num_rules must be a multiple of num_actions");
  if (!(temperature > 0.0)) throw ParameterError("temperature must be > 0");
}

std::vector<ParamArray*> ModelParams::autoregressive_params() {
  std::vector<ParamArray*> out{&initial_state};
  for (ParamArray* p : rule_scorer.params()) out.push_back(p);
  out.push_back(&rule_next_state);
  return out;
}

std::vector<ParamArray*> ModelParams::classifier_params() { return classifier.params(); }

std::vector<ParamArray*> ModelParams::all_params() {
  auto out = autoregressive_params();
  for (ParamArray* p : classifier.params()) out.push_back(p);
  if (cross_projection) out.push_back(&*cross_projection);
  return out;
}

std::vector<const ParamArray*> ModelParams::all_params() const {
  auto mut = const_cast<ModelParams*>(this)->all_params();
  return {mut.begin(), mut.end()};
}

void ModelParams::zero_grad() {
  for (ParamArray* p : all_params()) p->zero_grad();
}

ModelParams init_model(const ModelConfig& config, Rng& rng) {
  config.validate();
  ModelParams m;
  m.config = config;
  const std::size_t r = config.rules();
  m.initial_state = ParamArray("initial_state", {config.state_dim});
  m.rule_scorer = make_mlp("rule_scorer", config.state_dim + config.feature_dim,
                           config.hidden_dims, r, config.activation);
  init_uniform(m.rule_scorer, rng, /*zero_output_layer=*/true);
  m.rule_next_state = ParamArray("rule_next_state", {r, config.state_dim});
  for (auto& v : m.rule_next_state.values) v = 2.0 * rng.uniform() - 1.0;
  m.rule_action.resize(r);
  for (std::size_t i = 0; i < r; ++i) m.rule_action[i] = static_cast<int>(i % config.num_actions);
  m.classifier = make_mlp("classifier", config.feature_dim, config.hidden_dims,
                          config.num_actions, config.activation);
  init_uniform(m.classifier, rng, /*zero_output_layer=*/true);
  if (config.cross_projection_dim > 0) {
    ParamArray proj("cross_projection", {config.feature_dim, config.cross_projection_dim});
    for (std::size_t i = 0; i < std::min(config.feature_dim, config.cross_projection_dim); ++i) {
      proj.values[i * config.cross_projection_dim + i] = 1.0;
    }
    m.cross_projection = std::move(proj);
  }
  return m;
}

void check_video(const ModelParams& params, const FeatureSequence& video) {
  if (video.length() == 0) throw InputError("video '" + video.video_id + "' has no frames");
  if (video.dim() != params.config.feature_dim) {
    throw DimensionError("video '" + video.video_id + "' has feature dim " +
                         std::to_string(video.dim()) + ", model expects " +
                         std::to_string(params.config.feature_dim));
  }
}

StepResult step(const ModelParams& params, std::span<const double> state,
                std::span<const double> feature, DecodeMode mode, double temperature,
                Rng* rng, StepTrace* trace) {
  const ModelConfig& c = params.config;
  if (state.size() != c.state_dim) {
    throw DimensionError("state dim " + std::to_string(state.size()) + " != " +
                         std::to_string(c.state_dim));
  }
  if (feature.size() != c.feature_dim) {
    throw DimensionError("feature dim " + std::to_string(feature.size()) + " != " +
                         std::to_string(c.feature_dim));
  }
  std::vector<double> input(state.begin(), state.end());
  input.insert(input.end(), feature.begin(), feature.end());
  MlpTrace local;
  MlpTrace* mt = trace ? &trace->mlp : nullptr;
  std::vector<double> logits = mlp_apply(input, params.rule_scorer, mt ? mt : &local);

  const std::size_t r = c.rules();
  GumbelSample sample;
  if (mode == DecodeMode::kStochastic) {
    if (rng == nullptr) throw ParameterError("stochastic step requires an rng");
    sample = gumbel_softmax_sample(logits, temperature, *rng, /*hard=*/true);
  } else if (mode == DecodeMode::kRelaxed) {
    const std::vector<double> zero(r, 0.0);
    sample = gumbel_softmax_from_noise(logits, zero, temperature, /*hard=*/true);
  } else {
    sample.noise.assign(r, 0.0);
    sample.soft = softmax(logits);
    sample.index = argmax(logits);
    sample.output.assign(r, 0.0);
    sample.output[sample.index] = 1.0;
  }

  const bool use_hard = mode == DecodeMode::kGreedy || c.hard_transition;
  const std::vector<double>& weights = use_hard ? sample.output : sample.soft;

  StepResult out;
  out.rule = sample.index;
  out.action = params.rule_action[sample.index];
  out.next_state.assign(c.state_dim, 0.0);
  const double* rows = params.rule_next_state.values.data();
  for (std::size_t k = 0; k < r; ++k) {
    const double w = weights[k];
    if (w == 0.0) continue;
    const double* row = rows + k * c.state_dim;
    for (std::size_t j = 0; j < c.state_dim; ++j) out.next_state[j] += w * row[j];
  }
  out.rule_distribution = sample.output;
  if (trace) {
    trace->state.assign(state.begin(), state.end());
    trace->logits = logits;
    trace->transition_weights = weights;
    trace->sample = std::move(sample);
  }
  return out;
}

ActionSequence generate_sequence(const ModelParams& params, const FeatureSequence& video,
                                 DecodeMode mode, double temperature, Rng* rng,
                                 std::vector<StepTrace>* trace) {
  check_video(params, video);
  ActionSequence seq;
  seq.video_id = video.video_id;
  seq.labels.resize(video.length());
  if (trace) trace->assign(video.length(), {});
  std::vector<double> state = params.initial_state.values;
  for (std::size_t t = 0; t < video.length(); ++t) {
    StepResult s = step(params, state, video.features.row(t), mode, temperature, rng,
                        trace ? &(*trace)[t] : nullptr);
    seq.labels[t] = s.action;
    state = std::move(s.next_state);
  }
  return seq;
}

Matrix classify_frames(const ModelParams& params, const FeatureSequence& video) {
  if (video.dim() != params.config.feature_dim) {
    throw DimensionError("video '" + video.video_id + "' has feature dim " +
                         std::to_string(video.dim()) + ", classifier expects " +
                         std::to_string(params.config.feature_dim));
  }
  Matrix probs(video.length(), params.config.num_actions);
  for (std::size_t t = 0; t < video.length(); ++t) {
    const auto p = softmax(mlp_apply(video.features.row(t), params.classifier));
    std::copy(p.begin(), p.end(), probs.row(t).begin());
  }
  return probs;
}

std::vector<double> action_distribution(const ModelParams& params,
                                        std::span<const double> rule_logits) {
  const auto p = softmax(rule_logits);
  std::vector<double> q(params.config.num_actions, 0.0);
  for (std::size_t r = 0; r < p.size(); ++r) q[params.rule_action[r]] += p[r];
  return q;
}

namespace {

void check_labels(const ModelParams& params, const FeatureSequence& video,
                  std::span<const int> labels) {
  if (labels.size() != video.length()) {
    throw LengthError("video '" + video.video_id + "': " + std::to_string(labels.size()) +
                      " labels for " + std::to_string(video.length()) + " frames");
  }
  for (int a : labels) {
    if (a < 0 || static_cast<std::size_t>(a) >= params.config.num_actions) {
      throw LabelError("label " + std::to_string(a) + " outside [0, " +
                       std::to_string(params.config.num_actions) + ")");
    }
  }
}

}  // namespace

double autoregressive_loss(ModelParams& params, const FeatureSequence& video,
                           std::span<const int> labels, double temperature, Rng* rng,
                           bool accumulate_grad) {
  check_video(params, video);
  check_labels(params, video, labels);
  const ModelConfig& c = params.config;
  const std::size_t T = video.length();
  const std::size_t R = c.rules();
  const std::size_t S = c.state_dim;
  const double inv_t = 1.0 / static_cast<double>(T);

  std::vector<StepTrace> trace;
  generate_sequence(params, video, rng ? DecodeMode::kStochastic : DecodeMode::kRelaxed,
                    temperature, rng, &trace);

  double loss = 0.0;
  std::vector<std::vector<double>> rule_probs(T);
  for (std::size_t t = 0; t < T; ++t) {
    rule_probs[t] = softmax(trace[t].logits);
    double q = 0.0;
    for (std::size_t r = 0; r < R; ++r) {
      if (params.rule_action[r] == labels[t]) q += rule_probs[t][r];
    }
    loss -= std::log(std::max(q, 1e-300)) * inv_t;
  }
  if (!accumulate_grad) return loss;

  // Backpropagation through time. grad_state holds dL/d(state entering step t+1).
  std::vector<double> grad_state(S, 0.0);
  double* grad_rows = params.rule_next_state.grad.data();
  const double* rows = params.rule_next_state.values.data();
  for (std::size_t t = T; t-- > 0;) {
    const StepTrace& st = trace[t];
    const auto& p = rule_probs[t];
    double q = 0.0;
    for (std::size_t r = 0; r < R; ++r) {
      if (params.rule_action[r] == labels[t]) q += p[r];
    }
    q = std::max(q, 1e-300);
    std::vector<double> grad_logits(R);
    for (std::size_t r = 0; r < R; ++r) {
      const double in_target = params.rule_action[r] == labels[t] ? 1.0 : 0.0;
      grad_logits[r] = inv_t * (p[r] - in_target * p[r] / q);
    }

    if (t + 1 < T) {
      // next_state = sum_r w_r * rows[r]; w comes from the soft sample (either
      // directly or straight-through under hard transitions).
      std::vector<double> grad_w(R, 0.0);
      for (std::size_t r = 0; r < R; ++r) {
        const double w = st.transition_weights[r];
        double dot = 0.0;
        for (std::size_t j = 0; j < S; ++j) {
          grad_rows[r * S + j] += w * grad_state[j];
          dot += rows[r * S + j] * grad_state[j];
        }
        grad_w[r] = dot;
      }
      const auto g = gumbel_softmax_backward(st.sample, temperature, grad_w);
      for (std::size_t r = 0; r < R; ++r) grad_logits[r] += g[r];
    }

    const auto grad_input = mlp_backward(params.rule_scorer, st.mlp, grad_logits);
    std::copy(grad_input.begin(), grad_input.begin() + static_cast<std::ptrdiff_t>(S),
              grad_state.begin());
  }
  for (std::size_t j = 0; j < S; ++j) params.initial_state.grad[j] += grad_state[j];
  return loss;
}

double classifier_loss(ModelParams& params, const FeatureSequence& video,
                       std::span<const int> labels, bool accumulate_grad) {
  check_video(params, video);
  check_labels(params, video, labels);
  const std::size_t T = video.length();
  Matrix logits(T, params.config.num_actions);
  std::vector<MlpTrace> traces(accumulate_grad ? T : 0);
  for (std::size_t t = 0; t < T; ++t) {
    const auto l = mlp_apply(video.features.row(t), params.classifier,
                             accumulate_grad ? &traces[t] : nullptr);
    std::copy(l.begin(), l.end(), logits.row(t).begin());
  }
  auto ce = cross_entropy_logits(logits, labels);
  if (accumulate_grad) {
    for (std::size_t t = 0; t < T; ++t) mlp_backward(params.classifier, traces[t], ce.grad.row(t));
  }
  return ce.loss;
}

}  // namespace actseg
