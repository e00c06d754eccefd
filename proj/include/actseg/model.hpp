#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "actseg/nn.hpp"
#include "actseg/rng.hpp"
#include "actseg/tensor.hpp"

namespace actseg {

/// Shape of the stochastic autoregressive labeler.
struct ModelConfig {
  std::size_t num_actions = 4;
  std::size_t num_rules = 0;  ///< 0 selects 2 * num_actions
  std::size_t state_dim = 32;
  std::size_t feature_dim = 16;
  std::vector<std::size_t> hidden_dims = {64};
  double temperature = 1.0;
  Activation activation = Activation::kTanh;
  /// Feed the one-hot (straight-through) rule choice into the next state
  /// instead of the soft Gumbel sample.
  bool hard_transition = false;
  /// Output width of the learned cross-video projection; 0 disables it.
  std::size_t cross_projection_dim = 0;

  std::size_t rules() const { return num_rules == 0 ? 2 * num_actions : num_rules; }
  /// Throws ParameterError describing the first violated constraint.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// One video after feature extraction. gt_labels is evaluation-only data; the
/// training code never reads it.
struct FeatureSequence {
  std::string video_id;
  std::string task_id;
  Matrix features;  ///< T x D
  std::optional<std::vector<int>> gt_labels;

  std::size_t length() const { return features.rows(); }
  std::size_t dim() const { return features.cols(); }
};

struct ActionSequence {
  std::string video_id;
  std::vector<int> labels;

  std::size_t length() const { return labels.size(); }
  bool operator==(const ActionSequence&) const = default;
};

/// Learnable arrays of the labeler plus the independent frame classifier.
struct ModelParams {
  ModelConfig config;
  ParamArray initial_state;           ///< (state_dim)
  Mlp rule_scorer;                    ///< (state_dim + D) -> |R| logits
  ParamArray rule_next_state;         ///< (|R| x state_dim)
  std::vector<int> rule_action;       ///< rule r emits action r mod |O|
  Mlp classifier;                     ///< D -> |O| logits, p(a|f)
  std::optional<ParamArray> cross_projection;  ///< (D x P) when enabled

  std::vector<ParamArray*> autoregressive_params();
  std::vector<ParamArray*> classifier_params();
  std::vector<ParamArray*> all_params();
  std::vector<const ParamArray*> all_params() const;
  void zero_grad();
};

/// Deterministic given the rng state: U(-1/sqrt(fan_in), 1/sqrt(fan_in))
/// weights, zero initial state, next-state rows U(-1, 1), identity-initialised
/// cross projection.
ModelParams init_model(const ModelConfig& config, Rng& rng);

/// kStochastic: hard Gumbel-Softmax rule draw (training, candidate sampling).
/// kGreedy: argmax rule, one-hot transition (inference).
/// kRelaxed: noise-free Gumbel-Softmax, i.e. softmax(logits / tau) transition
/// weights with the argmax rule emitted (used by the no-noise ablation).
enum class DecodeMode { kStochastic, kGreedy, kRelaxed };

struct StepResult {
  std::vector<double> rule_distribution;  ///< one-hot over |R| (forward value)
  std::size_t rule = 0;
  int action = 0;
  std::vector<double> next_state;
};

/// Everything recorded for one step so that the loss can be backpropagated.
struct StepTrace {
  std::vector<double> state;
  MlpTrace mlp;
  std::vector<double> logits;
  GumbelSample sample;
  std::vector<double> transition_weights;
};

/// One autoregressive transition. In stochastic mode `rng` must be non-null
/// and the rule is drawn with hard Gumbel-Softmax at `temperature`; in greedy
/// mode the argmax rule of the logits is taken.
StepResult step(const ModelParams& params, std::span<const double> state,
                std::span<const double> feature, DecodeMode mode, double temperature,
                Rng* rng, StepTrace* trace = nullptr);

/// Applies step from the initial state across all frames.
ActionSequence generate_sequence(const ModelParams& params, const FeatureSequence& video,
                                 DecodeMode mode, double temperature, Rng* rng,
                                 std::vector<StepTrace>* trace = nullptr);

/// T x |O| matrix of per-frame class probabilities from the classifier head.
Matrix classify_frames(const ModelParams& params, const FeatureSequence& video);

/// Per-step action distribution of the autoregressive path: rule
/// probabilities softmax(logits) summed per emitted action.
std::vector<double> action_distribution(const ModelParams& params,
                                        std::span<const double> rule_logits);

/// Cross-entropy of the autoregressive path against `labels`, rolled out in
/// stochastic mode with noise drawn from `rng` (kRelaxed when rng is null).
/// When `accumulate_grad` is set the gradient through the whole state
/// trajectory is added into params.
double autoregressive_loss(ModelParams& params, const FeatureSequence& video,
                           std::span<const int> labels, double temperature, Rng* rng,
                           bool accumulate_grad);

/// Cross-entropy of the classifier head against `labels`.
double classifier_loss(ModelParams& params, const FeatureSequence& video,
                       std::span<const int> labels, bool accumulate_grad);

/// Throws DimensionError if the video's feature width differs from the model.
void check_video(const ModelParams& params, const FeatureSequence& video);

}  // namespace actseg
