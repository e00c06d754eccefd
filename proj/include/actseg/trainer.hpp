#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "actseg/checkpoint.hpp"
#include "actseg/cross_video.hpp"
#include "actseg/model.hpp"
#include "actseg/optim.hpp"
#include "actseg/ranking.hpp"

namespace actseg {

enum class CandidatePick { kMinCost, kRandom };

struct TrainConfig {
  std::size_t epochs = 400;
  RankingConfig ranking;
  AdamConfig adam{.learning_rate = 3e-3};
  std::size_t m_steps_per_e_step = 1;
  std::uint64_t seed = 1;
  double temperature_decay = 0.999;  ///< per epoch
  double temperature_floor = 0.3;

  MatchConfig match;
  bool cross_in_loss = true;
  double cross_loss_weight = 0.1;

  std::size_t patience = 20;
  double min_improvement = 1e-4;

  /// Ablation switches: pick a random candidate instead of the cheapest one,
  /// and decode greedily (no Gumbel noise) during the E-step.
  CandidatePick pick = CandidatePick::kMinCost;
  bool greedy_e_step = false;

  /// Parallel E-step across videos; 0 keeps the OpenMP default.
  std::size_t threads = 0;

  void validate(std::size_t num_actions) const;
};

/// Mutable state carried across EM iterations.
struct TrainState {
  std::size_t epoch = 0;  ///< completed epochs
  double temperature = 1.0;
  OptimizerState optimizer;
  /// Fitted per-action length parameters; empty until first refit.
  LengthModel fitted_length;
  bool length_fitted = false;
  /// Last selected self-labels per video (dataset order); empty before the
  /// first E-step.
  std::vector<std::vector<int>> self_labels;
  /// Convergence bookkeeping, carried so a resumed run stops where an
  /// uninterrupted one would.
  double best_cost = std::numeric_limits<double>::infinity();
  std::size_t stall = 0;
};

struct VideoSelection {
  std::vector<Candidate> candidates;
  Selection ranking;
  std::size_t selected = 0;
  bool cross_degenerate = false;

  const Candidate& chosen() const { return candidates[selected]; }
};

enum class Execution { kSerial, kParallel };

/// Samples K candidate labelings per video, scores them, and selects one.
/// Pure given (params, videos, config, state); the parallel and serial
/// variants produce identical results.
std::vector<VideoSelection> e_step(const ModelParams& params,
                                   std::span<const FeatureSequence> videos,
                                   const TrainConfig& config, const TrainState& state,
                                   Execution exec = Execution::kParallel);

/// Serial reference implementation, kept for testing and benchmarking.
inline std::vector<VideoSelection> e_step_serial(const ModelParams& params,
                                                 std::span<const FeatureSequence> videos,
                                                 const TrainConfig& config,
                                                 const TrainState& state) {
  return e_step(params, videos, config, state, Execution::kSerial);
}

/// Combined training loss for one video against its self-labels:
/// autoregressive cross-entropy (rolled out with the Gumbel noise of
/// `replay_seed`, or noise-free when `replay_seed` is nullopt) + classifier
/// cross-entropy + weighted cross-video loss when enabled.
struct VideoLoss {
  double autoregressive = 0.0;
  double classifier = 0.0;
  double cross = 0.0;
  double total = 0.0;
};
VideoLoss video_loss(ModelParams& params, std::span<const FeatureSequence> videos,
                     std::span<const std::vector<int>> self_labels, std::size_t video_index,
                     std::optional<std::uint64_t> replay_seed, double temperature,
                     const TrainConfig& config, std::uint64_t cross_seed, bool accumulate_grad);

/// One pass of parameter updates on the selected self-labels. Refits the
/// length model when it is learnable. Returns the mean combined loss.
double m_step(ModelParams& params, std::span<const FeatureSequence> videos,
              std::span<const VideoSelection> selections, const TrainConfig& config,
              TrainState& state);

/// Per-action mean / standard deviation of self-label lengths (sigma floored
/// at 1). Actions absent everywhere keep `previous` values when given.
LengthModel fit_length_model(std::span<const std::vector<int>> self_labels,
                             std::size_t num_actions, const LengthModel& base);

struct EpochRecord {
  std::size_t epoch = 0;  ///< 1-based
  double temperature = 0.0;
  double mean_total = 0.0;
  double mean_c1 = 0.0;
  double mean_c2 = 0.0;
  double mean_c3 = 0.0;
  double mean_cross = 0.0;
  double mean_loss = 0.0;
  std::optional<double> mof;
  std::optional<double> f1;
  std::optional<double> jaccard;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  bool converged = false;
};

/// Called after every epoch; may fill the evaluation fields of the record.
using EpochObserver = std::function<void(EpochRecord& record, const ModelParams& params,
                                         std::span<const VideoSelection> selections)>;

struct TrainResult {
  ModelParams params;
  TrainHistory history;
  TrainState state;
};

/// Alternates e_step / m_step for config.epochs epochs or until the mean
/// selected cost has not improved by min_improvement for `patience` epochs.
/// Ground-truth labels are never read.
TrainResult train(std::span<const FeatureSequence> videos, const ModelConfig& model_config,
                  const TrainConfig& config, const EpochObserver& observer = {});

/// Continues from a checkpoint written by to_checkpoint().
TrainResult resume(std::span<const FeatureSequence> videos, const Checkpoint& ckpt,
                   const TrainConfig& config, const EpochObserver& observer = {});

Checkpoint to_checkpoint(const ModelParams& params, const TrainState& state);

}  // namespace actseg
