#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "actseg/model.hpp"
#include "actseg/tensor.hpp"

namespace actseg {

/// Duration prior used by the length cost.
struct LengthModel {
  enum class Kind { kMeanDeviation, kPoisson, kGaussian };

  Kind kind = Kind::kGaussian;
  /// Per-action parameters. Empty vectors mean "derive from the video":
  /// lambda = mu = T/|O| and sigma = T/(2|O|).
  std::vector<double> lambda;
  std::vector<double> mu;
  std::vector<double> sigma;
  bool learnable = false;

  /// Copy with defaults filled in for a video of `frames` frames.
  LengthModel resolved(std::size_t frames, std::size_t num_actions) const;
  /// Throws ParameterError on nonpositive or missing parameters.
  void validate(std::size_t num_actions) const;
};

LengthModel::Kind parse_length_kind(const std::string& name);
std::string to_string(LengthModel::Kind kind);

/// Frames per action (total count, not per contiguous run).
std::vector<std::size_t> action_lengths(std::span<const int> labels, std::size_t num_actions);

/// |O| minus the number of distinct actions present.
double cost_occurrence(std::span<const int> labels, std::size_t num_actions);

/// Poisson/Gaussian: sum over actions of 1 - p(L_a). Poisson p is the pmf;
/// Gaussian p is exp(-(L-mu)^2 / (2 sigma^2)) so that p(mu) = 1.
/// Mean deviation: sum over actions of |L_a - T/|O|| / T.
/// Absent actions contribute with L = 0. `model` must be resolved.
double cost_length(std::span<const int> labels, std::size_t num_actions,
                   const LengthModel& model);

/// Likelihood term used by cost_length for one action.
double length_likelihood(const LengthModel& model, std::size_t action, double length);

/// sum_t (1 - frame_probs(t, labels[t])).
double cost_probability(std::span<const int> labels, const Matrix& frame_probs);

struct RankingConfig {
  /// nullopt selects the defaults: gamma1 = 1/|O|, gamma2 = gamma3 = gamma_cross = 1/T.
  std::optional<double> gamma1;
  std::optional<double> gamma2;
  std::optional<double> gamma3;
  std::optional<double> gamma_cross;
  std::size_t num_candidates = 16;  ///< K
  LengthModel length_model;
  bool cross_video_in_cost = false;

  void validate(std::size_t num_actions) const;
};

struct CostWeights {
  double occurrence = 0.0;
  double length = 0.0;
  double probability = 0.0;
  double cross = 0.0;
};

CostWeights resolve_weights(const RankingConfig& config, std::size_t frames,
                            std::size_t num_actions);

/// One scored labeling of a video.
struct Candidate {
  ActionSequence labels;
  double c1 = 0.0;
  double c2 = 0.0;
  double c3 = 0.0;
  double c_cross = 0.0;
  double total = 0.0;
  std::uint64_t seed = 0;  ///< noise seed that produced this labeling
};

/// Fills c1..c3 and the weighted total. `c_cross` is added with its weight
/// only when config.cross_video_in_cost is set.
Candidate total_cost(ActionSequence labels, const Matrix& frame_probs,
                     const RankingConfig& config, std::size_t num_actions,
                     const LengthModel& resolved_length, double c_cross = 0.0);

/// Recomputes the weighted total from a candidate's parts.
double recompute_total(const Candidate& c, const CostWeights& w, bool with_cross);

struct Selection {
  std::size_t best = 0;
  std::vector<std::size_t> ranked;  ///< candidate indices, ascending total
};

/// Minimum total wins; ties go to the lower index. Throws InputError when empty.
Selection select_best(std::span<const Candidate> candidates);

}  // namespace actseg
