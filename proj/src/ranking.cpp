#include "actseg/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "actseg/error.hpp"

namespace actseg {

LengthModel::Kind parse_length_kind(const std::string& name) {
  if (name == "mean") return LengthModel::Kind::kMeanDeviation;
  if (name == "poisson") return LengthModel::Kind::kPoisson;
  if (name == "gaussian") return LengthModel::Kind::kGaussian;
  throw ParameterError("unknown length model '" + name + "' (expected mean|poisson|gaussian)");
}

std::string to_string(LengthModel::Kind kind) {
  switch (kind) {
    case LengthModel::Kind::kMeanDeviation: return "mean";
    case LengthModel::Kind::kPoisson: return "poisson";
    case LengthModel::Kind::kGaussian: return "gaussian";
  }
  return "?";
}

LengthModel LengthModel::resolved(std::size_t frames, std::size_t num_actions) const {
  LengthModel out = *this;
  const double avg = static_cast<double>(frames) / static_cast<double>(num_actions);
  if (out.lambda.empty()) out.lambda.assign(num_actions, avg);
  if (out.mu.empty()) out.mu.assign(num_actions, avg);
  if (out.sigma.empty()) out.sigma.assign(num_actions, avg / 2.0);
  return out;
}

void LengthModel::validate(std::size_t num_actions) const {
  auto check = [&](const std::vector<double>& v, const char* what) {
    if (v.empty()) return;
    if (v.size() != num_actions) {
      throw ParameterError(std::string("length model: ") + what + " has " +
                           std::to_string(v.size()) + " entries for " +
                           std::to_string(num_actions) + " actions");
    }
    for (double x : v) {
      if (!(x > 0.0) || !std::isfinite(x)) {
        throw ParameterError(std::string("length model: ") + what + " must be > 0, got " +
                             std::to_string(x));
      }
    }
  };
  check(lambda, "lambda");
  check(mu, "mu");
  check(sigma, "sigma");
}

std::vector<std::size_t> action_lengths(std::span<const int> labels, std::size_t num_actions) {
  std::vector<std::size_t> counts(num_actions, 0);
  for (int a : labels) {
    if (a < 0 || static_cast<std::size_t>(a) >= num_actions) {
      throw LabelError("action " + std::to_string(a) + " outside [0, " +
                       std::to_string(num_actions) + ")");
    }
    ++counts[static_cast<std::size_t>(a)];
  }
  return counts;
}

double cost_occurrence(std::span<const int> labels, std::size_t num_actions) {
  const auto counts = action_lengths(labels, num_actions);
  const auto present = std::count_if(counts.begin(), counts.end(), [](auto n) { return n > 0; });
  return static_cast<double>(num_actions) - static_cast<double>(present);
}

double length_likelihood(const LengthModel& model, std::size_t action, double length) {
  switch (model.kind) {
    case LengthModel::Kind::kPoisson: {
      const double lam = model.lambda.at(action);
      if (!(lam > 0.0)) throw ParameterError("poisson lambda must be > 0");
      return std::exp(length * std::log(lam) - lam - std::lgamma(length + 1.0));
    }
    case LengthModel::Kind::kGaussian: {
      const double mu = model.mu.at(action);
      const double sigma = model.sigma.at(action);
      if (!(mu > 0.0) || !(sigma > 0.0)) throw ParameterError("gaussian mu/sigma must be > 0");
      const double z = (length - mu) / sigma;
      return std::exp(-0.5 * z * z);
    }
    case LengthModel::Kind::kMeanDeviation:
      break;
  }
  throw ParameterError("length_likelihood is undefined for the mean-deviation model");
}

double cost_length(std::span<const int> labels, std::size_t num_actions,
                   const LengthModel& model) {
  const auto counts = action_lengths(labels, num_actions);
  if (model.kind == LengthModel::Kind::kMeanDeviation) {
    if (labels.empty()) return 0.0;
    const double T = static_cast<double>(labels.size());
    const double avg = T / static_cast<double>(num_actions);
    double sum = 0.0;
    for (auto n : counts) sum += std::abs(static_cast<double>(n) - avg);
    return sum / T;
  }
  model.validate(num_actions);
  double sum = 0.0;
  for (std::size_t a = 0; a < num_actions; ++a) {
    sum += 1.0 - length_likelihood(model, a, static_cast<double>(counts[a]));
  }
  return sum;
}

double cost_probability(std::span<const int> labels, const Matrix& frame_probs) {
  if (labels.size() != frame_probs.rows()) {
    throw InputError("cost_probability: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(frame_probs.rows()) + " probability rows");
  }
  double sum = 0.0;
  for (std::size_t t = 0; t < labels.size(); ++t) {
    const int a = labels[t];
    if (a < 0 || static_cast<std::size_t>(a) >= frame_probs.cols()) {
      throw LabelError("action " + std::to_string(a) + " outside probability columns");
    }
    sum += 1.0 - frame_probs(t, static_cast<std::size_t>(a));
  }
  return sum;
}

void RankingConfig::validate(std::size_t num_actions) const {
  for (const auto& g : {gamma1, gamma2, gamma3, gamma_cross}) {
    if (g && !(*g >= 0.0)) throw ParameterError("cost weights must be >= 0");
  }
  const bool any = (!gamma1 || *gamma1 > 0) || (!gamma2 || *gamma2 > 0) ||
                   (!gamma3 || *gamma3 > 0) ||
                   (cross_video_in_cost && (!gamma_cross || *gamma_cross > 0));
  if (!any) throw ParameterError("at least one cost weight must be > 0");
  if (num_candidates < 1) throw ParameterError("K (num_candidates) must be >= 1");
  length_model.validate(num_actions);
}

CostWeights resolve_weights(const RankingConfig& config, std::size_t frames,
                            std::size_t num_actions) {
  const double inv_t = 1.0 / static_cast<double>(std::max<std::size_t>(frames, 1));
  CostWeights w;
  w.occurrence = config.gamma1.value_or(1.0 / static_cast<double>(num_actions));
  w.length = config.gamma2.value_or(inv_t);
  w.probability = config.gamma3.value_or(inv_t);
  w.cross = config.gamma_cross.value_or(inv_t);
  return w;
}

double recompute_total(const Candidate& c, const CostWeights& w, bool with_cross) {
  double total = w.occurrence * c.c1 + w.length * c.c2 + w.probability * c.c3;
  if (with_cross) total += w.cross * c.c_cross;
  return total;
}

Candidate total_cost(ActionSequence labels, const Matrix& frame_probs,
                     const RankingConfig& config, std::size_t num_actions,
                     const LengthModel& resolved_length, double c_cross) {
  Candidate c;
  const std::size_t T = labels.length();
  const CostWeights w = resolve_weights(config, T, num_actions);
  c.c1 = cost_occurrence(labels.labels, num_actions);
  c.c2 = cost_length(labels.labels, num_actions, resolved_length);
  c.c3 = cost_probability(labels.labels, frame_probs);
  c.c_cross = c_cross;
  c.labels = std::move(labels);
  c.total = recompute_total(c, w, config.cross_video_in_cost);
  return c;
}

Selection select_best(std::span<const Candidate> candidates) {
  if (candidates.empty()) throw InputError("select_best: no candidates");
  Selection s;
  s.ranked.resize(candidates.size());
  std::iota(s.ranked.begin(), s.ranked.end(), std::size_t{0});
  std::stable_sort(s.ranked.begin(), s.ranked.end(), [&](std::size_t a, std::size_t b) {
    return candidates[a].total < candidates[b].total;
  });
  s.best = s.ranked.front();
  return s;
}

}  // namespace actseg
