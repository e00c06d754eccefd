#include "actseg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "actseg/error.hpp"

namespace actseg {

namespace {

// Stream tags for derive_seed so that each consumer gets an independent stream.
constexpr std::uint64_t kTagCandidate = 1;
constexpr std::uint64_t kTagPick = 2;
constexpr std::uint64_t kTagCrossCost = 3;
constexpr std::uint64_t kTagCrossLoss = 4;
constexpr std::uint64_t kTagShuffle = 5;
constexpr std::uint64_t kTagInit = 6;

std::uint64_t candidate_seed(std::uint64_t seed, std::size_t epoch, std::size_t video,
                             std::size_t k) {
  return derive_seed(seed, kTagCandidate, (static_cast<std::uint64_t>(epoch) << 32) | video, k);
}

const ParamArray* projection_of(const ModelParams& p) {
  return p.cross_projection ? &*p.cross_projection : nullptr;
}

}  // namespace

void TrainConfig::validate(std::size_t num_actions) const {
  if (epochs < 1) throw ParameterError("epochs must be >= 1");
  if (m_steps_per_e_step < 1) throw ParameterError("m_steps_per_e_step must be >= 1");
  if (patience < 1) throw ParameterError("patience must be >= 1");
  if (!(temperature_decay > 0.0 && temperature_decay <= 1.0)) {
    throw ParameterError("temperature_decay must lie in (0, 1]");
  }
  if (!(temperature_floor > 0.0)) throw ParameterError("temperature_floor must be > 0");
  if (!(cross_loss_weight >= 0.0)) throw ParameterError("cross_loss_weight must be >= 0");
  ranking.validate(num_actions);
  match.validate();
}

std::vector<VideoSelection> e_step(const ModelParams& params,
                                   std::span<const FeatureSequence> videos,
                                   const TrainConfig& config, const TrainState& state,
                                   Execution exec) {
  const std::size_t O = params.config.num_actions;
  const std::size_t K = config.ranking.num_candidates;
  const bool cross_cost = config.ranking.cross_video_in_cost && !state.self_labels.empty();
  for (const auto& v : videos) check_video(params, v);

  // Reference segments from the previous selection, shared read-only.
  std::vector<std::vector<SegmentEmbedding>> reference;
  if (cross_cost) {
    reference.resize(videos.size());
    for (std::size_t i = 0; i < videos.size(); ++i) {
      reference[i] = pool_segments(videos[i], state.self_labels[i], projection_of(params));
    }
  }

  std::vector<VideoSelection> out(videos.size());
  auto process = [&](std::size_t vi) {
    const FeatureSequence& video = videos[vi];
    const Matrix probs = classify_frames(params, video);
    const LengthModel length = state.length_fitted
                                   ? state.fitted_length.resolved(video.length(), O)
                                   : config.ranking.length_model.resolved(video.length(), O);
    std::vector<SegmentEmbedding> others;
    if (cross_cost) {
      for (std::size_t j = 0; j < videos.size(); ++j) {
        if (j == vi) continue;
        others.insert(others.end(), reference[j].begin(), reference[j].end());
      }
    }
    VideoSelection& sel = out[vi];
    sel.candidates.reserve(K);
    for (std::size_t k = 0; k < K; ++k) {
      const std::uint64_t seed = candidate_seed(config.seed, state.epoch, vi, k);
      Rng rng(seed);
      ActionSequence labels =
          config.greedy_e_step
              ? generate_sequence(params, video, DecodeMode::kGreedy, state.temperature, nullptr)
              : generate_sequence(params, video, DecodeMode::kStochastic, state.temperature,
                                  &rng);
      double c_cross = 0.0;
      if (cross_cost) {
        auto segs = pool_segments(video, labels.labels, projection_of(params));
        segs.insert(segs.end(), others.begin(), others.end());
        Rng cross_rng(derive_seed(seed, kTagCrossCost));
        const auto r = cross_video_term(segs, config.match, &cross_rng, video.video_id);
        c_cross = r.value;
        sel.cross_degenerate = sel.cross_degenerate || r.degenerate;
      }
      Candidate c = total_cost(std::move(labels), probs, config.ranking, O, length, c_cross);
      c.seed = seed;
      sel.candidates.push_back(std::move(c));
    }
    sel.ranking = select_best(sel.candidates);
    if (config.pick == CandidatePick::kRandom) {
      Rng pick(derive_seed(config.seed, kTagPick, state.epoch, vi));
      sel.selected = static_cast<std::size_t>(pick.below(K));
    } else {
      sel.selected = sel.ranking.best;
    }
  };

  const auto n = static_cast<std::ptrdiff_t>(videos.size());
  if (exec == Execution::kParallel) {
#ifdef _OPENMP
    const int threads = config.threads > 0 ? static_cast<int>(config.threads) : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
#endif
    for (std::ptrdiff_t i = 0; i < n; ++i) process(static_cast<std::size_t>(i));
  } else {
    for (std::ptrdiff_t i = 0; i < n; ++i) process(static_cast<std::size_t>(i));
  }
  return out;
}

VideoLoss video_loss(ModelParams& params, std::span<const FeatureSequence> videos,
                     std::span<const std::vector<int>> self_labels, std::size_t video_index,
                     std::optional<std::uint64_t> replay_seed, double temperature,
                     const TrainConfig& config, std::uint64_t cross_seed, bool accumulate_grad) {
  const FeatureSequence& video = videos[video_index];
  const auto& labels = self_labels[video_index];
  VideoLoss loss;
  if (replay_seed) {
    Rng rng(*replay_seed);
    loss.autoregressive =
        autoregressive_loss(params, video, labels, temperature, &rng, accumulate_grad);
  } else {
    loss.autoregressive =
        autoregressive_loss(params, video, labels, temperature, nullptr, accumulate_grad);
  }
  loss.classifier = classifier_loss(params, video, labels, accumulate_grad);

  if (config.cross_in_loss && config.cross_loss_weight > 0.0 && videos.size() > 1) {
    const ParamArray* proj = projection_of(params);
    std::vector<SegmentEmbedding> segs;
    for (std::size_t j = 0; j < videos.size(); ++j) {
      auto s = pool_segments(videos[j], self_labels[j], proj);
      segs.insert(segs.end(), std::make_move_iterator(s.begin()),
                  std::make_move_iterator(s.end()));
    }
    Rng rng(cross_seed);
    const bool grad = accumulate_grad && params.cross_projection.has_value();
    const auto r = cross_video_term(segs, config.match, &rng, video.video_id, grad);
    loss.cross = r.value;
    if (grad) {
      accumulate_projection_grad(*params.cross_projection, segs, r.grad,
                                 config.cross_loss_weight);
    }
  }
  loss.total = loss.autoregressive + loss.classifier + config.cross_loss_weight * loss.cross;
  if (!std::isfinite(loss.total)) {
    throw NumericError("non-finite training loss on video '" + video.video_id + "'");
  }
  return loss;
}

LengthModel fit_length_model(std::span<const std::vector<int>> self_labels,
                             std::size_t num_actions, const LengthModel& base) {
  LengthModel out = base;
  std::vector<double> sum(num_actions, 0.0), sumsq(num_actions, 0.0);
  std::vector<std::size_t> n(num_actions, 0);
  for (const auto& labels : self_labels) {
    const auto counts = action_lengths(labels, num_actions);
    for (std::size_t a = 0; a < num_actions; ++a) {
      if (counts[a] == 0) continue;
      const double c = static_cast<double>(counts[a]);
      sum[a] += c;
      sumsq[a] += c * c;
      ++n[a];
    }
  }
  auto keep = [&](const std::vector<double>& v, std::size_t a, double fallback) {
    return v.size() == num_actions ? v[a] : fallback;
  };
  std::vector<double> mu(num_actions), sigma(num_actions), lambda(num_actions);
  for (std::size_t a = 0; a < num_actions; ++a) {
    if (n[a] == 0) {
      mu[a] = keep(base.mu, a, 1.0);
      sigma[a] = keep(base.sigma, a, 1.0);
      lambda[a] = keep(base.lambda, a, 1.0);
      continue;
    }
    const double m = sum[a] / static_cast<double>(n[a]);
    const double var = std::max(0.0, sumsq[a] / static_cast<double>(n[a]) - m * m);
    mu[a] = m;
    lambda[a] = m;
    sigma[a] = std::max(1.0, std::sqrt(var));
  }
  out.mu = std::move(mu);
  out.sigma = std::move(sigma);
  out.lambda = std::move(lambda);
  return out;
}

double m_step(ModelParams& params, std::span<const FeatureSequence> videos,
              std::span<const VideoSelection> selections, const TrainConfig& config,
              TrainState& state) {
  if (selections.size() != videos.size()) {
    throw InputError("m_step: self-labels do not cover every video");
  }
  std::vector<std::vector<int>> labels(videos.size());
  for (std::size_t i = 0; i < videos.size(); ++i) labels[i] = selections[i].chosen().labels.labels;

  std::vector<std::size_t> order(videos.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng shuffle(derive_seed(config.seed, kTagShuffle, state.epoch));
  shuffle.shuffle(std::span<std::size_t>(order));

  state.optimizer.config = config.adam;
  auto all = params.all_params();
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t vi : order) {
    const std::optional<std::uint64_t> replay =
        config.greedy_e_step ? std::nullopt
                             : std::optional<std::uint64_t>(selections[vi].chosen().seed);
    for (std::size_t s = 0; s < config.m_steps_per_e_step; ++s) {
      params.zero_grad();
      const VideoLoss l =
          video_loss(params, videos, labels, vi, replay, state.temperature, config,
                     derive_seed(config.seed, kTagCrossLoss, state.epoch, vi * 131 + s), true);
      adam_step(all, state.optimizer);
      total += l.total;
      ++count;
    }
  }
  if (config.ranking.length_model.learnable) {
    state.fitted_length =
        fit_length_model(labels, params.config.num_actions,
                         state.length_fitted ? state.fitted_length : config.ranking.length_model);
    state.length_fitted = true;
  }
  state.self_labels = std::move(labels);
  return count ? total / static_cast<double>(count) : 0.0;
}

namespace {

TrainResult run_epochs(std::span<const FeatureSequence> videos, ModelParams params,
                       TrainState state, const TrainConfig& config,
                       const EpochObserver& observer) {
  config.validate(params.config.num_actions);
  TrainResult result;
  while (state.epoch < config.epochs) {
    const auto selections = e_step(params, videos, config, state);
    EpochRecord rec;
    rec.epoch = state.epoch + 1;
    rec.temperature = state.temperature;
    for (const auto& s : selections) {
      const Candidate& c = s.chosen();
      rec.mean_total += c.total;
      rec.mean_c1 += c.c1;
      rec.mean_c2 += c.c2;
      rec.mean_c3 += c.c3;
      rec.mean_cross += c.c_cross;
    }
    const double inv = 1.0 / static_cast<double>(videos.size());
    rec.mean_total *= inv;
    rec.mean_c1 *= inv;
    rec.mean_c2 *= inv;
    rec.mean_c3 *= inv;
    rec.mean_cross *= inv;

    rec.mean_loss = m_step(params, videos, selections, config, state);
    ++state.epoch;
    state.temperature = std::max(config.temperature_floor,
                                 state.temperature * config.temperature_decay);
    if (observer) observer(rec, params, selections);
    result.history.epochs.push_back(rec);

    if (rec.mean_total < state.best_cost - config.min_improvement) {
      state.best_cost = rec.mean_total;
      state.stall = 0;
    } else if (++state.stall >= config.patience) {
      result.history.converged = true;
      break;
    }
  }
  result.params = std::move(params);
  result.state = std::move(state);
  return result;
}

void check_dataset(std::span<const FeatureSequence> videos, std::size_t feature_dim) {
  if (videos.empty()) throw InputError("training dataset is empty");
  for (const auto& v : videos) {
    if (v.length() == 0) throw InputError("video '" + v.video_id + "' has no frames");
    if (v.dim() != feature_dim) {
      throw DimensionError("video '" + v.video_id + "' has feature dim " +
                           std::to_string(v.dim()) + ", expected " +
                           std::to_string(feature_dim));
    }
  }
}

ParamArray to_array(const std::string& name, std::span<const double> v) {
  ParamArray p(name, {v.size()});
  std::copy(v.begin(), v.end(), p.values.begin());
  return p;
}

}  // namespace

TrainResult train(std::span<const FeatureSequence> videos, const ModelConfig& model_config,
                  const TrainConfig& config, const EpochObserver& observer) {
  model_config.validate();
  check_dataset(videos, model_config.feature_dim);
  Rng init(derive_seed(config.seed, kTagInit));
  ModelParams params = init_model(model_config, init);
  TrainState state;
  state.temperature = model_config.temperature;
  state.optimizer.config = config.adam;
  return run_epochs(videos, std::move(params), std::move(state), config, observer);
}

Checkpoint to_checkpoint(const ModelParams& params, const TrainState& state) {
  Checkpoint ckpt;
  ckpt.params = params;
  ckpt.epoch = static_cast<std::uint32_t>(state.epoch);
  ckpt.temperature = state.temperature;
  const auto names = params.all_params();
  const double step = static_cast<double>(state.optimizer.step);
  ckpt.extras.push_back(to_array("adam.step", std::span<const double>(&step, 1)));
  const double progress[2] = {state.best_cost, static_cast<double>(state.stall)};
  ckpt.extras.push_back(to_array("train.progress", progress));
  for (std::size_t i = 0; i < state.optimizer.first_moment.size(); ++i) {
    ckpt.extras.push_back(to_array("adam.m." + names[i]->name, state.optimizer.first_moment[i]));
    ckpt.extras.push_back(to_array("adam.v." + names[i]->name, state.optimizer.second_moment[i]));
  }
  if (state.length_fitted) {
    ckpt.extras.push_back(to_array("length.mu", state.fitted_length.mu));
    ckpt.extras.push_back(to_array("length.sigma", state.fitted_length.sigma));
    ckpt.extras.push_back(to_array("length.lambda", state.fitted_length.lambda));
  }
  for (std::size_t i = 0; i < state.self_labels.size(); ++i) {
    std::vector<double> l(state.self_labels[i].begin(), state.self_labels[i].end());
    ckpt.extras.push_back(to_array("self_labels." + std::to_string(i), l));
  }
  return ckpt;
}

TrainResult resume(std::span<const FeatureSequence> videos, const Checkpoint& ckpt,
                   const TrainConfig& config, const EpochObserver& observer) {
  check_dataset(videos, ckpt.params.config.feature_dim);
  TrainState state;
  state.epoch = ckpt.epoch;
  state.temperature = ckpt.temperature;
  state.optimizer.config = config.adam;
  auto find = [&](const std::string& name) -> const ParamArray* {
    for (const auto& p : ckpt.extras) {
      if (p.name == name) return &p;
    }
    return nullptr;
  };
  if (const ParamArray* step = find("adam.step")) {
    state.optimizer.step = static_cast<std::uint64_t>(step->values.at(0));
    for (const ParamArray* p : ckpt.params.all_params()) {
      const ParamArray* m = find("adam.m." + p->name);
      const ParamArray* v = find("adam.v." + p->name);
      if (!m || !v) {
        state.optimizer.first_moment.clear();
        state.optimizer.second_moment.clear();
        break;
      }
      state.optimizer.first_moment.push_back(m->values);
      state.optimizer.second_moment.push_back(v->values);
    }
    if (state.optimizer.first_moment.empty()) state.optimizer.step = 0;
  }
  if (const ParamArray* progress = find("train.progress")) {
    state.best_cost = progress->values.at(0);
    state.stall = static_cast<std::size_t>(progress->values.at(1));
  }
  const ParamArray* mu = find("length.mu");
  const ParamArray* sigma = find("length.sigma");
  const ParamArray* lambda = find("length.lambda");
  if (mu && sigma && lambda) {
    state.fitted_length = config.ranking.length_model;
    state.fitted_length.mu = mu->values;
    state.fitted_length.sigma = sigma->values;
    state.fitted_length.lambda = lambda->values;
    state.length_fitted = true;
  }
  for (std::size_t i = 0;; ++i) {
    const ParamArray* l = find("self_labels." + std::to_string(i));
    if (!l) break;
    state.self_labels.emplace_back(l->values.begin(), l->values.end());
  }
  if (!state.self_labels.empty() && state.self_labels.size() != videos.size()) {
    state.self_labels.clear();
  }
  return run_epochs(videos, ckpt.params, std::move(state), config, observer);
}

}  // namespace actseg
