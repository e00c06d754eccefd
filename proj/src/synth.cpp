#include "actseg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "actseg/error.hpp"

namespace actseg {

namespace fs = std::filesystem;

void SynthSpec::validate() const {
  if (num_tasks < 1) throw ParameterError("synth: num_tasks must be >= 1");
  if (videos_per_task < 1) throw ParameterError("synth: videos_per_task must be >= 1");
  if (num_actions < 2) throw ParameterError("synth: num_actions (k) must be >= 2");
  if (feature_dim < 1) throw ParameterError("synth: feature_dim must be >= 1");
  if (min_frames < num_actions) {
    throw ParameterError("synth: min_frames must be >= num_actions so every action fits");
  }
  if (max_frames < min_frames) throw ParameterError("synth: max_frames must be >= min_frames");
  if (!(separation > 0.0)) throw ParameterError("synth: separation must be > 0");
  if (!(noise_sigma > 0.0)) throw ParameterError("synth: noise_sigma must be > 0");
  if (!(video_shift >= 0.0)) throw ParameterError("synth: video_shift must be >= 0");
  if (!(order_jitter >= 0.0 && order_jitter <= 1.0)) {
    throw ParameterError("synth: order_jitter must lie in [0, 1]");
  }
  if (length_lambda < 0.0 || length_mu < 0.0 || length_sigma < 0.0) {
    throw ParameterError("synth: length parameters must be >= 0 (0 = automatic)");
  }
}

namespace {

std::vector<double> random_unit(std::size_t dim, Rng& rng) {
  std::vector<double> v(dim);
  double n = 0.0;
  while (n < 1e-12) {
    for (auto& x : v) x = rng.normal();
    n = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
  }
  for (auto& x : v) x /= n;
  return v;
}

Matrix make_means(std::size_t k, std::size_t dim, double radius, Rng& rng) {
  Matrix means(k, dim);
  std::vector<std::vector<double>> basis;
  for (std::size_t a = 0; a < k; ++a) {
    std::vector<double> v = random_unit(dim, rng);
    if (a < dim) {
      // Gram-Schmidt against the earlier directions (twice for stability).
      for (int pass = 0; pass < 2; ++pass) {
        for (const auto& b : basis) {
          const double dot = std::inner_product(v.begin(), v.end(), b.begin(), 0.0);
          for (std::size_t i = 0; i < dim; ++i) v[i] -= dot * b[i];
        }
      }
      const double n = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
      for (auto& x : v) x /= n;
      basis.push_back(v);
    }
    for (std::size_t i = 0; i < dim; ++i) means(a, i) = radius * v[i];
  }
  return means;
}

std::size_t draw_length(const SynthSpec& s, double lambda, double mu, double sigma, Rng& rng) {
  double x = 0.0;
  if (s.length_kind == LengthModel::Kind::kGaussian) {
    x = std::round(mu + sigma * rng.normal());
  } else {
    x = static_cast<double>(rng.poisson(lambda));
  }
  return x < 1.0 ? 1 : static_cast<std::size_t>(x);
}

}  // namespace

SynthDataset synth_generate(const SynthSpec& spec) {
  spec.validate();
  const std::size_t k = spec.num_actions;
  const std::size_t D = spec.feature_dim;
  const double auto_len = static_cast<double>(spec.min_frames + spec.max_frames) /
                          (2.0 * static_cast<double>(k));
  const double lambda = spec.length_lambda > 0.0 ? spec.length_lambda : auto_len;
  const double mu = spec.length_mu > 0.0 ? spec.length_mu : auto_len;
  const double sigma = spec.length_sigma > 0.0 ? spec.length_sigma : mu / 4.0;
  const double radius = spec.separation * spec.noise_sigma / std::sqrt(2.0);

  Rng rng(spec.seed);
  SynthDataset out;
  for (std::size_t task = 0; task < spec.num_tasks; ++task) {
    out.action_means.push_back(make_means(k, D, radius, rng));
    std::vector<int> order(k);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(std::span<int>(order));
    out.canonical_orders.push_back(order);
  }

  for (std::size_t task = 0; task < spec.num_tasks; ++task) {
    const Matrix& means = out.action_means[task];
    for (std::size_t vi = 0; vi < spec.videos_per_task; ++vi) {
      std::vector<int> order = out.canonical_orders[task];
      for (std::size_t i = 0; i + 1 < k; ++i) {
        if (rng.uniform() < spec.order_jitter) std::swap(order[i], order[i + 1]);
      }

      std::vector<std::size_t> lengths(k);
      std::size_t total = 0;
      bool accepted = false;
      for (int attempt = 0; attempt < 10000 && !accepted; ++attempt) {
        total = 0;
        for (auto& l : lengths) {
          l = draw_length(spec, lambda, mu, sigma, rng);
          total += l;
        }
        accepted = total >= spec.min_frames && total <= spec.max_frames;
      }
      if (!accepted) {
        // Rescale into range, keeping every segment non-empty.
        const double target = static_cast<double>(
            std::clamp(total, spec.min_frames, spec.max_frames));
        const double f = target / static_cast<double>(total);
        total = 0;
        for (auto& l : lengths) {
          l = std::max<std::size_t>(1, static_cast<std::size_t>(std::round(l * f)));
          total += l;
        }
        while (total > spec.max_frames) {
          auto it = std::max_element(lengths.begin(), lengths.end());
          --*it;
          --total;
        }
        while (total < spec.min_frames) {
          ++lengths[total % k];
          ++total;
        }
      }

      std::vector<double> offset = random_unit(D, rng);
      for (auto& x : offset) x *= spec.video_shift * spec.noise_sigma;

      FeatureSequence v;
      v.task_id = "task" + std::to_string(task);
      char id[64];
      std::snprintf(id, sizeof id, "task%zu_video%03zu", task, vi);
      v.video_id = id;
      v.features = Matrix(total, D);
      std::vector<int> gt;
      gt.reserve(total);
      std::size_t t = 0;
      for (std::size_t seg = 0; seg < k; ++seg) {
        const int a = order[seg];
        for (std::size_t j = 0; j < lengths[seg]; ++j, ++t) {
          for (std::size_t d = 0; d < D; ++d) {
            v.features(t, d) = means(static_cast<std::size_t>(a), d) + offset[d] +
                               spec.noise_sigma * rng.normal();
          }
          gt.push_back(a);
        }
      }
      v.gt_labels = std::move(gt);
      out.videos.push_back(std::move(v));
      out.video_offsets.push_back(std::move(offset));
      out.segment_lengths.push_back(lengths);
    }
  }
  return out;
}

fs::path write_dataset(const fs::path& dir, const std::vector<FeatureSequence>& videos,
                       std::size_t num_actions) {
  fs::create_directories(dir / "features");
  fs::create_directories(dir / "labels");
  DatasetManifest m;
  m.num_actions = num_actions;
  m.feature_dim = videos.empty() ? 0 : videos.front().dim();
  for (const auto& v : videos) {
    ManifestEntry e;
    e.video_id = v.video_id;
    e.task_id = v.task_id;
    e.features_path = "features/" + v.video_id + ".segf";
    save_features(dir / e.features_path, v.features);
    if (v.gt_labels) {
      e.labels_path = "labels/" + v.video_id + ".txt";
      save_labels(dir / *e.labels_path, *v.gt_labels);
    }
    m.entries.push_back(std::move(e));
  }
  const fs::path manifest = dir / "manifest.tsv";
  save_manifest(manifest, m);
  return manifest;
}

}  // namespace actseg
