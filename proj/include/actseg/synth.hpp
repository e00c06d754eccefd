#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "actseg/data_io.hpp"
#include "actseg/model.hpp"
#include "actseg/ranking.hpp"

namespace actseg {

/// Parameters of the synthetic instructional-task generator.
///
/// Every task has k actions with task-global feature means placed on mutually
/// orthogonal directions (pairwise distance = separation * noise_sigma when
/// k <= D). Each video draws an action order (the task's canonical order with
/// adjacent swaps), per-action segment lengths, a per-video appearance offset
/// of norm video_shift * noise_sigma, and isotropic Gaussian frame noise.
struct SynthSpec {
  std::size_t num_tasks = 1;
  std::size_t videos_per_task = 20;
  std::size_t num_actions = 4;
  std::size_t feature_dim = 16;
  std::size_t min_frames = 60;
  std::size_t max_frames = 100;
  LengthModel::Kind length_kind = LengthModel::Kind::kPoisson;
  double length_lambda = 0.0;  ///< 0: (min_frames + max_frames) / (2k)
  double length_mu = 0.0;      ///< 0: (min_frames + max_frames) / (2k)
  double length_sigma = 0.0;   ///< 0: mu / 4
  double separation = 6.0;
  double noise_sigma = 1.0;
  double video_shift = 1.0;
  double order_jitter = 0.1;
  std::uint64_t seed = 7;

  void validate() const;
};

struct SynthDataset {
  std::vector<FeatureSequence> videos;            ///< gt_labels always set
  std::vector<Matrix> action_means;               ///< per task, k x D
  std::vector<std::vector<int>> canonical_orders;  ///< per task
  std::vector<std::vector<double>> video_offsets;  ///< per video, D
  std::vector<std::vector<std::size_t>> segment_lengths;  ///< per video, in order
};

/// Pure function of the settings, including the seed.
SynthDataset synth_generate(const SynthSpec& spec);

/// Writes features/<id>.segf and labels/<id>.txt under `dir` plus
/// dir/manifest.tsv; returns the manifest path.
std::filesystem::path write_dataset(const std::filesystem::path& dir,
                                    const std::vector<FeatureSequence>& videos,
                                    std::size_t num_actions);

}  // namespace actseg
