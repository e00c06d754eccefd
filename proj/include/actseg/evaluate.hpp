#pragma once

#include <span>
#include <string>
#include <vector>

#include "actseg/metrics.hpp"
#include "actseg/model.hpp"

namespace actseg {

/// Greedy segmentation of every video.
std::vector<ActionSequence> segment_dataset(const ModelParams& params,
                                            std::span<const FeatureSequence> videos);

struct TaskMetrics {
  std::string task_id;
  std::size_t videos = 0;
  MetricsReport report;
};

struct EvaluationSummary {
  std::vector<TaskMetrics> tasks;  ///< sorted by task_id
  double mean_mof = 0.0;
  double mean_f1 = 0.0;
  double mean_jaccard = 0.0;
};

/// Hungarian mapping pooled per task, then metrics per task and their mean.
/// `predictions[i]` belongs to `videos[i]`; every video needs gt_labels.
/// `num_symbols` of 0 infers the predicted alphabet size.
EvaluationSummary evaluate_predictions(std::span<const FeatureSequence> videos,
                                       std::span<const ActionSequence> predictions,
                                       std::size_t num_symbols = 0);

}  // namespace actseg
