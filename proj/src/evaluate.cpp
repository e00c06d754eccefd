#include "actseg/evaluate.hpp"

#include <algorithm>
#include <map>

#include "actseg/error.hpp"

namespace actseg {

std::vector<ActionSequence> segment_dataset(const ModelParams& params,
                                            std::span<const FeatureSequence> videos) {
  std::vector<ActionSequence> out(videos.size());
  const auto n = static_cast<std::ptrdiff_t>(videos.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    out[i] = generate_sequence(params, videos[i], DecodeMode::kGreedy,
                               params.config.temperature, nullptr);
  }
  return out;
}

EvaluationSummary evaluate_predictions(std::span<const FeatureSequence> videos,
                                       std::span<const ActionSequence> predictions,
                                       std::size_t num_symbols) {
  if (videos.size() != predictions.size()) {
    throw InputError("evaluate: " + std::to_string(predictions.size()) + " predictions for " +
                     std::to_string(videos.size()) + " videos");
  }
  std::map<std::string, std::vector<std::size_t>> by_task;
  std::size_t num_classes = 0;
  for (std::size_t i = 0; i < videos.size(); ++i) {
    const auto& v = videos[i];
    if (!v.gt_labels) throw InputError("video '" + v.video_id + "' has no ground-truth labels");
    if (predictions[i].length() != v.length()) {
      throw LengthError("prediction for '" + v.video_id + "' has " +
                        std::to_string(predictions[i].length()) + " frames, expected " +
                        std::to_string(v.length()));
    }
    for (int g : *v.gt_labels) num_classes = std::max(num_classes, static_cast<std::size_t>(g) + 1);
    by_task[v.task_id].push_back(i);
  }
  if (num_symbols == 0) {
    for (const auto& p : predictions) {
      for (int s : p.labels) num_symbols = std::max(num_symbols, static_cast<std::size_t>(s) + 1);
    }
  }

  EvaluationSummary summary;
  for (const auto& [task, idx] : by_task) {
    std::vector<LabeledPair> pairs;
    std::size_t task_classes = 0;
    for (std::size_t i : idx) {
      pairs.push_back({predictions[i].labels, *videos[i].gt_labels});
      for (int g : *videos[i].gt_labels) {
        task_classes = std::max(task_classes, static_cast<std::size_t>(g) + 1);
      }
    }
    const LabelMapping mapping = map_labels(pairs, num_symbols, task_classes);
    TaskMetrics tm;
    tm.task_id = task;
    tm.videos = idx.size();
    tm.report = compute_metrics(pairs, mapping, task_classes);
    summary.mean_mof += tm.report.mof;
    summary.mean_f1 += tm.report.f1;
    summary.mean_jaccard += tm.report.jaccard;
    summary.tasks.push_back(std::move(tm));
  }
  if (!summary.tasks.empty()) {
    const double inv = 1.0 / static_cast<double>(summary.tasks.size());
    summary.mean_mof *= inv;
    summary.mean_f1 *= inv;
    summary.mean_jaccard *= inv;
  }
  return summary;
}

}  // namespace actseg
