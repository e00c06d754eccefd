#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "actseg/tensor.hpp"

namespace actseg {

struct Assignment {
  std::vector<int> row_to_col;  ///< -1 when the row was matched to padding
  double cost = 0.0;            ///< sum of the chosen real entries, row order
};

/// Minimum-cost assignment. Rectangular inputs are padded to square with the
/// largest entry of the matrix (any constant leaves the argmin unchanged).
/// Among optimal assignments the lexicographically smallest row_to_col is
/// returned. Throws InputError on non-finite entries.
Assignment hungarian(const Matrix& cost);

/// Predicted symbol -> ground-truth class; kUnmatched for symbols that got no
/// class.
struct LabelMapping {
  static constexpr int kUnmatched = -1;
  std::vector<int> map;

  int apply(int symbol) const {
    return symbol >= 0 && static_cast<std::size_t>(symbol) < map.size() ? map[symbol]
                                                                       : kUnmatched;
  }
};

/// One prediction/ground-truth pair of equal length.
struct LabeledPair {
  std::span<const int> pred;
  std::span<const int> gt;
};

/// Hungarian mapping maximizing frame co-occurrence, pooled over all pairs.
/// `num_symbols` / `num_classes` of 0 are inferred from the data.
LabelMapping map_labels(std::span<const LabeledPair> pairs, std::size_t num_symbols = 0,
                        std::size_t num_classes = 0);
LabelMapping map_labels(std::span<const int> pred, std::span<const int> gt,
                        std::size_t num_symbols = 0, std::size_t num_classes = 0);

struct MetricsReport {
  double mof = 0.0;
  double f1 = 0.0;
  double jaccard = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  std::vector<double> per_class_jaccard;  ///< NaN for classes absent from gt
  std::size_t frames = 0;
  LabelMapping mapping;
};

/// MoF, Jaccard (mean IoU over classes present in gt) and segment F1
/// (IoU > 0.5 with a same-class gt segment, each gt segment matched once),
/// pooled over all pairs.
MetricsReport compute_metrics(std::span<const LabeledPair> pairs, const LabelMapping& mapping,
                              std::size_t num_classes = 0);
MetricsReport compute_metrics(std::span<const int> pred, std::span<const int> gt,
                              const LabelMapping& mapping, std::size_t num_classes = 0);

/// Half-open run [start, end) of one label.
struct Segment {
  int label = 0;
  std::size_t start = 0;
  std::size_t end = 0;
};
std::vector<Segment> segments_of(std::span<const int> labels);

}  // namespace actseg
