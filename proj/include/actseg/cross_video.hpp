#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "actseg/model.hpp"
#include "actseg/rng.hpp"

namespace actseg {

/// Pooled representation of one contiguous same-label run.
struct SegmentEmbedding {
  std::string video_id;
  int action = 0;
  std::vector<double> vector;   ///< mean feature (optionally projected)
  std::vector<double> mean_raw;  ///< mean raw feature over the span
  std::size_t start = 0;        ///< inclusive
  std::size_t end = 0;          ///< exclusive
};

/// One embedding per maximal run of equal labels; spans partition [0, T).
/// With a projection P (D x P), vector = P^T mean_raw.
std::vector<SegmentEmbedding> pool_segments(const FeatureSequence& video,
                                            std::span<const int> labels,
                                            const ParamArray* projection = nullptr);

struct MatchConfig {
  enum class Kind { kTriplet, kContrastive };
  Kind kind = Kind::kTriplet;
  double margin = 1.0;
  /// Triples drawn per evaluation; 0 evaluates every valid triple.
  std::size_t samples = 32;

  void validate() const;
};

MatchConfig::Kind parse_match_kind(const std::string& name);
std::string to_string(MatchConfig::Kind kind);

double squared_distance(std::span<const double> a, std::span<const double> b);

struct MatchGrad {
  double cost = 0.0;
  std::vector<double> anchor;
  std::vector<double> positive;
  std::vector<double> negative;
};

/// Triplet: max(0, d(a,p) - d(a,n) + m).
/// Contrastive: d(a,p) + max(0, m - d(a,n)).
/// d is squared Euclidean. Throws PairingError when the positive does not
/// share the anchor's action or comes from the same video, or the negative
/// shares it.
MatchGrad matching_cost(const SegmentEmbedding& anchor, const SegmentEmbedding& positive,
                        const SegmentEmbedding& negative, const MatchConfig& config);

struct Triple {
  std::size_t anchor = 0;
  std::size_t positive = 0;
  std::size_t negative = 0;
};

/// Every valid (anchor, positive, negative) over `segments`. When
/// `anchor_video` is non-empty only anchors from that video are used.
std::vector<Triple> enumerate_triples(std::span<const SegmentEmbedding> segments,
                                      const std::string& anchor_video = {});

struct CrossVideoResult {
  double value = 0.0;
  bool degenerate = false;  ///< no valid triple existed; value is 0
  std::size_t triples = 0;
  /// d value / d segments[i].vector, filled when requested.
  std::vector<std::vector<double>> grad;
};

/// Mean matching cost over valid triples: all of them when config.samples is
/// 0 or rng is null, otherwise config.samples triples drawn by picking an
/// eligible anchor, then a positive, then a negative uniformly. Segments are
/// visited in (video_id, start) order so the result does not depend on the
/// order in which videos were supplied.
CrossVideoResult cross_video_term(std::span<const SegmentEmbedding> segments,
                                  const MatchConfig& config, Rng* rng,
                                  const std::string& anchor_video = {},
                                  bool want_grad = false);

/// Back-propagates segment-vector gradients into the projection
/// (vector = P^T mean_raw), scaled by `scale`.
void accumulate_projection_grad(ParamArray& projection,
                                std::span<const SegmentEmbedding> segments,
                                const std::vector<std::vector<double>>& grad, double scale);

}  // namespace actseg
