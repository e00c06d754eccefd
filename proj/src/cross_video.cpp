#include "actseg/cross_video.hpp"

#include <algorithm>
#include <numeric>

#include "actseg/error.hpp"

namespace actseg {

std::vector<SegmentEmbedding> pool_segments(const FeatureSequence& video,
                                            std::span<const int> labels,
                                            const ParamArray* projection) {
  if (labels.size() != video.length()) {
    throw InputError("pool_segments: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(video.length()) + " frames in '" + video.video_id + "'");
  }
  const std::size_t D = video.dim();
  if (projection && (projection->shape.size() != 2 || projection->shape[0] != D)) {
    throw DimensionError("cross projection does not match feature dim");
  }
  std::vector<SegmentEmbedding> out;
  std::size_t start = 0;
  while (start < labels.size()) {
    std::size_t end = start + 1;
    while (end < labels.size() && labels[end] == labels[start]) ++end;
    SegmentEmbedding seg;
    seg.video_id = video.video_id;
    seg.action = labels[start];
    seg.start = start;
    seg.end = end;
    seg.mean_raw.assign(D, 0.0);
    for (std::size_t t = start; t < end; ++t) {
      const auto row = video.features.row(t);
      for (std::size_t d = 0; d < D; ++d) seg.mean_raw[d] += row[d];
    }
    const double inv = 1.0 / static_cast<double>(end - start);
    for (auto& v : seg.mean_raw) v *= inv;
    if (projection) {
      const std::size_t P = projection->shape[1];
      seg.vector.assign(P, 0.0);
      for (std::size_t d = 0; d < D; ++d) {
        for (std::size_t j = 0; j < P; ++j) {
          seg.vector[j] += seg.mean_raw[d] * projection->values[d * P + j];
        }
      }
    } else {
      seg.vector = seg.mean_raw;
    }
    out.push_back(std::move(seg));
    start = end;
  }
  return out;
}

void MatchConfig::validate() const {
  if (!(margin > 0.0)) throw ParameterError("matching margin must be > 0");
}

MatchConfig::Kind parse_match_kind(const std::string& name) {
  if (name == "triplet") return MatchConfig::Kind::kTriplet;
  if (name == "contrastive") return MatchConfig::Kind::kContrastive;
  throw ParameterError("unknown matching kind '" + name + "' (expected triplet|contrastive)");
}

std::string to_string(MatchConfig::Kind kind) {
  return kind == MatchConfig::Kind::kTriplet ? "triplet" : "contrastive";
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("embedding dims differ");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

MatchGrad matching_cost(const SegmentEmbedding& anchor, const SegmentEmbedding& positive,
                        const SegmentEmbedding& negative, const MatchConfig& config) {
  config.validate();
  if (positive.action != anchor.action) {
    throw PairingError("positive has action " + std::to_string(positive.action) +
                       ", anchor has " + std::to_string(anchor.action));
  }
  if (positive.video_id == anchor.video_id) {
    throw PairingError("positive must come from a different video than the anchor");
  }
  if (negative.action == anchor.action) {
    throw PairingError("negative shares the anchor's action");
  }
  const std::size_t n = anchor.vector.size();
  const double dp = squared_distance(anchor.vector, positive.vector);
  const double dn = squared_distance(anchor.vector, negative.vector);
  MatchGrad g;
  g.anchor.assign(n, 0.0);
  g.positive.assign(n, 0.0);
  g.negative.assign(n, 0.0);
  // d(x,y) = |x-y|^2: dd/dx = 2(x-y), dd/dy = -2(x-y).
  auto add_dp = [&](double s) {
    for (std::size_t i = 0; i < n; ++i) {
      const double diff = 2.0 * (anchor.vector[i] - positive.vector[i]) * s;
      g.anchor[i] += diff;
      g.positive[i] -= diff;
    }
  };
  auto add_dn = [&](double s) {
    for (std::size_t i = 0; i < n; ++i) {
      const double diff = 2.0 * (anchor.vector[i] - negative.vector[i]) * s;
      g.anchor[i] += diff;
      g.negative[i] -= diff;
    }
  };
  if (config.kind == MatchConfig::Kind::kTriplet) {
    const double v = dp - dn + config.margin;
    if (v > 0.0) {
      g.cost = v;
      add_dp(1.0);
      add_dn(-1.0);
    }
  } else {
    g.cost = dp;
    add_dp(1.0);
    const double hinge = config.margin - dn;
    if (hinge > 0.0) {
      g.cost += hinge;
      add_dn(-1.0);
    }
  }
  return g;
}

namespace {

std::vector<std::size_t> canonical_order(std::span<const SegmentEmbedding> segments) {
  std::vector<std::size_t> order(segments.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (segments[a].video_id != segments[b].video_id) {
      return segments[a].video_id < segments[b].video_id;
    }
    return segments[a].start < segments[b].start;
  });
  return order;
}

}  // namespace

std::vector<Triple> enumerate_triples(std::span<const SegmentEmbedding> segments,
                                      const std::string& anchor_video) {
  const auto order = canonical_order(segments);
  std::vector<Triple> out;
  for (std::size_t a : order) {
    if (!anchor_video.empty() && segments[a].video_id != anchor_video) continue;
    for (std::size_t p : order) {
      if (segments[p].action != segments[a].action ||
          segments[p].video_id == segments[a].video_id) {
        continue;
      }
      for (std::size_t n : order) {
        if (segments[n].action == segments[a].action) continue;
        out.push_back({a, p, n});
      }
    }
  }
  return out;
}

CrossVideoResult cross_video_term(std::span<const SegmentEmbedding> segments,
                                  const MatchConfig& config, Rng* rng,
                                  const std::string& anchor_video, bool want_grad) {
  config.validate();
  CrossVideoResult result;
  if (want_grad) {
    result.grad.resize(segments.size());
    for (std::size_t i = 0; i < segments.size(); ++i) {
      result.grad[i].assign(segments[i].vector.size(), 0.0);
    }
  }

  std::vector<Triple> triples;
  if (config.samples == 0 || rng == nullptr) {
    triples = enumerate_triples(segments, anchor_video);
  } else {
    const auto order = canonical_order(segments);
    std::vector<std::size_t> eligible;
    for (std::size_t a : order) {
      if (!anchor_video.empty() && segments[a].video_id != anchor_video) continue;
      bool has_pos = false;
      bool has_neg = false;
      for (std::size_t o : order) {
        if (segments[o].action == segments[a].action) {
          has_pos = has_pos || segments[o].video_id != segments[a].video_id;
        } else {
          has_neg = true;
        }
      }
      if (has_pos && has_neg) eligible.push_back(a);
    }
    if (!eligible.empty()) {
      std::vector<std::size_t> pos;
      std::vector<std::size_t> neg;
      for (std::size_t s = 0; s < config.samples; ++s) {
        const std::size_t a = eligible[rng->below(eligible.size())];
        pos.clear();
        neg.clear();
        for (std::size_t o : order) {
          if (segments[o].action == segments[a].action) {
            if (segments[o].video_id != segments[a].video_id) pos.push_back(o);
          } else {
            neg.push_back(o);
          }
        }
        const std::size_t p = pos[rng->below(pos.size())];
        const std::size_t n = neg[rng->below(neg.size())];
        triples.push_back({a, p, n});
      }
    }
  }

  if (triples.empty()) {
    result.degenerate = true;
    return result;
  }
  const double inv = 1.0 / static_cast<double>(triples.size());
  for (const Triple& t : triples) {
    const MatchGrad g =
        matching_cost(segments[t.anchor], segments[t.positive], segments[t.negative], config);
    result.value += g.cost * inv;
    if (want_grad) {
      for (std::size_t i = 0; i < g.anchor.size(); ++i) {
        result.grad[t.anchor][i] += g.anchor[i] * inv;
        result.grad[t.positive][i] += g.positive[i] * inv;
        result.grad[t.negative][i] += g.negative[i] * inv;
      }
    }
  }
  result.triples = triples.size();
  return result;
}

void accumulate_projection_grad(ParamArray& projection,
                                std::span<const SegmentEmbedding> segments,
                                const std::vector<std::vector<double>>& grad, double scale) {
  const std::size_t D = projection.shape[0];
  const std::size_t P = projection.shape[1];
  for (std::size_t s = 0; s < segments.size(); ++s) {
    const auto& m = segments[s].mean_raw;
    const auto& g = grad[s];
    for (std::size_t d = 0; d < D; ++d) {
      for (std::size_t j = 0; j < P; ++j) projection.grad[d * P + j] += scale * m[d] * g[j];
    }
  }
}

}  // namespace actseg
