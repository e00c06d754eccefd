#include "actseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "actseg/error.hpp"

namespace actseg {

namespace {

using Square = std::vector<std::vector<double>>;

/// Shortest augmenting path Hungarian with potentials, O(n^3).
/// Returns row -> column.
std::vector<int> solve_square(const Square& a) {
  const int n = static_cast<int>(a.size());
  if (n == 0) return {};
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = a[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= n; ++j) {
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  }
  return row_to_col;
}

double assignment_sum(const Square& a, const std::vector<int>& perm) {
  double s = 0.0;
  for (std::size_t i = 0; i < perm.size(); ++i) s += a[i][static_cast<std::size_t>(perm[i])];
  return s;
}

/// Optimal cost of `a` restricted to rows >= first_row and the given columns.
double reduced_optimum(const Square& a, std::size_t first_row, const std::vector<int>& cols,
                       std::vector<int>* perm_out) {
  Square sub;
  for (std::size_t i = first_row; i < a.size(); ++i) {
    std::vector<double> row;
    for (int c : cols) row.push_back(a[i][static_cast<std::size_t>(c)]);
    sub.push_back(std::move(row));
  }
  const auto perm = solve_square(sub);
  double s = 0.0;
  for (std::size_t i = 0; i < perm.size(); ++i) s += sub[i][static_cast<std::size_t>(perm[i])];
  if (perm_out) {
    perm_out->clear();
    for (int p : perm) perm_out->push_back(cols[static_cast<std::size_t>(p)]);
  }
  return s;
}

}  // namespace

Assignment hungarian(const Matrix& cost) {
  double max_entry = 0.0;
  double scale = 0.0;
  bool first = true;
  for (double x : cost.data()) {
    if (!std::isfinite(x)) throw InputError("hungarian: non-finite cost entry");
    max_entry = first ? x : std::max(max_entry, x);
    scale = std::max(scale, std::abs(x));
    first = false;
  }
  const std::size_t n = std::max(cost.rows(), cost.cols());
  Assignment out;
  if (n == 0) return out;
  Square a(n, std::vector<double>(n, max_entry));
  for (std::size_t i = 0; i < cost.rows(); ++i) {
    for (std::size_t j = 0; j < cost.cols(); ++j) a[i][j] = cost(i, j);
  }

  std::vector<int> best = solve_square(a);
  const double optimum = assignment_sum(a, best);
  const double tol = 1e-9 * std::max(1.0, scale * static_cast<double>(n));

  // Lexicographic refinement: fix rows in order to the smallest column that
  // still admits an optimal completion.
  std::vector<int> fixed;
  double fixed_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<int> free_cols;
    for (std::size_t j = 0; j < n; ++j) {
      if (std::find(fixed.begin(), fixed.end(), static_cast<int>(j)) == fixed.end()) {
        free_cols.push_back(static_cast<int>(j));
      }
    }
    int chosen = best[i];
    for (int j : free_cols) {
      if (j >= best[i]) break;
      std::vector<int> rest;
      for (int c : free_cols) {
        if (c != j) rest.push_back(c);
      }
      std::vector<int> tail;
      const double total = fixed_sum + a[i][static_cast<std::size_t>(j)] +
                           reduced_optimum(a, i + 1, rest, &tail);
      if (std::abs(total - optimum) <= tol) {
        chosen = j;
        for (std::size_t k = 0; k < tail.size(); ++k) best[i + 1 + k] = tail[k];
        break;
      }
    }
    best[i] = chosen;
    fixed.push_back(chosen);
    fixed_sum += a[i][static_cast<std::size_t>(chosen)];
  }

  out.row_to_col.assign(cost.rows(), -1);
  for (std::size_t i = 0; i < cost.rows(); ++i) {
    const auto j = static_cast<std::size_t>(best[i]);
    if (j < cost.cols()) {
      out.row_to_col[i] = best[i];
      out.cost += cost(i, j);
    }
  }
  return out;
}

namespace {

void check_pairs(std::span<const LabeledPair> pairs) {
  for (const auto& p : pairs) {
    if (p.pred.size() != p.gt.size()) {
      throw InputError("prediction has " + std::to_string(p.pred.size()) +
                       " frames, ground truth has " + std::to_string(p.gt.size()));
    }
    for (int g : p.gt) {
      if (g < 0) throw LabelError("negative ground-truth label");
    }
    for (int s : p.pred) {
      if (s < 0) throw LabelError("negative predicted symbol");
    }
  }
}

std::size_t infer_count(std::span<const LabeledPair> pairs, bool pred) {
  int mx = -1;
  for (const auto& p : pairs) {
    for (int x : pred ? p.pred : p.gt) mx = std::max(mx, x);
  }
  return static_cast<std::size_t>(mx + 1);
}

}  // namespace

LabelMapping map_labels(std::span<const LabeledPair> pairs, std::size_t num_symbols,
                        std::size_t num_classes) {
  check_pairs(pairs);
  if (num_symbols == 0) num_symbols = infer_count(pairs, true);
  if (num_classes == 0) num_classes = infer_count(pairs, false);
  Matrix cost(num_symbols, num_classes, 0.0);
  for (const auto& p : pairs) {
    for (std::size_t t = 0; t < p.pred.size(); ++t) {
      const auto s = static_cast<std::size_t>(p.pred[t]);
      const auto g = static_cast<std::size_t>(p.gt[t]);
      if (s >= num_symbols) throw LabelError("predicted symbol exceeds symbol count");
      if (g >= num_classes) throw LabelError("ground-truth label exceeds class count");
      cost(s, g) -= 1.0;
    }
  }
  const Assignment a = hungarian(cost);
  LabelMapping m;
  m.map = a.row_to_col;
  return m;
}

LabelMapping map_labels(std::span<const int> pred, std::span<const int> gt,
                        std::size_t num_symbols, std::size_t num_classes) {
  const LabeledPair pair{pred, gt};
  return map_labels(std::span<const LabeledPair>(&pair, 1), num_symbols, num_classes);
}

std::vector<Segment> segments_of(std::span<const int> labels) {
  std::vector<Segment> out;
  std::size_t start = 0;
  while (start < labels.size()) {
    std::size_t end = start + 1;
    while (end < labels.size() && labels[end] == labels[start]) ++end;
    out.push_back({labels[start], start, end});
    start = end;
  }
  return out;
}

MetricsReport compute_metrics(std::span<const LabeledPair> pairs, const LabelMapping& mapping,
                              std::size_t num_classes) {
  check_pairs(pairs);
  if (num_classes == 0) num_classes = infer_count(pairs, false);
  MetricsReport r;
  r.mapping = mapping;
  std::vector<std::size_t> inter(num_classes, 0), uni(num_classes, 0), gt_count(num_classes, 0);
  std::size_t correct = 0;
  std::size_t tp = 0, n_pred = 0, n_gt = 0;
  for (const auto& p : pairs) {
    std::vector<int> mapped(p.pred.size());
    for (std::size_t t = 0; t < p.pred.size(); ++t) mapped[t] = mapping.apply(p.pred[t]);
    for (std::size_t t = 0; t < mapped.size(); ++t) {
      const int g = p.gt[t];
      const int m = mapped[t];
      if (static_cast<std::size_t>(g) >= num_classes) {
        throw LabelError("ground-truth label exceeds class count");
      }
      ++gt_count[g];
      if (m == g) {
        ++correct;
        ++inter[g];
        ++uni[g];
      } else {
        ++uni[g];
        if (m >= 0 && static_cast<std::size_t>(m) < num_classes) ++uni[m];
      }
    }
    r.frames += mapped.size();

    const auto pred_segs = segments_of(mapped);
    const auto gt_segs = segments_of(p.gt);
    std::vector<char> matched(gt_segs.size(), 0);
    for (const auto& ps : pred_segs) {
      for (std::size_t k = 0; k < gt_segs.size(); ++k) {
        const auto& gs = gt_segs[k];
        if (matched[k] || gs.label != ps.label) continue;
        const std::size_t lo = std::max(ps.start, gs.start);
        const std::size_t hi = std::min(ps.end, gs.end);
        if (hi <= lo) continue;
        const double i = static_cast<double>(hi - lo);
        const double u = static_cast<double>(std::max(ps.end, gs.end) -
                                             std::min(ps.start, gs.start));
        if (i / u > 0.5) {
          matched[k] = 1;
          ++tp;
          break;
        }
      }
    }
    n_pred += pred_segs.size();
    n_gt += gt_segs.size();
  }

  r.mof = r.frames ? static_cast<double>(correct) / static_cast<double>(r.frames) : 0.0;
  r.per_class_jaccard.assign(num_classes, std::numeric_limits<double>::quiet_NaN());
  double jsum = 0.0;
  std::size_t jcount = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (gt_count[c] == 0) continue;
    r.per_class_jaccard[c] = static_cast<double>(inter[c]) / static_cast<double>(uni[c]);
    jsum += r.per_class_jaccard[c];
    ++jcount;
  }
  r.jaccard = jcount ? jsum / static_cast<double>(jcount) : 0.0;
  r.precision = n_pred ? static_cast<double>(tp) / static_cast<double>(n_pred) : 0.0;
  r.recall = n_gt ? static_cast<double>(tp) / static_cast<double>(n_gt) : 0.0;
  r.f1 = (r.precision + r.recall) > 0.0
             ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
             : 0.0;
  return r;
}

MetricsReport compute_metrics(std::span<const int> pred, std::span<const int> gt,
                              const LabelMapping& mapping, std::size_t num_classes) {
  const LabeledPair pair{pred, gt};
  return compute_metrics(std::span<const LabeledPair>(&pair, 1), mapping, num_classes);
}

}  // namespace actseg
