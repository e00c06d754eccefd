#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "actseg/error.hpp"
#include "actseg/ranking.hpp"
#include "test_util.hpp"

using namespace actseg;

namespace {

// Poisson pmf through lgamma, written independently of the library.
double poisson_pmf(double lambda, double k) {
  return std::exp(k * std::log(lambda) - lambda - std::lgamma(k + 1.0));
}

LengthModel single(LengthModel::Kind kind, double a, double b = 0.0) {
  LengthModel m;
  m.kind = kind;
  m.lambda = {a};
  m.mu = {a};
  m.sigma = {b > 0 ? b : 1.0};
  return m;
}

Matrix uniform_probs(std::size_t t, std::size_t k) { return Matrix(t, k, 1.0 / k); }

}  // namespace

TEST_CASE("cost_occurrence examples") {
  std::vector<int> all = {0, 1, 2, 1};
  CHECK(cost_occurrence(all, 3) == 0.0);
  std::vector<int> some = {0, 2, 4, 4, 0};
  CHECK(cost_occurrence(some, 5) == 2.0);
  std::vector<int> one = {1, 1, 1, 1};
  CHECK(cost_occurrence(one, 4) == 3.0);
}

TEST_CASE("cost_occurrence is zero exactly when every action appears") {
  Rng rng(1);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t k = 2 + rng.below(5);
    auto labels = testutil::random_labels(rng, 1 + rng.below(12), k);
    std::vector<int> seen(k, 0);
    for (int a : labels) seen[a] = 1;
    const double missing = static_cast<double>(std::count(seen.begin(), seen.end(), 0));
    const double c1 = cost_occurrence(labels, k);
    CHECK(c1 == missing);
    CHECK((c1 == 0.0) == (missing == 0.0));
    CHECK(c1 <= static_cast<double>(k - 1));
  }
}

TEST_CASE("cost_length mean deviation") {
  LengthModel m;
  m.kind = LengthModel::Kind::kMeanDeviation;
  std::vector<int> even = {0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2};
  CHECK(cost_length(even, 3, m.resolved(12, 3)) == 0.0);
  std::vector<int> skew = {0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1};
  // |6-4| + |6-4| + |0-4| over 12
  CHECK(cost_length(skew, 3, m.resolved(12, 3)) == doctest::Approx(8.0 / 12.0));
}

TEST_CASE("cost_length poisson matches the log-gamma oracle") {
  LengthModel m = single(LengthModel::Kind::kPoisson, 10.0);
  std::vector<int> ten(10, 0);
  const double want = 1.0 - poisson_pmf(10.0, 10.0);
  CHECK(cost_length(ten, 1, m) == doctest::Approx(want).epsilon(1e-12));
  CHECK(std::abs(cost_length(ten, 1, m) - 0.8749) < 1e-4);

  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const double lambda = 0.5 + 40.0 * rng.uniform();
    const double len = static_cast<double>(rng.below(80));
    CHECK(length_likelihood(single(LengthModel::Kind::kPoisson, lambda), 0, len) ==
          doctest::Approx(poisson_pmf(lambda, len)).epsilon(1e-10));
  }
}

TEST_CASE("cost_length gaussian is max-normalized") {
  LengthModel m = single(LengthModel::Kind::kGaussian, 10.0, 2.0);
  std::vector<int> ten(10, 0);
  CHECK(cost_length(ten, 1, m) == doctest::Approx(0.0).epsilon(1e-15));
  std::vector<int> twelve(12, 0);
  CHECK(std::abs(cost_length(twelve, 1, m) - 0.3935) < 1e-4);
  CHECK(cost_length(twelve, 1, m) == doctest::Approx(1.0 - std::exp(-0.5)).epsilon(1e-12));
}

TEST_CASE("absent actions count with length zero") {
  LengthModel m;
  m.kind = LengthModel::Kind::kGaussian;
  m.mu = {4, 4};
  m.sigma = {2, 2};
  std::vector<int> only0 = {0, 0, 0, 0};
  CHECK(cost_length(only0, 2, m) == doctest::Approx(1.0 - std::exp(-16.0 / 8.0)));
}

TEST_CASE("cost_length rejects nonpositive parameters") {
  std::vector<int> l = {0, 0};
  LengthModel bad = single(LengthModel::Kind::kPoisson, 0.0);
  CHECK_THROWS_AS(cost_length(l, 1, bad), ParameterError);
  LengthModel badsig = single(LengthModel::Kind::kGaussian, 3.0, 1.0);
  badsig.sigma = {-1.0};
  CHECK_THROWS_AS(cost_length(l, 1, badsig), ParameterError);
  LengthModel missing;
  missing.kind = LengthModel::Kind::kGaussian;
  missing.mu = {1.0};
  missing.sigma = {1.0};
  CHECK_THROWS_AS(cost_length(l, 2, missing), ParameterError);
}

TEST_CASE("cost_length is invariant to frame permutations") {
  Rng rng(3);
  for (auto kind : {LengthModel::Kind::kMeanDeviation, LengthModel::Kind::kPoisson,
                    LengthModel::Kind::kGaussian}) {
    LengthModel m;
    m.kind = kind;
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t k = 2 + rng.below(4);
      auto labels = testutil::random_labels(rng, 5 + rng.below(30), k);
      const LengthModel r = m.resolved(labels.size(), k);
      const double before = cost_length(labels, k, r);
      rng.shuffle(std::span<int>(labels));
      CHECK(cost_length(labels, k, r) == before);
    }
  }
}

TEST_CASE("default length parameters") {
  LengthModel m;
  LengthModel r = m.resolved(80, 4);
  CHECK(r.mu == std::vector<double>(4, 20.0));
  CHECK(r.lambda == std::vector<double>(4, 20.0));
  CHECK(r.sigma == std::vector<double>(4, 10.0));
}

TEST_CASE("cost_probability examples") {
  Matrix certain(4, 2, 0.0);
  std::vector<int> l = {0, 1, 1, 0};
  for (std::size_t t = 0; t < 4; ++t) certain(t, l[t]) = 1.0;
  CHECK(cost_probability(l, certain) == 0.0);

  std::vector<int> eight = {0, 1, 2, 3, 0, 1, 2, 3};
  CHECK(cost_probability(eight, uniform_probs(8, 4)) == doctest::Approx(6.0));

  Matrix p(3, 2, 0.0);
  p(0, 0) = 0.5;
  p(0, 1) = 0.5;
  p(1, 1) = 0.9;
  p(1, 0) = 0.1;
  p(2, 0) = 0.1;
  p(2, 1) = 0.9;
  std::vector<int> sel = {0, 1, 0};
  CHECK(cost_probability(sel, p) == doctest::Approx(1.5));

  std::vector<int> short_labels = {0, 1};
  CHECK_THROWS_AS(cost_probability(short_labels, p), InputError);
}

TEST_CASE("cost_probability stays within [0, T]") {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t t = 1 + rng.below(20), k = 2 + rng.below(4);
    Matrix probs(t, k);
    for (std::size_t i = 0; i < t; ++i) {
      double s = 0.0;
      for (std::size_t a = 0; a < k; ++a) s += (probs(i, a) = rng.uniform());
      for (std::size_t a = 0; a < k; ++a) probs(i, a) /= s;
    }
    const double c3 = cost_probability(testutil::random_labels(rng, t, k), probs);
    CHECK(c3 >= 0.0);
    CHECK(c3 <= static_cast<double>(t));
  }
}

TEST_CASE("total_cost weights") {
  RankingConfig cfg;
  CostWeights w = resolve_weights(cfg, 8, 4);
  CHECK(w.occurrence == 0.25);
  CHECK(w.length == 0.125);
  CHECK(w.probability == 0.125);
  CHECK(w.cross == 0.125);

  Candidate c;
  c.c1 = 1;
  c.c2 = 0.5;
  c.c3 = 6;
  CHECK(recompute_total(c, w, false) == doctest::Approx(1.0625).epsilon(1e-12));

  RankingConfig only1;
  only1.gamma1 = 1.0;
  only1.gamma2 = 0.0;
  only1.gamma3 = 0.0;
  Candidate d;
  d.c1 = 2;
  d.c2 = 0.7;
  d.c3 = 3;
  CHECK(recompute_total(d, resolve_weights(only1, 10, 4), false) == 2.0);

  Candidate zero;
  CHECK(recompute_total(zero, w, true) == 0.0);
}

TEST_CASE("total_cost fills parts consistently") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 2 + rng.below(4), t = 4 + rng.below(30);
    RankingConfig cfg;
    cfg.length_model.kind = static_cast<LengthModel::Kind>(rng.below(3));
    cfg.cross_video_in_cost = rng.below(2) == 1;
    if (rng.below(2)) cfg.gamma1 = rng.uniform();
    if (rng.below(2)) cfg.gamma3 = rng.uniform();
    Matrix probs(t, k, 1.0 / k);
    ActionSequence seq{"v", testutil::random_labels(rng, t, k)};
    const LengthModel lm = cfg.length_model.resolved(t, k);
    const double cross = rng.uniform();
    Candidate c = total_cost(seq, probs, cfg, k, lm, cross);
    CHECK(c.c1 == cost_occurrence(seq.labels, k));
    CHECK(c.c2 == cost_length(seq.labels, k, lm));
    CHECK(c.c3 == cost_probability(seq.labels, probs));
    CHECK(c.c_cross == cross);
    CHECK(std::abs(c.total - recompute_total(c, resolve_weights(cfg, t, k),
                                             cfg.cross_video_in_cost)) <= 1e-9);
  }
}

TEST_CASE("ranking config validation") {
  RankingConfig cfg;
  cfg.num_candidates = 0;
  CHECK_THROWS_AS(cfg.validate(4), ParameterError);
  RankingConfig none;
  none.gamma1 = 0.0;
  none.gamma2 = 0.0;
  none.gamma3 = 0.0;
  CHECK_THROWS_AS(none.validate(4), ParameterError);
  RankingConfig neg;
  neg.gamma2 = -1.0;
  CHECK_THROWS_AS(neg.validate(4), ParameterError);
  CHECK_THROWS_AS(parse_length_kind("weibull"), ParameterError);
  CHECK(parse_length_kind("poisson") == LengthModel::Kind::kPoisson);
}

namespace {

std::vector<Candidate> with_totals(std::initializer_list<double> totals) {
  std::vector<Candidate> out;
  for (double t : totals) {
    Candidate c;
    c.total = t;
    out.push_back(c);
  }
  return out;
}

}  // namespace

TEST_CASE("select_best examples") {
  CHECK(select_best(with_totals({4.2})).best == 0);
  auto three = select_best(with_totals({3.0, 1.0, 2.0}));
  CHECK(three.best == 1);
  CHECK(three.ranked == std::vector<std::size_t>{1, 2, 0});
  CHECK(select_best(with_totals({1.0, 1.0})).best == 0);
  std::vector<Candidate> empty;
  CHECK_THROWS_AS(select_best(empty), InputError);
}

TEST_CASE("select_best is minimal and invariant to weight scaling") {
  Rng rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 3, t = 12;
    RankingConfig cfg;
    cfg.gamma1 = 0.1 + rng.uniform();
    cfg.gamma2 = rng.uniform();
    cfg.gamma3 = rng.uniform();
    RankingConfig scaled = cfg;
    const double s = 0.01 + 10.0 * rng.uniform();
    scaled.gamma1 = *cfg.gamma1 * s;
    scaled.gamma2 = *cfg.gamma2 * s;
    scaled.gamma3 = *cfg.gamma3 * s;
    Matrix probs = testutil::random_matrix(rng, t, k, 0.0, 1.0);
    const LengthModel lm = cfg.length_model.resolved(t, k);
    std::vector<Candidate> a, b;
    for (int i = 0; i < 8; ++i) {
      ActionSequence seq{"v", testutil::random_labels(rng, t, k)};
      a.push_back(total_cost(seq, probs, cfg, k, lm));
      b.push_back(total_cost(seq, probs, scaled, k, lm));
    }
    auto sa = select_best(a);
    auto sb = select_best(b);
    for (const auto& c : a) CHECK(a[sa.best].total <= c.total);
    // Scaling can only reorder exact float ties; compare costs, not indices.
    CHECK(a[sb.best].total == doctest::Approx(a[sa.best].total).epsilon(1e-12));
    for (std::size_t i = 1; i < sa.ranked.size(); ++i) {
      CHECK(a[sa.ranked[i - 1]].total <= a[sa.ranked[i]].total);
    }
  }
}
