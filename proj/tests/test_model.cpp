#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "actseg/checkpoint.hpp"
#include "actseg/error.hpp"
#include "actseg/gradcheck.hpp"
#include "actseg/model.hpp"
#include "test_util.hpp"

using namespace actseg;

namespace {

ModelConfig small_config(std::size_t actions = 3, std::size_t dim = 4) {
  ModelConfig c;
  c.num_actions = actions;
  c.state_dim = 5;
  c.feature_dim = dim;
  c.hidden_dims = {6};
  return c;
}

ModelParams perturbed_model(const ModelConfig& c, std::uint64_t seed) {
  Rng rng(seed);
  ModelParams p = init_model(c, rng);
  testutil::perturb(p, rng);
  return p;
}

}  // namespace

TEST_CASE("init_model is deterministic per seed") {
  ModelConfig c = small_config();
  Rng a(3), b(3), other(4);
  ModelParams x = init_model(c, a);
  ModelParams y = init_model(c, b);
  ModelParams z = init_model(c, other);
  auto px = x.all_params();
  auto py = y.all_params();
  auto pz = z.all_params();
  REQUIRE(px.size() == py.size());
  bool any_diff = false;
  for (std::size_t i = 0; i < px.size(); ++i) {
    CHECK(*px[i] == *py[i]);
    if (!(*px[i] == *pz[i])) any_diff = true;
  }
  CHECK(any_diff);
}

TEST_CASE("rule_action is r mod |O|") {
  ModelConfig c = small_config(4);
  c.num_rules = 8;
  Rng rng(1);
  ModelParams p = init_model(c, rng);
  CHECK(p.rule_action == std::vector<int>{0, 1, 2, 3, 0, 1, 2, 3});
  c.num_rules = 0;
  CHECK(c.rules() == 8);
}

TEST_CASE("rule scorer input width is state_dim + D") {
  ModelConfig c;
  c.state_dim = 16;
  c.feature_dim = 32;
  c.hidden_dims = {64};
  Rng rng(1);
  ModelParams p = init_model(c, rng);
  CHECK(p.rule_scorer.layers[0].weight.shape == std::vector<std::size_t>{48, 64});
  CHECK(p.rule_next_state.shape == std::vector<std::size_t>{8, 16});
  CHECK(p.classifier.in() == 32);
  CHECK(p.classifier.out() == 4);
}

TEST_CASE("invalid model configs are rejected") {
  ModelConfig c = small_config(4);
  c.num_rules = 6;
  CHECK_THROWS_AS(c.validate(), ParameterError);
  c.num_rules = 2;
  CHECK_THROWS_AS(c.validate(), ParameterError);
  c = small_config();
  c.state_dim = 0;
  CHECK_THROWS_AS(c.validate(), ParameterError);
  c = small_config();
  c.temperature = 0.0;
  CHECK_THROWS_AS(c.validate(), ParameterError);
  c = small_config();
  c.hidden_dims = {4, 0};
  Rng rng(1);
  CHECK_THROWS_AS(init_model(c, rng), ParameterError);
}

TEST_CASE("greedy step is deterministic and copies the chosen row") {
  ModelConfig c = small_config();
  ModelParams p = perturbed_model(c, 9);
  Rng rng(1);
  auto state = testutil::random_vector(rng, c.state_dim);
  auto feature = testutil::random_vector(rng, c.feature_dim);
  auto a = step(p, state, feature, DecodeMode::kGreedy, 1.0, nullptr);
  auto b = step(p, state, feature, DecodeMode::kGreedy, 1.0, nullptr);
  CHECK(a.action == b.action);
  CHECK(a.next_state == b.next_state);
  CHECK(a.action == p.rule_action[a.rule]);
  for (std::size_t j = 0; j < c.state_dim; ++j) {
    CHECK(a.next_state[j] == p.rule_next_state.values[a.rule * c.state_dim + j]);
  }
}

TEST_CASE("hard transition copies the sampled row exactly") {
  ModelConfig c = small_config();
  c.hard_transition = true;
  ModelParams p = perturbed_model(c, 10);
  Rng rng(2);
  auto state = testutil::random_vector(rng, c.state_dim);
  auto feature = testutil::random_vector(rng, c.feature_dim);
  for (int i = 0; i < 20; ++i) {
    auto r = step(p, state, feature, DecodeMode::kStochastic, 0.8, &rng);
    for (std::size_t j = 0; j < c.state_dim; ++j) {
      CHECK(r.next_state[j] == p.rule_next_state.values[r.rule * c.state_dim + j]);
    }
  }
}

TEST_CASE("soft transition is a convex combination of rule rows") {
  ModelConfig c = small_config();
  ModelParams p = perturbed_model(c, 11);
  Rng rng(3);
  auto state = testutil::random_vector(rng, c.state_dim);
  auto feature = testutil::random_vector(rng, c.feature_dim);
  const std::size_t rules = c.rules();
  for (int i = 0; i < 50; ++i) {
    StepTrace trace;
    auto r = step(p, state, feature, DecodeMode::kStochastic, 1.0, &rng, &trace);
    const auto& w = trace.transition_weights;
    REQUIRE(w.size() == rules);
    CHECK(std::accumulate(w.begin(), w.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t j = 0; j < c.state_dim; ++j) {
      double want = 0.0, lo = INFINITY, hi = -INFINITY;
      for (std::size_t k = 0; k < rules; ++k) {
        const double row = p.rule_next_state.values[k * c.state_dim + j];
        want += w[k] * row;
        lo = std::min(lo, row);
        hi = std::max(hi, row);
      }
      CHECK(r.next_state[j] == doctest::Approx(want).epsilon(1e-12));
      CHECK(r.next_state[j] >= lo - 1e-12);
      CHECK(r.next_state[j] <= hi + 1e-12);
    }
    // forward value of the rule distribution is one-hot
    CHECK(r.rule_distribution[r.rule] == 1.0);
  }
}

TEST_CASE("equal rule logits select every rule uniformly") {
  ModelConfig c = small_config(4);
  c.num_rules = 8;
  Rng init(5);
  ModelParams p = init_model(c, init);  // zero output layer: equal logits
  std::vector<double> state(c.state_dim, 0.0);
  std::vector<double> feature(c.feature_dim, 0.3);
  Rng rng(6);
  std::vector<int> counts(8, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    ++counts[step(p, state, feature, DecodeMode::kStochastic, 1.0, &rng).rule];
  }
  for (int k : counts) CHECK(std::abs(k / double(n) - 0.125) < 0.01);
}

TEST_CASE("step dimension errors") {
  ModelConfig c = small_config();
  ModelParams p = perturbed_model(c, 1);
  std::vector<double> state(c.state_dim + 1, 0.0);
  std::vector<double> feature(c.feature_dim, 0.0);
  CHECK_THROWS_AS(step(p, state, feature, DecodeMode::kGreedy, 1.0, nullptr), DimensionError);
  std::vector<double> good_state(c.state_dim, 0.0);
  std::vector<double> bad_feature(c.feature_dim + 2, 0.0);
  CHECK_THROWS_AS(step(p, good_state, bad_feature, DecodeMode::kGreedy, 1.0, nullptr),
                  DimensionError);
}

TEST_CASE("generate_sequence lengths, determinism and errors") {
  ModelConfig c = small_config();
  ModelParams p = perturbed_model(c, 12);
  Rng rng(7);
  auto video = testutil::make_video("v", testutil::random_matrix(rng, 50, c.feature_dim));
  auto g1 = generate_sequence(p, video, DecodeMode::kGreedy, 1.0, nullptr);
  auto g2 = generate_sequence(p, video, DecodeMode::kGreedy, 1.0, nullptr);
  CHECK(g1.length() == 50);
  CHECK(g1 == g2);
  CHECK(g1.video_id == "v");
  for (int a : g1.labels) CHECK((a >= 0 && a < 3));

  Rng s1(100), s2(100);
  CHECK(generate_sequence(p, video, DecodeMode::kStochastic, 1.0, &s1) ==
        generate_sequence(p, video, DecodeMode::kStochastic, 1.0, &s2));

  auto empty = testutil::make_video("e", Matrix(0, c.feature_dim));
  CHECK_THROWS_AS(generate_sequence(p, empty, DecodeMode::kGreedy, 1.0, nullptr), InputError);
  auto wrong = testutil::make_video("w", Matrix(3, c.feature_dim + 1));
  CHECK_THROWS_AS(generate_sequence(p, wrong, DecodeMode::kGreedy, 1.0, nullptr), DimensionError);
}

TEST_CASE("fresh model: different seeds give different sequences") {
  ModelConfig c = small_config(4);
  Rng init(1);
  ModelParams p = init_model(c, init);
  Rng frng(2);
  auto video = testutil::make_video("v", testutil::random_matrix(frng, 30, c.feature_dim));
  int differ = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    Rng a(2 * s + 1), b(2 * s + 2);
    if (generate_sequence(p, video, DecodeMode::kStochastic, 1.0, &a) !=
        generate_sequence(p, video, DecodeMode::kStochastic, 1.0, &b)) {
      ++differ;
    }
  }
  CHECK(differ >= 99);
}

TEST_CASE("classify_frames rows, frame independence and scratch oracle") {
  ModelConfig c = small_config();
  ModelParams p = perturbed_model(c, 13);
  Rng rng(8);
  Matrix f = testutil::random_matrix(rng, 7, c.feature_dim);
  auto video = testutil::make_video("v", f);
  Matrix probs = classify_frames(p, video);
  REQUIRE(probs.rows() == 7);
  REQUIRE(probs.cols() == 3);
  for (std::size_t t = 0; t < 7; ++t) {
    double s = 0.0;
    for (std::size_t a = 0; a < 3; ++a) s += probs(t, a);
    CHECK(std::abs(s - 1.0) <= 1e-9);
  }

  // reversed frame order reverses output rows
  Matrix rev(7, c.feature_dim);
  for (std::size_t t = 0; t < 7; ++t) {
    for (std::size_t d = 0; d < c.feature_dim; ++d) rev(t, d) = f(6 - t, d);
  }
  Matrix rprobs = classify_frames(p, testutil::make_video("r", rev));
  for (std::size_t t = 0; t < 7; ++t) {
    for (std::size_t a = 0; a < 3; ++a) CHECK(rprobs(t, a) == probs(6 - t, a));
  }

  // scratch: tanh hidden layer, affine output, softmax
  const Linear& l0 = p.classifier.layers[0];
  const Linear& l1 = p.classifier.layers[1];
  for (std::size_t t = 0; t < 7; ++t) {
    std::vector<double> h(l0.out());
    for (std::size_t j = 0; j < l0.out(); ++j) {
      double s = l0.bias.values[j];
      for (std::size_t i = 0; i < l0.in(); ++i) s += f(t, i) * l0.weight.values[i * l0.out() + j];
      h[j] = std::tanh(s);
    }
    std::vector<double> z(3);
    double mx = -INFINITY;
    for (std::size_t j = 0; j < 3; ++j) {
      z[j] = l1.bias.values[j];
      for (std::size_t i = 0; i < h.size(); ++i) z[j] += h[i] * l1.weight.values[i * 3 + j];
      mx = std::max(mx, z[j]);
    }
    double norm = 0.0;
    for (double& v : z) norm += (v = std::exp(v - mx));
    for (std::size_t j = 0; j < 3; ++j) CHECK(probs(t, j) == doctest::Approx(z[j] / norm).epsilon(1e-12));
  }
  auto wrong = testutil::make_video("w", Matrix(2, c.feature_dim + 1));
  CHECK_THROWS_AS(classify_frames(p, wrong), DimensionError);
}

TEST_CASE("classifier parameters are disjoint from the autoregressive ones") {
  ModelConfig c = small_config();
  ModelParams p = perturbed_model(c, 14);
  for (ParamArray* a : p.autoregressive_params()) {
    for (ParamArray* b : p.classifier_params()) CHECK(a != b);
  }
  CHECK(p.all_params().size() ==
        p.autoregressive_params().size() + p.classifier_params().size());
}

TEST_CASE("autoregressive loss gradient on a T=5 toy") {
  ModelConfig c = small_config();
  ModelParams p = perturbed_model(c, 15);
  Rng rng(9);
  auto video = testutil::make_video("v", testutil::random_matrix(rng, 5, c.feature_dim));
  auto labels = testutil::random_labels(rng, 5, c.num_actions);
  auto loss = [&]() {
    Rng noise(1234);
    return autoregressive_loss(p, video, labels, 0.7, &noise, true);
  };
  auto params = p.autoregressive_params();
  CHECK(finite_diff_check(loss, params).max_rel_error < 1e-4);
}

TEST_CASE("hard transitions: exact row gradients on a two-frame video") {
  // Straight-through gradients are a surrogate wherever a later hard draw
  // sits downstream. With two frames only the final cross-entropy depends on
  // the transition, so the row gradients must be exact.
  ModelConfig c = small_config();
  c.hard_transition = true;
  ModelParams p = perturbed_model(c, 16);
  Rng rng(9);
  auto video = testutil::make_video("v", testutil::random_matrix(rng, 2, c.feature_dim));
  auto labels = testutil::random_labels(rng, 2, c.num_actions);
  auto loss = [&]() {
    Rng noise(77);
    return autoregressive_loss(p, video, labels, 0.7, &noise, true);
  };
  ParamArray* rows[] = {&p.rule_next_state};
  CHECK(finite_diff_check(loss, rows).max_rel_error < 1e-4);
}

TEST_CASE("relaxed autoregressive loss and classifier loss gradients") {
  ModelConfig c = small_config();
  ModelParams p = perturbed_model(c, 17);
  Rng rng(10);
  auto video = testutil::make_video("v", testutil::random_matrix(rng, 6, c.feature_dim));
  auto labels = testutil::random_labels(rng, 6, c.num_actions);
  auto ar = p.autoregressive_params();
  CHECK(finite_diff_check([&] { return autoregressive_loss(p, video, labels, 0.5, nullptr, true); },
                          ar)
            .max_rel_error < 1e-4);
  auto cls = p.classifier_params();
  CHECK(finite_diff_check([&] { return classifier_loss(p, video, labels, true); }, cls)
            .max_rel_error < 1e-4);
}

TEST_CASE("autoregressive loss rejects bad labels") {
  ModelConfig c = small_config();
  ModelParams p = perturbed_model(c, 18);
  Rng rng(11);
  auto video = testutil::make_video("v", testutil::random_matrix(rng, 4, c.feature_dim));
  std::vector<int> short_labels = {0, 1};
  CHECK_THROWS(autoregressive_loss(p, video, short_labels, 1.0, &rng, false));
  std::vector<int> bad = {0, 1, 5, 0};
  CHECK_THROWS_AS(autoregressive_loss(p, video, bad, 1.0, &rng, false), LabelError);
}

TEST_CASE("checkpoint round-trip is bit exact") {
  Rng rng(19);
  for (int trial = 0; trial < 10; ++trial) {
    ModelConfig c = small_config(2 + rng.below(4), 1 + rng.below(6));
    c.hidden_dims.assign(rng.below(3), 0);
    for (auto& h : c.hidden_dims) h = 1 + rng.below(8);
    c.hard_transition = rng.below(2) == 1;
    c.cross_projection_dim = rng.below(3);
    c.temperature = 0.1 + rng.uniform();
    ModelParams p = perturbed_model(c, 100 + trial);
    Checkpoint ckpt;
    ckpt.params = p;
    ckpt.epoch = static_cast<std::uint32_t>(rng.below(1000));
    ckpt.temperature = rng.uniform();
    ckpt.extras.emplace_back("extra.x", std::vector<std::size_t>{3});
    ckpt.extras.back().values = {1.5, -2.25, 1e-300};
    std::stringstream ss;
    write_checkpoint(ss, ckpt);
    Checkpoint back = read_checkpoint(ss);
    CHECK(back.params.config == c);
    CHECK(back.epoch == ckpt.epoch);
    CHECK(back.temperature == ckpt.temperature);
    auto a = p.all_params();
    auto b = back.params.all_params();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(*a[i] == *b[i]);
    REQUIRE(back.extras.size() == 1);
    CHECK(back.extras[0] == ckpt.extras[0]);
    std::stringstream again;
    write_checkpoint(again, back);
    CHECK(again.str() == ss.str());
  }
}

TEST_CASE("checkpoint reader rejects damaged input") {
  std::stringstream bad("XXXX");
  CHECK_THROWS_AS(read_checkpoint(bad), FormatError);
  ModelConfig c = small_config();
  Checkpoint ckpt;
  ckpt.params = perturbed_model(c, 1);
  std::stringstream ss;
  write_checkpoint(ss, ckpt);
  std::string bytes = ss.str();
  std::stringstream truncated(bytes.substr(0, bytes.size() / 2));
  CHECK_THROWS_AS(read_checkpoint(truncated), FormatError);
}
