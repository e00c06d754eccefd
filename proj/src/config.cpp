#include "actseg/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "actseg/error.hpp"

namespace actseg {

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      // model
      {"num_actions", "4", "|O|, number of action symbols (defaults to the manifest k)"},
      {"num_rules", "0", "|R|, number of transition rules; 0 = 2 * num_actions"},
      {"state_dim", "32", "width of the latent state vector"},
      {"hidden_dims", "64", "comma-separated hidden layer widths of both heads"},
      {"temperature", "1.0", "initial Gumbel-Softmax temperature"},
      {"temperature_decay", "0.999", "per-epoch multiplicative temperature decay"},
      {"temperature_floor", "0.3", "lower bound for the annealed temperature"},
      {"activation", "tanh", "hidden activation: tanh | relu | identity"},
      {"hard_transition", "false", "feed the one-hot rule choice into the next state"},
      {"cross_projection_dim", "0", "learned projection width for cross-video matching; 0 = raw means"},
      // ranking
      {"num_candidates", "16", "K, candidate labelings sampled per video per epoch"},
      {"gamma1", "auto", "occurrence weight; auto = 1/|O|"},
      {"gamma2", "auto", "length weight; auto = 1/T"},
      {"gamma3", "auto", "frame-probability weight; auto = 1/T"},
      {"gamma_cross", "auto", "cross-video cost weight; auto = 1/T"},
      {"length_model", "gaussian", "length prior: gaussian | poisson | mean"},
      {"length_learnable", "false", "refit per-action length parameters from self-labels"},
      {"length_lambda", "auto", "poisson rates per action (comma list) or auto = T/|O|"},
      {"length_mu", "auto", "gaussian means per action (comma list) or auto = T/|O|"},
      {"length_sigma", "auto", "gaussian deviations per action (comma list) or auto = T/(2|O|)"},
      {"cross_in_cost", "false", "add the cross-video term to the ranking cost"},
      {"cross_in_loss", "true", "add the cross-video term to the training loss"},
      {"cross_loss_weight", "0.1", "weight of the cross-video training loss"},
      {"match_kind", "triplet", "cross-video matching: triplet | contrastive"},
      {"margin", "1.0", "matching margin"},
      {"triples_per_batch", "32", "sampled triples per evaluation; 0 = exhaustive"},
      // training
      {"epochs", "400", "maximum number of EM iterations"},
      {"learning_rate", "0.003", "Adam learning rate"},
      {"beta1", "0.9", "Adam beta1"},
      {"beta2", "0.999", "Adam beta2"},
      {"adam_epsilon", "1e-8", "Adam epsilon"},
      {"m_steps_per_e_step", "1", "parameter updates per video per epoch"},
      {"patience", "20", "stop after this many epochs without cost improvement"},
      {"min_improvement", "1e-4", "minimum decrease of the mean selected cost"},
      {"candidate_pick", "min_cost", "self-label choice: min_cost | random"},
      {"e_step_sampling", "gumbel", "candidate generation: gumbel | greedy"},
      {"ablation", "none",
       "preset: none | full | c1 | c2 | c3 | c1c2 | c1c3 | c2c3 | random_pick | no_gumbel"},
      {"seed", "1", "run seed"},
      {"threads", "0", "OpenMP threads for the E-step; 0 = runtime default"},
      // outputs
      {"dump_every", "10", "write cost rows and top-5 candidates every N epochs; 0 = never"},
      {"eval_every", "1", "evaluate against ground truth every N epochs when labels exist"},
      {"checkpoint_every", "0", "write an intermediate checkpoint every N epochs; 0 = final only"},
      {"svg", "true", "write SVG timelines when segmenting"},
      // synthetic data
      {"synth_tasks", "1", "number of tasks"},
      {"synth_videos_per_task", "20", "videos per task"},
      {"synth_k", "4", "actions per task (k >= 2)"},
      {"synth_feature_dim", "16", "feature dimension D"},
      {"synth_min_frames", "60", "minimum frames per video"},
      {"synth_max_frames", "100", "maximum frames per video"},
      {"synth_length_dist", "poisson", "segment length distribution: poisson | gaussian"},
      {"synth_length_lambda", "0", "poisson mean segment length; 0 = automatic"},
      {"synth_length_mu", "0", "gaussian mean segment length; 0 = automatic"},
      {"synth_length_sigma", "0", "gaussian segment length deviation; 0 = mu/4"},
      {"synth_separation", "6", "distance between action means in noise units"},
      {"synth_noise_sigma", "1", "frame noise standard deviation"},
      {"synth_video_shift", "1", "norm of the per-video appearance offset in noise units"},
      {"synth_order_jitter", "0.1", "probability of swapping adjacent actions"},
      {"synth_seed", "7", "generator seed"},
  };
  return keys;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::optional<double> parse_auto_double(const RunConfig& c, const std::string& key) {
  if (c.get(key) == "auto") return std::nullopt;
  return c.get_double(key);
}

std::vector<double> parse_list(const RunConfig& c, const std::string& key) {
  const std::string v = c.get(key);
  if (v == "auto") return {};
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    double d = 0.0;
    auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), d);
    if (ec != std::errc() || p != item.data() + item.size()) {
      throw ParameterError("config key '" + key + "': bad number '" + item + "'");
    }
    out.push_back(d);
  }
  return out;
}

}  // namespace

RunConfig::RunConfig() {
  for (const auto& k : config_keys()) values_[k.name] = k.default_value;
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ParameterError("cannot open config '" + path.string() + "'");
  std::string line;
  std::size_t n = 0;
  while (std::getline(is, line)) {
    ++n;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.find('=') == std::string::npos) {
      throw ParameterError(path.string() + ": line " + std::to_string(n) +
                           ": expected key = value");
    }
    set_assignment(line);
  }
}

void RunConfig::set_assignment(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ParameterError("expected key=value, got '" + assignment + "'");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw ParameterError("unknown config key '" + key + "'");
  it->second = value;
  explicit_.insert(key);
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ParameterError("unknown config key '" + key + "'");
  return it->second;
}

double RunConfig::get_double(const std::string& key) const {
  const std::string& v = get(key);
  double d = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), d);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ParameterError("config key '" + key + "' expects a number, got '" + v + "'");
  }
  return d;
}

long long RunConfig::get_int(const std::string& key) const {
  const std::string& v = get(key);
  long long i = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), i);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ParameterError("config key '" + key + "' expects an integer, got '" + v + "'");
  }
  return i;
}

std::size_t RunConfig::get_size(const std::string& key) const {
  const long long i = get_int(key);
  if (i < 0) throw ParameterError("config key '" + key + "' must be >= 0");
  return static_cast<std::size_t>(i);
}

bool RunConfig::get_bool(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ParameterError("config key '" + key + "' expects true/false, got '" + v + "'");
}

std::string RunConfig::to_text() const {
  std::ostringstream os;
  os << "# resolved run configuration\n";
  for (const auto& k : config_keys()) {
    os << "# " << k.doc << '\n' << k.name << " = " << values_.at(k.name) << '\n';
  }
  return os.str();
}

ModelConfig RunConfig::model_config(std::size_t feature_dim, std::size_t dataset_k) const {
  ModelConfig m;
  m.num_actions = (is_explicit("num_actions") || dataset_k == 0) ? get_size("num_actions")
                                                                 : dataset_k;
  m.num_rules = get_size("num_rules");
  m.state_dim = get_size("state_dim");
  m.feature_dim = feature_dim;
  m.hidden_dims.clear();
  for (double h : parse_list(*this, "hidden_dims")) {
    if (h < 1 || h != static_cast<double>(static_cast<std::size_t>(h))) {
      throw ParameterError("hidden_dims entries must be positive integers");
    }
    m.hidden_dims.push_back(static_cast<std::size_t>(h));
  }
  m.temperature = get_double("temperature");
  m.activation = parse_activation(get("activation"));
  m.hard_transition = get_bool("hard_transition");
  m.cross_projection_dim = get_bool("cross_in_loss") || get_bool("cross_in_cost")
                               ? get_size("cross_projection_dim")
                               : 0;
  m.validate();
  return m;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.epochs = get_size("epochs");
  t.adam.learning_rate = get_double("learning_rate");
  t.adam.beta1 = get_double("beta1");
  t.adam.beta2 = get_double("beta2");
  t.adam.epsilon = get_double("adam_epsilon");
  t.m_steps_per_e_step = get_size("m_steps_per_e_step");
  t.seed = static_cast<std::uint64_t>(get_int("seed"));
  t.temperature_decay = get_double("temperature_decay");
  t.temperature_floor = get_double("temperature_floor");
  t.patience = get_size("patience");
  t.min_improvement = get_double("min_improvement");
  t.threads = get_size("threads");

  RankingConfig& r = t.ranking;
  r.num_candidates = get_size("num_candidates");
  r.gamma1 = parse_auto_double(*this, "gamma1");
  r.gamma2 = parse_auto_double(*this, "gamma2");
  r.gamma3 = parse_auto_double(*this, "gamma3");
  r.gamma_cross = parse_auto_double(*this, "gamma_cross");
  r.length_model.kind = parse_length_kind(get("length_model"));
  r.length_model.learnable = get_bool("length_learnable");
  r.length_model.lambda = parse_list(*this, "length_lambda");
  r.length_model.mu = parse_list(*this, "length_mu");
  r.length_model.sigma = parse_list(*this, "length_sigma");
  r.cross_video_in_cost = get_bool("cross_in_cost");

  t.cross_in_loss = get_bool("cross_in_loss");
  t.cross_loss_weight = get_double("cross_loss_weight");
  t.match.kind = parse_match_kind(get("match_kind"));
  t.match.margin = get_double("margin");
  t.match.samples = get_size("triples_per_batch");

  const std::string pick = get("candidate_pick");
  if (pick == "min_cost") {
    t.pick = CandidatePick::kMinCost;
  } else if (pick == "random") {
    t.pick = CandidatePick::kRandom;
  } else {
    throw ParameterError("candidate_pick must be min_cost | random");
  }
  const std::string sampling = get("e_step_sampling");
  if (sampling == "gumbel") {
    t.greedy_e_step = false;
  } else if (sampling == "greedy") {
    t.greedy_e_step = true;
  } else {
    throw ParameterError("e_step_sampling must be gumbel | greedy");
  }

  std::string ablation = get("ablation");
  std::replace(ablation.begin(), ablation.end(), '-', '_');
  auto only = [&](bool c1, bool c2, bool c3) {
    if (!c1) r.gamma1 = 0.0;
    if (!c2) r.gamma2 = 0.0;
    if (!c3) r.gamma3 = 0.0;
  };
  if (ablation == "none" || ablation == "full") {
  } else if (ablation == "c1") {
    only(true, false, false);
  } else if (ablation == "c2") {
    only(false, true, false);
  } else if (ablation == "c3") {
    only(false, false, true);
  } else if (ablation == "c1c2") {
    only(true, true, false);
  } else if (ablation == "c1c3") {
    only(true, false, true);
  } else if (ablation == "c2c3") {
    only(false, true, true);
  } else if (ablation == "random_pick") {
    t.pick = CandidatePick::kRandom;
  } else if (ablation == "no_gumbel") {
    t.greedy_e_step = true;
  } else {
    throw ParameterError("unknown ablation '" + ablation + "'");
  }
  return t;
}

SynthSpec RunConfig::synth_spec() const {
  SynthSpec s;
  s.num_tasks = get_size("synth_tasks");
  s.videos_per_task = get_size("synth_videos_per_task");
  s.num_actions = get_size("synth_k");
  s.feature_dim = get_size("synth_feature_dim");
  s.min_frames = get_size("synth_min_frames");
  s.max_frames = get_size("synth_max_frames");
  const std::string dist = get("synth_length_dist");
  if (dist == "poisson") {
    s.length_kind = LengthModel::Kind::kPoisson;
  } else if (dist == "gaussian") {
    s.length_kind = LengthModel::Kind::kGaussian;
  } else {
    throw ParameterError("synth_length_dist must be poisson | gaussian");
  }
  s.length_lambda = get_double("synth_length_lambda");
  s.length_mu = get_double("synth_length_mu");
  s.length_sigma = get_double("synth_length_sigma");
  s.separation = get_double("synth_separation");
  s.noise_sigma = get_double("synth_noise_sigma");
  s.video_shift = get_double("synth_video_shift");
  s.order_jitter = get_double("synth_order_jitter");
  s.seed = static_cast<std::uint64_t>(get_int("synth_seed"));
  return s;
}

}  // namespace actseg
