#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "actseg/model.hpp"
#include "actseg/synth.hpp"
#include "actseg/trainer.hpp"

namespace actseg {

struct ConfigKey {
  const char* name;
  const char* default_value;
  const char* doc;
};

/// Every recognised key with its default and one-line description.
const std::vector<ConfigKey>& config_keys();

/// Flat key=value run configuration. Files hold one `key = value` per line
/// with '#' comments; unknown keys are rejected with ParameterError.
class RunConfig {
 public:
  RunConfig();

  void load_file(const std::filesystem::path& path);
  /// Parses "key=value".
  void set_assignment(const std::string& assignment);
  void set(const std::string& key, const std::string& value);
  const std::string& get(const std::string& key) const;
  bool is_explicit(const std::string& key) const { return explicit_.count(key) > 0; }

  double get_double(const std::string& key) const;
  long long get_int(const std::string& key) const;
  std::size_t get_size(const std::string& key) const;
  bool get_bool(const std::string& key) const;

  /// Fully resolved text form, one key per line in documentation order.
  std::string to_text() const;

  /// Builders. `feature_dim` and `dataset_k` come from the manifest; the
  /// manifest's k is used unless num_actions was set explicitly.
  ModelConfig model_config(std::size_t feature_dim, std::size_t dataset_k) const;
  TrainConfig train_config() const;
  SynthSpec synth_spec() const;

 private:
  std::map<std::string, std::string> values_;
  std::set<std::string> explicit_;
};

}  // namespace actseg
