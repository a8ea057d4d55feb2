#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "coad/dataio.hpp"
#include "coad/model.hpp"
#include "coad/train.hpp"

namespace coad {

// Flat "key = value" text. '#' starts a comment; blank lines are ignored.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(const std::string& text, const std::string& source = "<string>");
  static KeyValueConfig load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool contains(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& values() const { return values_; }
  const std::string& source() const { return source_; }

 private:
  std::map<std::string, std::string> values_;
  std::string source_ = "<string>";
};

struct ExperimentConfig {
  ModelConfig model;
  TrainSchedule train;
  SynthSpec synth;
};

// Applies every key on top of `base`; "model.preset" is applied first.
// Unknown keys and malformed values raise ConfigError naming the key.
ExperimentConfig apply_config(const KeyValueConfig& kv, ExperimentConfig base = {});
ModelConfig apply_model_config(const KeyValueConfig& kv, ModelConfig base = {});

std::vector<std::string> known_config_keys();

std::string to_text(const ExperimentConfig& config);
// Only the backbone., gasa., ggd., model. and loss. keys.
std::string model_config_text(const ModelConfig& config);

}  // namespace coad
