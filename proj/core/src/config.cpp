#include "coad/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "coad/error.hpp"

namespace coad {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::int64_t to_int(const std::string& key, const std::string& v) {
  std::int64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return out;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

double to_real(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

std::string real_text(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct Field {
  const char* key;
  std::function<void(ExperimentConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define COAD_INT_FIELD(name, member) \
  Field{name, [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.member = to_int(k, v); }, \
        [](const ExperimentConfig& c) { return std::to_string(c.member); }}
#define COAD_UINT_FIELD(name, member) \
  Field{name, [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.member = to_uint(k, v); }, \
        [](const ExperimentConfig& c) { return std::to_string(c.member); }}
#define COAD_REAL_FIELD(name, member) \
  Field{name, [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.member = to_real(k, v); }, \
        [](const ExperimentConfig& c) { return real_text(c.member); }}
#define COAD_BOOL_FIELD(name, member) \
  Field{name, [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.member = to_bool(k, v); }, \
        [](const ExperimentConfig& c) { return std::string(c.member ? "true" : "false"); }}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      COAD_INT_FIELD("backbone.input_size", model.backbone.input_size),
      COAD_INT_FIELD("backbone.channels", model.backbone.out_channels),
      COAD_INT_FIELD("backbone.stem_channels", model.backbone.stem_channels),
      COAD_INT_FIELD("gasa.blocks", model.blocks),
      COAD_INT_FIELD("ggd.se_reduction", model.se_reduction),
      COAD_INT_FIELD("model.group_size", model.group_size),
      COAD_INT_FIELD("model.aux_batch", model.aux_batch),
      COAD_UINT_FIELD("model.seed", model.seed),
      COAD_BOOL_FIELD("model.use_oiasg", model.ablation.use_oiasg),
      COAD_BOOL_FIELD("model.use_gasa", model.ablation.use_gasa),
      COAD_BOOL_FIELD("model.use_ggd", model.ablation.use_ggd),
      COAD_BOOL_FIELD("model.use_gcpd", model.ablation.use_gcpd),
      COAD_REAL_FIELD("loss.alpha", model.loss_alpha),
      COAD_REAL_FIELD("loss.beta", model.loss_beta),
      COAD_REAL_FIELD("train.lr0", train.lr0),
      COAD_INT_FIELD("train.halve_every", train.halve_every),
      COAD_INT_FIELD("train.max_iters", train.max_iters),
      COAD_REAL_FIELD("train.weight_decay", train.weight_decay),
      COAD_UINT_FIELD("train.seed", train.seed),
      COAD_INT_FIELD("train.subgroups_per_iter", train.subgroups_per_iter),
      COAD_INT_FIELD("train.checkpoint_every", train.checkpoint_every),
      COAD_REAL_FIELD("train.stop_below_loss", train.stop_below_loss),
      COAD_INT_FIELD("synth.canvas", synth.canvas),
      COAD_INT_FIELD("synth.n_groups", synth.n_groups),
      COAD_INT_FIELD("synth.group_size", synth.group_size),
      COAD_INT_FIELD("synth.max_distractors", synth.max_distractors),
      COAD_REAL_FIELD("synth.noise_sigma", synth.noise_sigma),
      COAD_REAL_FIELD("synth.min_area", synth.min_area),
      COAD_REAL_FIELD("synth.max_area", synth.max_area),
      COAD_UINT_FIELD("synth.seed", synth.seed),
  };
  return table;
}

#undef COAD_INT_FIELD
#undef COAD_UINT_FIELD
#undef COAD_REAL_FIELD
#undef COAD_BOOL_FIELD

bool is_model_key(const std::string& key) {
  for (const char* prefix : {"backbone.", "gasa.", "ggd.", "model.", "loss."}) {
    if (key.rfind(prefix, 0) == 0) return true;
  }
  return false;
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(const std::string& text, const std::string& source) {
  KeyValueConfig kv;
  kv.source_ = source;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(source + ":" + std::to_string(lineno) + ": empty key");
    kv.values_[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

ExperimentConfig apply_config(const KeyValueConfig& kv, ExperimentConfig base) {
  if (auto it = kv.values().find("model.preset"); it != kv.values().end()) {
    base.model = ModelConfig::preset(it->second);
    base.synth.canvas = base.model.backbone.input_size;
  }
  for (const auto& [key, value] : kv.values()) {
    if (key == "model.preset") continue;
    bool found = false;
    for (const auto& f : fields()) {
      if (key == f.key) {
        f.set(base, key, value);
        found = true;
        break;
      }
    }
    if (!found) throw ConfigError("unknown config key '" + key + "' in " + kv.source());
  }
  return base;
}

ModelConfig apply_model_config(const KeyValueConfig& kv, ModelConfig base) {
  for (const auto& [key, value] : kv.values()) {
    if (key != "model.preset" && !is_model_key(key)) {
      throw ConfigError("'" + key + "' is not a model key in " + kv.source());
    }
  }
  ExperimentConfig e;
  e.model = base;
  return apply_config(kv, e).model;
}

std::vector<std::string> known_config_keys() {
  std::vector<std::string> keys{"model.preset"};
  for (const auto& f : fields()) keys.emplace_back(f.key);
  return keys;
}

std::string to_text(const ExperimentConfig& config) {
  std::string out;
  for (const auto& f : fields()) out += std::string(f.key) + " = " + f.get(config) + "\n";
  return out;
}

std::string model_config_text(const ModelConfig& config) {
  ExperimentConfig e;
  e.model = config;
  std::string out;
  for (const auto& f : fields()) {
    if (is_model_key(f.key)) out += std::string(f.key) + " = " + f.get(e) + "\n";
  }
  return out;
}

}  // namespace coad
