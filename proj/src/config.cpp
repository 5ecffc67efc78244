#include "magic/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace magic {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

KeyValueFile KeyValueFile::parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_string(ss.str(), path.string());
}

KeyValueFile KeyValueFile::parse_string(const std::string& text, const std::string& origin) {
  KeyValueFile kv;
  kv.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    }
    if (kv.values_.count(key)) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
    kv.values_[key] = value;
  }
  return kv;
}

std::string KeyValueFile::get_string(const std::string& key, const std::string& def) {
  auto it = values_.find(key);
  consumed_.insert(key);
  return it == values_.end() ? def : it->second;
}

double KeyValueFile::get_double(const std::string& key, double def) {
  auto it = values_.find(key);
  consumed_.insert(key);
  if (it == values_.end()) return def;
  char* end = nullptr;
  double v = std::strtod(it->second.c_str(), &end);
  if (end == it->second.c_str() || *end != '\0') {
    throw ConfigError(origin_ + ": key '" + key + "' is not a number: " + it->second);
  }
  return v;
}

std::int64_t KeyValueFile::get_int(const std::string& key, std::int64_t def) {
  auto it = values_.find(key);
  consumed_.insert(key);
  if (it == values_.end()) return def;
  char* end = nullptr;
  long long v = std::strtoll(it->second.c_str(), &end, 10);
  if (end == it->second.c_str() || *end != '\0') {
    throw ConfigError(origin_ + ": key '" + key + "' is not an integer: " + it->second);
  }
  return v;
}

bool KeyValueFile::get_bool(const std::string& key, bool def) {
  auto it = values_.find(key);
  consumed_.insert(key);
  if (it == values_.end()) return def;
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(origin_ + ": key '" + key + "' is not a bool: " + v);
}

std::vector<int> KeyValueFile::get_int_list(const std::string& key, std::vector<int> def) {
  auto it = values_.find(key);
  consumed_.insert(key);
  if (it == values_.end()) return def;
  std::vector<int> out;
  std::string token;
  std::istringstream in(it->second);
  while (std::getline(in, token, ',')) {
    token = trim(token);
    if (token.empty()) continue;
    char* end = nullptr;
    long v = std::strtol(token.c_str(), &end, 10);
    if (end == token.c_str() || *end != '\0') {
      throw ConfigError(origin_ + ": key '" + key + "' has a non-integer entry: " + token);
    }
    out.push_back(static_cast<int>(v));
  }
  if (out.empty()) throw ConfigError(origin_ + ": key '" + key + "' is an empty list");
  return out;
}

void KeyValueFile::require_all_consumed() const {
  std::string unknown;
  for (const auto& [k, v] : values_) {
    if (!consumed_.count(k)) {
      if (!unknown.empty()) unknown += ", ";
      unknown += k;
    }
  }
  if (!unknown.empty()) {
    throw ConfigError(origin_ + ": unknown config keys: " + unknown);
  }
}

std::string KeyValueFile::canonical_text() const {
  std::string out;
  for (const auto& [k, v] : values_) {
    out += k;
    out += '=';
    out += v;
    out += '\n';
  }
  return out;
}

std::uint64_t config_hash(const KeyValueFile& kv) {
  std::uint64_t h = 1469598103934665603ULL;
  for (char c : kv.canonical_text()) {
    h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ULL;
  }
  return h;
}

void SceneConfig::validate() const {
  if (height < 16 || width < 16) throw ConfigError("scene height/width must be >= 16");
  if (height % 4 != 0 || width % 4 != 0) {
    throw ConfigError("scene height/width must be multiples of 4");
  }
  if (classes < 2 || classes > 255) throw ConfigError("classes must be in [2, 255]");
  if (min_shapes < 1 || max_shapes < min_shapes) {
    throw ConfigError("need 1 <= min_shapes <= max_shapes");
  }
  if (corruption_prob < 0.0 || corruption_prob > 1.0) {
    throw ConfigError("corruption_prob must be in [0, 1]");
  }
  if (corruption_kind != "blackout" && corruption_kind != "gaussian-noise" &&
      corruption_kind != "blur" && corruption_kind != "downsample" &&
      corruption_kind != "mixed") {
    throw ConfigError("unknown corruption_kind: " + corruption_kind);
  }
}

SceneConfig SceneConfig::from_kv(KeyValueFile& kv) {
  SceneConfig c;
  c.height = static_cast<int>(kv.get_int("height", c.height));
  c.width = static_cast<int>(kv.get_int("width", c.width));
  c.classes = static_cast<int>(kv.get_int("classes", c.classes));
  c.min_shapes = static_cast<int>(kv.get_int("min_shapes", c.min_shapes));
  c.max_shapes = static_cast<int>(kv.get_int("max_shapes", c.max_shapes));
  c.corruption_prob = kv.get_double("corruption_prob", c.corruption_prob);
  c.corruption_kind = kv.get_string("corruption_kind", c.corruption_kind);
  kv.require_all_consumed();
  c.validate();
  return c;
}

SceneConfig SceneConfig::from_file(const std::filesystem::path& path, std::uint64_t* hash_out) {
  KeyValueFile kv = KeyValueFile::parse_file(path);
  if (hash_out) *hash_out = config_hash(kv);
  return from_kv(kv);
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (warmup_epochs < 0 || warmup_epochs >= epochs) {
    throw ConfigError("need 0 <= warmup_epochs < epochs");
  }
  if (base_lr <= 0 || warmup_factor <= 0) throw ConfigError("learning rates must be > 0");
  if (poly_power <= 0) throw ConfigError("poly_power must be > 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (lambda < 0 || beta < 0) throw ConfigError("lambda and beta must be >= 0");
  if (feature_dim < 2) throw ConfigError("feature_dim must be >= 2");
  if (checkpoint_interval < 0) throw ConfigError("checkpoint_interval must be >= 0");
  if (consistency_reference != "salient" && consistency_reference != "semantic") {
    throw ConfigError("consistency_reference must be 'salient' or 'semantic'");
  }
  if (pooling_sizes.empty()) throw ConfigError("pooling_sizes must not be empty");
  for (std::size_t i = 0; i < pooling_sizes.size(); ++i) {
    if (pooling_sizes[i] < 1 || pooling_sizes[i] % 2 == 0) {
      throw ConfigError("pooling sizes must be odd and positive");
    }
    if (i > 0 && pooling_sizes[i] <= pooling_sizes[i - 1]) {
      throw ConfigError("pooling sizes must be strictly increasing");
    }
  }
}

TrainConfig TrainConfig::from_kv(KeyValueFile& kv) {
  TrainConfig c;
  c.epochs = static_cast<int>(kv.get_int("epochs", c.epochs));
  c.warmup_epochs = static_cast<int>(kv.get_int("warmup_epochs", c.warmup_epochs));
  c.warmup_factor = kv.get_double("warmup_factor", c.warmup_factor);
  c.base_lr = kv.get_double("base_lr", c.base_lr);
  c.poly_power = kv.get_double("poly_power", c.poly_power);
  c.adam_eps = kv.get_double("adam_eps", c.adam_eps);
  c.weight_decay = kv.get_double("weight_decay", c.weight_decay);
  c.adam_beta1 = kv.get_double("adam_beta1", c.adam_beta1);
  c.adam_beta2 = kv.get_double("adam_beta2", c.adam_beta2);
  c.batch_size = static_cast<int>(kv.get_int("batch_size", c.batch_size));
  c.lambda = kv.get_double("lambda", c.lambda);
  c.beta = kv.get_double("beta", c.beta);
  c.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<std::int64_t>(c.seed)));
  c.use_residual = kv.get_bool("use_residual", c.use_residual);
  c.use_pooling = kv.get_bool("use_pooling", c.use_pooling);
  c.use_mlp = kv.get_bool("use_mlp", c.use_mlp);
  c.consistency_reference = kv.get_string("consistency_reference", c.consistency_reference);
  c.feature_dim = static_cast<int>(kv.get_int("feature_dim", c.feature_dim));
  c.modalities = kv.get_string("modalities", c.modalities);
  c.checkpoint_interval = static_cast<int>(kv.get_int("checkpoint_interval", c.checkpoint_interval));
  c.pooling_sizes = kv.get_int_list("pooling_sizes", c.pooling_sizes);
  kv.require_all_consumed();
  c.validate();
  return c;
}

TrainConfig TrainConfig::from_file(const std::filesystem::path& path) {
  KeyValueFile kv = KeyValueFile::parse_file(path);
  return from_kv(kv);
}

}  // namespace magic
