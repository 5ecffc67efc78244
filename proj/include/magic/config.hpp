// Plain-text key/value config files: one `key = value` per line, `#` comments.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "magic/errors.hpp"

namespace magic {

class KeyValueFile {
 public:
  static KeyValueFile parse_file(const std::filesystem::path& path);
  static KeyValueFile parse_string(const std::string& text, const std::string& origin = "<string>");

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& def);
  double get_double(const std::string& key, double def);
  std::int64_t get_int(const std::string& key, std::int64_t def);
  bool get_bool(const std::string& key, bool def);
  std::vector<int> get_int_list(const std::string& key, std::vector<int> def);

  // throws ConfigError listing keys that were never read (catches typos)
  void require_all_consumed() const;

  // canonical "key=value" lines sorted by key, used for manifest hashing
  std::string canonical_text() const;

 private:
  std::string origin_;
  std::map<std::string, std::string> values_;
  std::set<std::string> consumed_;
};

// FNV-1a over the canonical text
std::uint64_t config_hash(const KeyValueFile& kv);

struct SceneConfig {
  int height = 32;
  int width = 32;
  int classes = 5;
  int min_shapes = 2;
  int max_shapes = 5;
  double corruption_prob = 0.0;
  // blackout | gaussian-noise | blur | downsample | mixed
  std::string corruption_kind = "blackout";

  void validate() const;
  static SceneConfig from_file(const std::filesystem::path& path, std::uint64_t* hash_out = nullptr);
  static SceneConfig from_kv(KeyValueFile& kv);
};

struct TrainConfig {
  int epochs = 200;
  int warmup_epochs = 10;
  double warmup_factor = 0.1;
  double base_lr = 6e-5;
  double poly_power = 0.9;
  double adam_eps = 1e-8;
  double weight_decay = 1e-2;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  int batch_size = 1;
  double lambda = 0.05;  // weight of the selection loss
  double beta = 2.0;     // weight of the consistency loss
  std::uint64_t seed = 0;
  bool use_residual = true;
  bool use_pooling = true;
  bool use_mlp = true;
  // reference feature for the consistency pair: salient | semantic
  std::string consistency_reference = "salient";
  int feature_dim = 16;
  // empty = all modalities present in the dataset
  std::string modalities;
  int checkpoint_interval = 0;  // steps; 0 = final checkpoint only
  std::vector<int> pooling_sizes{3, 7, 11};

  void validate() const;
  static TrainConfig from_file(const std::filesystem::path& path);
  static TrainConfig from_kv(KeyValueFile& kv);
};

}  // namespace magic
