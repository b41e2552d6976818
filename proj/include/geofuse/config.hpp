#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "geofuse/model.hpp"

namespace geofuse {

struct TrainConfig;
struct SynthConfig;
struct MaskOptions;

struct ConfigKey {
  std::string_view name;
  std::string_view default_value;
  std::string_view doc;
};

// Every recognized key with its default, in echo order.
const std::vector<ConfigKey>& config_keys();

/// Flat "key = value" configuration. '#' starts a comment. Unknown keys are
/// rejected; typed getters validate values on access.
class RunConfig {
 public:
  RunConfig();

  static RunConfig parse(std::string_view text, const std::string& source = "<memory>");
  static RunConfig load(const std::filesystem::path& path);

  void set(std::string_view key, std::string value);
  const std::string& get(std::string_view key) const;

  int get_int(std::string_view key) const;
  double get_double(std::string_view key) const;
  std::uint64_t get_u64(std::string_view key) const;
  bool get_bool(std::string_view key) const;
  std::set<int> get_int_set(std::string_view key) const;

  // All keys, one "key = value" line each, in config_keys() order.
  std::string echo() const;
  // Only the keys in `names`, same layout.
  std::string echo(const std::vector<std::string_view>& names) const;

  ModelConfig model_config() const;
  TrainConfig train_config() const;
  SynthConfig synth_config() const;
  MaskOptions mask_options() const;

 private:
  std::map<std::string, std::string, std::less<>> values_;
};

// Keys that fully determine a ModelConfig.
const std::vector<std::string_view>& model_config_keys();

void set_model_config(RunConfig& rc, const ModelConfig& mc);

}  // namespace geofuse
