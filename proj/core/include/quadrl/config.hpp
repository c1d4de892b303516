#pragma once

#include "quadrl/evaluation.hpp"
#include "quadrl/trainer.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace quadrl {

/// Everything a run needs. Serialized as a flat sectioned key/value file
/// (a TOML subset: [section], key = value, # comments, quoted strings,
/// numbers, booleans and one-level numeric arrays).
struct RunConfig {
  TrainConfig train;
  RecoveryConfig recovery;
  WaypointConfig waypoint;
  BenchConfig bench;
  std::string output_dir = "runs/default";
};

struct ConfigKey {
  std::string name;  ///< "section.key"
  std::string doc;
};

/// All recognised keys, in echo order.
const std::vector<ConfigKey>& config_keys();

/// Applies the assignments in `text` on top of `config`. Errors name the key
/// (and `source`, line) that caused them.
void apply_config_text(RunConfig& config, std::string_view text, const std::string& source = "<string>");

/// Defaults plus the file's assignments. Missing file -> ConfigError naming the path.
RunConfig load_config(const std::filesystem::path& path);

/// "section.key=value", as given to --set.
void apply_override(RunConfig& config, std::string_view assignment);

/// Reads one key back in file syntax.
std::string config_value(const RunConfig& config, const std::string& key);

/// Full resolved config. Parsing it back gives an identical RunConfig.
std::string to_config_text(const RunConfig& config);
void save_config(const std::filesystem::path& path, const RunConfig& config);

}  // namespace quadrl
