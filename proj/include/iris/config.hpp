#pragma once

// Flat "key = value" configuration covering data generation, training and
// evaluation. Lines starting with '#' are comments; unknown keys are errors.

#include "iris/envs.hpp"
#include "iris/eval.hpp"
#include "iris/training.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace iris {

struct ConfigBundle {
  DemoGenConfig gen;
  TrainConfig train;
  EvalConfig eval;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sets one key, e.g. "train.n_iter" = "5000". Throws ConfigError.
void set_config_value(ConfigBundle& bundle, const std::string& key, const std::string& value);

/// Applies every assignment in `text`; errors name the line.
void apply_config_text(ConfigBundle& bundle, const std::string& text, const std::string& origin = "<config>");
void apply_config_file(ConfigBundle& bundle, const std::filesystem::path& path);
/// Applies "key=value" overrides in order.
void apply_overrides(ConfigBundle& bundle, const std::vector<std::string>& assignments);

/// Copies shared settings (environment geometry, T) between sections and
/// validates everything.
void finalize(ConfigBundle& bundle);

/// Every key with its current value, one "key = value" per line, in a fixed
/// order; parseable by apply_config_text.
std::string dump_config(const ConfigBundle& bundle);
std::vector<std::string> config_keys();

/// JSON description of a generator configuration.
std::string gen_config_json(const DemoGenConfig& gen);

}  // namespace iris
