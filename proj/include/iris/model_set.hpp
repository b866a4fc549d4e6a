#pragma once

#include "iris/models.hpp"

#include <optional>
#include <string>

namespace iris {

enum class Variant { kIris, kIrisNoGoalVae, kIrisNoQ, kBc, kBcRnn, kBcq };

std::string to_string(Variant v);
/// Throws std::invalid_argument for unknown names.
Variant parse_variant(const std::string& name);

struct ModelConfig {
  int obs_dim = 2;
  int act_dim = 2;
  int hidden = 64;
  int goal_latent = 8;
  int action_latent = 4;
  double beta_g = 0.05;
  double beta_a = 0.05;
  double value_scale = 100.0;
};

/// The learned components a variant needs; absent members are not used by
/// that variant.
struct ModelSet {
  Variant variant = Variant::kIris;
  ModelConfig config;
  Normalizer norm;
  std::optional<PolicyRNN> policy;
  std::optional<CVAE> goal_cvae;
  std::optional<CVAE> action_cvae;
  std::optional<QNet> qnet;
  std::optional<Regressor> goal_regressor;
  std::optional<Regressor> bc;

  /// Builds the variant's models with fan-in initialization from `seed`.
  static ModelSet create(Variant variant, const ModelConfig& config, Normalizer norm, std::uint64_t seed);

  /// Serializes under policy/, goal_cvae/, action_cvae/, qnet/,
  /// qnet_target/, goal_regressor/, bc/, norm/ and meta/.
  Checkpoint to_checkpoint(std::uint64_t config_hash) const;
  static ModelSet from_checkpoint(const Checkpoint& ckpt);
};

}  // namespace iris
