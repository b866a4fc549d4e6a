#pragma once

// Offline training of every variant from a fixed dataset. Nothing here
// depends on an environment.

#include "iris/dataset.hpp"
#include "iris/model_set.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace iris {

struct TrainConfig {
  Variant variant = Variant::kIris;
  int T = 10;
  int batch_size = 128;
  int n_iter = 2000;
  double gamma = 0.99;
  int M = 10;
  double beta_g = 0.05;
  double beta_a = 0.05;
  double lr_policy = 1e-3;
  double lr_goal = 1e-3;
  double lr_action = 1e-3;
  double lr_q = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double tau = 0.005;
  std::uint64_t seed = 0;
  int checkpoint_every = 500;
  int log_every = 10;
  /// Train Q on every transition of the window instead of only the last.
  bool q_all_transitions = false;
  int hidden = 64;
  int goal_latent = 8;
  int action_latent = 4;
  // Per-component switches; a component the variant lacks is skipped
  // regardless.
  bool update_policy = true;
  bool update_goal = true;
  bool update_action = true;
  bool update_q = true;
};

void validate(const TrainConfig& config);
/// Canonical "key=value" listing used for hashing and report echoes.
std::string describe(const TrainConfig& config);
std::uint64_t config_hash(const TrainConfig& config);

ModelConfig model_config(const TrainConfig& config, int obs_dim, int act_dim);

/// Window length the variant trains on: single transitions for BC and BCQ,
/// T-step windows otherwise.
int window_length(const TrainConfig& config);

struct LossRecord {
  std::int64_t iter = 0;
  double loss_policy = 0.0;
  double loss_goal_recon = 0.0;
  double loss_goal_kl = 0.0;
  double loss_action_recon = 0.0;
  double loss_action_kl = 0.0;
  double loss_q = 0.0;
  double q_mean = 0.0;

  friend bool operator==(const LossRecord&, const LossRecord&) = default;
};

struct TrainState {
  std::int64_t iteration = 0;
  LossRecord running;  // exponential moving averages
  Rng sample_rng;
  Rng goal_rng;
  Rng action_rng;
  Rng target_rng;

  explicit TrainState(std::uint64_t seed);
};

/// Value target for one transition: r / (1 - gamma) at an absorbing goal,
/// otherwise r + gamma * max over M action-cVAE proposals at s_next of the
/// target network. Inputs are raw.
double q_target(const QNet& qnet, const CVAE& action_cvae, const Normalizer& norm, const Vec& s_next, double r,
                bool is_terminal, double gamma, int M, Rng& rng);

/// Batched form over columns of s_next; consumes the generator exactly as
/// repeated single calls would.
Vec q_targets(const QNet& qnet, const CVAE& action_cvae, const Normalizer& norm, const Mat& s_next, const Vec& r,
              const std::vector<bool>& is_terminal, double gamma, int M, Rng& rng);

/// One iteration: policy imitation, goal model, action cVAE, then the Q
/// update with its polyak step, in that order, on a single sampled batch.
LossRecord train_step(ModelSet& models, const WindowSampler& sampler, const TrainConfig& config, TrainState& state);

struct SavedCheckpoint {
  std::int64_t iter = 0;
  std::filesystem::path path;  // empty when not written to disk
  Checkpoint checkpoint;
};

struct TrainResult {
  std::vector<SavedCheckpoint> checkpoints;
  std::vector<LossRecord> log;
  ModelSet final_models;
};

/// Runs `n_iter` steps, checkpointing at iteration 0, every
/// `checkpoint_every` iterations and at the end. When `out_dir` is given,
/// checkpoints and metrics.csv are written there.
TrainResult train(const TrajectoryDataset& dataset, const TrainConfig& config,
                  const std::optional<std::filesystem::path>& out_dir = std::nullopt);

std::string metrics_csv_header();
std::string metrics_csv_row(const LossRecord& r);

}  // namespace iris
