#pragma once

// Closed-loop evaluation, aggregation across seeds, and trajectory export.

#include "iris/control.hpp"
#include "iris/envs.hpp"
#include "iris/training.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace iris {

struct EvalConfig {
  int n_episodes = 100;
  int h_max = 800;
  double gamma = 0.99;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  ControlConfig control;
  GraphReachConfig env;
};

void validate(const EvalConfig& config);

struct EpisodeRecord {
  std::vector<Vec> states;  // length steps + 1
  std::vector<Vec> actions;
  std::vector<double> rewards;
  std::vector<GoalLogEntry> goal_log;
  bool success = false;
  double discounted_return = 0.0;

  int length() const { return static_cast<int>(actions.size()); }
};

/// sum_t gamma^t r_t, plus gamma^T_end / (1 - gamma) for the absorbing goal
/// after a successful episode of T_end steps.
double absorbing_return(const std::vector<double>& rewards, bool success, double gamma);

/// Resets env and controller, then steps until done or h_max steps.
EpisodeRecord rollout(GraphReachEnv& env, Controller& controller, int h_max, double gamma, Rng& rng);

struct EvalSummary {
  int n_episodes = 0;
  double success_rate = 0.0;
  std::optional<double> mean_success_length;  // absent without successes
  double mean_return = 0.0;
};

EvalSummary summarize(const std::vector<EpisodeRecord>& episodes);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation across seeds
};
MeanStd mean_std(const std::vector<double>& values);

using ControllerFactory = std::function<std::unique_ptr<Controller>()>;

/// Rng of episode `episode` under evaluation seed `seed`.
Rng episode_rng(std::uint64_t seed, int episode);

/// n_episodes independent rollouts, run in parallel; results are ordered by
/// episode index and do not depend on the thread count.
std::vector<EpisodeRecord> run_episodes(const ControllerFactory& factory, const EvalConfig& config,
                                        std::uint64_t seed);

struct CheckpointResult {
  std::int64_t iter = 0;
  std::string path;
  std::uint64_t hash = 0;
  EvalSummary summary;
};

struct SeedResult {
  std::uint64_t seed = 0;
  std::vector<CheckpointResult> checkpoints;
  std::size_t best = 0;  // index into checkpoints
  const CheckpointResult& best_result() const { return checkpoints.at(best); }
};

/// Highest success rate, then shortest mean successful length, then the
/// earliest checkpoint.
std::size_t best_checkpoint(const std::vector<CheckpointResult>& results);

/// One training run's checkpoints under evaluation seed `seed`. The
/// untrained iteration-0 checkpoint is skipped whenever later ones exist.
SeedResult evaluate_run(const std::vector<SavedCheckpoint>& checkpoints, const EvalConfig& config,
                        std::uint64_t seed);

struct EvalReport {
  std::string variant;
  std::vector<SeedResult> seeds;
  MeanStd success_rate;
  std::optional<MeanStd> mean_success_length;
  MeanStd mean_return;
};

/// Aggregates best-per-seed results into mean +- std across seeds.
EvalReport aggregate(std::string variant, std::vector<SeedResult> seeds);

/// Table-style metrics of replaying the stored demonstrations.
EvalSummary dataset_summary(const TrajectoryDataset& dataset, double gamma);

/// JSON with the three metrics, per-seed breakdown and the config echo
/// (`config_echo` holds "key = value" lines).
/// `dataset_row`, when given, is the dataset reference row.
std::string report_json(const EvalReport& report, const EvalConfig& config, const std::string& config_echo,
                        const std::optional<EvalSummary>& dataset_row = std::nullopt);

/// SVG coordinates of a point in the unit square; y grows downward.
struct SvgPoint {
  double x, y;
};
inline constexpr double kSvgSize = 500.0;
SvgPoint to_svg(double x, double y);

/// Writes rollouts.csv (policy, episode, step, x, y) and overlay.svg with
/// up to 50 dataset trajectories and up to 5 rollouts per policy.
void export_trajectories(const std::map<std::string, std::vector<EpisodeRecord>>& records,
                         const TrajectoryDataset& dataset, const std::filesystem::path& dir);

/// Distance from each query state to its nearest reference state.
std::vector<double> nearest_distances(const std::vector<Vec>& queries, const std::vector<Vec>& reference);
/// Linear-interpolated percentile, q in [0, 100].
double percentile(std::vector<double> values, double q);
std::vector<Vec> all_states(const TrajectoryDataset& dataset);
std::vector<Vec> all_states(const std::vector<EpisodeRecord>& episodes);

}  // namespace iris
