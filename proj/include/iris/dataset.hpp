#pragma once

#include "iris/common.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace iris {

/// One goal-reaching demonstration. Column k of `states` is s_k; the
/// trajectory has length L = actions.cols() and L + 1 states.
struct Trajectory {
  MatF states;   // obs_dim x (L + 1)
  MatF actions;  // act_dim x L
  VecF rewards;  // L

  Eigen::Index length() const { return actions.cols(); }
  Eigen::Index obs_dim() const { return states.rows(); }
  Eigen::Index act_dim() const { return actions.rows(); }

  friend bool operator==(const Trajectory& a, const Trajectory& b);
};

/// Throws std::invalid_argument unless the trajectory has consistent
/// lengths, finite entries, and sparse goal-reaching rewards (all zero
/// except a final 1).
void validate_trajectory(const Trajectory& traj);

struct NormStats {
  Vec state_mean, state_std;
  Vec action_mean, action_std;
};

inline constexpr double kStdFloor = 1e-6;

class TrajectoryDataset {
 public:
  TrajectoryDataset(int obs_dim, int act_dim, std::string env_id);

  /// Rejects trajectories of the wrong dimension or that are not
  /// goal-reaching. Marks normalization statistics stale.
  void append(Trajectory traj);

  /// Recomputes per-dimension mean / std (population, floored at 1e-6).
  const NormStats& recompute_norm_stats();

  /// Throws std::logic_error if the statistics are stale.
  const NormStats& norm_stats() const;
  bool has_norm_stats() const { return norm_.has_value(); }

  std::size_t size() const { return trajectories_.size(); }
  bool empty() const { return trajectories_.empty(); }
  const Trajectory& operator[](std::size_t i) const { return trajectories_[i]; }
  const std::vector<Trajectory>& trajectories() const { return trajectories_; }

  int obs_dim() const { return obs_dim_; }
  int act_dim() const { return act_dim_; }
  const std::string& env_id() const { return env_id_; }

  double mean_length() const;

  friend bool operator==(const TrajectoryDataset& a, const TrajectoryDataset& b);

 private:
  int obs_dim_;
  int act_dim_;
  std::string env_id_;
  std::vector<Trajectory> trajectories_;
  std::optional<NormStats> norm_;
};

NormStats compute_norm_stats(const TrajectoryDataset& dataset);

/// A contiguous slice of one trajectory: states t..t+T, actions and rewards
/// t..t+T-1.
struct SequenceWindow {
  std::size_t traj_index = 0;
  Eigen::Index start = 0;
  MatF states;   // obs_dim x (T + 1)
  MatF actions;  // act_dim x T
  VecF rewards;  // T
  bool is_terminal = false;

  Eigen::Index steps() const { return actions.cols(); }
  auto goal() const { return states.col(states.cols() - 1); }
};

/// Uniform sampling over every valid window start in the dataset;
/// trajectories shorter than T contribute no windows.
class WindowSampler {
 public:
  WindowSampler(const TrajectoryDataset& dataset, int T);

  SequenceWindow sample(Rng& rng) const;
  /// Window by its global index in [0, window_count()).
  SequenceWindow at(std::uint64_t global_index) const;
  std::uint64_t window_count() const { return total_; }
  int T() const { return T_; }

 private:
  const TrajectoryDataset* dataset_;
  int T_;
  std::vector<std::size_t> traj_ids_;
  std::vector<std::uint64_t> cumulative_;  // exclusive upper bounds
  std::uint64_t total_ = 0;
};

SequenceWindow sample_window(const TrajectoryDataset& dataset, int T, Rng& rng);

/// Keeps the ceil(frac * N) shortest trajectories (stable on ties), in
/// their original order. Normalization statistics are recomputed.
TrajectoryDataset filter_best_fraction(const TrajectoryDataset& dataset, double frac);

void save_dataset(const TrajectoryDataset& dataset, const std::filesystem::path& path);
TrajectoryDataset load_dataset(const std::filesystem::path& path);

std::string encode_dataset(const TrajectoryDataset& dataset);
TrajectoryDataset decode_dataset(const std::string& bytes);

}  // namespace iris
