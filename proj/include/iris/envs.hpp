#pragma once

#include "iris/dataset.hpp"

#include <string>
#include <vector>

namespace iris {

inline constexpr const char* kGraphReachId = "graph_reach_v1";

struct GraphReachConfig {
  double start_x = 0.5, start_y = 1.0;
  double goal_x = 0.5, goal_y = 0.0;
  int grid_n = 5;
  double a_max = 0.02;
  double goal_radius = 0.05;
  int h_max = 800;
};

struct StepResult {
  Vec state;
  double reward = 0.0;
  bool done = false;
  bool success = false;
  Vec applied_action;  // after the per-axis clip
};

/// Point navigation in the unit square from a fixed start to a fixed goal
/// disc. Observation is the position.
class GraphReachEnv {
 public:
  explicit GraphReachEnv(GraphReachConfig config = {});

  Vec reset();
  StepResult step(const Vec& action);

  const Vec& position() const { return position_; }
  int steps() const { return steps_; }
  bool in_goal(const Vec& p) const;
  const GraphReachConfig& config() const { return config_; }

  static constexpr int kObsDim = 2;
  static constexpr int kActDim = 2;

 private:
  GraphReachConfig config_;
  Vec position_;
  int steps_ = 0;
};

/// Grid node (column, row); row 0 is the top (y = 1), column grid_n / 2 is
/// the central column.
struct GridNode {
  int col = 0;
  int row = 0;
  friend bool operator==(const GridNode&, const GridNode&) = default;
};

struct DemoGenConfig {
  int n_demos = 100;
  int grid_n = 5;
  /// Probability of a lateral excursion at each central node above the goal.
  double detour_prob = 0.35;
  /// Largest lateral depth of an excursion.
  int max_depth = 2;
  /// Extra column-parallel waypoints per unit of lateral depth.
  int depth_multiplier = 2;
  /// Central rows where excursions may start; empty means all.
  std::vector<int> detour_rows;
  double eta_min = 0.005;
  double eta_max = 0.02;
  double noise_sigma = 0.003;
  double capture_radius = 0.03;
  /// Demos must be strictly longer than this (the training window).
  int min_length = 10;
  int max_retries = 100;
  std::uint64_t seed = 0;
  GraphReachConfig env;
};

void validate(const DemoGenConfig& config);

/// One excursion off the central column.
struct Excursion {
  int row = 0;
  int direction = 0;  // -1 left, +1 right
  int depth = 0;
};

struct Demo {
  Trajectory trajectory;
  std::vector<GridNode> waypoints;
  std::vector<Excursion> excursions;
};

/// Waypoint path from the start node down the central column with random
/// excursions; consecutive nodes are 4-neighbors.
std::vector<GridNode> build_waypoint_path(const DemoGenConfig& config, Rng& rng, std::vector<Excursion>* excursions);

Vec node_position(const GridNode& node, int grid_n);

/// Follows a waypoint path with noisy random-magnitude actions until the
/// goal is reached. Throws std::runtime_error if every retry exceeds the
/// step cap.
Demo generate_demo(const DemoGenConfig& config, Rng& rng);

struct GeneratedDataset {
  TrajectoryDataset dataset;
  std::vector<std::vector<Excursion>> excursions;  // per demo
};

GeneratedDataset generate_dataset_with_labels(const DemoGenConfig& config);
TrajectoryDataset generate_dataset(const DemoGenConfig& config);

}  // namespace iris
