#include "iris/envs.hpp"

#include <algorithm>
#include <cmath>

namespace iris {

GraphReachEnv::GraphReachEnv(GraphReachConfig config) : config_(config) { reset(); }

Vec GraphReachEnv::reset() {
  position_ = Vec(2);
  position_ << config_.start_x, config_.start_y;
  steps_ = 0;
  return position_;
}

bool GraphReachEnv::in_goal(const Vec& p) const {
  const double dx = p[0] - config_.goal_x;
  const double dy = p[1] - config_.goal_y;
  return std::sqrt(dx * dx + dy * dy) <= config_.goal_radius;
}

StepResult GraphReachEnv::step(const Vec& action) {
  if (action.size() != kActDim) throw std::invalid_argument("graph reach actions are 2-vectors");
  StepResult out;
  out.applied_action = action.cwiseMax(-config_.a_max).cwiseMin(config_.a_max);
  if (!out.applied_action.allFinite()) out.applied_action.setZero();
  position_ = (position_ + out.applied_action).cwiseMax(0.0).cwiseMin(1.0);
  ++steps_;
  out.state = position_;
  out.success = in_goal(position_);
  out.reward = out.success ? 1.0 : 0.0;
  out.done = out.success || steps_ >= config_.h_max;
  return out;
}

void validate(const DemoGenConfig& c) {
  if (c.n_demos <= 0) throw std::invalid_argument("n_demos must be positive");
  if (c.grid_n < 2) throw std::invalid_argument("grid_n must be at least 2");
  if (c.detour_prob < 0.0 || c.detour_prob > 1.0) throw std::invalid_argument("detour_prob must lie in [0, 1]");
  if (c.max_depth < 1) throw std::invalid_argument("max_depth must be positive");
  if (c.depth_multiplier < 0) throw std::invalid_argument("depth_multiplier must be nonnegative");
  if (!(c.eta_min > 0.0 && c.eta_min <= c.eta_max && c.eta_max <= c.env.a_max))
    throw std::invalid_argument("need 0 < eta_min <= eta_max <= a_max");
  if (c.noise_sigma < 0.0) throw std::invalid_argument("noise_sigma must be nonnegative");
  const double spacing = 1.0 / (c.grid_n - 1);
  if (!(c.capture_radius > 0.0 && c.capture_radius < spacing / 2))
    throw std::invalid_argument("capture_radius must lie in (0, grid spacing / 2)");
  if (c.max_retries < 1) throw std::invalid_argument("max_retries must be positive");
}

Vec node_position(const GridNode& node, int grid_n) {
  Vec p(2);
  const double spacing = 1.0 / (grid_n - 1);
  p << node.col * spacing, 1.0 - node.row * spacing;
  return p;
}

std::vector<GridNode> build_waypoint_path(const DemoGenConfig& config, Rng& rng, std::vector<Excursion>* excursions) {
  const int center = config.grid_n / 2;
  const int last_row = config.grid_n - 1;
  std::vector<GridNode> path{{center, 0}};
  if (excursions) excursions->clear();

  for (int row = 0; row < last_row; ++row) {
    const bool allowed = config.detour_rows.empty() ||
                         std::find(config.detour_rows.begin(), config.detour_rows.end(), row) !=
                             config.detour_rows.end();
    // Draw unconditionally so the stream does not depend on the row mask.
    const double coin = uniform01(rng);
    const double side = uniform01(rng);
    const double depth_draw = uniform01(rng);
    const int room = std::min(center, config.grid_n - 1 - center);
    const int max_depth = std::min(config.max_depth, room);
    if (!allowed || max_depth < 1 || coin >= config.detour_prob) {
      path.push_back({center, row + 1});
      continue;
    }
    const int dir = side < 0.5 ? -1 : 1;
    const int depth = 1 + std::min(max_depth - 1, static_cast<int>(depth_draw * max_depth));
    const int lateral = center + dir * depth;
    for (int k = 1; k <= depth; ++k) path.push_back({center + dir * k, row});
    path.push_back({lateral, row + 1});
    // Longer detours the farther they stray: back-and-forth along the
    // lateral column, ending on the next row.
    const int pairs = (config.depth_multiplier * depth + 1) / 2;
    for (int k = 0; k < pairs; ++k) {
      path.push_back({lateral, row});
      path.push_back({lateral, row + 1});
    }
    for (int k = depth - 1; k >= 0; --k) path.push_back({center + dir * k, row + 1});
    if (excursions) excursions->push_back({row, dir, depth});
  }

  for (std::size_t i = 1; i < path.size(); ++i) {
    const int dc = std::abs(path[i].col - path[i - 1].col);
    const int dr = std::abs(path[i].row - path[i - 1].row);
    if (dc + dr != 1) throw std::logic_error("waypoint path is not 4-neighbor connected");
  }
  return path;
}

Demo generate_demo(const DemoGenConfig& config, Rng& rng) {
  validate(config);
  auto eta_dist = [&](Rng& r) { return config.eta_min + (config.eta_max - config.eta_min) * uniform01(r); };

  for (int attempt = 0; attempt < config.max_retries; ++attempt) {
    Demo demo;
    demo.waypoints = build_waypoint_path(config, rng, &demo.excursions);
    GraphReachEnv env(config.env);
    std::vector<Vec> states{env.reset()};
    std::vector<Vec> actions;

    std::size_t target = 1;
    double eta = eta_dist(rng);
    bool success = false;
    while (true) {
      const Vec& p = env.position();
      Vec w = node_position(demo.waypoints[target], config.grid_n);
      while (target + 1 < demo.waypoints.size() && (w - p).norm() < config.capture_radius) {
        ++target;
        eta = eta_dist(rng);
        w = node_position(demo.waypoints[target], config.grid_n);
      }
      const Vec d = w - p;
      const double len = d.norm();
      Vec a = len > 0.0 ? Vec(eta * d / len) : Vec(Vec::Zero(2));
      a[0] += config.noise_sigma * standard_normal(rng);
      a[1] += config.noise_sigma * standard_normal(rng);
      const StepResult res = env.step(a);
      actions.push_back(res.applied_action);
      states.push_back(res.state);
      if (res.success) {
        success = true;
        break;
      }
      if (res.done) break;
    }
    const auto L = static_cast<Eigen::Index>(actions.size());
    if (!success || L <= config.min_length) continue;

    Trajectory& t = demo.trajectory;
    t.states.resize(2, L + 1);
    t.actions.resize(2, L);
    t.rewards = VecF::Zero(L);
    for (Eigen::Index k = 0; k <= L; ++k) t.states.col(k) = states[k].cast<float>();
    for (Eigen::Index k = 0; k < L; ++k) t.actions.col(k) = actions[k].cast<float>();
    t.rewards[L - 1] = 1.0f;
    return demo;
  }
  throw std::runtime_error("demo generation exceeded the step cap on every retry");
}

GeneratedDataset generate_dataset_with_labels(const DemoGenConfig& config) {
  validate(config);
  GeneratedDataset out{TrajectoryDataset(GraphReachEnv::kObsDim, GraphReachEnv::kActDim, kGraphReachId), {}};
  for (int i = 0; i < config.n_demos; ++i) {
    Rng rng = derive_rng(config.seed, static_cast<std::uint64_t>(i));
    Demo demo = generate_demo(config, rng);
    out.dataset.append(std::move(demo.trajectory));
    out.excursions.push_back(std::move(demo.excursions));
  }
  out.dataset.recompute_norm_stats();
  return out;
}

TrajectoryDataset generate_dataset(const DemoGenConfig& config) {
  return generate_dataset_with_labels(config).dataset;
}

}  // namespace iris
