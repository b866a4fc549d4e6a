#pragma once

// Test-time policies built from a trained ModelSet.

#include "iris/model_set.hpp"

#include <functional>
#include <iosfwd>
#include <memory>
#include <vector>

namespace iris {

struct ControlConfig {
  int n_goals = 100;
  int M = 10;
  /// Low-level steps per goal; equal to the training window length.
  int T = 10;
  bool score_with_target = false;
  /// Reset the BC-RNN hidden state every T steps, as in training; false keeps
  /// it for the whole episode.
  bool bc_rnn_window_reset = true;
};

void validate(const ControlConfig& config);

/// Values (1 x K) of raw state/action column pairs.
using ValueFn = std::function<Mat(const Mat& states, const Mat& actions)>;

/// Q of the model set's network on raw inputs.
ValueFn q_value_fn(const QNet& qnet, const Normalizer& norm, bool use_target);

struct GoalLogEntry {
  int step = 0;
  Vec goal;
  double score = 0.0;  // NaN when the goal was not value-scored
};

/// Index of the largest entry, lowest index on ties.
Eigen::Index argmax_lowest(const Vec& scores);

class Controller {
 public:
  virtual ~Controller() = default;
  /// Prepares for a new episode.
  virtual void reset() = 0;
  /// One action for raw state s; not clipped.
  virtual Vec act(const Vec& s, Rng& rng) = 0;
  virtual const std::vector<GoalLogEntry>& goal_log() const;
};

enum class GoalMode { kValueSelected, kSingleSample, kRegressor };

/// Proposes goals, picks one, and follows it with the recurrent policy for
/// T steps before choosing again.
class HierarchicalController : public Controller {
 public:
  HierarchicalController(const ModelSet& models, ControlConfig config, GoalMode mode);

  void reset() override;
  Vec act(const Vec& s, Rng& rng) override;
  const std::vector<GoalLogEntry>& goal_log() const override { return log_; }

  /// Replaces the scoring Q (default: the model set's network).
  void set_value_fn(ValueFn fn) { value_ = std::move(fn); }

  /// V(g) = max over M action proposals at g of Q(g, a), per column of
  /// raw goals.
  Vec goal_values(const Mat& goals, Rng& rng) const;
  /// Chooses among given raw proposals; returns the index.
  Eigen::Index select_goal_from(const Mat& proposals, Rng& rng, double* score = nullptr) const;
  /// Draws proposals at s and returns the chosen goal.
  Vec select_goal(const Vec& s, Rng& rng, double* score = nullptr) const;

  const Vec& current_goal() const { return goal_; }
  GoalMode mode() const { return mode_; }

 private:
  const ModelSet& models_;
  ControlConfig config_;
  GoalMode mode_;
  ValueFn value_;
  Vec goal_;
  Mat hidden_;
  int steps_ = 0;
  std::vector<GoalLogEntry> log_;
};

class BcController : public Controller {
 public:
  explicit BcController(const ModelSet& models);
  void reset() override {}
  Vec act(const Vec& s, Rng& rng) override;

 private:
  const ModelSet& models_;
};

class BcRnnController : public Controller {
 public:
  BcRnnController(const ModelSet& models, ControlConfig config);
  void reset() override;
  Vec act(const Vec& s, Rng& rng) override;

 private:
  const ModelSet& models_;
  ControlConfig config_;
  Mat hidden_;
  int steps_ = 0;
};

/// Action = argmax over M action-cVAE proposals of Q(s, .).
class BcqController : public Controller {
 public:
  BcqController(const ModelSet& models, ControlConfig config);
  void reset() override {}
  Vec act(const Vec& s, Rng& rng) override;
  void set_value_fn(ValueFn fn) { value_ = std::move(fn); }
  /// Index of the best column of raw action proposals at s.
  Eigen::Index select_from(const Vec& s, const Mat& proposals) const;

 private:
  const ModelSet& models_;
  ControlConfig config_;
  ValueFn value_;
};

/// The controller for the model set's variant. `models` must outlive it.
std::unique_ptr<Controller> make_controller(const ModelSet& models, const ControlConfig& config);

/// CSV with columns step, goal_0.., score.
void write_goal_log_csv(std::ostream& os, const std::vector<GoalLogEntry>& log);

}  // namespace iris
