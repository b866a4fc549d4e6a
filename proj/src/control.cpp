#include "iris/control.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace iris {

namespace {

Mat repeat_columns(const Mat& x, int times) {
  Mat out(x.rows(), x.cols() * times);
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    for (int i = 0; i < times; ++i) out.col(j * times + i) = x.col(j);
  return out;
}

Vec policy_step(const PolicyRNN& policy, const Normalizer& norm, Mat& hidden, const Vec& s, const Vec* goal) {
  const Mat sn = norm.states(s);
  Mat input = sn;
  if (goal) {
    input.resize(2 * sn.rows(), 1);
    input.topRows(sn.rows()) = sn;
    input.bottomRows(sn.rows()) = norm.states(*goal);
  }
  return norm.denorm_actions(policy.step(hidden, input)).col(0);
}

}  // namespace

void validate(const ControlConfig& c) {
  if (c.n_goals < 1) throw std::invalid_argument("n_goals must be positive");
  if (c.M < 1) throw std::invalid_argument("M must be positive");
  if (c.T < 1) throw std::invalid_argument("T must be positive");
}

ValueFn q_value_fn(const QNet& qnet, const Normalizer& norm, bool use_target) {
  return [&qnet, &norm, use_target](const Mat& s, const Mat& a) {
    return qnet.values(norm.states(s), norm.actions(a), use_target);
  };
}

Eigen::Index argmax_lowest(const Vec& scores) {
  if (scores.size() == 0) throw std::invalid_argument("argmax of an empty vector");
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[best]) best = i;
  return best;
}

const std::vector<GoalLogEntry>& Controller::goal_log() const {
  static const std::vector<GoalLogEntry> empty;
  return empty;
}

// --- hierarchical ---

HierarchicalController::HierarchicalController(const ModelSet& models, ControlConfig config, GoalMode mode)
    : models_(models), config_(config), mode_(mode) {
  validate(config_);
  if (!models_.policy || !models_.policy->goal_conditioned())
    throw std::invalid_argument("hierarchical control needs a goal-conditioned policy");
  switch (mode_) {
    case GoalMode::kValueSelected:
      if (!models_.goal_cvae || !models_.action_cvae || !models_.qnet)
        throw std::invalid_argument("value-selected goals need the goal cVAE, action cVAE and Q network");
      value_ = q_value_fn(*models_.qnet, models_.norm, config_.score_with_target);
      break;
    case GoalMode::kSingleSample:
      if (!models_.goal_cvae) throw std::invalid_argument("sampled goals need the goal cVAE");
      break;
    case GoalMode::kRegressor:
      if (!models_.goal_regressor) throw std::invalid_argument("regressed goals need the goal regressor");
      break;
  }
  reset();
}

void HierarchicalController::reset() {
  steps_ = 0;
  log_.clear();
  hidden_ = models_.policy->zero_hidden(1);
}

Vec HierarchicalController::goal_values(const Mat& goals, Rng& rng) const {
  if (!models_.action_cvae) throw std::logic_error("goal scoring needs the action cVAE");
  const int M = config_.M;
  const Eigen::Index N = goals.cols();
  const Mat z = standard_normal(models_.action_cvae->latent_dim(), N * M, rng);
  const Mat g = repeat_columns(goals, M);
  const Mat actions = models_.norm.denorm_actions(models_.action_cvae->decode(z, models_.norm.states(g)));
  const Mat q = value_(g, actions);
  Vec v(N);
  for (Eigen::Index j = 0; j < N; ++j) {
    double best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < M; ++i) best = std::max(best, q(0, j * M + i));
    v[j] = best;
  }
  return v;
}

Eigen::Index HierarchicalController::select_goal_from(const Mat& proposals, Rng& rng, double* score) const {
  const Vec v = goal_values(proposals, rng);
  const Eigen::Index best = argmax_lowest(v);
  if (score) *score = v[best];
  return best;
}

Vec HierarchicalController::select_goal(const Vec& s, Rng& rng, double* score) const {
  if (score) *score = std::numeric_limits<double>::quiet_NaN();
  switch (mode_) {
    case GoalMode::kValueSelected: {
      const Mat proposals = sample_goals(*models_.goal_cvae, models_.norm, s, config_.n_goals, rng);
      if (proposals.cols() == 1) return proposals.col(0);
      return proposals.col(select_goal_from(proposals, rng, score));
    }
    case GoalMode::kSingleSample:
      return sample_goals(*models_.goal_cvae, models_.norm, s, 1, rng).col(0);
    case GoalMode::kRegressor:
      return models_.norm.denorm_states(models_.goal_regressor->predict(models_.norm.states(s))).col(0);
  }
  throw std::logic_error("unknown goal mode");
}

Vec HierarchicalController::act(const Vec& s, Rng& rng) {
  if (steps_ % config_.T == 0) {
    double score = 0.0;
    goal_ = select_goal(s, rng, &score);
    hidden_ = models_.policy->zero_hidden(1);
    log_.push_back({steps_, goal_, score});
  }
  ++steps_;
  return policy_step(*models_.policy, models_.norm, hidden_, s, &goal_);
}

// --- baselines ---

BcController::BcController(const ModelSet& models) : models_(models) {
  if (!models_.bc) throw std::invalid_argument("BC control needs the BC regressor");
}

Vec BcController::act(const Vec& s, Rng&) {
  return models_.norm.denorm_actions(models_.bc->predict(models_.norm.states(s))).col(0);
}

BcRnnController::BcRnnController(const ModelSet& models, ControlConfig config) : models_(models), config_(config) {
  validate(config_);
  if (!models_.policy || models_.policy->goal_conditioned())
    throw std::invalid_argument("BC-RNN control needs an unconditioned recurrent policy");
  reset();
}

void BcRnnController::reset() {
  steps_ = 0;
  hidden_ = models_.policy->zero_hidden(1);
}

Vec BcRnnController::act(const Vec& s, Rng&) {
  if (config_.bc_rnn_window_reset && steps_ > 0 && steps_ % config_.T == 0) hidden_ = models_.policy->zero_hidden(1);
  ++steps_;
  return policy_step(*models_.policy, models_.norm, hidden_, s, nullptr);
}

BcqController::BcqController(const ModelSet& models, ControlConfig config) : models_(models), config_(config) {
  validate(config_);
  if (!models_.action_cvae || !models_.qnet) throw std::invalid_argument("BCQ control needs the action cVAE and Q");
  value_ = q_value_fn(*models_.qnet, models_.norm, config_.score_with_target);
}

Eigen::Index BcqController::select_from(const Vec& s, const Mat& proposals) const {
  const Mat states = repeat_columns(s, static_cast<int>(proposals.cols()));
  return argmax_lowest(value_(states, proposals).row(0).transpose());
}

Vec BcqController::act(const Vec& s, Rng& rng) {
  const Mat proposals = sample_actions(*models_.action_cvae, models_.norm, s, config_.M, rng);
  return proposals.col(select_from(s, proposals));
}

std::unique_ptr<Controller> make_controller(const ModelSet& models, const ControlConfig& config) {
  switch (models.variant) {
    case Variant::kIris:
      return std::make_unique<HierarchicalController>(models, config, GoalMode::kValueSelected);
    case Variant::kIrisNoQ:
      return std::make_unique<HierarchicalController>(models, config, GoalMode::kSingleSample);
    case Variant::kIrisNoGoalVae:
      return std::make_unique<HierarchicalController>(models, config, GoalMode::kRegressor);
    case Variant::kBc:
      return std::make_unique<BcController>(models);
    case Variant::kBcRnn:
      return std::make_unique<BcRnnController>(models, config);
    case Variant::kBcq:
      return std::make_unique<BcqController>(models, config);
  }
  throw std::logic_error("unknown variant");
}

void write_goal_log_csv(std::ostream& os, const std::vector<GoalLogEntry>& log) {
  const Eigen::Index dim = log.empty() ? 0 : log.front().goal.size();
  os << "step";
  for (Eigen::Index i = 0; i < dim; ++i) os << ",goal_" << i;
  os << ",score\n";
  const auto old = os.precision(9);
  for (const GoalLogEntry& e : log) {
    os << e.step;
    for (Eigen::Index i = 0; i < e.goal.size(); ++i) os << ',' << e.goal[i];
    os << ',';
    if (!std::isnan(e.score)) os << e.score;
    os << '\n';
  }
  os.precision(old);
}

}  // namespace iris
