#include "iris/control.hpp"
#include "iris/envs.hpp"
#include "iris/training.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace iris;

namespace {

Normalizer unit_square_norm() {
  NormStats s;
  s.state_mean = Vec::Constant(2, 0.5);
  s.state_std = Vec::Constant(2, 0.3);
  s.action_mean = Vec::Constant(2, 0.001);
  s.action_std = Vec::Constant(2, 0.01);
  return Normalizer(s);
}

ModelSet models_for(Variant v, std::uint64_t seed = 1) {
  ModelConfig cfg;
  cfg.hidden = 16;
  cfg.goal_latent = 3;
  cfg.action_latent = 2;
  return ModelSet::create(v, cfg, unit_square_norm(), seed);
}

ControlConfig small_control(int T = 4) {
  ControlConfig c;
  c.n_goals = 6;
  c.M = 3;
  c.T = T;
  return c;
}

std::vector<Vec> rollout_actions(Controller& ctl, int steps, std::uint64_t seed) {
  GraphReachEnv env;
  Vec s = env.reset();
  ctl.reset();
  Rng rng(seed);
  std::vector<Vec> out;
  for (int i = 0; i < steps; ++i) {
    out.push_back(ctl.act(s, rng));
    s = env.step(out.back()).state;
  }
  return out;
}

}  // namespace

TEST(ArgmaxLowest, TiesGoToLowestIndex) {
  Vec v(5);
  v << 1, 3, 3, 2, 3;
  EXPECT_EQ(argmax_lowest(v), 1);
  EXPECT_EQ(argmax_lowest(Vec::Zero(4)), 0);
  EXPECT_THROW(argmax_lowest(Vec()), std::invalid_argument);
}

TEST(SelectGoal, SingleProposalIgnoresValue) {
  const ModelSet m = models_for(Variant::kIris);
  ControlConfig c = small_control();
  c.n_goals = 1;
  HierarchicalController ctl(m, c, GoalMode::kValueSelected);
  bool called = false;
  ctl.set_value_fn([&](const Mat& s, const Mat&) {
    called = true;
    return Mat::Zero(1, s.cols());
  });
  const Vec s(Vec::Constant(2, 0.5));
  Rng a(3), b(3);
  double score = 0.0;
  const Vec g = ctl.select_goal(s, a, &score);
  EXPECT_EQ(g, sample_goals(*m.goal_cvae, m.norm, s, 1, b).col(0));
  EXPECT_FALSE(called);
  EXPECT_TRUE(std::isnan(score));
}

TEST(SelectGoal, HandBuiltValuePicksKnownMaximizer) {
  const ModelSet m = models_for(Variant::kIris);
  HierarchicalController ctl(m, small_control(), GoalMode::kValueSelected);
  const Vec target = (Vec(2) << 0.2, 0.3).finished();
  ctl.set_value_fn([&](const Mat& g, const Mat&) {
    Mat q(1, g.cols());
    for (Eigen::Index j = 0; j < g.cols(); ++j) q(0, j) = -(g.col(j) - target).squaredNorm();
    return q;
  });
  Mat proposals(2, 5);
  proposals << 0.9, 0.1, 0.25, 0.5, 0.2,
               0.9, 0.9, 0.35, 0.5, 0.0;
  Rng rng(4);
  double score = 0.0;
  EXPECT_EQ(ctl.select_goal_from(proposals, rng, &score), 2);
  EXPECT_NEAR(score, -(0.05 * 0.05 + 0.05 * 0.05), 1e-15);
}

TEST(SelectGoal, InvariantUnderIncreasingTransform) {
  const ModelSet m = models_for(Variant::kIris);
  HierarchicalController plain(m, small_control(), GoalMode::kValueSelected);
  HierarchicalController cubic(m, small_control(), GoalMode::kValueSelected);
  HierarchicalController affine(m, small_control(), GoalMode::kValueSelected);
  const ValueFn q = q_value_fn(*m.qnet, m.norm, false);
  cubic.set_value_fn([&](const Mat& s, const Mat& a) {
    const Mat v = q(s, a);
    return Mat(v.array().cube() + 2.0 * v.array());
  });
  affine.set_value_fn([&](const Mat& s, const Mat& a) { return Mat(3.0 * q(s, a).array() - 7.0); });
  Rng src(5);
  for (int trial = 0; trial < 50; ++trial) {
    const Mat proposals = Mat::Random(2, 8).array() * 0.5 + 0.5;
    Rng a(trial), b(trial), c(trial);
    const Eigen::Index i = plain.select_goal_from(proposals, a);
    EXPECT_EQ(cubic.select_goal_from(proposals, b), i);
    EXPECT_EQ(affine.select_goal_from(proposals, c), i);
  }
}

TEST(SelectGoal, ValueIsMaxOverActionProposals) {
  const ModelSet m = models_for(Variant::kIris);
  const ControlConfig c = small_control();
  HierarchicalController ctl(m, c, GoalMode::kValueSelected);
  Mat goals = Mat::Random(2, 4).array() * 0.5 + 0.5;
  Rng a(6), b(6);
  const Vec v = ctl.goal_values(goals, a);
  const Mat z = standard_normal(m.action_cvae->latent_dim(), 4 * c.M, b);
  for (Eigen::Index j = 0; j < 4; ++j) {
    double best = -1e300;
    for (int i = 0; i < c.M; ++i) {
      const Mat gn = m.norm.states(goals.col(j));
      const Vec act = m.norm.denorm_actions(m.action_cvae->decode(z.col(j * c.M + i), gn));
      best = std::max(best, q_value(*m.qnet, m.norm, goals.col(j), act, false));
    }
    EXPECT_EQ(v[j], best);
  }
}

TEST(Act, GoalRefreshEveryTSteps) {
  const ModelSet m = models_for(Variant::kIris);
  for (int T : {1, 3, 4}) {
    HierarchicalController ctl(m, small_control(T), GoalMode::kValueSelected);
    rollout_actions(ctl, 10, 7);
    const auto& log = ctl.goal_log();
    ASSERT_EQ(log.size(), static_cast<std::size_t>((10 + T - 1) / T));
    for (std::size_t k = 0; k < log.size(); ++k) {
      EXPECT_EQ(log[k].step, static_cast<int>(k) * T);
      EXPECT_FALSE(std::isnan(log[k].score));
    }
  }
}

TEST(Act, StepTPlusOneReselects) {
  const ModelSet m = models_for(Variant::kIris);
  HierarchicalController ctl(m, small_control(4), GoalMode::kValueSelected);
  ctl.reset();
  Rng rng(8);
  const Vec s = Vec::Constant(2, 0.5);
  for (int i = 0; i < 4; ++i) {
    ctl.act(s, rng);
    EXPECT_EQ(ctl.goal_log().size(), 1u);
  }
  ctl.act(s, rng);
  EXPECT_EQ(ctl.goal_log().size(), 2u);
  EXPECT_EQ(ctl.goal_log().back().step, 4);
}

TEST(Act, HiddenResetsAtRefresh) {
  // With T = 1 every action comes from a fresh hidden state, so it equals
  // a single policy step from zero.
  const ModelSet m = models_for(Variant::kIris);
  HierarchicalController ctl(m, small_control(1), GoalMode::kValueSelected);
  ctl.reset();
  Rng rng(9);
  Vec s = Vec::Constant(2, 0.4);
  for (int i = 0; i < 3; ++i) {
    const Vec a = ctl.act(s, rng);
    Mat h = m.policy->zero_hidden(1);
    Mat in(4, 1);
    in << m.norm.states(s), m.norm.states(ctl.current_goal());
    EXPECT_EQ(a, m.norm.denorm_actions(m.policy->step(h, in)).col(0));
    s.array() += 0.01;
  }
}

TEST(Act, SeededRolloutReplays) {
  for (Variant v : {Variant::kIris, Variant::kIrisNoQ, Variant::kIrisNoGoalVae, Variant::kBcq, Variant::kBcRnn, Variant::kBc}) {
    const ModelSet m = models_for(v);
    auto a = make_controller(m, small_control());
    auto b = make_controller(m, small_control());
    EXPECT_EQ(rollout_actions(*a, 30, 11), rollout_actions(*b, 30, 11)) << to_string(v);
    EXPECT_EQ(rollout_actions(*a, 30, 11), rollout_actions(*a, 30, 11)) << to_string(v);
  }
}

TEST(NoQ, FirstGoalMatchesFullUnderConstantValue) {
  const ModelSet m = models_for(Variant::kIris);
  const ControlConfig c = small_control(5);
  HierarchicalController full(m, c, GoalMode::kValueSelected);
  full.set_value_fn([](const Mat& s, const Mat&) { return Mat::Constant(1, s.cols(), 2.0); });
  HierarchicalController noq(m, c, GoalMode::kSingleSample);
  const auto a = rollout_actions(full, 5, 12);
  const auto b = rollout_actions(noq, 5, 12);
  EXPECT_EQ(full.goal_log().front().goal, noq.goal_log().front().goal);
  EXPECT_EQ(a, b);
  EXPECT_TRUE(std::isnan(noq.goal_log().front().score));
}

TEST(NoQ, GoalCountIsCeilHOverT) {
  const ModelSet m = models_for(Variant::kIrisNoQ);
  for (int H : {1, 9, 10, 11, 37}) {
    HierarchicalController ctl(m, small_control(10), GoalMode::kSingleSample);
    rollout_actions(ctl, H, 13);
    EXPECT_EQ(ctl.goal_log().size(), static_cast<std::size_t>((H + 9) / 10));
  }
}

TEST(NoGoalVae, ZeroRegressorGivesMeanState) {
  ModelSet m = models_for(Variant::kIrisNoGoalVae);
  for (std::size_t i = 0; i < m.goal_regressor->params.size(); ++i) m.goal_regressor->params[i].value.setZero();
  HierarchicalController ctl(m, small_control(3), GoalMode::kRegressor);
  rollout_actions(ctl, 12, 14);
  ASSERT_EQ(ctl.goal_log().size(), 4u);
  for (const auto& e : ctl.goal_log()) EXPECT_EQ(e.goal, m.norm.stats().state_mean);
}

TEST(NoGoalVae, GoalIsRegressorOutput) {
  const ModelSet m = models_for(Variant::kIrisNoGoalVae);
  HierarchicalController ctl(m, small_control(), GoalMode::kRegressor);
  const Vec s = (Vec(2) << 0.3, 0.8).finished();
  Rng a(1), b(2);
  const Vec expect = m.norm.denorm_states(m.goal_regressor->predict(m.norm.states(s))).col(0);
  EXPECT_EQ(ctl.select_goal(s, a), expect);
  EXPECT_EQ(ctl.select_goal(s, b), expect);
}

TEST(NoGoalVae, RegressorBeatsSingleCvaeSampleOnUnimodalData) {
  // Straight-line trajectories with a fixed drift: each state has exactly
  // one future state T steps ahead.
  TrajectoryDataset ds(2, 2, "synthetic");
  Rng rng(15);
  const Vec drift = (Vec(2) << 0.01, -0.02).finished();
  for (int n = 0; n < 60; ++n) {
    Trajectory t;
    t.states.resize(2, 21);
    t.states.col(0) = (Vec::Random(2) * 0.3).cast<float>();
    for (int k = 1; k <= 20; ++k) t.states.col(k) = t.states.col(k - 1) + drift.cast<float>();
    t.actions = drift.cast<float>().replicate(1, 20);
    t.rewards = VecF::Zero(20);
    t.rewards[19] = 1.0f;
    ds.append(t);
  }
  ds.recompute_norm_stats();
  TrainConfig c;
  c.T = 5;
  c.n_iter = 1500;
  c.batch_size = 64;
  c.hidden = 32;
  c.checkpoint_every = 1500;
  c.update_policy = false;
  c.variant = Variant::kIrisNoGoalVae;
  const TrainResult reg = train(ds, c);
  c.variant = Variant::kIrisNoQ;
  const TrainResult vae = train(ds, c);

  double err_reg = 0.0, err_vae = 0.0;
  int n = 0;
  Rng sample(16);
  for (const auto& t : ds.trajectories())
    for (Eigen::Index k = 0; k + 5 <= t.length(); k += 3, ++n) {
      const Vec s = t.states.col(k).cast<double>();
      const Vec target = t.states.col(k + 5).cast<double>();
      const ModelSet& r = reg.final_models;
      err_reg += (r.norm.denorm_states(r.goal_regressor->predict(r.norm.states(s))).col(0) - target).norm();
      const ModelSet& v = vae.final_models;
      err_vae += (sample_goals(*v.goal_cvae, v.norm, s, 1, sample).col(0) - target).norm();
    }
  std::cout << "mean goal error: regressor " << err_reg / n << ", single cVAE sample " << err_vae / n << "\n";
  EXPECT_LT(err_reg, err_vae);
}

TEST(Bc, ZeroNetworkGivesMeanAction) {
  ModelSet m = models_for(Variant::kBc);
  for (std::size_t i = 0; i < m.bc->params.size(); ++i) m.bc->params[i].value.setZero();
  BcController ctl(m);
  for (const Vec& a : rollout_actions(ctl, 5, 1)) EXPECT_EQ(a, m.norm.stats().action_mean);
}

TEST(BcRnn, WindowResetMatchesFreshUnroll) {
  const ModelSet m = models_for(Variant::kBcRnn);
  ControlConfig c = small_control(3);
  BcRnnController ctl(m, c);
  ctl.reset();
  Rng rng(0);
  const Vec s = (Vec(2) << 0.3, 0.8).finished();  // off the mean, so the state is not a fixed point
  std::vector<Vec> run;
  for (int i = 0; i < 6; ++i) run.push_back(ctl.act(s, rng));
  // The hidden state restarts at step 3, so steps 3..5 repeat steps 0..2.
  for (int i = 0; i < 3; ++i) EXPECT_EQ(run[i], run[i + 3]);
  c.bc_rnn_window_reset = false;
  BcRnnController persistent(m, c);
  persistent.reset();
  std::vector<Vec> kept;
  for (int i = 0; i < 6; ++i) kept.push_back(persistent.act(s, rng));
  for (int i = 0; i < 3; ++i) EXPECT_EQ(kept[i], run[i]);
  EXPECT_NE(kept[3], run[3]);
}

TEST(Bcq, SingleProposalIsReturned) {
  const ModelSet m = models_for(Variant::kBcq);
  ControlConfig c = small_control();
  c.M = 1;
  BcqController ctl(m, c);
  const Vec s = Vec::Constant(2, 0.6);
  Rng a(17), b(17);
  EXPECT_EQ(ctl.act(s, a), sample_actions(*m.action_cvae, m.norm, s, 1, b).col(0));
}

TEST(Bcq, HandBuiltValuePicksArgmax) {
  const ModelSet m = models_for(Variant::kBcq);
  BcqController ctl(m, small_control());
  ctl.set_value_fn([](const Mat&, const Mat& a) {
    Mat q(1, a.cols());
    for (Eigen::Index j = 0; j < a.cols(); ++j) q(0, j) = -std::abs(a(0, j) - 0.01) - std::abs(a(1, j) + 0.02);
    return q;
  });
  Mat proposals(2, 5);
  proposals << 0.0, 0.02, 0.011, -0.01, 0.01,
               0.0, -0.02, -0.019, 0.02, -0.05;
  EXPECT_EQ(ctl.select_from(Vec::Constant(2, 0.5), proposals), 2);
}

TEST(MakeController, MatchesVariantAndRejectsMissingModels) {
  const ModelSet iris = models_for(Variant::kIris);
  EXPECT_NE(dynamic_cast<HierarchicalController*>(make_controller(iris, small_control()).get()), nullptr);
  EXPECT_NE(dynamic_cast<BcqController*>(make_controller(models_for(Variant::kBcq), small_control()).get()), nullptr);
  const ModelSet bc = models_for(Variant::kBc);
  EXPECT_THROW(HierarchicalController(bc, small_control(), GoalMode::kValueSelected), std::invalid_argument);
  EXPECT_THROW(BcqController(bc, small_control()), std::invalid_argument);
  const ModelSet noq = models_for(Variant::kIrisNoQ);
  EXPECT_THROW(HierarchicalController(noq, small_control(), GoalMode::kValueSelected), std::invalid_argument);
  ControlConfig bad = small_control();
  bad.n_goals = 0;
  EXPECT_THROW(make_controller(iris, bad), std::invalid_argument);
}

TEST(GoalLog, CsvFormat) {
  std::vector<GoalLogEntry> log = {{0, (Vec(2) << 0.5, 0.25).finished(), 1.5},
                                   {10, (Vec(2) << 0.125, 1.0).finished(), std::nan("")}};
  std::ostringstream os;
  write_goal_log_csv(os, log);
  EXPECT_EQ(os.str(), "step,goal_0,goal_1,score\n0,0.5,0.25,1.5\n10,0.125,1,\n");
}
