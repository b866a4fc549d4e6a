#include "iris/loss_checks.hpp"
#include "iris/model_set.hpp"
#include "iris/models.hpp"
#include "iris/reference.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace iris;

namespace {

Normalizer make_norm(int obs, int act, std::uint64_t seed) {
  Rng rng(seed);
  NormStats s;
  s.state_mean = standard_normal(obs, 1, rng);
  s.state_std = standard_normal(obs, 1, rng).cwiseAbs().array() + 0.5;
  s.action_mean = standard_normal(act, 1, rng);
  s.action_std = standard_normal(act, 1, rng).cwiseAbs().array() + 0.5;
  return Normalizer(s);
}

void randomize(nn::ParamStore& store, Rng& rng, double scale) {
  for (std::size_t i = 0; i < store.size(); ++i)
    store[i].value = scale * standard_normal(store[i].value.rows(), store[i].value.cols(), rng);
}

Mat relu(const Mat& x) { return x.cwiseMax(0.0); }

// Two-hidden-layer MLP evaluated with the serial reference kernels.
Mat mlp_reference(const nn::ParamStore& p, const std::string& name, int layers, const Mat& x) {
  Mat h = x;
  for (int l = 0; l < layers; ++l) {
    const std::string base = name + ".l" + std::to_string(l);
    h = reference::affine(p[p.find(base + ".weight")].value, p[p.find(base + ".bias")].value, h);
    if (l + 1 < layers) h = relu(h);
  }
  return h;
}

Mat stack(const Mat& a, const Mat& b) {
  Mat out(a.rows() + b.rows(), a.cols());
  out << a, b;
  return out;
}

}  // namespace

TEST(Policy, ZeroWeightsPredictMeanAction) {
  const Normalizer norm = make_norm(2, 2, 1);
  const PolicyRNN policy(2, 2, 8, true);
  Rng rng(1);
  const Mat actions = policy_rollout_train(policy, norm, standard_normal(2, 5, rng), Vec::Random(2));
  for (Eigen::Index k = 0; k < 5; ++k) EXPECT_TRUE(actions.col(k).isApprox(norm.stats().action_mean, 1e-15));
}

TEST(Policy, WindowsInBatchAreIndependent) {
  PolicyRNN policy(2, 2, 6, true);
  Rng rng(2);
  randomize(policy.params, rng, 0.5);
  std::vector<Mat> inputs, permuted;
  for (int k = 0; k < 4; ++k) {
    inputs.push_back(standard_normal(4, 3, rng));
    Mat p(4, 3);
    p << inputs.back().col(2), inputs.back().col(0), inputs.back().col(1);
    permuted.push_back(p);
  }
  const auto a = policy.unroll(inputs);
  const auto b = policy.unroll(permuted);
  for (int k = 0; k < 4; ++k) {
    EXPECT_EQ(b[k].col(0), a[k].col(2));
    EXPECT_EQ(b[k].col(1), a[k].col(0));
    EXPECT_EQ(b[k].col(2), a[k].col(1));
    std::vector<Mat> single;
    for (int t = 0; t < 4; ++t) single.push_back(inputs[t].col(1));
    EXPECT_EQ(policy.unroll(single)[k].col(0), a[k].col(1));
  }
}

TEST(Policy, MatchesManualUnroll) {
  const Normalizer norm = make_norm(2, 2, 3);
  PolicyRNN policy(2, 2, 5, true);
  Rng rng(3);
  randomize(policy.params, rng, 0.6);
  const Mat states = standard_normal(2, 3, rng);
  const Vec goal = standard_normal(2, 1, rng);
  const Mat predicted = policy_rollout_train(policy, norm, states, goal);

  const auto& p = policy.params;
  const NormStats& st = norm.stats();
  const Vec g = (goal - st.state_mean).cwiseQuotient(st.state_std);
  Vec h = Vec::Zero(5);
  for (int k = 0; k < 3; ++k) {
    const Vec s = (states.col(k) - st.state_mean).cwiseQuotient(st.state_std);
    const Vec in = stack(s, g);
    const Vec e = relu(reference::affine(p[p.find("encoder.weight")].value, p[p.find("encoder.bias")].value, in));
    h = reference::gru_step(p[p.find("gru.w_x")].value, p[p.find("gru.w_h")].value, p[p.find("gru.b_x")].value,
                            p[p.find("gru.b_h")].value, h, e);
    const Vec out = mlp_reference(p, "head", 2, h);
    const Vec a = out.cwiseProduct(st.action_std) + st.action_mean;
    for (int i = 0; i < 2; ++i) EXPECT_NEAR(predicted(i, k), a[i], 1e-13);
  }
}

TEST(Policy, ClosedLoopStepMatchesUnroll) {
  PolicyRNN policy(2, 2, 6, false);
  Rng rng(4);
  randomize(policy.params, rng, 0.5);
  std::vector<Mat> inputs;
  for (int k = 0; k < 5; ++k) inputs.push_back(standard_normal(2, 1, rng));
  const auto out = policy.unroll(inputs);
  Mat h = policy.zero_hidden(1);
  for (int k = 0; k < 5; ++k) EXPECT_EQ(policy.step(h, inputs[k]), out[k]);
}

TEST(Policy, DimensionMismatchThrows) {
  const PolicyRNN policy(2, 2, 4, true);
  EXPECT_THROW(policy.unroll({Mat::Zero(3, 1)}), std::invalid_argument);
  EXPECT_THROW(policy_rollout_train(policy, make_norm(2, 2, 1), Mat::Zero(2, 3), Vec::Zero(3)), std::invalid_argument);
}

TEST(BcLoss, Examples) {
  Rng rng(5);
  const Mat a = standard_normal(2, 4, rng);
  EXPECT_EQ(bc_loss(a, a), 0.0);
  Mat p(1, 3), t(1, 3);
  p << 1.0, 0.0, 2.0;
  t.setZero();
  EXPECT_DOUBLE_EQ(bc_loss(p, t), 5.0);
  EXPECT_THROW(bc_loss(Mat::Zero(1, 3), Mat::Zero(1, 4)), std::invalid_argument);
}

TEST(BcLoss, MatchesLoopOracle) {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const Mat a = standard_normal(3, 7, rng), b = standard_normal(3, 7, rng);
    double acc = 0.0;
    for (int k = 0; k < 7; ++k) acc += (a.col(k) - b.col(k)).squaredNorm();
    EXPECT_NEAR(bc_loss(a, b), acc, 1e-12);
  }
}

TEST(ImitationLoss, IsBatchMeanOfWindowBcLoss) {
  PolicyRNN policy(2, 2, 6, true);
  Rng rng(7);
  randomize(policy.params, rng, 0.5);
  std::vector<Mat> inputs, targets;
  for (int k = 0; k < 4; ++k) {
    inputs.push_back(standard_normal(4, 3, rng));
    targets.push_back(standard_normal(2, 3, rng));
  }
  const auto out = policy.unroll(inputs);
  double expect = 0.0;
  for (int j = 0; j < 3; ++j) {
    Mat pred(2, 4), act(2, 4);
    for (int k = 0; k < 4; ++k) {
      pred.col(k) = out[k].col(j);
      act.col(k) = targets[k].col(j);
    }
    expect += bc_loss(pred, act) / 3.0;
  }
  EXPECT_NEAR(policy.imitation_loss(inputs, targets, false), expect, 1e-12);
}

TEST(Cvae, ZeroBetaPerfectReconstructionIsZero) {
  CVAE cvae(2, 3, 2, 8, 0.0);
  Rng rng(8);
  randomize(cvae.params, rng, 0.5);
  // Zero decoder reconstructs a zero target exactly.
  for (std::size_t i = 0; i < cvae.params.size(); ++i)
    if (cvae.params[i].name.rfind("decoder", 0) == 0) cvae.params[i].value.setZero();
  const CvaeParts parts = cvae.loss(Mat::Zero(2, 4), standard_normal(3, 4, rng), standard_normal(2, 4, rng));
  EXPECT_EQ(parts.recon, 0.0);
  EXPECT_EQ(parts.loss, 0.0);
  EXPECT_GT(parts.kl, 0.0);
}

TEST(Cvae, UnitMeanKlWeightedByBeta) {
  CVAE cvae(1, 1, 1, 4, 2.0);
  auto& p = cvae.params;
  p[p.find("encoder.l2.bias")].value << 1.0, 0.0;  // mu = 1, log sigma = 0
  Rng rng(9);
  const CvaeParts parts = cvae.loss(Mat::Zero(1, 1), standard_normal(1, 1, rng), standard_normal(1, 1, rng));
  EXPECT_EQ(parts.recon, 0.0);
  EXPECT_DOUBLE_EQ(parts.kl, 0.5);
  EXPECT_DOUBLE_EQ(parts.loss, 1.0);
}

TEST(Cvae, MatchesCompositionOracle) {
  Rng rng(10);
  for (int trial = 0; trial < 10; ++trial) {
    CVAE cvae(3, 2, 2, 7, 0.3);
    randomize(cvae.params, rng, 0.6);
    const Mat target = standard_normal(3, 5, rng), cond = standard_normal(2, 5, rng), eps = standard_normal(2, 5, rng);
    const CvaeParts parts = cvae.loss(target, cond, eps);

    const Mat enc = mlp_reference(cvae.params, "encoder", 3, stack(target, cond));
    const Mat mu = enc.topRows(2);
    const Mat ls = enc.bottomRows(2).cwiseMax(nn::kLogSigmaMin).cwiseMin(nn::kLogSigmaMax);
    const Mat z = mu + (ls.array().exp() * eps.array()).matrix();
    const Mat recon = mlp_reference(cvae.params, "decoder", 3, stack(z, cond));
    const double rec = (recon - target).squaredNorm() / 5.0;
    double kl = 0.0;
    for (Eigen::Index i = 0; i < mu.size(); ++i) {
      const double s = std::exp(ls.data()[i]);
      kl += 0.5 * (mu.data()[i] * mu.data()[i] + s * s - 1.0 - 2.0 * ls.data()[i]);
    }
    kl /= 5.0;
    EXPECT_NEAR(parts.recon, rec, 1e-12);
    EXPECT_NEAR(parts.kl, kl, 1e-12);
    EXPECT_NEAR(parts.loss, rec + 0.3 * kl, 1e-12);
  }
}

TEST(Cvae, DimensionMismatchThrows) {
  const CVAE cvae(2, 2, 2, 4, 1.0);
  EXPECT_THROW(cvae.loss(Mat::Zero(3, 1), Mat::Zero(2, 1), Mat::Zero(2, 1)), std::invalid_argument);
  EXPECT_THROW(cvae.decode(Mat::Zero(1, 1), Mat::Zero(2, 1)), std::invalid_argument);
}

TEST(SampleGoals, ZeroLatentIsDecoderMean) {
  const Normalizer norm = make_norm(2, 2, 11);
  CVAE cvae(2, 2, 3, 8, 0.1);
  Rng rng(11);
  randomize(cvae.params, rng, 0.5);
  const Vec s = standard_normal(2, 1, rng);
  const Vec sn = norm.states(s);
  const Mat dec = mlp_reference(cvae.params, "decoder", 3, stack(Vec::Zero(3), sn));
  const Mat prior = cvae.decode_from_prior(sn, Mat::Zero(3, 1));
  EXPECT_NEAR((prior - dec).cwiseAbs().maxCoeff(), 0.0, 1e-13);
}

TEST(SampleGoals, SeededAndWellFormed) {
  const Normalizer norm = make_norm(2, 2, 12);
  CVAE goal(2, 2, 3, 8, 0.1), action(2, 2, 2, 8, 0.1);
  Rng init(12);
  randomize(goal.params, init, 0.5);
  randomize(action.params, init, 0.5);
  const Vec s = standard_normal(2, 1, init);
  Rng a(5), b(5);
  const Mat g1 = sample_goals(goal, norm, s, 7, a), g2 = sample_goals(goal, norm, s, 7, b);
  EXPECT_EQ(g1, g2);
  EXPECT_EQ(g1.rows(), 2);
  EXPECT_EQ(g1.cols(), 7);
  EXPECT_TRUE(g1.allFinite());
  const Mat a1 = sample_actions(action, norm, s, 4, a), a2 = sample_actions(action, norm, s, 4, b);
  EXPECT_EQ(a1, a2);
  EXPECT_EQ(a1.cols(), 4);
  EXPECT_TRUE(a1.allFinite());
  // Column i of a batch equals the decode of latent i alone.
  Rng c(6), c2(6);
  const Mat z = standard_normal(3, 7, c);
  EXPECT_EQ(norm.denorm_states(goal.decode_from_prior(norm.states(s), z)), sample_goals(goal, norm, s, 7, c2));
  EXPECT_THROW(sample_goals(goal, norm, s, 0, a), std::invalid_argument);
  EXPECT_THROW(sample_actions(action, norm, s, 0, a), std::invalid_argument);
}

TEST(SampleActions, SingleZeroLatentIsDecoderMean) {
  const Normalizer norm = make_norm(2, 2, 13);
  CVAE cvae(2, 2, 2, 8, 0.1);
  Rng rng(13);
  randomize(cvae.params, rng, 0.5);
  const Vec s = standard_normal(2, 1, rng);
  const Mat a = norm.denorm_actions(cvae.decode_from_prior(norm.states(s), Mat::Zero(2, 1)));
  const Mat ref = norm.denorm_actions(mlp_reference(cvae.params, "decoder", 3, stack(Vec::Zero(2), norm.states(s))));
  EXPECT_NEAR((a - ref).cwiseAbs().maxCoeff(), 0.0, 1e-13);
}

TEST(QNet, ZeroWeightsGiveZero) {
  const QNet q(2, 2, 8, 100.0);
  const Normalizer norm = make_norm(2, 2, 14);
  EXPECT_EQ(q_value(q, norm, Vec::Ones(2), Vec::Ones(2), false), 0.0);
  EXPECT_EQ(q_value(q, norm, Vec::Ones(2), Vec::Ones(2), true), 0.0);
}

TEST(QNet, MatchesScaledMlpOnNormalizedInputs) {
  QNet q(2, 2, 8, 100.0);
  Rng rng(15);
  randomize(q.online, rng, 0.5);
  const Normalizer norm = make_norm(2, 2, 15);
  for (int i = 0; i < 10; ++i) {
    const Vec s = standard_normal(2, 1, rng), a = standard_normal(2, 1, rng);
    const Mat ref = mlp_reference(q.online, "q", 3, stack(norm.states(s), norm.actions(a)));
    EXPECT_NEAR(q_value(q, norm, s, a, false), 100.0 * ref(0, 0), 1e-11);
  }
}

TEST(QNet, TdLossIsBatchMse) {
  QNet q(2, 2, 8, 10.0);
  Rng rng(16);
  randomize(q.online, rng, 0.5);
  const Mat s = standard_normal(2, 6, rng), a = standard_normal(2, 6, rng), y = standard_normal(1, 6, rng);
  const Mat v = q.values(s, a, false);
  EXPECT_NEAR(q.td_loss(s, a, y, false), (v - y).squaredNorm() / 6.0, 1e-12);
}

TEST(Polyak, Examples) {
  QNet q(1, 1, 2, 1.0);
  Rng rng(17);
  randomize(q.online, rng, 1.0);
  randomize(q.target, rng, 1.0);
  const nn::ParamStore before = q.target;
  q.polyak_update(0.0);
  for (std::size_t i = 0; i < q.target.size(); ++i) EXPECT_EQ(q.target[i].value, before[i].value);
  q.polyak_update(1.0);
  for (std::size_t i = 0; i < q.target.size(); ++i) EXPECT_EQ(q.target[i].value, q.online[i].value);
  const Normalizer norm = make_norm(1, 1, 17);
  for (int i = 0; i < 5; ++i) {
    const Vec s = standard_normal(1, 1, rng), a = standard_normal(1, 1, rng);
    EXPECT_EQ(q_value(q, norm, s, a, true), q_value(q, norm, s, a, false));
  }
  EXPECT_THROW(q.polyak_update(-0.1), std::invalid_argument);
  EXPECT_THROW(q.polyak_update(1.5), std::invalid_argument);
}

TEST(Polyak, HalfStepsFromFourAndZero) {
  QNet q(1, 1, 2, 1.0);
  for (std::size_t i = 0; i < q.online.size(); ++i) {
    q.online[i].value.setConstant(4.0);
    q.target[i].value.setZero();
  }
  q.polyak_update(0.5);
  q.polyak_update(0.5);
  for (std::size_t i = 0; i < q.target.size(); ++i) EXPECT_TRUE((q.target[i].value.array() == 3.0).all());
}

TEST(Polyak, ContractsTowardOnline) {
  QNet q(2, 2, 6, 1.0);
  Rng rng(18);
  for (double tau : {0.005, 0.1, 0.5, 0.9}) {
    randomize(q.online, rng, 1.0);
    randomize(q.target, rng, 1.0);
    const nn::ParamStore old = q.target;
    q.polyak_update(tau);
    for (std::size_t i = 0; i < q.target.size(); ++i) {
      const Mat before = (old[i].value - q.online[i].value).cwiseAbs();
      const Mat after = (q.target[i].value - q.online[i].value).cwiseAbs();
      EXPECT_TRUE((after.array() <= (1.0 - tau) * before.array() * (1.0 + 1e-12) + 1e-15).all());
    }
  }
}

TEST(ModelSet, VariantNamesRoundTrip) {
  for (Variant v : {Variant::kIris, Variant::kIrisNoGoalVae, Variant::kIrisNoQ, Variant::kBc, Variant::kBcRnn, Variant::kBcq})
    EXPECT_EQ(parse_variant(to_string(v)), v);
  EXPECT_THROW(parse_variant("gail"), std::invalid_argument);
}

TEST(ModelSet, VariantsOwnTheirComponents) {
  const Normalizer norm = make_norm(2, 2, 19);
  ModelConfig cfg;
  cfg.hidden = 8;
  const ModelSet iris = ModelSet::create(Variant::kIris, cfg, norm, 1);
  EXPECT_TRUE(iris.policy && iris.goal_cvae && iris.action_cvae && iris.qnet);
  EXPECT_FALSE(iris.bc || iris.goal_regressor);
  const ModelSet nogoal = ModelSet::create(Variant::kIrisNoGoalVae, cfg, norm, 1);
  // A single regressed goal leaves nothing to score.
  EXPECT_TRUE(nogoal.goal_regressor && nogoal.policy);
  EXPECT_FALSE(nogoal.goal_cvae || nogoal.qnet || nogoal.action_cvae);
  const ModelSet noq = ModelSet::create(Variant::kIrisNoQ, cfg, norm, 1);
  EXPECT_TRUE(noq.goal_cvae && noq.policy);
  EXPECT_FALSE(noq.qnet || noq.action_cvae);
  const ModelSet bc = ModelSet::create(Variant::kBc, cfg, norm, 1);
  EXPECT_TRUE(bc.bc);
  EXPECT_FALSE(bc.policy || bc.qnet);
  const ModelSet rnn = ModelSet::create(Variant::kBcRnn, cfg, norm, 1);
  EXPECT_TRUE(rnn.policy && !rnn.policy->goal_conditioned());
  const ModelSet bcq = ModelSet::create(Variant::kBcq, cfg, norm, 1);
  EXPECT_TRUE(bcq.action_cvae && bcq.qnet);
  EXPECT_FALSE(bcq.policy || bcq.goal_cvae);
}

TEST(ModelSet, CheckpointRoundTrip) {
  const Normalizer norm = make_norm(2, 2, 20);
  ModelConfig cfg;
  cfg.hidden = 8;
  for (Variant v : {Variant::kIris, Variant::kIrisNoGoalVae, Variant::kIrisNoQ, Variant::kBc, Variant::kBcRnn, Variant::kBcq}) {
    const ModelSet m = ModelSet::create(v, cfg, norm, 7);
    const Checkpoint ckpt = m.to_checkpoint(0xfeedULL);
    const Checkpoint back = decode_checkpoint(encode_checkpoint(ckpt));
    EXPECT_EQ(back, ckpt);
    EXPECT_EQ(back.config_hash, 0xfeedULL);
    const ModelSet loaded = ModelSet::from_checkpoint(back);
    EXPECT_EQ(loaded.variant, v);
    EXPECT_EQ(loaded.to_checkpoint(0xfeedULL), ckpt);
    EXPECT_EQ(checkpoint_hash(loaded.to_checkpoint(0xfeedULL)), checkpoint_hash(ckpt));
  }
}

TEST(Checkpoint, FileRoundTripAndErrors) {
  Checkpoint c;
  c.config_hash = 42;
  Mat m(2, 3);
  m << 1, 2, 3, -0.0, 5e-40, 6;
  c.put_matrix("a/w", m);
  c.put_vector("a/b", Vec::Constant(3, 0.1));
  const auto path = std::filesystem::temp_directory_path() / "iris_ckpt_test.irc";
  save_checkpoint(c, path);
  const Checkpoint back = load_checkpoint(path);
  EXPECT_EQ(back, c);
  EXPECT_EQ(back.get_matrix("a/w"), m.cast<float>().cast<double>());
  EXPECT_THROW(back.get("missing"), std::exception);
  std::string bytes = encode_checkpoint(c);
  EXPECT_THROW(decode_checkpoint(bytes.substr(0, bytes.size() - 2)), FormatError);
  bytes[1] = 'Z';
  EXPECT_THROW(decode_checkpoint(bytes), FormatError);
  std::filesystem::remove(path);
}

TEST(Checkpoint, ImportRejectsShapeMismatch) {
  nn::ParamStore a, b;
  a.add("w", 2, 2);
  b.add("w", 2, 3);
  Checkpoint c;
  export_params(a, "p/", c);
  EXPECT_THROW(import_params(b, "p/", c), FormatError);
  EXPECT_THROW(import_params(b, "q/", c), FormatError);
}

TEST(GradCheck, TrainingLossesMatchFiniteDifferences) {
  for (TrainingLoss loss : kAllTrainingLosses)
    for (std::uint64_t inst = 0; inst < 3; ++inst) {
      const nn::GradCheckReport r = check_training_loss(loss, inst, {});
      EXPECT_TRUE(r.ok()) << to_string(loss) << " instance " << inst << " max rel " << r.max_rel_error;
      EXPECT_GT(r.checked, 50u);
      EXPECT_LT(r.max_rel_error, 1e-4);
      // Most coordinates are away from kinks.
      EXPECT_LT(r.skipped_kinks, r.checked / 10 + 1);
    }
}
