#include "iris/loss_checks.hpp"

#include "iris/models.hpp"

namespace iris {

namespace {

constexpr int kObs = 2;
constexpr int kAct = 2;
constexpr int kHidden = 6;
constexpr int kBatch = 3;
constexpr int kWindow = 4;

// Fan-in init, then noise on every entry so biases are exercised too.
void randomize(nn::ParamStore& store, Rng& rng) {
  store.init_fan_in(rng);
  for (std::size_t i = 0; i < store.size(); ++i) {
    Mat& v = store[i].value;
    v += 0.3 * standard_normal(v.rows(), v.cols(), rng);
  }
}

}  // namespace

std::string to_string(TrainingLoss loss) {
  switch (loss) {
    case TrainingLoss::kPolicy:
      return "policy_imitation";
    case TrainingLoss::kGoalCvae:
      return "goal_cvae";
    case TrainingLoss::kActionCvae:
      return "action_cvae";
    case TrainingLoss::kQ:
      return "q_td";
  }
  return "unknown";
}

nn::GradCheckReport check_training_loss(TrainingLoss loss, std::uint64_t instance_seed,
                                        const nn::GradCheckOptions& options) {
  Rng rng = derive_rng(instance_seed, 301 + static_cast<std::uint64_t>(loss));
  switch (loss) {
    case TrainingLoss::kPolicy: {
      PolicyRNN policy(kObs, kAct, kHidden, true);
      randomize(policy.params, rng);
      std::vector<Mat> inputs, targets;
      for (int k = 0; k < kWindow; ++k) {
        inputs.push_back(standard_normal(policy.input_dim(), kBatch, rng));
        targets.push_back(standard_normal(kAct, kBatch, rng));
      }
      return nn::grad_check(
          policy.params,
          [&](nn::ParamStore&, bool with_grad) { return policy.imitation_loss(inputs, targets, with_grad); },
          options);
    }
    case TrainingLoss::kGoalCvae:
    case TrainingLoss::kActionCvae: {
      const int target_dim = loss == TrainingLoss::kGoalCvae ? kObs : kAct;
      const int latent = loss == TrainingLoss::kGoalCvae ? 3 : 2;
      CVAE cvae(target_dim, kObs, latent, kHidden, 0.05 + 0.5 * uniform01(rng));
      randomize(cvae.params, rng);
      const Mat target = standard_normal(target_dim, kBatch, rng);
      const Mat cond = standard_normal(kObs, kBatch, rng);
      const Mat eps = standard_normal(latent, kBatch, rng);
      return nn::grad_check(
          cvae.params, [&](nn::ParamStore&, bool with_grad) { return cvae.loss(target, cond, eps, with_grad).loss; },
          options);
    }
    case TrainingLoss::kQ: {
      QNet q(kObs, kAct, kHidden, 100.0);
      randomize(q.online, rng);
      const Mat s = standard_normal(kObs, kBatch, rng);
      const Mat a = standard_normal(kAct, kBatch, rng);
      const Mat targets = 50.0 * standard_normal(1, kBatch, rng);
      return nn::grad_check(
          q.online, [&](nn::ParamStore&, bool with_grad) { return q.td_loss(s, a, targets, with_grad); }, options);
    }
  }
  throw std::logic_error("unknown training loss");
}

}  // namespace iris
