#pragma once

#include "iris/checkpoint.hpp"
#include "iris/dataset.hpp"
#include "iris/nn.hpp"

#include <optional>
#include <string>
#include <vector>

namespace iris {

/// Maps raw states/actions to and from the dataset's standardized space.
class Normalizer {
 public:
  Normalizer() = default;
  explicit Normalizer(NormStats stats) : stats_(std::move(stats)) {}

  Mat states(const Mat& raw) const { return apply(raw, stats_.state_mean, stats_.state_std); }
  Mat actions(const Mat& raw) const { return apply(raw, stats_.action_mean, stats_.action_std); }
  Mat denorm_states(const Mat& n) const { return invert(n, stats_.state_mean, stats_.state_std); }
  Mat denorm_actions(const Mat& n) const { return invert(n, stats_.action_mean, stats_.action_std); }

  const NormStats& stats() const { return stats_; }

  void save(Checkpoint& ckpt) const;
  static Normalizer load(const Checkpoint& ckpt);

 private:
  static Mat apply(const Mat& raw, const Vec& mean, const Vec& sd);
  static Mat invert(const Mat& n, const Vec& mean, const Vec& sd);

  NormStats stats_;
};

/// Recurrent policy: dense ReLU encoder of (state [, goal]) -> gated
/// recurrent cell -> two-layer head producing a normalized action. With
/// goal conditioning off it is the BC-RNN baseline.
class PolicyRNN {
 public:
  PolicyRNN(int obs_dim, int act_dim, int hidden, bool goal_conditioned);

  struct UnrollCache {
    std::vector<Mat> inputs;
    std::vector<Mat> enc_pre;
    std::vector<nn::GruCell::StepCache> cells;
    std::vector<nn::MlpCache> heads;
  };

  int input_dim() const { return goal_conditioned_ ? 2 * obs_dim_ : obs_dim_; }
  int act_dim() const { return act_dim_; }
  int hidden_dim() const { return hidden_; }
  bool goal_conditioned() const { return goal_conditioned_; }

  Mat zero_hidden(Eigen::Index batch) const { return Mat::Zero(hidden_, batch); }

  /// Unrolls from a zero hidden state over per-step inputs (input_dim x B,
  /// already normalized); returns normalized actions per step.
  std::vector<Mat> unroll(const std::vector<Mat>& inputs, UnrollCache* cache = nullptr) const;
  /// Backpropagates per-step output gradients through the unroll.
  void backward(const UnrollCache& cache, const std::vector<Mat>& d_outputs);

  /// Batch mean over windows of the summed squared action error; targets
  /// are normalized actions per step.
  double imitation_loss(const std::vector<Mat>& inputs, const std::vector<Mat>& targets, bool accumulate_grad);

  /// One closed-loop step; updates `hidden` in place.
  Mat step(Mat& hidden, const Mat& input) const;

  nn::ParamStore params;
  nn::Dense encoder;
  nn::GruCell cell;
  nn::Mlp head;

 private:
  int obs_dim_, act_dim_, hidden_;
  bool goal_conditioned_;
};

/// Goal-conditioned action predictions for one window: inputs are raw
/// states (obs x T) and a raw goal; output is denormalized (act x T).
Mat policy_rollout_train(const PolicyRNN& policy, const Normalizer& norm, const Mat& states, const Vec& goal);

/// Sum over the window of squared L2 action errors.
double bc_loss(const Mat& predicted, const Mat& actual);

struct CvaeParts {
  double loss = 0.0;   // recon + beta * kl
  double recon = 0.0;  // batch mean of squared reconstruction error
  double kl = 0.0;     // batch mean of KL to the standard-normal prior
};

/// Conditional VAE over normalized vectors: encoder(target, condition) ->
/// diagonal Gaussian; decoder(z, condition) -> target.
class CVAE {
 public:
  CVAE(int target_dim, int cond_dim, int latent_dim, int hidden, double beta);

  int target_dim() const { return target_dim_; }
  int cond_dim() const { return cond_dim_; }
  int latent_dim() const { return latent_dim_; }
  double beta() const { return beta_; }
  void set_beta(double b) { beta_ = b; }

  nn::GaussianHead encode(const Mat& target, const Mat& cond, nn::MlpCache* cache = nullptr) const;
  Mat decode(const Mat& z, const Mat& cond, nn::MlpCache* cache = nullptr) const;

  /// Batch-mean loss with injected noise eps (latent x B). Accumulates
  /// parameter gradients when requested.
  CvaeParts loss(const Mat& target, const Mat& cond, const Mat& eps, bool accumulate_grad);
  CvaeParts loss(const Mat& target, const Mat& cond, const Mat& eps) const;

  /// Decodes `latents` (latent x N) all conditioned on the same normalized
  /// condition column.
  Mat decode_from_prior(const Vec& cond, const Mat& latents) const;

  nn::ParamStore params;
  nn::Mlp encoder;
  nn::Mlp decoder;

 private:
  CvaeParts loss_impl(const Mat& target, const Mat& cond, const Mat& eps, nn::ParamStore* grads) const;

  int target_dim_, cond_dim_, latent_dim_;
  double beta_;
};

/// N goal proposals at raw state s, from standard-normal latents;
/// denormalized (obs x N).
Mat sample_goals(const CVAE& goal_cvae, const Normalizer& norm, const Vec& s, int N, Rng& rng);
/// M action proposals at raw state s; denormalized (act x M).
Mat sample_actions(const CVAE& action_cvae, const Normalizer& norm, const Vec& s, int M, Rng& rng);

/// State-action value network with a target copy. The MLP output is
/// multiplied by `value_scale` so the network works in O(1) units.
class QNet {
 public:
  QNet(int obs_dim, int act_dim, int hidden, double value_scale);

  /// Values (1 x B) for normalized state/action batches.
  Mat values(const Mat& s_norm, const Mat& a_norm, bool use_target) const;
  /// Batch mean of (Q - target)^2; accumulates online gradients.
  double td_loss(const Mat& s_norm, const Mat& a_norm, const Mat& targets, bool accumulate_grad,
                 Mat* q_out = nullptr);

  /// target <- tau * online + (1 - tau) * target
  void polyak_update(double tau);

  double value_scale() const { return value_scale_; }

  nn::ParamStore online;
  nn::ParamStore target;
  nn::Mlp net;

 private:
  double value_scale_;
};

/// Q(s, a) for raw inputs.
double q_value(const QNet& q, const Normalizer& norm, const Vec& s, const Vec& a, bool use_target);

/// Deterministic MLP regressor in normalized space (BC policy, goal
/// regressor for the no-goal-VAE ablation).
class Regressor {
 public:
  Regressor(int in_dim, int out_dim, int hidden);

  Mat predict(const Mat& x) const { return net.forward(params, x); }
  /// Batch mean of squared L2 error.
  double loss(const Mat& x, const Mat& y, bool accumulate_grad);

  nn::ParamStore params;
  nn::Mlp net;
};

}  // namespace iris
