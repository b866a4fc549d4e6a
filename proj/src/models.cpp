#include "iris/models.hpp"

#include <cmath>

namespace iris {

namespace {

Mat vstack(const Mat& a, const Mat& b) {
  if (a.cols() != b.cols()) throw std::invalid_argument("vstack: column count mismatch");
  Mat out(a.rows() + b.rows(), a.cols());
  out.topRows(a.rows()) = a;
  out.bottomRows(b.rows()) = b;
  return out;
}

Mat replicate_column(const Vec& v, Eigen::Index n) { return v.replicate(1, n); }

}  // namespace

// --- normalizer ---

Mat Normalizer::apply(const Mat& raw, const Vec& mean, const Vec& sd) {
  if (raw.rows() != mean.size()) throw std::invalid_argument("normalize: dimension mismatch");
  Mat out(raw.rows(), raw.cols());
  for (Eigen::Index j = 0; j < raw.cols(); ++j)
    for (Eigen::Index i = 0; i < raw.rows(); ++i) out(i, j) = (raw(i, j) - mean[i]) / sd[i];
  return out;
}

Mat Normalizer::invert(const Mat& n, const Vec& mean, const Vec& sd) {
  if (n.rows() != mean.size()) throw std::invalid_argument("denormalize: dimension mismatch");
  Mat out(n.rows(), n.cols());
  for (Eigen::Index j = 0; j < n.cols(); ++j)
    for (Eigen::Index i = 0; i < n.rows(); ++i) out(i, j) = n(i, j) * sd[i] + mean[i];
  return out;
}

void Normalizer::save(Checkpoint& ckpt) const {
  ckpt.put_vector("norm/state_mean", stats_.state_mean);
  ckpt.put_vector("norm/state_std", stats_.state_std);
  ckpt.put_vector("norm/action_mean", stats_.action_mean);
  ckpt.put_vector("norm/action_std", stats_.action_std);
}

Normalizer Normalizer::load(const Checkpoint& ckpt) {
  NormStats s;
  s.state_mean = ckpt.get_vector("norm/state_mean");
  s.state_std = ckpt.get_vector("norm/state_std");
  s.action_mean = ckpt.get_vector("norm/action_mean");
  s.action_std = ckpt.get_vector("norm/action_std");
  return Normalizer(std::move(s));
}

// --- policy ---

PolicyRNN::PolicyRNN(int obs_dim, int act_dim, int hidden, bool goal_conditioned)
    : obs_dim_(obs_dim), act_dim_(act_dim), hidden_(hidden), goal_conditioned_(goal_conditioned) {
  encoder = nn::Dense::create(params, "encoder", input_dim(), hidden);
  cell = nn::GruCell::create(params, "gru", hidden, hidden);
  head = nn::Mlp::create(params, "head", {hidden, hidden, act_dim});
}

std::vector<Mat> PolicyRNN::unroll(const std::vector<Mat>& inputs, UnrollCache* cache) const {
  if (inputs.empty()) throw std::invalid_argument("policy unroll needs at least one step");
  const Eigen::Index B = inputs.front().cols();
  Mat h = zero_hidden(B);
  std::vector<Mat> outputs;
  outputs.reserve(inputs.size());
  if (cache) {
    cache->inputs = inputs;
    cache->enc_pre.assign(inputs.size(), Mat());
    cache->cells.assign(inputs.size(), {});
    cache->heads.assign(inputs.size(), {});
  }
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    if (inputs[k].rows() != input_dim() || inputs[k].cols() != B)
      throw std::invalid_argument("policy input has wrong shape");
    Mat pre = encoder.forward(params, inputs[k]);
    Mat e = nn::relu(pre);
    h = cell.step(params, h, e, cache ? &cache->cells[k] : nullptr);
    outputs.push_back(head.forward(params, h, cache ? &cache->heads[k] : nullptr));
    if (cache) cache->enc_pre[k] = std::move(pre);
  }
  return outputs;
}

void PolicyRNN::backward(const UnrollCache& cache, const std::vector<Mat>& d_outputs) {
  const std::size_t T = cache.inputs.size();
  if (d_outputs.size() != T) throw std::invalid_argument("policy backward: step count mismatch");
  Mat dh = Mat::Zero(hidden_, cache.inputs.front().cols());
  for (std::size_t k = T; k-- > 0;) {
    dh += head.backward(params, cache.heads[k], d_outputs[k]);
    Mat de;
    dh = cell.backward(params, cache.cells[k], dh, &de);
    Mat dpre = nn::relu_backward(cache.enc_pre[k], de);
    encoder.backward(params, cache.inputs[k], dpre);
  }
}

Mat PolicyRNN::step(Mat& hidden, const Mat& input) const {
  Mat e = nn::relu(encoder.forward(params, input));
  hidden = cell.step(params, hidden, e);
  return head.forward(params, hidden);
}

double PolicyRNN::imitation_loss(const std::vector<Mat>& inputs, const std::vector<Mat>& targets,
                                 bool accumulate_grad) {
  if (inputs.size() != targets.size() || inputs.empty())
    throw std::invalid_argument("imitation_loss: need one target per input step");
  UnrollCache cache;
  const std::vector<Mat> pred = unroll(inputs, accumulate_grad ? &cache : nullptr);
  const auto B = static_cast<double>(inputs.front().cols());
  std::vector<Mat> d_out;
  double sq = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    if (targets[k].rows() != pred[k].rows() || targets[k].cols() != pred[k].cols())
      throw std::invalid_argument("imitation_loss: target shape mismatch");
    const Mat diff = pred[k] - targets[k];
    for (Eigen::Index j = 0; j < diff.cols(); ++j)
      for (Eigen::Index i = 0; i < diff.rows(); ++i) sq += diff(i, j) * diff(i, j);
    if (accumulate_grad) d_out.push_back(diff * (2.0 / B));
  }
  if (accumulate_grad) backward(cache, d_out);
  return sq / B;
}

Mat policy_rollout_train(const PolicyRNN& policy, const Normalizer& norm, const Mat& states, const Vec& goal) {
  if (!policy.goal_conditioned()) throw std::invalid_argument("policy is not goal-conditioned");
  const Mat s = norm.states(states);
  const Mat g = norm.states(goal);
  std::vector<Mat> inputs;
  for (Eigen::Index k = 0; k < s.cols(); ++k) inputs.push_back(vstack(s.col(k), g));
  const std::vector<Mat> out = policy.unroll(inputs);
  Mat actions(policy.act_dim(), s.cols());
  for (Eigen::Index k = 0; k < s.cols(); ++k) actions.col(k) = norm.denorm_actions(out[k]);
  return actions;
}

double bc_loss(const Mat& predicted, const Mat& actual) {
  if (predicted.rows() != actual.rows() || predicted.cols() != actual.cols())
    throw std::invalid_argument("bc_loss: shape mismatch");
  double acc = 0.0;
  for (Eigen::Index k = 0; k < predicted.cols(); ++k)
    for (Eigen::Index i = 0; i < predicted.rows(); ++i) {
      const double d = predicted(i, k) - actual(i, k);
      acc += d * d;
    }
  return acc;
}

// --- cvae ---

CVAE::CVAE(int target_dim, int cond_dim, int latent_dim, int hidden, double beta)
    : target_dim_(target_dim), cond_dim_(cond_dim), latent_dim_(latent_dim), beta_(beta) {
  encoder = nn::Mlp::create(params, "encoder", {target_dim + cond_dim, hidden, hidden, 2 * latent_dim});
  decoder = nn::Mlp::create(params, "decoder", {latent_dim + cond_dim, hidden, hidden, target_dim});
}

nn::GaussianHead CVAE::encode(const Mat& target, const Mat& cond, nn::MlpCache* cache) const {
  if (target.rows() != target_dim_ || cond.rows() != cond_dim_)
    throw std::invalid_argument("cvae encode: dimension mismatch");
  return nn::split_gaussian(encoder.forward(params, vstack(target, cond), cache));
}

Mat CVAE::decode(const Mat& z, const Mat& cond, nn::MlpCache* cache) const {
  if (z.rows() != latent_dim_ || cond.rows() != cond_dim_)
    throw std::invalid_argument("cvae decode: dimension mismatch");
  return decoder.forward(params, vstack(z, cond), cache);
}

CvaeParts CVAE::loss_impl(const Mat& target, const Mat& cond, const Mat& eps, nn::ParamStore* grads) const {
  const auto B = static_cast<double>(target.cols());
  nn::MlpCache enc_cache, dec_cache;
  const nn::GaussianHead head = encode(target, cond, grads ? &enc_cache : nullptr);
  const Mat z = nn::reparam(head, eps);
  const Mat recon = decode(z, cond, grads ? &dec_cache : nullptr);
  const Vec kl = nn::kl_to_standard_normal(head);

  CvaeParts parts;
  const Mat diff = recon - target;
  double sq = 0.0;
  for (Eigen::Index j = 0; j < diff.cols(); ++j)
    for (Eigen::Index i = 0; i < diff.rows(); ++i) sq += diff(i, j) * diff(i, j);
  double kl_sum = 0.0;
  for (Eigen::Index j = 0; j < kl.size(); ++j) kl_sum += kl[j];
  parts.recon = sq / B;
  parts.kl = kl_sum / B;
  parts.loss = parts.recon + beta_ * parts.kl;

  if (grads) {
    const Mat d_recon = diff * (2.0 / B);
    const Mat d_dec_in = decoder.backward(*grads, dec_cache, d_recon);
    const Mat dz = d_dec_in.topRows(latent_dim_);
    const Mat sigma = nn::exp(head.log_sigma);
    const Mat dmu = dz + head.mu * (beta_ / B);
    const Mat dls = (dz.array() * eps.array() * sigma.array() +
                     (sigma.array() * sigma.array() - 1.0) * (beta_ / B))
                        .matrix();
    encoder.backward(*grads, enc_cache, nn::join_gaussian_grad(head, dmu, dls));
  }
  return parts;
}

CvaeParts CVAE::loss(const Mat& target, const Mat& cond, const Mat& eps, bool accumulate_grad) {
  return loss_impl(target, cond, eps, accumulate_grad ? &params : nullptr);
}

CvaeParts CVAE::loss(const Mat& target, const Mat& cond, const Mat& eps) const {
  return loss_impl(target, cond, eps, nullptr);
}

Mat CVAE::decode_from_prior(const Vec& cond, const Mat& latents) const {
  return decode(latents, replicate_column(cond, latents.cols()));
}

Mat sample_goals(const CVAE& goal_cvae, const Normalizer& norm, const Vec& s, int N, Rng& rng) {
  if (N <= 0) throw std::invalid_argument("sample_goals: N must be positive");
  const Mat z = standard_normal(goal_cvae.latent_dim(), N, rng);
  return norm.denorm_states(goal_cvae.decode_from_prior(norm.states(s), z));
}

Mat sample_actions(const CVAE& action_cvae, const Normalizer& norm, const Vec& s, int M, Rng& rng) {
  if (M <= 0) throw std::invalid_argument("sample_actions: M must be positive");
  const Mat z = standard_normal(action_cvae.latent_dim(), M, rng);
  return norm.denorm_actions(action_cvae.decode_from_prior(norm.states(s), z));
}

// --- q network ---

QNet::QNet(int obs_dim, int act_dim, int hidden, double value_scale) : value_scale_(value_scale) {
  net = nn::Mlp::create(online, "q", {obs_dim + act_dim, hidden, hidden, 1});
  target = online;
}

Mat QNet::values(const Mat& s_norm, const Mat& a_norm, bool use_target) const {
  Mat out = net.forward(use_target ? target : online, vstack(s_norm, a_norm));
  out *= value_scale_;
  return out;
}

double QNet::td_loss(const Mat& s_norm, const Mat& a_norm, const Mat& targets, bool accumulate_grad, Mat* q_out) {
  nn::MlpCache cache;
  Mat raw = net.forward(online, vstack(s_norm, a_norm), accumulate_grad ? &cache : nullptr);
  const Mat q = raw * value_scale_;
  const auto B = static_cast<double>(q.cols());
  const Mat diff = q - targets;
  double sq = 0.0;
  for (Eigen::Index j = 0; j < diff.cols(); ++j) sq += diff(0, j) * diff(0, j);
  if (accumulate_grad) net.backward(online, cache, diff * (2.0 * value_scale_ / B));
  if (q_out) *q_out = q;
  return sq / B;
}

void QNet::polyak_update(double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("polyak tau must lie in [0, 1]");
  for (std::size_t i = 0; i < online.size(); ++i)
    target[i].value = tau * online[i].value + (1.0 - tau) * target[i].value;
}

double q_value(const QNet& q, const Normalizer& norm, const Vec& s, const Vec& a, bool use_target) {
  return q.values(norm.states(s), norm.actions(a), use_target)(0, 0);
}

// --- regressor ---

Regressor::Regressor(int in_dim, int out_dim, int hidden) {
  net = nn::Mlp::create(params, "mlp", {in_dim, hidden, hidden, out_dim});
}

double Regressor::loss(const Mat& x, const Mat& y, bool accumulate_grad) {
  nn::MlpCache cache;
  const Mat pred = net.forward(params, x, accumulate_grad ? &cache : nullptr);
  const Mat diff = pred - y;
  const auto B = static_cast<double>(x.cols());
  double sq = 0.0;
  for (Eigen::Index j = 0; j < diff.cols(); ++j)
    for (Eigen::Index i = 0; i < diff.rows(); ++i) sq += diff(i, j) * diff(i, j);
  if (accumulate_grad) net.backward(params, cache, diff * (2.0 / B));
  return sq / B;
}

}  // namespace iris
