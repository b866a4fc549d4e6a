#include "iris/training.hpp"

#include <fstream>
#include <limits>
#include <sstream>

namespace iris {

namespace {

constexpr double kEma = 0.99;

nn::AdamConfig adam(const TrainConfig& c, double lr) { return {lr, c.adam_beta1, c.adam_beta2, c.adam_eps}; }

// Normalized views of one sampled batch of windows.
struct Batch {
  int T = 0;
  Eigen::Index B = 0;
  std::vector<Mat> states;   // T + 1 entries, obs x B
  std::vector<Mat> actions;  // T entries, act x B
  Mat rewards;               // T x B (raw)
  std::vector<bool> terminal;
};

Batch gather(const std::vector<SequenceWindow>& windows, const Normalizer& norm) {
  Batch b;
  b.B = static_cast<Eigen::Index>(windows.size());
  b.T = static_cast<int>(windows.front().steps());
  const Eigen::Index obs = windows.front().states.rows();
  const Eigen::Index act = windows.front().actions.rows();
  b.states.assign(b.T + 1, Mat(obs, b.B));
  b.actions.assign(b.T, Mat(act, b.B));
  b.rewards.resize(b.T, b.B);
  for (Eigen::Index j = 0; j < b.B; ++j) {
    const SequenceWindow& w = windows[static_cast<std::size_t>(j)];
    for (int k = 0; k <= b.T; ++k) b.states[k].col(j) = w.states.col(k).cast<double>();
    for (int k = 0; k < b.T; ++k) b.actions[k].col(j) = w.actions.col(k).cast<double>();
    b.rewards.col(j) = w.rewards.cast<double>();
    b.terminal.push_back(w.is_terminal);
  }
  for (auto& s : b.states) s = norm.states(s);
  for (auto& a : b.actions) a = norm.actions(a);
  return b;
}

Mat vstack(const Mat& a, const Mat& b) {
  Mat out(a.rows() + b.rows(), a.cols());
  out.topRows(a.rows()) = a;
  out.bottomRows(b.rows()) = b;
  return out;
}

void update_ema(LossRecord& avg, const LossRecord& r, std::int64_t iter) {
  auto mix = [&](double& a, double x) { a = iter <= 1 ? x : kEma * a + (1.0 - kEma) * x; };
  mix(avg.loss_policy, r.loss_policy);
  mix(avg.loss_goal_recon, r.loss_goal_recon);
  mix(avg.loss_goal_kl, r.loss_goal_kl);
  mix(avg.loss_action_recon, r.loss_action_recon);
  mix(avg.loss_action_kl, r.loss_action_kl);
  mix(avg.loss_q, r.loss_q);
  mix(avg.q_mean, r.q_mean);
  avg.iter = iter;
}

}  // namespace

void validate(const TrainConfig& c) {
  if (c.T < 2) throw std::invalid_argument("T must be at least 2");
  if (c.batch_size < 1) throw std::invalid_argument("batch_size must be positive");
  if (c.n_iter < 0) throw std::invalid_argument("n_iter must be nonnegative");
  if (!(c.gamma >= 0.0 && c.gamma < 1.0)) throw std::invalid_argument("gamma must lie in [0, 1)");
  if (c.M < 1) throw std::invalid_argument("M must be at least 1");
  if (c.beta_g < 0.0 || c.beta_a < 0.0) throw std::invalid_argument("KL weights must be nonnegative");
  if (!(c.tau >= 0.0 && c.tau <= 1.0)) throw std::invalid_argument("tau must lie in [0, 1]");
  if (c.checkpoint_every < 1 || c.log_every < 1) throw std::invalid_argument("cadences must be positive");
  if (c.hidden < 1 || c.goal_latent < 1 || c.action_latent < 1)
    throw std::invalid_argument("model sizes must be positive");
  for (double lr : {c.lr_policy, c.lr_goal, c.lr_action, c.lr_q})
    if (!(lr > 0.0)) throw std::invalid_argument("learning rates must be positive");
}

std::string describe(const TrainConfig& c) {
  std::ostringstream os;
  os.precision(17);
  os << "variant=" << to_string(c.variant) << "\nT=" << c.T << "\nbatch_size=" << c.batch_size
     << "\nn_iter=" << c.n_iter << "\ngamma=" << c.gamma << "\nM=" << c.M << "\nbeta_g=" << c.beta_g
     << "\nbeta_a=" << c.beta_a << "\nlr_policy=" << c.lr_policy << "\nlr_goal=" << c.lr_goal
     << "\nlr_action=" << c.lr_action << "\nlr_q=" << c.lr_q << "\nadam_beta1=" << c.adam_beta1
     << "\nadam_beta2=" << c.adam_beta2 << "\nadam_eps=" << c.adam_eps << "\ntau=" << c.tau << "\nseed=" << c.seed
     << "\ncheckpoint_every=" << c.checkpoint_every << "\nlog_every=" << c.log_every
     << "\nq_all_transitions=" << c.q_all_transitions << "\nhidden=" << c.hidden << "\ngoal_latent=" << c.goal_latent
     << "\naction_latent=" << c.action_latent << "\nupdate_policy=" << c.update_policy
     << "\nupdate_goal=" << c.update_goal << "\nupdate_action=" << c.update_action << "\nupdate_q=" << c.update_q
     << "\n";
  return os.str();
}

std::uint64_t config_hash(const TrainConfig& c) { return fnv1a64(describe(c)); }

ModelConfig model_config(const TrainConfig& c, int obs_dim, int act_dim) {
  ModelConfig m;
  m.obs_dim = obs_dim;
  m.act_dim = act_dim;
  m.hidden = c.hidden;
  m.goal_latent = c.goal_latent;
  m.action_latent = c.action_latent;
  m.beta_g = c.beta_g;
  m.beta_a = c.beta_a;
  m.value_scale = 1.0 / (1.0 - c.gamma);
  return m;
}

int window_length(const TrainConfig& c) {
  return (c.variant == Variant::kBc || c.variant == Variant::kBcq) ? 1 : c.T;
}

TrainState::TrainState(std::uint64_t seed)
    : sample_rng(derive_rng(seed, 201)),
      goal_rng(derive_rng(seed, 202)),
      action_rng(derive_rng(seed, 203)),
      target_rng(derive_rng(seed, 204)) {}

Vec q_targets(const QNet& qnet, const CVAE& action_cvae, const Normalizer& norm, const Mat& s_next, const Vec& r,
              const std::vector<bool>& is_terminal, double gamma, int M, Rng& rng) {
  if (M < 1) throw std::invalid_argument("q_target: M must be at least 1");
  const Eigen::Index B = s_next.cols();
  if (r.size() != B || static_cast<Eigen::Index>(is_terminal.size()) != B)
    throw std::invalid_argument("q_target: batch size mismatch");
  const Mat z = standard_normal(action_cvae.latent_dim(), B * M, rng);
  const Mat s_norm = norm.states(s_next);
  Mat cond(s_norm.rows(), B * M);
  for (Eigen::Index b = 0; b < B; ++b)
    for (int i = 0; i < M; ++i) cond.col(b * M + i) = s_norm.col(b);
  const Mat proposals = action_cvae.decode(z, cond);
  const Mat q = qnet.values(cond, proposals, /*use_target=*/true);
  Vec out(B);
  for (Eigen::Index b = 0; b < B; ++b) {
    if (is_terminal[static_cast<std::size_t>(b)]) {
      out[b] = r[b] / (1.0 - gamma);
      continue;
    }
    double best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < M; ++i) best = std::max(best, q(0, b * M + i));
    out[b] = r[b] + gamma * best;
  }
  return out;
}

double q_target(const QNet& qnet, const CVAE& action_cvae, const Normalizer& norm, const Vec& s_next, double r,
                bool is_terminal, double gamma, int M, Rng& rng) {
  Vec rv(1);
  rv << r;
  return q_targets(qnet, action_cvae, norm, s_next, rv, {is_terminal}, gamma, M, rng)[0];
}

LossRecord train_step(ModelSet& m, const WindowSampler& sampler, const TrainConfig& c, TrainState& state) {
  if (sampler.T() != window_length(c)) throw std::invalid_argument("sampler window length does not match variant");
  std::vector<SequenceWindow> windows;
  windows.reserve(static_cast<std::size_t>(c.batch_size));
  for (int i = 0; i < c.batch_size; ++i) windows.push_back(sampler.sample(state.sample_rng));
  const Batch b = gather(windows, m.norm);
  const int T = b.T;
  LossRecord rec;
  rec.iter = ++state.iteration;

  // Policy imitation on the whole window toward its last state.
  if (m.policy && c.update_policy) {
    std::vector<Mat> inputs;
    for (int k = 0; k < T; ++k)
      inputs.push_back(m.policy->goal_conditioned() ? vstack(b.states[k], b.states[T]) : b.states[k]);
    rec.loss_policy = m.policy->imitation_loss(inputs, b.actions, true);
    nn::adam_step(m.policy->params, adam(c, c.lr_policy));
  }
  if (m.bc && c.update_policy) {
    rec.loss_policy = m.bc->loss(b.states[0], b.actions[0], true);
    nn::adam_step(m.bc->params, adam(c, c.lr_policy));
  }

  // Goal model on (s_t -> s_{t+T}).
  if (m.goal_cvae && c.update_goal) {
    const Mat eps = standard_normal(m.goal_cvae->latent_dim(), b.B, state.goal_rng);
    const CvaeParts parts = m.goal_cvae->loss(b.states[T], b.states[0], eps, true);
    rec.loss_goal_recon = parts.recon;
    rec.loss_goal_kl = parts.kl;
    nn::adam_step(m.goal_cvae->params, adam(c, c.lr_goal));
  }
  if (m.goal_regressor && c.update_goal) {
    rec.loss_goal_recon = m.goal_regressor->loss(b.states[0], b.states[T], true);
    nn::adam_step(m.goal_regressor->params, adam(c, c.lr_goal));
  }

  // Action cVAE on the window's last transition.
  if (m.action_cvae && c.update_action) {
    const Mat eps = standard_normal(m.action_cvae->latent_dim(), b.B, state.action_rng);
    const CvaeParts parts = m.action_cvae->loss(b.actions[T - 1], b.states[T - 1], eps, true);
    rec.loss_action_recon = parts.recon;
    rec.loss_action_kl = parts.kl;
    nn::adam_step(m.action_cvae->params, adam(c, c.lr_action));
  }

  // Value update toward r + gamma * max_a Q'(s', a) over cVAE proposals.
  if (m.qnet && m.action_cvae && c.update_q) {
    const int first = c.q_all_transitions ? 0 : T - 1;
    const int count = T - first;
    const Eigen::Index n = b.B * count;
    Mat s(b.states[0].rows(), n), a(b.actions[0].rows(), n), s_next(b.states[0].rows(), n);
    Vec r(n);
    std::vector<bool> terminal(static_cast<std::size_t>(n));
    for (int k = first; k < T; ++k)
      for (Eigen::Index j = 0; j < b.B; ++j) {
        const Eigen::Index col = (k - first) * b.B + j;
        s.col(col) = b.states[k].col(j);
        a.col(col) = b.actions[k].col(j);
        s_next.col(col) = b.states[k + 1].col(j);
        r[col] = b.rewards(k, j);
        terminal[static_cast<std::size_t>(col)] = (k == T - 1) && b.terminal[static_cast<std::size_t>(j)];
      }
    const Vec targets = q_targets(*m.qnet, *m.action_cvae, m.norm, m.norm.denorm_states(s_next), r, terminal,
                                  c.gamma, c.M, state.target_rng);
    Mat q;
    rec.loss_q = m.qnet->td_loss(s, a, targets.transpose(), true, &q);
    rec.q_mean = q.mean();
    nn::adam_step(m.qnet->online, adam(c, c.lr_q));
    m.qnet->polyak_update(c.tau);
  }

  update_ema(state.running, rec, state.iteration);
  return rec;
}

std::string metrics_csv_header() {
  return "iter,loss_policy,loss_goal_recon,loss_goal_kl,loss_action_recon,loss_action_kl,loss_q,q_mean";
}

std::string metrics_csv_row(const LossRecord& r) {
  std::ostringstream os;
  os.precision(9);
  os << r.iter << ',' << r.loss_policy << ',' << r.loss_goal_recon << ',' << r.loss_goal_kl << ','
     << r.loss_action_recon << ',' << r.loss_action_kl << ',' << r.loss_q << ',' << r.q_mean;
  return os.str();
}

TrainResult train(const TrajectoryDataset& dataset, const TrainConfig& config,
                  const std::optional<std::filesystem::path>& out_dir) {
  validate(config);
  if (dataset.empty()) throw std::invalid_argument("cannot train on an empty dataset");
  const NormStats stats = dataset.has_norm_stats() ? dataset.norm_stats() : compute_norm_stats(dataset);
  const std::uint64_t hash = config_hash(config);

  TrainResult result{{}, {}, ModelSet::create(config.variant, model_config(config, dataset.obs_dim(), dataset.act_dim()),
                                              Normalizer(stats), config.seed)};
  ModelSet& models = result.final_models;
  const WindowSampler sampler(dataset, window_length(config));
  TrainState state(config.seed);

  std::ofstream metrics;
  if (out_dir) {
    std::filesystem::create_directories(*out_dir);
    metrics.open(*out_dir / "metrics.csv", std::ios::trunc);
    if (!metrics) throw std::runtime_error("cannot write metrics log in " + out_dir->string());
    metrics << metrics_csv_header() << '\n';
  }

  auto snapshot = [&](std::int64_t iter) {
    SavedCheckpoint s;
    s.iter = iter;
    s.checkpoint = models.to_checkpoint(hash);
    if (out_dir) {
      char name[32];
      std::snprintf(name, sizeof(name), "ckpt_%07lld.irc", static_cast<long long>(iter));
      s.path = *out_dir / name;
      save_checkpoint(s.checkpoint, s.path);
    }
    result.checkpoints.push_back(std::move(s));
  };

  snapshot(0);
  for (int i = 1; i <= config.n_iter; ++i) {
    const LossRecord rec = train_step(models, sampler, config, state);
    if (i % config.log_every == 0 || i == config.n_iter) {
      result.log.push_back(rec);
      if (metrics) metrics << metrics_csv_row(rec) << '\n';
    }
    if (i % config.checkpoint_every == 0 || i == config.n_iter) snapshot(i);
  }
  return result;
}

}  // namespace iris
