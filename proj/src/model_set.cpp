#include "iris/model_set.hpp"

#include <array>

namespace iris {

namespace {

constexpr std::array<const char*, 6> kVariantNames = {"iris", "iris_no_goal_vae", "iris_no_q",
                                                      "bc",   "bc_rnn",           "bcq"};

bool has_policy(Variant v) {
  return v == Variant::kIris || v == Variant::kIrisNoGoalVae || v == Variant::kIrisNoQ || v == Variant::kBcRnn;
}
bool has_goal_cvae(Variant v) { return v == Variant::kIris || v == Variant::kIrisNoQ; }
bool has_action_cvae(Variant v) { return v == Variant::kIris || v == Variant::kBcq; }
bool has_q(Variant v) { return v == Variant::kIris || v == Variant::kBcq; }

}  // namespace

std::string to_string(Variant v) { return kVariantNames[static_cast<std::size_t>(v)]; }

Variant parse_variant(const std::string& name) {
  for (std::size_t i = 0; i < kVariantNames.size(); ++i)
    if (name == kVariantNames[i]) return static_cast<Variant>(i);
  throw std::invalid_argument("unknown variant '" + name +
                              "' (expected iris, iris_no_goal_vae, iris_no_q, bc, bc_rnn or bcq)");
}

ModelSet ModelSet::create(Variant variant, const ModelConfig& c, Normalizer norm, std::uint64_t seed) {
  ModelSet m;
  m.variant = variant;
  m.config = c;
  m.norm = std::move(norm);
  // One init stream per model so that adding or removing a component does
  // not change the others' initial weights.
  if (has_policy(variant)) {
    m.policy.emplace(c.obs_dim, c.act_dim, c.hidden, variant != Variant::kBcRnn);
    Rng rng = derive_rng(seed, 101);
    m.policy->params.init_fan_in(rng);
  }
  if (has_goal_cvae(variant)) {
    m.goal_cvae.emplace(c.obs_dim, c.obs_dim, c.goal_latent, c.hidden, c.beta_g);
    Rng rng = derive_rng(seed, 102);
    m.goal_cvae->params.init_fan_in(rng);
  }
  if (has_action_cvae(variant)) {
    m.action_cvae.emplace(c.act_dim, c.obs_dim, c.action_latent, c.hidden, c.beta_a);
    Rng rng = derive_rng(seed, 103);
    m.action_cvae->params.init_fan_in(rng);
  }
  if (has_q(variant)) {
    m.qnet.emplace(c.obs_dim, c.act_dim, c.hidden, c.value_scale);
    Rng rng = derive_rng(seed, 104);
    m.qnet->online.init_fan_in(rng);
    m.qnet->target.copy_values_from(m.qnet->online);
  }
  if (variant == Variant::kIrisNoGoalVae) {
    m.goal_regressor.emplace(c.obs_dim, c.obs_dim, c.hidden);
    Rng rng = derive_rng(seed, 105);
    m.goal_regressor->params.init_fan_in(rng);
  }
  if (variant == Variant::kBc) {
    m.bc.emplace(c.obs_dim, c.act_dim, c.hidden);
    Rng rng = derive_rng(seed, 106);
    m.bc->params.init_fan_in(rng);
  }
  return m;
}

Checkpoint ModelSet::to_checkpoint(std::uint64_t config_hash) const {
  Checkpoint ckpt;
  ckpt.config_hash = config_hash;
  Vec meta(6);
  meta << static_cast<double>(variant), config.obs_dim, config.act_dim, config.hidden, config.goal_latent,
      config.action_latent;
  ckpt.put_vector("meta/dims", meta);
  Vec scalars(3);
  scalars << config.beta_g, config.beta_a, config.value_scale;
  ckpt.put_vector("meta/scalars", scalars);
  norm.save(ckpt);
  if (policy) export_params(policy->params, "policy/", ckpt);
  if (goal_cvae) export_params(goal_cvae->params, "goal_cvae/", ckpt);
  if (action_cvae) export_params(action_cvae->params, "action_cvae/", ckpt);
  if (qnet) {
    export_params(qnet->online, "qnet/", ckpt);
    export_params(qnet->target, "qnet_target/", ckpt);
  }
  if (goal_regressor) export_params(goal_regressor->params, "goal_regressor/", ckpt);
  if (bc) export_params(bc->params, "bc/", ckpt);
  return ckpt;
}

ModelSet ModelSet::from_checkpoint(const Checkpoint& ckpt) {
  const Vec meta = ckpt.get_vector("meta/dims");
  const Vec scalars = ckpt.get_vector("meta/scalars");
  if (meta.size() != 6 || scalars.size() != 3) throw FormatError("malformed checkpoint metadata");
  const int code = static_cast<int>(meta[0]);
  if (code < 0 || code > static_cast<int>(Variant::kBcq)) throw FormatError("unknown variant code in checkpoint");
  ModelConfig c;
  c.obs_dim = static_cast<int>(meta[1]);
  c.act_dim = static_cast<int>(meta[2]);
  c.hidden = static_cast<int>(meta[3]);
  c.goal_latent = static_cast<int>(meta[4]);
  c.action_latent = static_cast<int>(meta[5]);
  c.beta_g = scalars[0];
  c.beta_a = scalars[1];
  c.value_scale = scalars[2];
  ModelSet m = create(static_cast<Variant>(code), c, Normalizer::load(ckpt), 0);
  if (m.policy) import_params(m.policy->params, "policy/", ckpt);
  if (m.goal_cvae) import_params(m.goal_cvae->params, "goal_cvae/", ckpt);
  if (m.action_cvae) import_params(m.action_cvae->params, "action_cvae/", ckpt);
  if (m.qnet) {
    import_params(m.qnet->online, "qnet/", ckpt);
    import_params(m.qnet->target, "qnet_target/", ckpt);
  }
  if (m.goal_regressor) import_params(m.goal_regressor->params, "goal_regressor/", ckpt);
  if (m.bc) import_params(m.bc->params, "bc/", ckpt);
  return m;
}

}  // namespace iris
