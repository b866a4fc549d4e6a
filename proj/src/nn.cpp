#include "iris/nn.hpp"

#include "iris/kernels.hpp"

#include <cmath>

namespace iris::nn {

std::size_t ParamStore::add(std::string name, Eigen::Index rows, Eigen::Index cols) {
  for (const auto& p : params_)
    if (p.name == name) throw std::invalid_argument("duplicate parameter name " + name);
  Param p;
  p.name = std::move(name);
  p.value = Mat::Zero(rows, cols);
  p.grad = Mat::Zero(rows, cols);
  p.m1 = Mat::Zero(rows, cols);
  p.m2 = Mat::Zero(rows, cols);
  params_.push_back(std::move(p));
  return params_.size() - 1;
}

std::size_t ParamStore::find(const std::string& name) const {
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (params_[i].name == name) return i;
  throw std::out_of_range("no parameter named " + name);
}

Eigen::Index ParamStore::parameter_count() const {
  Eigen::Index n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p.grad.setZero();
}

void ParamStore::copy_values_from(const ParamStore& other) {
  if (other.params_.size() != params_.size()) throw std::invalid_argument("parameter layout mismatch");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].value.rows() != other.params_[i].value.rows() ||
        params_[i].value.cols() != other.params_[i].value.cols())
      throw std::invalid_argument("parameter shape mismatch for " + params_[i].name);
    params_[i].value = other.params_[i].value;
  }
}

void ParamStore::init_fan_in(Rng& rng) {
  for (auto& p : params_) {
    if (p.value.cols() == 1) {
      p.value.setZero();
      continue;
    }
    const double bound = 1.0 / std::sqrt(static_cast<double>(p.value.cols()));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = u(rng);
  }
}

// --- kink probe ---

namespace {
thread_local KinkProbe* g_probe = nullptr;
}

KinkProbe::KinkProbe() : previous_(g_probe) { g_probe = this; }
KinkProbe::~KinkProbe() { g_probe = previous_; }

void KinkProbe::record(bool active) {
  if (g_probe == nullptr) return;
  g_probe->hash_ ^= active ? 0x9fu : 0x35u;
  g_probe->hash_ *= 0x100000001b3ULL;
}

// --- activations ---

namespace {

template <typename F>
Mat map(const Mat& x, F f) {
  Mat y(x.rows(), x.cols());
  const double* px = x.data();
  double* py = y.data();
  for (Eigen::Index i = 0; i < x.size(); ++i) py[i] = f(px[i]);
  return y;
}

}  // namespace

Mat relu(const Mat& x) {
  if (g_probe != nullptr)
    for (Eigen::Index i = 0; i < x.size(); ++i) KinkProbe::record(x.data()[i] > 0.0);
  return map(x, [](double v) { return v > 0.0 ? v : 0.0; });
}

Mat relu_backward(const Mat& x, const Mat& dy) {
  Mat dx(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) dx.data()[i] = x.data()[i] > 0.0 ? dy.data()[i] : 0.0;
  return dx;
}

Mat sigmoid(const Mat& x) {
  return map(x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}
Mat tanh(const Mat& x) {
  return map(x, [](double v) { return std::tanh(v); });
}
Mat exp(const Mat& x) {
  return map(x, [](double v) { return std::exp(v); });
}

// --- dense ---

Dense Dense::create(ParamStore& store, const std::string& name, Eigen::Index in, Eigen::Index out) {
  Dense d;
  d.in = in;
  d.out = out;
  d.weight = store.add(name + ".weight", out, in);
  d.bias = store.add(name + ".bias", out, 1);
  return d;
}

Mat Dense::forward(const ParamStore& store, const Mat& x) const {
  if (x.rows() != in)
    throw std::invalid_argument("dense layer expects input dimension " + std::to_string(in) + ", got " +
                                std::to_string(x.rows()));
  Mat y;
  kernels::affine(store[weight].value, store[bias].value.col(0), x, y);
  return y;
}

Mat Dense::backward(ParamStore& store, const Mat& x, const Mat& dy) const {
  kernels::accumulate_outer(dy, x, store[weight].grad);
  kernels::accumulate_rowsum(dy, store[bias].grad.col(0));
  Mat dx;
  kernels::matmul_tn(store[weight].value, dy, dx);
  return dx;
}

// --- mlp ---

Mlp Mlp::create(ParamStore& store, const std::string& name, const std::vector<Eigen::Index>& sizes) {
  if (sizes.size() < 2) throw std::invalid_argument("mlp needs at least input and output sizes");
  Mlp m;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i)
    m.layers.push_back(Dense::create(store, name + ".l" + std::to_string(i), sizes[i], sizes[i + 1]));
  return m;
}

Mat Mlp::forward(const ParamStore& store, const Mat& x, MlpCache* cache) const {
  if (cache) {
    cache->inputs.clear();
    cache->pre.clear();
  }
  Mat h = x;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Mat a = layers[l].forward(store, h);
    if (cache) cache->inputs.push_back(std::move(h));
    if (l + 1 == layers.size()) return a;
    h = relu(a);
    if (cache) cache->pre.push_back(std::move(a));
  }
  return h;
}

Mat Mlp::backward(ParamStore& store, const MlpCache& cache, const Mat& dy) const {
  Mat d = dy;
  for (std::size_t l = layers.size(); l-- > 0;) {
    Mat dx = layers[l].backward(store, cache.inputs[l], d);
    d = l > 0 ? relu_backward(cache.pre[l - 1], dx) : std::move(dx);
  }
  return d;
}

// --- gru ---

GruCell GruCell::create(ParamStore& store, const std::string& name, Eigen::Index in, Eigen::Index hidden) {
  GruCell c;
  c.in = in;
  c.hidden = hidden;
  c.w_x = store.add(name + ".w_x", 3 * hidden, in);
  c.w_h = store.add(name + ".w_h", 3 * hidden, hidden);
  c.b_x = store.add(name + ".b_x", 3 * hidden, 1);
  c.b_h = store.add(name + ".b_h", 3 * hidden, 1);
  return c;
}

Mat GruCell::step(const ParamStore& store, const Mat& h, const Mat& x, StepCache* cache) const {
  if (x.rows() != in || h.rows() != hidden || x.cols() != h.cols())
    throw std::invalid_argument("gru step: shape mismatch");
  const Eigen::Index H = hidden;
  Mat gx, gh;
  kernels::affine(store[w_x].value, store[b_x].value.col(0), x, gx);
  kernels::affine(store[w_h].value, store[b_h].value.col(0), h, gh);
  Mat z = sigmoid(gx.topRows(H) + gh.topRows(H));
  Mat r = sigmoid(gx.middleRows(H, H) + gh.middleRows(H, H));
  Mat hn = gh.bottomRows(H);
  Mat n = tanh(gx.bottomRows(H) + r.cwiseProduct(hn));
  Mat out = ((1.0 - z.array()) * h.array() + z.array() * n.array()).matrix();
  if (cache) {
    cache->x = x;
    cache->h = h;
    cache->z = std::move(z);
    cache->r = std::move(r);
    cache->n = std::move(n);
    cache->hn = std::move(hn);
  }
  return out;
}

Mat GruCell::backward(ParamStore& store, const StepCache& c, const Mat& dh_next, Mat* dx) const {
  const Eigen::Index H = hidden;
  const Eigen::Index B = dh_next.cols();
  const auto z = c.z.array();
  const auto r = c.r.array();
  const auto n = c.n.array();
  const auto dh = dh_next.array();

  const Eigen::ArrayXXd dn_pre = dh * z * (1.0 - n * n);
  const Eigen::ArrayXXd dz_pre = dh * (n - c.h.array()) * z * (1.0 - z);
  const Eigen::ArrayXXd dr_pre = dn_pre * c.hn.array() * r * (1.0 - r);

  Mat gx(3 * H, B), gh(3 * H, B);
  gx.topRows(H) = dz_pre.matrix();
  gx.middleRows(H, H) = dr_pre.matrix();
  gx.bottomRows(H) = dn_pre.matrix();
  gh.topRows(H) = dz_pre.matrix();
  gh.middleRows(H, H) = dr_pre.matrix();
  gh.bottomRows(H) = (dn_pre * r).matrix();

  kernels::accumulate_outer(gx, c.x, store[w_x].grad);
  kernels::accumulate_rowsum(gx, store[b_x].grad.col(0));
  kernels::accumulate_outer(gh, c.h, store[w_h].grad);
  kernels::accumulate_rowsum(gh, store[b_h].grad.col(0));

  if (dx) kernels::matmul_tn(store[w_x].value, gx, *dx);
  Mat dh_prev;
  kernels::matmul_tn(store[w_h].value, gh, dh_prev);
  dh_prev.array() += dh * (1.0 - z);
  return dh_prev;
}

// --- gaussian ---

GaussianHead split_gaussian(const Mat& raw) {
  if (raw.rows() % 2 != 0) throw std::invalid_argument("gaussian head needs an even number of rows");
  const Eigen::Index L = raw.rows() / 2;
  GaussianHead g;
  g.mu = raw.topRows(L);
  g.raw_log_sigma = raw.bottomRows(L);
  if (g_probe != nullptr)
    for (Eigen::Index i = 0; i < g.raw_log_sigma.size(); ++i) {
      const double v = g.raw_log_sigma.data()[i];
      KinkProbe::record(v < kLogSigmaMin);
      KinkProbe::record(v > kLogSigmaMax);
    }
  g.log_sigma = g.raw_log_sigma.cwiseMax(kLogSigmaMin).cwiseMin(kLogSigmaMax);
  return g;
}

Mat join_gaussian_grad(const GaussianHead& head, const Mat& dmu, const Mat& dlog_sigma) {
  const Eigen::Index L = head.mu.rows();
  Mat d(2 * L, head.mu.cols());
  d.topRows(L) = dmu;
  for (Eigen::Index j = 0; j < d.cols(); ++j)
    for (Eigen::Index i = 0; i < L; ++i) {
      const double v = head.raw_log_sigma(i, j);
      d(L + i, j) = (v >= kLogSigmaMin && v <= kLogSigmaMax) ? dlog_sigma(i, j) : 0.0;
    }
  return d;
}

Mat reparam(const GaussianHead& head, const Mat& eps) {
  if (eps.rows() != head.mu.rows() || eps.cols() != head.mu.cols())
    throw std::invalid_argument("reparam: noise shape mismatch");
  return (head.mu.array() + exp(head.log_sigma).array() * eps.array()).matrix();
}

Mat reparam_sample(const GaussianHead& head, Rng& rng, Mat* eps_out) {
  Mat eps = standard_normal(head.mu.rows(), head.mu.cols(), rng);
  Mat z = reparam(head, eps);
  if (eps_out) *eps_out = std::move(eps);
  return z;
}

Vec kl_to_standard_normal(const GaussianHead& head) {
  Vec kl(head.mu.cols());
  for (Eigen::Index j = 0; j < head.mu.cols(); ++j) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < head.mu.rows(); ++i) {
      const double m = head.mu(i, j);
      const double ls = head.log_sigma(i, j);
      acc += 0.5 * (m * m + std::exp(2.0 * ls) - 1.0 - 2.0 * ls);
    }
    kl[j] = acc;
  }
  return kl;
}

// --- adam ---

void adam_step(ParamStore& store, const AdamConfig& cfg) {
  store.set_step(store.step() + 1);
  const double t = static_cast<double>(store.step());
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < store.size(); ++i) {
    Param& p = store[i];
    if ((p.grad.array() == 0.0).all()) continue;
    double* v = p.value.data();
    double* g = p.grad.data();
    double* m1 = p.m1.data();
    double* m2 = p.m2.data();
    for (Eigen::Index k = 0; k < p.value.size(); ++k) {
      m1[k] = cfg.beta1 * m1[k] + (1.0 - cfg.beta1) * g[k];
      m2[k] = cfg.beta2 * m2[k] + (1.0 - cfg.beta2) * g[k] * g[k];
      const double mhat = m1[k] / c1;
      const double vhat = m2[k] / c2;
      v[k] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
  store.zero_grad();
}

}  // namespace iris::nn
