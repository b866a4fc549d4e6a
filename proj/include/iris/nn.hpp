#pragma once

#include "iris/common.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace iris::nn {

/// A named parameter tensor with its gradient and Adam moment buffers.
/// Vectors are stored as single-column matrices.
struct Param {
  std::string name;
  Mat value;
  Mat grad;
  Mat m1;
  Mat m2;
};

class ParamStore {
 public:
  /// Adds a zero-initialized parameter and returns its index.
  std::size_t add(std::string name, Eigen::Index rows, Eigen::Index cols);

  Param& operator[](std::size_t i) { return params_[i]; }
  const Param& operator[](std::size_t i) const { return params_[i]; }
  std::size_t size() const { return params_.size(); }
  const std::vector<Param>& params() const { return params_; }

  /// Index of the parameter with this name; throws std::out_of_range.
  std::size_t find(const std::string& name) const;

  Eigen::Index parameter_count() const;

  void zero_grad();
  /// Copies values (not gradients or moments) from a store of identical
  /// layout.
  void copy_values_from(const ParamStore& other);

  std::int64_t step() const { return step_; }
  void set_step(std::int64_t s) { step_ = s; }

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for matrices whose column
  /// count is the fan-in; biases (single-column parameters) stay zero.
  void init_fan_in(Rng& rng);

 private:
  std::vector<Param> params_;
  std::int64_t step_ = 0;
};

/// Records the on/off pattern of every piecewise-linear unit evaluated on
/// the current thread while installed. Finite-difference checks use it to
/// detect perturbations that cross a kink.
class KinkProbe {
 public:
  KinkProbe();
  ~KinkProbe();
  KinkProbe(const KinkProbe&) = delete;
  KinkProbe& operator=(const KinkProbe&) = delete;

  std::uint64_t signature() const { return hash_; }
  static void record(bool active);

 private:
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
  KinkProbe* previous_;
};

// --- elementwise activations (scalar std functions, batch-invariant) ---

Mat relu(const Mat& x);
/// dL/dx given dL/dy and the pre-activation x.
Mat relu_backward(const Mat& x, const Mat& dy);
Mat sigmoid(const Mat& x);
Mat tanh(const Mat& x);
Mat exp(const Mat& x);

/// Fully connected layer y = W x + b on column batches.
struct Dense {
  std::size_t weight = 0;
  std::size_t bias = 0;
  Eigen::Index in = 0;
  Eigen::Index out = 0;

  static Dense create(ParamStore& store, const std::string& name, Eigen::Index in, Eigen::Index out);

  Mat forward(const ParamStore& store, const Mat& x) const;
  /// Accumulates parameter gradients and returns dL/dx.
  Mat backward(ParamStore& store, const Mat& x, const Mat& dy) const;
};

struct MlpCache {
  std::vector<Mat> inputs;  // input to each layer (post-activation of the previous one)
  std::vector<Mat> pre;     // pre-activation of each hidden layer
};

/// Dense layers with ReLU between them and a linear output.
struct Mlp {
  std::vector<Dense> layers;

  static Mlp create(ParamStore& store, const std::string& name, const std::vector<Eigen::Index>& sizes);

  Eigen::Index in_dim() const { return layers.front().in; }
  Eigen::Index out_dim() const { return layers.back().out; }

  Mat forward(const ParamStore& store, const Mat& x, MlpCache* cache = nullptr) const;
  Mat backward(ParamStore& store, const MlpCache& cache, const Mat& dy) const;
};

/// Single-layer gated recurrent cell, gate rows [update; reset; candidate]:
///   h' = (1 - z) * h + z * n.
struct GruCell {
  std::size_t w_x = 0, w_h = 0, b_x = 0, b_h = 0;
  Eigen::Index in = 0;
  Eigen::Index hidden = 0;

  struct StepCache {
    Mat x, h, z, r, n, hn;
  };

  static GruCell create(ParamStore& store, const std::string& name, Eigen::Index in, Eigen::Index hidden);

  Mat step(const ParamStore& store, const Mat& h, const Mat& x, StepCache* cache = nullptr) const;
  /// Backpropagates dL/dh' through one step. Accumulates parameter
  /// gradients, writes dL/dx to *dx when given, and returns dL/dh.
  Mat backward(ParamStore& store, const StepCache& cache, const Mat& dh_next, Mat* dx = nullptr) const;
};

inline constexpr double kLogSigmaMin = -5.0;
inline constexpr double kLogSigmaMax = 2.0;

/// Diagonal Gaussian per column.
struct GaussianHead {
  Mat mu;
  Mat log_sigma;      // clamped to [kLogSigmaMin, kLogSigmaMax]
  Mat raw_log_sigma;  // pre-clamp output of the encoder
};

/// Splits a (2 * latent) x B encoder output into mean and clamped
/// log-sigma rows.
GaussianHead split_gaussian(const Mat& raw);
/// Gradient of the pre-split encoder output given gradients w.r.t. mu and
/// the clamped log sigma (zero outside the clamp range).
Mat join_gaussian_grad(const GaussianHead& head, const Mat& dmu, const Mat& dlog_sigma);

/// z = mu + sigma * eps
Mat reparam(const GaussianHead& head, const Mat& eps);
/// Draws eps ~ N(0, I) from rng, then applies reparam.
Mat reparam_sample(const GaussianHead& head, Rng& rng, Mat* eps_out = nullptr);

/// Closed-form KL(N(mu, sigma) || N(0, I)) for each column.
Vec kl_to_standard_normal(const GaussianHead& head);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam update followed by zeroing of all gradients. A
/// tensor whose gradient is entirely zero is left untouched (values and
/// moments), so an all-zero gradient is a no-op apart from the step count.
void adam_step(ParamStore& store, const AdamConfig& cfg);

}  // namespace iris::nn
