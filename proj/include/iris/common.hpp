#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace iris {

using Rng = std::mt19937_64;

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using VecF = Eigen::VectorXf;
using MatF = Eigen::MatrixXf;

/// Raised when a file does not match the expected binary layout.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent stream for (seed, stream id); used so that each model and
/// each episode owns its own generator.
inline Rng derive_rng(std::uint64_t seed, std::uint64_t stream) {
  return Rng(splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x51ed270b27u)));
}

/// Uniform on [0, 1) from the top 53 bits of one draw.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0); }

/// One standard normal draw from exactly two 53-bit uniforms (Box-Muller,
/// cosine branch). Stateless, unlike std::normal_distribution, so any split
/// of a sequence of draws across calls consumes the generator identically.
inline double standard_normal(Rng& rng) {
  constexpr double kScale = 1.0 / 9007199254740992.0;  // 2^-53
  const double u1 = (static_cast<double>(rng() >> 11) + 1.0) * kScale;  // (0, 1]
  const double u2 = static_cast<double>(rng() >> 11) * kScale;          // [0, 1)
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

/// Fills a matrix with i.i.d. standard normal draws in column-major order.
inline void fill_standard_normal(Mat& m, Rng& rng) {
  double* p = m.data();
  for (Eigen::Index i = 0; i < m.size(); ++i) p[i] = standard_normal(rng);
}

inline Mat standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Mat m(rows, cols);
  fill_standard_normal(m, rng);
  return m;
}

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace iris
