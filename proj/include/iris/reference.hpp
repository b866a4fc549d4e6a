#pragma once

// Serial scalar implementations of the dense kernels and of the recurrent
// cell. They follow the same per-element accumulation order as the
// parallel kernels and exist for tests and benchmarks.

#include "iris/common.hpp"

#include <cmath>

namespace iris::reference {

inline Mat affine(const Mat& W, const Vec& b, const Mat& X) {
  Mat Y(W.rows(), X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j)
    for (Eigen::Index r = 0; r < W.rows(); ++r) {
      double acc = b[r];
      for (Eigen::Index k = 0; k < W.cols(); ++k) acc += W(r, k) * X(k, j);
      Y(r, j) = acc;
    }
  return Y;
}

inline Mat matmul_tn(const Mat& W, const Mat& dY) {
  Mat dX(W.cols(), dY.cols());
  for (Eigen::Index j = 0; j < dY.cols(); ++j)
    for (Eigen::Index i = 0; i < W.cols(); ++i) {
      double acc = 0.0;
      for (Eigen::Index r = 0; r < W.rows(); ++r) acc += W(r, i) * dY(r, j);
      dX(i, j) = acc;
    }
  return dX;
}

inline void accumulate_outer(const Mat& dY, const Mat& X, Mat& dW) {
  for (Eigen::Index k = 0; k < X.rows(); ++k)
    for (Eigen::Index r = 0; r < dY.rows(); ++r) {
      double acc = dW(r, k);
      for (Eigen::Index j = 0; j < dY.cols(); ++j) acc += dY(r, j) * X(k, j);
      dW(r, k) = acc;
    }
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Gated recurrent update with gate rows ordered [update; reset; candidate]:
///   z = sig(Wz x + bz_x + Uz h + bz_h), r = sig(...),
///   n = tanh(Wn x + bn_x + r * (Un h + bn_h)),  h' = (1 - z) h + z n.
inline Vec gru_step(const Mat& W_x, const Mat& W_h, const Vec& b_x, const Vec& b_h, const Vec& h,
                    const Vec& x) {
  const Eigen::Index H = h.size();
  Vec out(H);
  for (Eigen::Index i = 0; i < H; ++i) {
    double az = b_x[i], ar = b_x[H + i], an = b_x[2 * H + i];
    for (Eigen::Index k = 0; k < x.size(); ++k) {
      az += W_x(i, k) * x[k];
      ar += W_x(H + i, k) * x[k];
      an += W_x(2 * H + i, k) * x[k];
    }
    double hz = b_h[i], hr = b_h[H + i], hn = b_h[2 * H + i];
    for (Eigen::Index k = 0; k < H; ++k) {
      hz += W_h(i, k) * h[k];
      hr += W_h(H + i, k) * h[k];
      hn += W_h(2 * H + i, k) * h[k];
    }
    const double z = sigmoid(az + hz);
    const double r = sigmoid(ar + hr);
    const double n = std::tanh(an + r * hn);
    out[i] = (1.0 - z) * h[i] + z * n;
  }
  return out;
}

}  // namespace iris::reference
