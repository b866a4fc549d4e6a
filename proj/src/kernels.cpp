#include "iris/kernels.hpp"

#include <omp.h>

#include <atomic>

namespace iris::kernels {

namespace {

std::atomic<int> g_threads{0};

int active_threads() {
  const int n = g_threads.load(std::memory_order_relaxed);
  return n > 0 ? n : omp_get_max_threads();
}

// Below this many multiply-adds the fork/join cost dominates.
constexpr long kParallelWork = 1L << 15;

constexpr Eigen::Index kRowBlock = 16;

// y_c = init_c + sum_k A(:, k) * X(k, c) for the columns c in [j0, j1).
// Tiles of 16 rows x 4 columns stay in registers across the k loop; every
// path adds terms in ascending k, so each element sees the same operations.
void axpy_columns(const Mat& A, const double* init, const Mat& X, Mat& Y, Eigen::Index j0, Eigen::Index j1) {
  const Eigen::Index rows = A.rows();
  const Eigen::Index inner = A.cols();
  const Eigen::Index full_rows = rows - rows % kRowBlock;
  Eigen::Index j = j0;
  for (; j + 4 <= j1; j += 4) {
    const double* __restrict x = X.col(j).data();
    const Eigen::Index xs = X.outerStride();
    for (Eigen::Index r0 = 0; r0 < full_rows; r0 += kRowBlock) {
      double acc[4][kRowBlock];
      for (int c = 0; c < 4; ++c)
        for (Eigen::Index r = 0; r < kRowBlock; ++r) acc[c][r] = init ? init[r0 + r] : 0.0;
      for (Eigen::Index k = 0; k < inner; ++k) {
        const double* __restrict a = A.col(k).data() + r0;
        const double x0 = x[k], x1 = x[xs + k], x2 = x[2 * xs + k], x3 = x[3 * xs + k];
        for (Eigen::Index r = 0; r < kRowBlock; ++r) {
          const double ar = a[r];
          acc[0][r] += ar * x0;
          acc[1][r] += ar * x1;
          acc[2][r] += ar * x2;
          acc[3][r] += ar * x3;
        }
      }
      for (int c = 0; c < 4; ++c) {
        double* __restrict y = Y.col(j + c).data() + r0;
        for (Eigen::Index r = 0; r < kRowBlock; ++r) y[r] = acc[c][r];
      }
    }
    for (int c = 0; c < 4; ++c) {
      double* __restrict y = Y.col(j + c).data();
      const double* __restrict xc = X.col(j + c).data();
      for (Eigen::Index r = full_rows; r < rows; ++r) {
        double v = init ? init[r] : 0.0;
        for (Eigen::Index k = 0; k < inner; ++k) v += A(r, k) * xc[k];
        y[r] = v;
      }
    }
  }
  for (; j < j1; ++j) {
    double* __restrict y = Y.col(j).data();
    for (Eigen::Index r = 0; r < rows; ++r) y[r] = init ? init[r] : 0.0;
    for (Eigen::Index k = 0; k < inner; ++k) {
      const double* __restrict a = A.col(k).data();
      const double xk = X(k, j);
      for (Eigen::Index r = 0; r < rows; ++r) y[r] += a[r] * xk;
    }
  }
}

void columns_parallel(const Mat& A, const double* init, const Mat& X, Mat& Y) {
  const Eigen::Index cols = X.cols();
  const long work = static_cast<long>(A.rows()) * A.cols() * cols;
  const int nt = active_threads();
  if (nt <= 1 || work < kParallelWork || cols < 8) {
    axpy_columns(A, init, X, Y, 0, cols);
    return;
  }
  // Blocks of 4 columns keep the blocked path identical across splits.
  const Eigen::Index blocks = (cols + 3) / 4;
#pragma omp parallel for schedule(static) num_threads(nt)
  for (Eigen::Index blk = 0; blk < blocks; ++blk) {
    const Eigen::Index j0 = blk * 4;
    const Eigen::Index j1 = std::min<Eigen::Index>(j0 + 4, cols);
    axpy_columns(A, init, X, Y, j0, j1);
  }
}

}  // namespace

void affine(const Mat& W, const Eigen::Ref<const Vec>& b, const Mat& X, Mat& Y) {
  if (W.cols() != X.rows() || W.rows() != b.size())
    throw std::invalid_argument("affine: shape mismatch");
  Y.resize(W.rows(), X.cols());
  columns_parallel(W, b.data(), X, Y);
}

void matmul(const Mat& W, const Mat& X, Mat& Y) {
  if (W.cols() != X.rows()) throw std::invalid_argument("matmul: shape mismatch");
  Y.resize(W.rows(), X.cols());
  columns_parallel(W, nullptr, X, Y);
}

void matmul_tn(const Mat& W, const Mat& dY, Mat& dX) {
  if (W.rows() != dY.rows()) throw std::invalid_argument("matmul_tn: shape mismatch");
  const Mat Wt = W.transpose();
  dX.resize(W.cols(), dY.cols());
  columns_parallel(Wt, nullptr, dY, dX);
}

void accumulate_outer(const Mat& dY, const Mat& X, Mat& dW) {
  if (dY.cols() != X.cols() || dW.rows() != dY.rows() || dW.cols() != X.rows())
    throw std::invalid_argument("accumulate_outer: shape mismatch");
  const Eigen::Index rows = dY.rows();
  const Eigen::Index inner = dY.cols();
  const Eigen::Index outs = X.rows();
  const long work = static_cast<long>(rows) * inner * outs;
  const int nt = active_threads();
  // Column k of dW gathers dY(:, j) * X(k, j) for j ascending.
  auto column = [&](Eigen::Index k) {
    double* __restrict w = dW.col(k).data();
    const Eigen::Index full_rows = rows - rows % kRowBlock;
    for (Eigen::Index r0 = 0; r0 < full_rows; r0 += kRowBlock) {
      double acc[kRowBlock];
      for (Eigen::Index r = 0; r < kRowBlock; ++r) acc[r] = w[r0 + r];
      for (Eigen::Index j = 0; j < inner; ++j) {
        const double* __restrict g = dY.col(j).data() + r0;
        const double xk = X(k, j);
        for (Eigen::Index r = 0; r < kRowBlock; ++r) acc[r] += g[r] * xk;
      }
      for (Eigen::Index r = 0; r < kRowBlock; ++r) w[r0 + r] = acc[r];
    }
    for (Eigen::Index j = 0; j < inner; ++j) {
      const double* __restrict g = dY.col(j).data();
      const double xk = X(k, j);
      for (Eigen::Index r = full_rows; r < rows; ++r) w[r] += g[r] * xk;
    }
  };
  if (nt <= 1 || work < kParallelWork) {
    for (Eigen::Index k = 0; k < outs; ++k) column(k);
    return;
  }
#pragma omp parallel for schedule(static) num_threads(nt)
  for (Eigen::Index k = 0; k < outs; ++k) column(k);
}

void accumulate_rowsum(const Mat& dY, Eigen::Ref<Vec> db) {
  if (db.size() != dY.rows()) throw std::invalid_argument("accumulate_rowsum: shape mismatch");
  for (Eigen::Index j = 0; j < dY.cols(); ++j)
    for (Eigen::Index r = 0; r < dY.rows(); ++r) db[r] += dY(r, j);
}

int set_threads(int n) { return g_threads.exchange(n < 0 ? 0 : n); }

int threads() { return active_threads(); }

}  // namespace iris::kernels
