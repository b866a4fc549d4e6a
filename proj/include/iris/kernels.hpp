#pragma once

#include "iris/common.hpp"

namespace iris::kernels {

// Dense products used by every layer. Each output column is produced with
// the same sequence of floating-point operations no matter how many
// columns are in the batch or how many threads run, so a sample's result
// never depends on the other samples it is batched with. Columns are split
// across OpenMP threads.

/// Y = W * X + b (b broadcast over columns).
void affine(const Mat& W, const Eigen::Ref<const Vec>& b, const Mat& X, Mat& Y);

/// Y = W * X
void matmul(const Mat& W, const Mat& X, Mat& Y);

/// dX = W^T * dY
void matmul_tn(const Mat& W, const Mat& dY, Mat& dX);

/// dW += dY * X^T, summed over columns in ascending order. Threads split the
/// columns of dW.
void accumulate_outer(const Mat& dY, const Mat& X, Mat& dW);

/// db += row sums of dY.
void accumulate_rowsum(const Mat& dY, Eigen::Ref<Vec> db);

/// Overrides the OpenMP thread count used by the kernels (0 = runtime
/// default). Returns the previous setting.
int set_threads(int n);
int threads();

}  // namespace iris::kernels
