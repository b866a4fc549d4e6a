#include "iris/kernels.hpp"
#include "iris/reference.hpp"

#include <gtest/gtest.h>

using namespace iris;

namespace {

struct ThreadGuard {
  int previous;
  explicit ThreadGuard(int n) : previous(kernels::set_threads(n)) {}
  ~ThreadGuard() { kernels::set_threads(previous); }
};

// Sizes that exercise the full and partial register tiles.
const std::vector<std::array<Eigen::Index, 3>> kShapes = {{1, 1, 1}, {3, 5, 2}, {16, 16, 4}, {17, 9, 7}, {64, 66, 33}, {35, 3, 130}};

}  // namespace

TEST(Kernels, AffineMatchesSerialReferenceBitExact) {
  Rng rng(1);
  for (const auto& [rows, inner, cols] : kShapes) {
    const Mat W = standard_normal(rows, inner, rng);
    const Vec b = standard_normal(rows, 1, rng);
    const Mat X = standard_normal(inner, cols, rng);
    Mat Y;
    kernels::affine(W, b, X, Y);
    EXPECT_EQ(Y, reference::affine(W, b, X)) << rows << "x" << inner << "x" << cols;
    Mat Z;
    kernels::matmul(W, X, Z);
    EXPECT_EQ(Z, reference::affine(W, Vec::Zero(rows), X));
  }
}

TEST(Kernels, BackwardKernelsMatchSerialReferenceBitExact) {
  Rng rng(2);
  for (const auto& [rows, inner, cols] : kShapes) {
    const Mat W = standard_normal(rows, inner, rng);
    const Mat dY = standard_normal(rows, cols, rng);
    const Mat X = standard_normal(inner, cols, rng);
    Mat dX;
    kernels::matmul_tn(W, dY, dX);
    EXPECT_EQ(dX, reference::matmul_tn(W, dY));
    Mat dW = standard_normal(rows, inner, rng);
    Mat dW_ref = dW;
    kernels::accumulate_outer(dY, X, dW);
    reference::accumulate_outer(dY, X, dW_ref);
    EXPECT_EQ(dW, dW_ref);
    Vec db = Vec::Ones(rows), db_ref = Vec::Ones(rows);
    kernels::accumulate_rowsum(dY, db);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index j = 0; j < cols; ++j) db_ref[r] += dY(r, j);
    EXPECT_EQ(db, db_ref);
  }
}

TEST(Kernels, ThreadCountDoesNotChangeResults) {
  Rng rng(3);
  const Mat W = standard_normal(40, 30, rng);
  const Vec b = standard_normal(40, 1, rng);
  const Mat X = standard_normal(30, 257, rng);
  const Mat dY = standard_normal(40, 257, rng);
  Mat y1, y4, dx1, dx4, dw1 = Mat::Zero(40, 30), dw4 = Mat::Zero(40, 30);
  {
    ThreadGuard g(1);
    kernels::affine(W, b, X, y1);
    kernels::matmul_tn(W, dY, dx1);
    kernels::accumulate_outer(dY, X, dw1);
  }
  {
    ThreadGuard g(4);
    EXPECT_EQ(kernels::threads(), 4);
    kernels::affine(W, b, X, y4);
    kernels::matmul_tn(W, dY, dx4);
    kernels::accumulate_outer(dY, X, dw4);
  }
  EXPECT_EQ(y1, y4);
  EXPECT_EQ(dx1, dx4);
  EXPECT_EQ(dw1, dw4);
}

TEST(Kernels, ColumnResultIndependentOfBatch) {
  Rng rng(4);
  const Mat W = standard_normal(21, 13, rng);
  const Vec b = standard_normal(21, 1, rng);
  const Mat X = standard_normal(13, 50, rng);
  Mat Y;
  kernels::affine(W, b, X, Y);
  for (Eigen::Index j : {0, 7, 31, 49}) {
    Mat y;
    kernels::affine(W, b, X.col(j), y);
    EXPECT_EQ(y.col(0), Y.col(j));
    Mat dx_all, dx_one;
    kernels::matmul_tn(W.transpose(), X, dx_all);
    kernels::matmul_tn(W.transpose(), X.col(j), dx_one);
    EXPECT_EQ(dx_one.col(0), dx_all.col(j));
  }
}

TEST(Kernels, ShapeMismatchThrows) {
  Mat Y;
  EXPECT_THROW(kernels::affine(Mat::Zero(2, 3), Vec::Zero(2), Mat::Zero(4, 1), Y), std::invalid_argument);
  EXPECT_THROW(kernels::matmul(Mat::Zero(2, 3), Mat::Zero(4, 1), Y), std::invalid_argument);
}
