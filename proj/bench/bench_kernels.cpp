// Parallel kernels against the serial reference loops.
// Args: rows, inner, columns (and threads for the parallel versions).

#include "iris/kernels.hpp"
#include "iris/reference.hpp"
#include "iris/common.hpp"

#include <benchmark/benchmark.h>

using namespace iris;

namespace {

struct Operands {
  Mat W, X, dY;
  Vec b;
  Operands(Eigen::Index rows, Eigen::Index inner, Eigen::Index cols) {
    Rng rng(1);
    W = standard_normal(rows, inner, rng);
    X = standard_normal(inner, cols, rng);
    dY = standard_normal(rows, cols, rng);
    b = standard_normal(rows, 1, rng);
  }
};

void shapes(benchmark::internal::Benchmark* b, bool threaded) {
  // Hidden-layer and gated-layer shapes at one batch and at a full unroll.
  for (long cols : {128L, 1280L})
    for (auto [rows, inner] : {std::pair{64L, 64L}, std::pair{192L, 64L}}) {
      if (threaded)
        for (long t : {1L, 2L, 4L}) b->Args({rows, inner, cols, t});
      else
        b->Args({rows, inner, cols});
    }
}
void parallel_shapes(benchmark::internal::Benchmark* b) { shapes(b, true); }
void serial_shapes(benchmark::internal::Benchmark* b) { shapes(b, false); }

void set_counters(benchmark::State& st) {
  st.counters["flops"] = benchmark::Counter(2.0 * st.range(0) * st.range(1) * st.range(2), benchmark::Counter::kIsIterationInvariantRate);
}

void BM_affine(benchmark::State& st) {
  Operands o(st.range(0), st.range(1), st.range(2));
  const int prev = kernels::set_threads(static_cast<int>(st.range(3)));
  Mat Y;
  for (auto _ : st) {
    kernels::affine(o.W, o.b, o.X, Y);
    benchmark::DoNotOptimize(Y.data());
  }
  kernels::set_threads(prev);
  set_counters(st);
}

void BM_affine_reference(benchmark::State& st) {
  Operands o(st.range(0), st.range(1), st.range(2));
  for (auto _ : st) {
    Mat Y = reference::affine(o.W, o.b, o.X);
    benchmark::DoNotOptimize(Y.data());
  }
  set_counters(st);
}

void BM_matmul_tn(benchmark::State& st) {
  Operands o(st.range(0), st.range(1), st.range(2));
  const int prev = kernels::set_threads(static_cast<int>(st.range(3)));
  Mat dX;
  for (auto _ : st) {
    kernels::matmul_tn(o.W, o.dY, dX);
    benchmark::DoNotOptimize(dX.data());
  }
  kernels::set_threads(prev);
  set_counters(st);
}

void BM_matmul_tn_reference(benchmark::State& st) {
  Operands o(st.range(0), st.range(1), st.range(2));
  for (auto _ : st) {
    Mat dX = reference::matmul_tn(o.W, o.dY);
    benchmark::DoNotOptimize(dX.data());
  }
  set_counters(st);
}

void BM_accumulate_outer(benchmark::State& st) {
  Operands o(st.range(0), st.range(1), st.range(2));
  const int prev = kernels::set_threads(static_cast<int>(st.range(3)));
  Mat dW = Mat::Zero(o.W.rows(), o.W.cols());
  for (auto _ : st) {
    kernels::accumulate_outer(o.dY, o.X, dW);
    benchmark::DoNotOptimize(dW.data());
  }
  kernels::set_threads(prev);
  set_counters(st);
}

void BM_accumulate_outer_reference(benchmark::State& st) {
  Operands o(st.range(0), st.range(1), st.range(2));
  Mat dW = Mat::Zero(o.W.rows(), o.W.cols());
  for (auto _ : st) {
    reference::accumulate_outer(o.dY, o.X, dW);
    benchmark::DoNotOptimize(dW.data());
  }
  set_counters(st);
}

}  // namespace

BENCHMARK(BM_affine)->Apply(parallel_shapes)->UseRealTime()->ArgNames({"rows", "inner", "cols", "threads"});
BENCHMARK(BM_affine_reference)->Apply(serial_shapes)->UseRealTime()->ArgNames({"rows", "inner", "cols"});
BENCHMARK(BM_matmul_tn)->Apply(parallel_shapes)->UseRealTime()->ArgNames({"rows", "inner", "cols", "threads"});
BENCHMARK(BM_matmul_tn_reference)->Apply(serial_shapes)->UseRealTime()->ArgNames({"rows", "inner", "cols"});
BENCHMARK(BM_accumulate_outer)->Apply(parallel_shapes)->UseRealTime()->ArgNames({"rows", "inner", "cols", "threads"});
BENCHMARK(BM_accumulate_outer_reference)->Apply(serial_shapes)->UseRealTime()->ArgNames({"rows", "inner", "cols"});

BENCHMARK_MAIN();
