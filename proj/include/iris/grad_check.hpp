#pragma once

#include "iris/nn.hpp"

#include <functional>
#include <string>
#include <vector>

namespace iris::nn {

/// Evaluates the loss at the store's current values. When `with_grad` is
/// true it must also accumulate dLoss/dparam into the store's gradients.
/// Any sampling noise must be frozen so repeated calls are deterministic.
using LossFn = std::function<double(ParamStore& store, bool with_grad)>;

struct GradCheckOptions {
  double h = 1e-4;
  double tolerance = 1e-4;
  /// Gradients smaller than this are compared against it instead of their
  /// own magnitude.
  double abs_floor = 1e-6;
  /// 0 checks every coordinate; otherwise a seeded random subset per tensor.
  std::size_t coords_per_param = 0;
  std::uint64_t seed = 0;
};

struct GradCheckFailure {
  std::string param;
  Eigen::Index index;
  double analytic;
  double numeric;
  double rel_error;
};

struct GradCheckReport {
  std::size_t checked = 0;
  /// Coordinates whose +-h perturbation switched a ReLU or clamp; central
  /// differences are not valid there.
  std::size_t skipped_kinks = 0;
  double max_rel_error = 0.0;
  std::vector<GradCheckFailure> failures;

  bool ok() const { return failures.empty(); }
};

GradCheckReport grad_check(ParamStore& store, const LossFn& loss, const GradCheckOptions& options = {});

}  // namespace iris::nn
