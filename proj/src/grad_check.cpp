#include "iris/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace iris::nn {

GradCheckReport grad_check(ParamStore& store, const LossFn& loss, const GradCheckOptions& options) {
  GradCheckReport report;
  Rng rng(options.seed);

  store.zero_grad();
  std::uint64_t base_signature = 0;
  {
    KinkProbe probe;
    loss(store, true);
    base_signature = probe.signature();
  }
  std::vector<Mat> analytic;
  analytic.reserve(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) analytic.push_back(store[i].grad);
  store.zero_grad();

  auto eval_at = [&](double& slot, double value, std::uint64_t& signature) {
    const double saved = slot;
    slot = value;
    KinkProbe probe;
    const double f = loss(store, false);
    signature = probe.signature();
    slot = saved;
    return f;
  };

  for (std::size_t p = 0; p < store.size(); ++p) {
    const Eigen::Index n = store[p].value.size();
    std::vector<Eigen::Index> coords(static_cast<std::size_t>(n));
    std::iota(coords.begin(), coords.end(), 0);
    if (options.coords_per_param > 0 && coords.size() > options.coords_per_param) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(options.coords_per_param);
      std::sort(coords.begin(), coords.end());
    }
    for (Eigen::Index idx : coords) {
      double& slot = store[p].value.data()[idx];
      const double x = slot;
      std::uint64_t sig_plus = 0, sig_minus = 0;
      const double f_plus = eval_at(slot, x + options.h, sig_plus);
      const double f_minus = eval_at(slot, x - options.h, sig_minus);
      if (sig_plus != base_signature || sig_minus != base_signature) {
        ++report.skipped_kinks;
        continue;
      }
      const double numeric = (f_plus - f_minus) / (2.0 * options.h);
      const double a = analytic[p].data()[idx];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.abs_floor});
      const double rel = std::abs(a - numeric) / denom;
      ++report.checked;
      report.max_rel_error = std::max(report.max_rel_error, rel);
      if (!(rel < options.tolerance)) report.failures.push_back({store[p].name, idx, a, numeric, rel});
    }
  }
  store.zero_grad();
  return report;
}

}  // namespace iris::nn
