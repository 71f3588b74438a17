#include "dgnet/grad_check.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "dgnet/rng.h"

namespace dgnet {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

GradCheckResult grad_check(const std::function<Tensor()>& loss_fn,
                           std::span<const NamedTensor> params,
                           const GradCheckOptions& options) {
  for (const NamedTensor& p : params) {
    Tensor t = p.tensor;
    if (t.requires_grad()) t.zero_grad();
  }
  loss_fn().backward();

  GradCheckResult result;
  Rng rng(options.seed);
  for (const NamedTensor& p : params) {
    Tensor t = p.tensor;
    if (!t.requires_grad()) continue;
    const std::vector<float> analytic(t.grad().begin(), t.grad().end());

    std::vector<std::int64_t> indices(static_cast<std::size_t>(t.numel()));
    std::iota(indices.begin(), indices.end(), 0);
    if (options.samples_per_tensor > 0 &&
        options.samples_per_tensor < t.numel()) {
      Rng pick = rng.split(p.name);
      for (std::int64_t i = 0; i < options.samples_per_tensor; ++i) {
        const auto j = i + static_cast<std::int64_t>(
                               pick.uniform_int(static_cast<std::uint64_t>(t.numel() - i)));
        std::swap(indices[i], indices[j]);
      }
      indices.resize(static_cast<std::size_t>(options.samples_per_tensor));
    }

    for (std::int64_t idx : indices) {
      float& slot = t.mutable_data()[idx];
      const float original = slot;
      const float plus = static_cast<float>(original + options.step);
      const float minus = static_cast<float>(original - options.step);
      slot = plus;
      const double f_plus = loss_fn().item();
      slot = minus;
      const double f_minus = loss_fn().item();
      slot = original;
      // Divide by the step actually taken after rounding to float.
      const double numeric = (f_plus - f_minus) /
                             (static_cast<double>(plus) - static_cast<double>(minus));
      const double a = analytic[idx];
      const double err = relative_error(a, numeric);
      ++result.checked;
      if (err > result.max_rel_error || result.worst_index < 0) {
        result.max_rel_error = err;
        result.worst_tensor = p.name;
        result.worst_index = idx;
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace dgnet
