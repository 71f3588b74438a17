#ifndef DGNET_GRAD_CHECK_H_
#define DGNET_GRAD_CHECK_H_

#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include "dgnet/tensor.h"

namespace dgnet {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

struct GradCheckOptions {
  double step = 1e-3;
  // Entries checked per tensor; <= 0 checks every entry.
  std::int64_t samples_per_tensor = 0;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_tensor;
  std::int64_t worst_index = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::int64_t checked = 0;
};

// |a - n| / max(|a|, |n|, 1e-8)
double relative_error(double analytic, double numeric);

// Compares backward() against central differences of `loss_fn` for the
// entries of every parameter that requires grad. `loss_fn` must be a pure
// function of the parameter values (replay any randomness inside it).
GradCheckResult grad_check(const std::function<Tensor()>& loss_fn,
                           std::span<const NamedTensor> params,
                           const GradCheckOptions& options = {});

}  // namespace dgnet

#endif  // DGNET_GRAD_CHECK_H_
