#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>

#include "actseg/tensor.hpp"

namespace actseg {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
};

/// Compares analytic gradients against central differences.
///
/// `loss_and_grad` must return the loss at the current parameter values and
/// accumulate analytic gradients into each ParamArray::grad; it is called once
/// for the analytic pass and twice per parameter entry for the numeric pass
/// (gradients are zeroed before every call). Anything stochastic inside it must
/// be reseeded on each call.
///
/// Error per entry is |analytic - numeric| / max(1, |numeric|). Throws
/// ParameterError for epsilon outside [1e-6, 1e-3] and VerificationError if the
/// loss is not reproducible at the unperturbed point.
GradCheckReport finite_diff_check(const std::function<double()>& loss_and_grad,
                                  std::span<ParamArray* const> params, double epsilon = 1e-5);

}  // namespace actseg
