#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "actseg/tensor.hpp"

namespace actseg {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam moments for an ordered parameter set. The moment vectors are sized on
/// the first step and must keep matching the parameter shapes afterwards.
struct OptimizerState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
};

/// One bias-corrected Adam update. Zeroes the gradients afterwards.
/// Throws NumericError naming the parameter on a non-finite gradient, in which
/// case no parameter is modified.
void adam_step(std::span<ParamArray* const> params, OptimizerState& opt);

}  // namespace actseg
