#include "actseg/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "actseg/error.hpp"

namespace actseg {

std::size_t shape_size(std::span<const std::size_t> shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

ParamArray::ParamArray(std::string n, std::vector<std::size_t> s)
    : name(std::move(n)), shape(std::move(s)) {
  const std::size_t count = shape_size(shape);
  values.assign(count, 0.0);
  grad.assign(count, 0.0);
}

void ParamArray::zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }

void ParamArray::check_finite() const {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw NumericError("non-finite value in parameter '" + name + "' at index " +
                         std::to_string(i));
    }
  }
}

}  // namespace actseg
