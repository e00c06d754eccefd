#include "actseg/optim.hpp"

#include <cmath>
#include <string>

#include "actseg/error.hpp"

namespace actseg {

void adam_step(std::span<ParamArray* const> params, OptimizerState& opt) {
  const AdamConfig& c = opt.config;
  if (!(c.learning_rate >= 0.0) || !(c.beta1 >= 0.0 && c.beta1 < 1.0) ||
      !(c.beta2 >= 0.0 && c.beta2 < 1.0) || !(c.epsilon > 0.0)) {
    throw ParameterError("invalid Adam hyperparameters");
  }
  for (const ParamArray* p : params) {
    for (std::size_t i = 0; i < p->grad.size(); ++i) {
      if (!std::isfinite(p->grad[i])) {
        throw NumericError("non-finite gradient in parameter '" + p->name + "' at index " +
                           std::to_string(i));
      }
    }
  }
  if (opt.first_moment.empty() && opt.step == 0) {
    for (const ParamArray* p : params) {
      opt.first_moment.emplace_back(p->size(), 0.0);
      opt.second_moment.emplace_back(p->size(), 0.0);
    }
  }
  if (opt.first_moment.size() != params.size()) {
    throw DimensionError("optimizer state tracks " + std::to_string(opt.first_moment.size()) +
                         " parameters, got " + std::to_string(params.size()));
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (opt.first_moment[k].size() != params[k]->size()) {
      throw DimensionError("optimizer moment shape mismatch for '" + params[k]->name + "'");
    }
  }

  ++opt.step;
  const double t = static_cast<double>(opt.step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    ParamArray& p = *params[k];
    auto& m = opt.first_moment[k];
    auto& v = opt.second_moment[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double g = p.grad[i];
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p.values[i] -= c.learning_rate * mhat / (std::sqrt(vhat) + c.epsilon);
    }
    p.zero_grad();
  }
}

}  // namespace actseg
