#include "actseg/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "actseg/error.hpp"

namespace actseg {

namespace {

void zero_all(std::span<ParamArray* const> params) {
  for (ParamArray* p : params) p->zero_grad();
}

}  // namespace

GradCheckReport finite_diff_check(const std::function<double()>& loss_and_grad,
                                  std::span<ParamArray* const> params, double epsilon) {
  if (!(epsilon >= 1e-6 && epsilon <= 1e-3)) {
    throw ParameterError("finite-difference epsilon must lie in [1e-6, 1e-3]");
  }
  zero_all(params);
  const double base = loss_and_grad();
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const ParamArray* p : params) analytic.push_back(p->grad);

  zero_all(params);
  const double again = loss_and_grad();
  if (again != base) {
    zero_all(params);
    throw VerificationError("loss is not deterministic at fixed parameters (" +
                            std::to_string(base) + " vs " + std::to_string(again) + ")");
  }

  GradCheckReport report;
  for (std::size_t k = 0; k < params.size(); ++k) {
    ParamArray& p = *params[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double orig = p.values[i];
      p.values[i] = orig + epsilon;
      zero_all(params);
      const double plus = loss_and_grad();
      p.values[i] = orig - epsilon;
      zero_all(params);
      const double minus = loss_and_grad();
      p.values[i] = orig;
      const double numeric = (plus - minus) / (2.0 * epsilon);
      const double err =
          std::abs(analytic[k][i] - numeric) / std::max(1.0, std::abs(numeric));
      ++report.checked;
      if (err > report.max_rel_error || !std::isfinite(err)) {
        report.max_rel_error = std::isfinite(err) ? err : INFINITY;
        report.worst_param = p.name;
        report.worst_index = i;
      }
    }
  }
  zero_all(params);
  return report;
}

}  // namespace actseg
