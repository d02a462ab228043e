#include "causalmask/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "causalmask/errors.hpp"

namespace causalmask {

double relative_error(double a, double b) {
  const double denom = std::max({std::fabs(a), std::fabs(b), 1e-6});
  return std::fabs(a - b) / denom;
}

FiniteDiffResult finite_diff_check(const std::function<double(std::span<const double>)>& loss_fn,
                                   std::span<const double> at, std::span<const double> analytic,
                                   double step) {
  if (at.size() != analytic.size()) {
    throw DimensionError("finite_diff_check: analytic gradient length " +
                         std::to_string(analytic.size()) + " vs parameter length " +
                         std::to_string(at.size()));
  }
  if (step <= 0.0) {
    throw ConfigError("finite_diff_check: step must be positive");
  }

  std::vector<double> point(at.begin(), at.end());
  FiniteDiffResult result;
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double saved = point[i];
    point[i] = saved + step;
    const double up = loss_fn(point);
    point[i] = saved - step;
    const double down = loss_fn(point);
    point[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw PoisonedError("finite_diff_check: loss_fn returned non-finite at coordinate " +
                          std::to_string(i));
    }
    const double numeric = (up - down) / (2.0 * step);
    const double err = relative_error(analytic[i], numeric);
    if (err > result.max_rel_error) {
      result.max_rel_error = err;
      result.worst_index = i;
      result.analytic_at_worst = analytic[i];
      result.numeric_at_worst = numeric;
    }
  }
  return result;
}

}  // namespace causalmask
