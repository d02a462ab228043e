#pragma once

#include <cstddef>
#include <functional>
#include <span>

namespace causalmask {

// |a-b| / max(|a|,|b|,1e-6). The floor forgives absolute discrepancies below
// ~1e-10, which is the noise floor of central differences at step 1e-5;
// (0,0) maps to 0.
double relative_error(double a, double b);

struct FiniteDiffResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
};

// Central differences of loss_fn over every coordinate of `at`, compared to
// `analytic`. loss_fn must be deterministic (freeze any noise before
// calling); a non-finite loss is propagated as PoisonedError.
FiniteDiffResult finite_diff_check(const std::function<double(std::span<const double>)>& loss_fn,
                                   std::span<const double> at, std::span<const double> analytic,
                                   double step = 1e-5);

}  // namespace causalmask
