#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace causalmask {

// Every analytic gradient fails loudly at or above this relative error
// against central finite differences.
inline constexpr double kGradTolerance = 1e-4;

struct GradCheckCase {
  std::string name;
  std::size_t checked = 0;  // coordinates probed by finite differences
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
  bool passed = false;
};

// Finite-difference verification of every analytic gradient in the library:
// MLP parameter and input gradients under both output activations, the mask
// generator's parameter and input gradients, each loss term over its direct
// arguments (BCE, adversary loss, counterfactual KL over both branches, mask
// sparsity, HSIC over both inputs), and the three per-player objectives —
// with the mask net's view of the full composite objective as the headline
// case. Stochastic choices are frozen: deterministic mask, fixed kernel
// bandwidth, pre-sampled drop mask. Instances are drawn from `seed` and
// redrawn until every hidden pre-activation clears a margin, so no finite
// difference straddles a ReLU kink.
std::vector<GradCheckCase> run_gradient_suite(std::uint64_t seed);

bool all_passed(const std::vector<GradCheckCase>& cases);

// One fixed-width line per case plus a verdict line.
std::string format_gradient_suite(const std::vector<GradCheckCase>& cases);

}  // namespace causalmask
