#pragma once

#include <algorithm>
#include <cmath>

namespace causalmask {

// Every probability leaving a sigmoid is kept this far from {0,1} so that
// logs in the losses stay finite. The perturbation is below test tolerances.
inline constexpr double kProbClamp = 1e-7;

inline double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

inline double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double relu(double x) { return x > 0.0 ? x : 0.0; }

}  // namespace causalmask
