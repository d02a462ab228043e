#pragma once

#include <cstdint>
#include <vector>

#include "causalmask/mlp.hpp"

namespace causalmask {

struct AdamState {
  std::vector<DenseMatrix> m_weights;
  std::vector<DenseMatrix> v_weights;
  std::vector<std::vector<double>> m_biases;
  std::vector<std::vector<double>> v_biases;
  std::uint64_t step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

AdamState make_adam_state(const MlpParams& params);

// One bias-corrected Adam update in place; increments state.step_count.
// Throws PoisonedError naming the parameter on any non-finite gradient.
void adam_step(MlpParams& params, const MlpGrads& grads, AdamState& state, double lr);

}  // namespace causalmask
