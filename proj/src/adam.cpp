#include "causalmask/adam.hpp"

#include <cmath>
#include <string>

#include "causalmask/errors.hpp"

namespace causalmask {

namespace {

void update_span(double* param, const double* grad, double* m, double* v, std::size_t size,
                 const AdamState& s, double lr, double bias1, double bias2,
                 const std::string& name) {
  for (std::size_t i = 0; i < size; ++i) {
    const double g = grad[i];
    if (!std::isfinite(g)) {
      throw PoisonedError("adam_step: non-finite gradient for " + name + " entry " +
                          std::to_string(i));
    }
    m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g;
    v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g * g;
    const double m_hat = m[i] / bias1;
    const double v_hat = v[i] / bias2;
    param[i] -= lr * m_hat / (std::sqrt(v_hat) + s.epsilon);
  }
}

}  // namespace

AdamState make_adam_state(const MlpParams& params) {
  AdamState s;
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    s.m_weights.emplace_back(params.weights[l].rows, params.weights[l].cols);
    s.v_weights.emplace_back(params.weights[l].rows, params.weights[l].cols);
    s.m_biases.emplace_back(params.biases[l].size(), 0.0);
    s.v_biases.emplace_back(params.biases[l].size(), 0.0);
  }
  return s;
}

void adam_step(MlpParams& params, const MlpGrads& grads, AdamState& state, double lr) {
  const std::size_t layers = params.num_layers();
  if (grads.weights.size() != layers || state.m_weights.size() != layers) {
    throw DimensionError("adam_step: grads/state layer count does not match params");
  }
  for (std::size_t l = 0; l < layers; ++l) {
    if (!grads.weights[l].same_shape(params.weights[l]) ||
        grads.biases[l].size() != params.biases[l].size()) {
      throw DimensionError("adam_step: gradient shape mismatch at layer " + std::to_string(l));
    }
  }

  state.step_count += 1;
  const auto t = static_cast<double>(state.step_count);
  const double bias1 = 1.0 - std::pow(state.beta1, t);
  const double bias2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t l = 0; l < layers; ++l) {
    update_span(params.weights[l].data.data(), grads.weights[l].data.data(),
                state.m_weights[l].data.data(), state.v_weights[l].data.data(),
                params.weights[l].data.size(), state, lr, bias1, bias2,
                "weights[" + std::to_string(l) + "]");
    update_span(params.biases[l].data(), grads.biases[l].data(), state.m_biases[l].data(),
                state.v_biases[l].data(), params.biases[l].size(), state, lr, bias1, bias2,
                "biases[" + std::to_string(l) + "]");
  }
}

}  // namespace causalmask
