#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "causalmask/dense.hpp"
#include "causalmask/noise.hpp"

namespace causalmask {

enum class Activation { kIdentity, kSigmoid };

// Fully connected net: ReLU on hidden layers, identity or clamped sigmoid on
// the output. weights[l] is [layer_dims[l] x layer_dims[l+1]].
struct MlpParams {
  std::vector<std::size_t> layer_dims;
  std::vector<DenseMatrix> weights;
  std::vector<std::vector<double>> biases;
  Activation output_activation = Activation::kIdentity;

  std::size_t num_layers() const { return weights.size(); }
  std::size_t input_dim() const { return layer_dims.front(); }
  std::size_t output_dim() const { return layer_dims.back(); }
  std::size_t param_count() const;
};

struct MlpGrads {
  std::vector<DenseMatrix> weights;
  std::vector<std::vector<double>> biases;
};

// Caches of one forward pass, sufficient for exact parameter and input
// gradients. Bound to the producing parameters via a fingerprint.
struct GradTape {
  bool valid = false;
  std::uint64_t params_fingerprint = 0;
  DenseMatrix input;
  std::vector<DenseMatrix> pre_activations;
  std::vector<DenseMatrix> activations;  // last entry is the (clamped) output
};

// Xavier-uniform weights in (-a, a), a = sqrt(6/(fan_in+fan_out)), drawn
// row-major per layer from `noise`; biases zero except the output layer's,
// which is filled with output_bias.
MlpParams make_mlp(const std::vector<std::size_t>& layer_dims, Activation output_activation,
                   NoiseSource& noise, double output_bias = 0.0);

MlpGrads zero_grads_like(const MlpParams& params);
void accumulate_grads(MlpGrads& dst, const MlpGrads& src);

// FNV-1a over dims, activation, and all parameter bytes; used to detect
// forward/backward tape mismatches, not for security.
std::uint64_t params_fingerprint(const MlpParams& params);

std::pair<DenseMatrix, GradTape> mlp_forward(const MlpParams& params, const DenseMatrix& input);

// Gradients of sum(upstream ⊙ output) w.r.t. parameters and input. The
// sigmoid derivative is evaluated at the clamped stored output, so gradients
// stay non-zero (~kProbClamp) in saturation instead of cutting off.
std::pair<MlpGrads, DenseMatrix> mlp_backward(const MlpParams& params, const GradTape& tape,
                                              const DenseMatrix& upstream_grad);

// Parameter vector layout: layer 0 weights row-major, layer 0 biases,
// layer 1 weights, ... Used by Adam state tests and the gradient checker.
std::vector<double> flatten(const MlpParams& params);
void unflatten(std::span<const double> flat, MlpParams& params);
std::vector<double> flatten_grads(const MlpGrads& grads);

}  // namespace causalmask
