#include "causalmask/mlp.hpp"

#include <cmath>
#include <cstring>
#include <string>

#include "causalmask/errors.hpp"
#include "causalmask/scalar.hpp"

namespace causalmask {

namespace {

void validate_params(const MlpParams& p) {
  if (p.layer_dims.size() < 2) {
    throw DimensionError("mlp: need at least input and output dims");
  }
  if (p.weights.size() != p.layer_dims.size() - 1 || p.biases.size() != p.weights.size()) {
    throw DimensionError("mlp: layer count mismatch between dims, weights, biases");
  }
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    if (p.weights[l].rows != p.layer_dims[l] || p.weights[l].cols != p.layer_dims[l + 1] ||
        p.biases[l].size() != p.layer_dims[l + 1]) {
      throw DimensionError("mlp: layer " + std::to_string(l) + " has shape (" +
                           std::to_string(p.weights[l].rows) + "x" +
                           std::to_string(p.weights[l].cols) + "), expected (" +
                           std::to_string(p.layer_dims[l]) + "x" +
                           std::to_string(p.layer_dims[l + 1]) + ")");
    }
  }
}

void fnv1a(std::uint64_t& hash, const void* bytes, std::size_t size) {
  const auto* p = static_cast<const unsigned char*>(bytes);
  for (std::size_t i = 0; i < size; ++i) {
    hash ^= p[i];
    hash *= 1099511628211ULL;
  }
}

}  // namespace

std::size_t MlpParams::param_count() const {
  std::size_t count = 0;
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    count += layer_dims[l] * layer_dims[l + 1] + layer_dims[l + 1];
  }
  return count;
}

MlpParams make_mlp(const std::vector<std::size_t>& layer_dims, Activation output_activation,
                   NoiseSource& noise, double output_bias) {
  if (layer_dims.size() < 2) {
    throw DimensionError("make_mlp: need at least input and output dims");
  }
  MlpParams p;
  p.layer_dims = layer_dims;
  p.output_activation = output_activation;
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    const std::size_t fan_in = layer_dims[l];
    const std::size_t fan_out = layer_dims[l + 1];
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    DenseMatrix w(fan_in, fan_out);
    for (double& v : w.data) {
      v = (2.0 * noise.uniform() - 1.0) * a;
    }
    p.weights.push_back(std::move(w));
    const bool is_output = (l + 2 == layer_dims.size());
    p.biases.emplace_back(fan_out, is_output ? output_bias : 0.0);
  }
  return p;
}

MlpGrads zero_grads_like(const MlpParams& params) {
  MlpGrads g;
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    g.weights.emplace_back(params.weights[l].rows, params.weights[l].cols);
    g.biases.emplace_back(params.biases[l].size(), 0.0);
  }
  return g;
}

void accumulate_grads(MlpGrads& dst, const MlpGrads& src) {
  if (dst.weights.size() != src.weights.size()) {
    throw DimensionError("accumulate_grads: layer count mismatch");
  }
  for (std::size_t l = 0; l < dst.weights.size(); ++l) {
    add_inplace(dst.weights[l], src.weights[l]);
    for (std::size_t i = 0; i < dst.biases[l].size(); ++i) {
      dst.biases[l][i] += src.biases[l][i];
    }
  }
}

std::uint64_t params_fingerprint(const MlpParams& params) {
  std::uint64_t hash = 1469598103934665603ULL;
  for (std::size_t d : params.layer_dims) {
    const auto v = static_cast<std::uint64_t>(d);
    fnv1a(hash, &v, sizeof(v));
  }
  const auto act = static_cast<std::uint8_t>(params.output_activation);
  fnv1a(hash, &act, sizeof(act));
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    fnv1a(hash, params.weights[l].data.data(), params.weights[l].data.size() * sizeof(double));
    fnv1a(hash, params.biases[l].data(), params.biases[l].size() * sizeof(double));
  }
  return hash;
}

std::pair<DenseMatrix, GradTape> mlp_forward(const MlpParams& params, const DenseMatrix& input) {
  validate_params(params);
  if (input.cols != params.input_dim()) {
    throw DimensionError("mlp_forward: input has " + std::to_string(input.cols) +
                         " cols, layer 0 expects " + std::to_string(params.input_dim()));
  }
  if (input.rows == 0) {
    throw DimensionError("mlp_forward: empty batch");
  }

  GradTape tape;
  tape.input = input;
  const DenseMatrix* current = &input;
  const std::size_t last = params.num_layers() - 1;
  for (std::size_t l = 0; l <= last; ++l) {
    DenseMatrix pre = matmul(*current, params.weights[l]);
    add_row_inplace(pre, params.biases[l]);
    tape.pre_activations.push_back(pre);
    DenseMatrix act = std::move(pre);
    if (l < last) {
      for (double& v : act.data) {
        v = relu(v);
      }
    } else if (params.output_activation == Activation::kSigmoid) {
      for (double& v : act.data) {
        v = clamp_prob(sigmoid(v));
      }
    }
    tape.activations.push_back(std::move(act));
    current = &tape.activations.back();
  }
  tape.valid = true;
  tape.params_fingerprint = params_fingerprint(params);
  return {tape.activations.back(), std::move(tape)};
}

std::pair<MlpGrads, DenseMatrix> mlp_backward(const MlpParams& params, const GradTape& tape,
                                              const DenseMatrix& upstream_grad) {
  validate_params(params);
  if (!tape.valid || tape.pre_activations.size() != params.num_layers()) {
    throw InvalidTapeError("mlp_backward: tape is not a valid forward record");
  }
  if (tape.params_fingerprint != params_fingerprint(params)) {
    throw InvalidTapeError("mlp_backward: tape was produced by different parameters");
  }
  if (!upstream_grad.same_shape(tape.activations.back())) {
    throw DimensionError("mlp_backward: upstream grad shape (" +
                         std::to_string(upstream_grad.rows) + "x" +
                         std::to_string(upstream_grad.cols) + ") does not match output");
  }

  MlpGrads grads = zero_grads_like(params);
  DenseMatrix d_act = upstream_grad;
  const std::size_t last = params.num_layers() - 1;
  for (std::size_t l = last + 1; l-- > 0;) {
    DenseMatrix d_pre = std::move(d_act);
    if (l == last) {
      if (params.output_activation == Activation::kSigmoid) {
        const DenseMatrix& s = tape.activations[l];
        for (std::size_t i = 0; i < d_pre.data.size(); ++i) {
          d_pre.data[i] *= s.data[i] * (1.0 - s.data[i]);
        }
      }
    } else {
      const DenseMatrix& pre = tape.pre_activations[l];
      for (std::size_t i = 0; i < d_pre.data.size(); ++i) {
        if (pre.data[i] <= 0.0) {
          d_pre.data[i] = 0.0;
        }
      }
    }
    const DenseMatrix& below = (l == 0) ? tape.input : tape.activations[l - 1];
    grads.weights[l] = matmul_transpose_a(below, d_pre);
    grads.biases[l] = column_sums(d_pre);
    d_act = matmul_transpose_b(d_pre, params.weights[l]);
  }
  return {std::move(grads), std::move(d_act)};
}

std::vector<double> flatten(const MlpParams& params) {
  std::vector<double> flat;
  flat.reserve(params.param_count());
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    flat.insert(flat.end(), params.weights[l].data.begin(), params.weights[l].data.end());
    flat.insert(flat.end(), params.biases[l].begin(), params.biases[l].end());
  }
  return flat;
}

void unflatten(std::span<const double> flat, MlpParams& params) {
  if (flat.size() != params.param_count()) {
    throw DimensionError("unflatten: got " + std::to_string(flat.size()) + " values, expected " +
                         std::to_string(params.param_count()));
  }
  std::size_t pos = 0;
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    for (double& v : params.weights[l].data) {
      v = flat[pos++];
    }
    for (double& v : params.biases[l]) {
      v = flat[pos++];
    }
  }
}

std::vector<double> flatten_grads(const MlpGrads& grads) {
  std::vector<double> flat;
  for (std::size_t l = 0; l < grads.weights.size(); ++l) {
    flat.insert(flat.end(), grads.weights[l].data.begin(), grads.weights[l].data.end());
    flat.insert(flat.end(), grads.biases[l].begin(), grads.biases[l].end());
  }
  return flat;
}

}  // namespace causalmask
