#include "causalmask/mask.hpp"

#include <string>

#include "causalmask/errors.hpp"
#include "causalmask/scalar.hpp"

namespace causalmask {

MaskNet make_mask_net(std::size_t d, double tau, NoiseSource& noise, double initial_logit_bias) {
  if (tau <= 0.0) {
    throw ConfigError("make_mask_net: tau must be positive, got " + std::to_string(tau));
  }
  MaskNet m;
  m.net = make_mlp({d, d, d}, Activation::kIdentity, noise, initial_logit_bias);
  m.tau = tau;
  return m;
}

std::pair<DenseMatrix, MaskTape> compute_mask(const DenseMatrix& embeddings, const MaskNet& net,
                                              MaskMode mode, NoiseSource* noise) {
  if (net.tau <= 0.0) {
    throw ConfigError("compute_mask: tau must be positive, got " + std::to_string(net.tau));
  }
  if (mode == MaskMode::kStochastic && noise == nullptr) {
    throw ConfigError("compute_mask: stochastic mode needs a noise source");
  }

  auto [logits, net_tape] = mlp_forward(net.net, embeddings);
  DenseMatrix mask(logits.rows, logits.cols);
  if (mode == MaskMode::kStochastic) {
    for (std::size_t i = 0; i < mask.data.size(); ++i) {
      mask.data[i] = clamp_prob(sigmoid((logits.data[i] + noise->gumbel()) / net.tau));
    }
  } else {
    for (std::size_t i = 0; i < mask.data.size(); ++i) {
      mask.data[i] = clamp_prob(sigmoid(logits.data[i] / net.tau));
    }
  }

  MaskTape tape;
  tape.net_tape = std::move(net_tape);
  tape.mask = mask;
  tape.tau = net.tau;
  tape.valid = true;
  return {std::move(mask), std::move(tape)};
}

std::pair<MlpGrads, DenseMatrix> mask_backward(const MaskNet& net, const MaskTape& tape,
                                               const DenseMatrix& upstream_dmask) {
  if (!tape.valid) {
    throw InvalidTapeError("mask_backward: tape is not a valid forward record");
  }
  if (!upstream_dmask.same_shape(tape.mask)) {
    throw DimensionError("mask_backward: upstream shape (" + std::to_string(upstream_dmask.rows) +
                         "x" + std::to_string(upstream_dmask.cols) + ") does not match mask");
  }
  DenseMatrix d_logits(upstream_dmask.rows, upstream_dmask.cols);
  for (std::size_t i = 0; i < d_logits.data.size(); ++i) {
    const double m = tape.mask.data[i];
    d_logits.data[i] = upstream_dmask.data[i] * m * (1.0 - m) / tape.tau;
  }
  return mlp_backward(net.net, tape.net_tape, d_logits);
}

SplitFeatures split_features(const DenseMatrix& embeddings, const DenseMatrix& mask) {
  if (!embeddings.same_shape(mask)) {
    throw DimensionError("split_features: embeddings (" + std::to_string(embeddings.rows) + "x" +
                         std::to_string(embeddings.cols) + ") vs mask (" +
                         std::to_string(mask.rows) + "x" + std::to_string(mask.cols) + ")");
  }
  SplitFeatures out;
  out.mask = mask;
  out.z_c = DenseMatrix(embeddings.rows, embeddings.cols);
  out.z_nc = DenseMatrix(embeddings.rows, embeddings.cols);
  for (std::size_t i = 0; i < embeddings.data.size(); ++i) {
    const double e = embeddings.data[i];
    const double m = mask.data[i];
    // Round the larger share; the smaller one is then a subtraction of two
    // values within a factor of two of each other, which Sterbenz's lemma
    // guarantees is exact — so z_c + z_nc == e bitwise in either branch.
    double zc;
    double znc;
    if (m >= 0.5) {
      zc = m * e;
      znc = e - zc;
    } else {
      znc = (1.0 - m) * e;
      zc = e - znc;
    }
    out.z_c.data[i] = zc;
    out.z_nc.data[i] = znc;
  }
  return out;
}

double mask_sparsity(const DenseMatrix& mask) {
  if (mask.rows == 0) {
    throw DimensionError("mask_sparsity: empty mask");
  }
  return sum(mask) / static_cast<double>(mask.rows);
}

DenseMatrix mask_sparsity_backward(const DenseMatrix& mask, double upstream) {
  return DenseMatrix(mask.rows, mask.cols, upstream / static_cast<double>(mask.rows));
}

}  // namespace causalmask
