#pragma once

#include <utility>

#include "causalmask/mlp.hpp"
#include "causalmask/noise.hpp"

namespace causalmask {

// Generator of the per-dimension soft mask: logits = MLP(E) with layer dims
// [d, d, d], then M = sigmoid((logits + g)/tau) with g ~ Gumbel(0,1).
struct MaskNet {
  MlpParams net;
  double tau = 1.0;
};

// Mask MLP [d, d, d], ReLU hidden, identity output, output bias +1.0 so the
// initial mask is permissive instead of collapsed.
MaskNet make_mask_net(std::size_t d, double tau, NoiseSource& noise,
                      double initial_logit_bias = 1.0);

enum class MaskMode {
  kStochastic,      // fresh Gumbel noise per entry
  kDeterministic,   // g = 0; used at evaluation time
};

// Records one mask forward pass. The noise realization is a constant of the
// pass: backward differentiates sigmoid((logits+g)/tau) w.r.t. logits only.
struct MaskTape {
  bool valid = false;
  GradTape net_tape;
  DenseMatrix mask;  // stored clamped to [kProbClamp, 1-kProbClamp]
  double tau = 0.0;
};

// noise may be null in deterministic mode; stochastic mode requires it.
std::pair<DenseMatrix, MaskTape> compute_mask(const DenseMatrix& embeddings, const MaskNet& net,
                                              MaskMode mode, NoiseSource* noise = nullptr);

// Gradients of sum(upstream ⊙ M) w.r.t. the mask net's parameters (and the
// embedding input, second element), via dM/dlogit = M(1-M)/tau.
std::pair<MlpGrads, DenseMatrix> mask_backward(const MaskNet& net, const MaskTape& tape,
                                               const DenseMatrix& upstream_dmask);

struct SplitFeatures {
  DenseMatrix z_c;
  DenseMatrix z_nc;
  DenseMatrix mask;
};

// z_c = mask ⊙ E, z_nc = (1 - mask) ⊙ E, with the split arranged so that
// z_c + z_nc == E holds bitwise: the larger share is rounded and the smaller
// one obtained by subtraction, which Sterbenz's lemma makes exact. Both
// shares stay within one ulp of their real-arithmetic values.
SplitFeatures split_features(const DenseMatrix& embeddings, const DenseMatrix& mask);

// Mean over the batch of each row's L1 norm: (1/n) ΣΣ M_ij.
double mask_sparsity(const DenseMatrix& mask);
// d(mask_sparsity)/dM: every entry is 1/n.
DenseMatrix mask_sparsity_backward(const DenseMatrix& mask, double upstream = 1.0);

}  // namespace causalmask
