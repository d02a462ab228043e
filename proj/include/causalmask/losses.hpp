#pragma once

#include <span>
#include <utility>
#include <vector>

#include "causalmask/dense.hpp"
#include "causalmask/noise.hpp"

namespace causalmask {

// Scalar hyperparameters of the total objective:
//   total = cls - alpha*adv + lambda1*mask_l1 + lambda2*mask_hsic + beta*inv
struct LossWeights {
  double alpha = 0.1;    // adversarial weight
  double beta = 1.0;     // counterfactual consistency weight
  double lambda1 = 1e-3; // L1 mask sparsity weight
  double lambda2 = 1.0;  // HSIC independence weight
  double drop_p = 0.1;   // counterfactual Bernoulli drop rate

  void validate() const;
};

struct LossBreakdown {
  double cls = 0.0;
  double adv = 0.0;
  double mask_l1 = 0.0;
  double mask_hsic = 0.0;
  double inv = 0.0;
  double total = 0.0;
};

// Mean over the batch of -[y ln p + (1-y) ln(1-p)]; probabilities are
// defensively clamped to [kProbClamp, 1-kProbClamp] before the logs.
double bce(std::span<const double> prob, std::span<const double> label);
// d(bce)/dp at the clamped probabilities.
std::vector<double> bce_backward(std::span<const double> prob, std::span<const double> label);

// The adversarial objective split into its one-class partial terms, each
// normalized by the full batch size so positive_part + negative_part equals
// plain mean BCE.
struct AdversaryLoss {
  double positive_part = 0.0;
  double negative_part = 0.0;
  double total = 0.0;
};
AdversaryLoss adversary_loss(std::span<const double> d_prob, std::span<const double> label);
std::vector<double> adversary_loss_backward(std::span<const double> d_prob,
                                            std::span<const double> label);

// Entrywise Bernoulli(drop_p) ablation mask B and the intervened features
// z_cf = z_c ⊙ (1 - B). B is returned so a training step can replay it.
std::pair<DenseMatrix, DenseMatrix> counterfactual_drop(const DenseMatrix& z_c, double drop_p,
                                                        NoiseSource& noise);
// Applies a pre-sampled drop mask: z_c ⊙ (1 - B).
DenseMatrix apply_drop(const DenseMatrix& z_c, const DenseMatrix& drop_mask);

// Mean Bernoulli KL: p ln(p/p_cf) + (1-p) ln((1-p)/(1-p_cf)). Gradients flow
// through both arguments.
double kl_consistency(std::span<const double> p, std::span<const double> p_cf);
std::pair<std::vector<double>, std::vector<double>> kl_consistency_backward(
    std::span<const double> p, std::span<const double> p_cf);

// Assembles the weighted total; throws PoisonedError naming the first
// non-finite part.
LossBreakdown total_loss(double cls, double adv, double mask_l1, double mask_hsic, double inv,
                         const LossWeights& w);

}  // namespace causalmask
