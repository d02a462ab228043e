#pragma once

#include <utility>

#include "causalmask/dense.hpp"
#include "causalmask/noise.hpp"

namespace causalmask {

struct KernelConfig {
  enum class Bandwidth { kMedianHeuristic, kFixed };
  Bandwidth mode = Bandwidth::kMedianHeuristic;
  // Applied to both Gram matrices when mode is kFixed; the gradient checker
  // uses this because differentiating through a per-batch median is ill-posed.
  double fixed_sigma = 1.0;
  double bandwidth_floor = 1e-6;
};

// Median of the n(n-1)/2 pairwise unsquared Euclidean distances, floored at
// cfg.bandwidth_floor; even counts take the mean of the two central values.
double median_bandwidth(const DenseMatrix& x, const KernelConfig& cfg = {});

// K[i][j] = exp(-||x_i - x_j||^2 / (2 sigma^2)); symmetric, unit diagonal.
DenseMatrix gaussian_gram(const DenseMatrix& x, double sigma);

// Everything the backward pass needs, with bandwidths frozen at their
// forward-pass values.
struct HsicTape {
  bool valid = false;
  DenseMatrix a;
  DenseMatrix b;
  DenseMatrix gram_a;      // K
  DenseMatrix gram_b;      // L
  DenseMatrix centered_a;  // H K H
  DenseMatrix centered_b;  // H L H
  double sigma_a = 0.0;
  double sigma_b = 0.0;
  double scale = 0.0;  // 1/(n-1)^2
};

// Biased estimator tr(K H L H)/(n-1)^2 with Gaussian kernels; each input gets
// its own bandwidth under the median heuristic. Requires n >= 4.
std::pair<double, HsicTape> hsic_biased(const DenseMatrix& a, const DenseMatrix& b,
                                        const KernelConfig& cfg = {});

// Exact gradients w.r.t. both inputs, bandwidths treated as constants.
std::pair<DenseMatrix, DenseMatrix> hsic_backward(const HsicTape& tape, double upstream);

// Empirical 95th percentile of the HSIC null obtained by re-pairing B's rows
// with `permutations` seeded shuffles (sorted values, 1-based rank
// ceil(0.95 m)). Bandwidths are those of the unpermuted inputs.
double permutation_null(const DenseMatrix& a, const DenseMatrix& b, const KernelConfig& cfg,
                        std::size_t permutations, NoiseSource& noise);

}  // namespace causalmask
