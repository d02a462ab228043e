#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "causalmask/dense.hpp"
#include "causalmask/noise.hpp"

namespace causalmask {

enum class MixingMode { kAligned, kRotated };

// Per-domain generator style: the mean of the non-causal block and how
// strongly the label leaks into that block (the spurious shortcut a naive
// classifier latches onto).
struct DomainStyle {
  std::vector<double> style_mean;  // length d - |causal_dims|
  double spurious_rho = 0.0;       // in [-1, 1]
};

// Generative mechanism: per sample, a balanced Bernoulli label Y drives the
// causal block (±label_weights + noise_c), the domain style drives the
// non-causal block (style_mean + spurious_rho·(2Y−1) + noise_nc), the blocks
// are mixed into observation space, and observation noise noise_x is added.
struct ScmSpec {
  std::size_t d = 0;
  std::vector<std::size_t> causal_dims;  // strictly increasing subset of {0..d-1}
  std::vector<double> label_weights;     // one per causal dim
  double noise_c = 0.0;
  double noise_nc = 0.0;
  double noise_x = 0.0;
  MixingMode mixing_mode = MixingMode::kAligned;
  std::uint64_t mixing_seed = 0;  // seeds the rotated mixing matrix
  std::map<int, DomainStyle> domain_styles;

  void validate() const;  // throws ConfigError naming the violated field
  std::vector<std::size_t> noncausal_dims() const;
};

struct LabeledBatch {
  DenseMatrix embeddings;  // n x d
  std::vector<double> labels;
  int domain_id = 0;
  std::vector<std::size_t> ground_truth;  // causal dims of the generating spec
};
using EmbeddingBatch = LabeledBatch;

// Draw order per sample is fixed (label, causal noise, non-causal noise,
// observation noise) so equal seeds reproduce batches bitwise.
LabeledBatch sample_batch(const ScmSpec& spec, int domain_id, std::size_t n, NoiseSource& noise);

// Deterministic random orthogonal matrix: Gram-Schmidt on a seeded Gaussian
// draw. Used by the rotated mixing mode.
DenseMatrix random_orthogonal(std::size_t d, std::uint64_t seed);

struct Benchmark {
  ScmSpec spec;
  LabeledBatch train;
  LabeledBatch val;
  LabeledBatch test_same_domain;
  std::vector<LabeledBatch> test_shifted;
};

// Samples a full benchmark from an arbitrary validated spec: train, val and
// the same-domain test set come from the lowest domain id, every further
// domain id (ascending) contributes one shifted test set of test_n samples.
// All sets are drawn from one seeded stream in that order, so the whole
// benchmark is determined by (spec, seed, sizes).
Benchmark assemble_benchmark(ScmSpec spec, std::uint64_t seed, std::size_t train_n,
                             std::size_t val_n, std::size_t test_n);

// The canonical generator: d=64 with causal dims {0..7}, aligned mixing,
// noise_c = noise_nc = 0.3, noise_x = 0.05, a training domain (id 0) carrying
// a strong spurious shortcut (rho = 0.9), and three shifted domains with
// seeded fresh style means and rho = 0.
ScmSpec canonical_spec(std::uint64_t seed);

// assemble_benchmark(canonical_spec(seed), seed, 8192, 1024, 2048): the
// fixed-size benchmark every comparison runs on; determined by the seed.
Benchmark make_benchmark(std::uint64_t seed);

}  // namespace causalmask
