#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "causalmask/dense.hpp"

namespace causalmask {

// Maps a uniform draw to Gumbel(0,1). u is clamped to (1e-12, 1-1e-12) so the
// double log never produces an infinity.
double gumbel_from_uniform(double u);

// Single seeded noise stream behind every stochastic choice in the toolkit
// (Gumbel mask perturbations, Bernoulli drops, SCM sampling, shuffles).
// Identical seed => identical sample stream; the full state round-trips
// through text for checkpointing.
class NoiseSource {
 public:
  explicit NoiseSource(std::uint64_t seed) : engine_(seed) {}

  // Uniform on [0, 1) with 53-bit resolution.
  double uniform();
  double gumbel();
  // Standard normal via Box-Muller (two uniforms per call, no cached spare,
  // so the stream position is call-count deterministic).
  double gaussian();
  // 1.0 with probability p, else 0.0.
  double bernoulli(double p);
  std::uint64_t next_u64() { return engine_(); }

  // Fisher-Yates; index modulo bias is ~2^-51 at desk-scale lengths.
  void shuffle(std::vector<std::size_t>& indices);

  // New independent stream seeded from this one (advances this stream).
  NoiseSource fork() { return NoiseSource(engine_()); }

  std::string serialize() const;
  static NoiseSource deserialize(const std::string& text);

  bool operator==(const NoiseSource& other) const { return engine_ == other.engine_; }

 private:
  std::mt19937_64 engine_;
};

DenseMatrix sample_gumbel(NoiseSource& noise, std::size_t rows, std::size_t cols);
DenseMatrix sample_gaussian(NoiseSource& noise, std::size_t rows, std::size_t cols);
DenseMatrix sample_bernoulli(NoiseSource& noise, std::size_t rows, std::size_t cols, double p);

}  // namespace causalmask
