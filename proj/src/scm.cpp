#include "causalmask/scm.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "causalmask/errors.hpp"

namespace causalmask {

namespace {

constexpr std::uint64_t kStyleStreamSalt = 0x9e3779b97f4a7c15ull;
constexpr std::uint64_t kDataStreamSalt = 0xc2b2ae3d27d4eb4full;
constexpr double kStyleMeanScale = 2.0;

}  // namespace

void ScmSpec::validate() const {
  if (d == 0) {
    throw ConfigError("ScmSpec: d must be >= 1");
  }
  if (causal_dims.empty()) {
    throw ConfigError("ScmSpec: causal_dims must be non-empty");
  }
  for (std::size_t k = 0; k < causal_dims.size(); ++k) {
    if (causal_dims[k] >= d) {
      throw ConfigError("ScmSpec: causal dim " + std::to_string(causal_dims[k]) +
                        " out of range for d=" + std::to_string(d));
    }
    if (k > 0 && causal_dims[k] <= causal_dims[k - 1]) {
      throw ConfigError("ScmSpec: causal_dims must be strictly increasing");
    }
  }
  if (label_weights.size() != causal_dims.size()) {
    throw ConfigError("ScmSpec: " + std::to_string(label_weights.size()) + " label_weights for " +
                      std::to_string(causal_dims.size()) + " causal dims");
  }
  if (noise_c < 0.0 || noise_nc < 0.0 || noise_x < 0.0) {
    throw ConfigError("ScmSpec: noise scales must be >= 0");
  }
  const std::size_t nc_count = d - causal_dims.size();
  for (const auto& [domain_id, style] : domain_styles) {
    if (style.style_mean.size() != nc_count) {
      throw ConfigError("ScmSpec: domain " + std::to_string(domain_id) + " style_mean has " +
                        std::to_string(style.style_mean.size()) + " entries, expected " +
                        std::to_string(nc_count));
    }
    if (!(std::abs(style.spurious_rho) <= 1.0)) {
      throw ConfigError("ScmSpec: domain " + std::to_string(domain_id) + " spurious_rho " +
                        std::to_string(style.spurious_rho) + " outside [-1,1]");
    }
  }
}

std::vector<std::size_t> ScmSpec::noncausal_dims() const {
  std::vector<bool> causal(d, false);
  for (std::size_t idx : causal_dims) {
    causal[idx] = true;
  }
  std::vector<std::size_t> out;
  out.reserve(d - causal_dims.size());
  for (std::size_t i = 0; i < d; ++i) {
    if (!causal[i]) {
      out.push_back(i);
    }
  }
  return out;
}

DenseMatrix random_orthogonal(std::size_t d, std::uint64_t seed) {
  if (d == 0) {
    throw ConfigError("random_orthogonal: d must be >= 1");
  }
  NoiseSource noise(seed);
  for (int attempt = 0; attempt < 16; ++attempt) {
    DenseMatrix q = sample_gaussian(noise, d, d);
    bool ok = true;
    for (std::size_t i = 0; i < d && ok; ++i) {
      double* ri = q.data.data() + i * d;
      for (std::size_t j = 0; j < i; ++j) {
        const double* rj = q.data.data() + j * d;
        double dot = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
          dot += ri[k] * rj[k];
        }
        for (std::size_t k = 0; k < d; ++k) {
          ri[k] -= dot * rj[k];
        }
      }
      double norm2 = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        norm2 += ri[k] * ri[k];
      }
      const double norm = std::sqrt(norm2);
      if (norm < 1e-8) {
        ok = false;
        break;
      }
      for (std::size_t k = 0; k < d; ++k) {
        ri[k] /= norm;
      }
    }
    if (ok) {
      return q;
    }
  }
  throw ConfigError("random_orthogonal: Gram-Schmidt degenerated repeatedly");
}

LabeledBatch sample_batch(const ScmSpec& spec, int domain_id, std::size_t n, NoiseSource& noise) {
  spec.validate();
  const auto style_it = spec.domain_styles.find(domain_id);
  if (style_it == spec.domain_styles.end()) {
    throw ConfigError("sample_batch: unknown domain_id " + std::to_string(domain_id));
  }
  if (n == 0) {
    throw ConfigError("sample_batch: need n >= 1");
  }
  const DomainStyle& style = style_it->second;
  const std::vector<std::size_t> nc_dims = spec.noncausal_dims();

  LabeledBatch out;
  out.domain_id = domain_id;
  out.ground_truth = spec.causal_dims;
  out.labels.resize(n);
  DenseMatrix assembled(n, spec.d);
  DenseMatrix observation_noise(n, spec.d);
  for (std::size_t i = 0; i < n; ++i) {
    const double y = noise.bernoulli(0.5);
    out.labels[i] = y;
    const double sgn = 2.0 * y - 1.0;
    auto row = assembled.row(i);
    for (std::size_t k = 0; k < spec.causal_dims.size(); ++k) {
      row[spec.causal_dims[k]] = sgn * spec.label_weights[k] + spec.noise_c * noise.gaussian();
    }
    for (std::size_t m = 0; m < nc_dims.size(); ++m) {
      row[nc_dims[m]] =
          style.style_mean[m] + style.spurious_rho * sgn + spec.noise_nc * noise.gaussian();
    }
    auto noise_row = observation_noise.row(i);
    for (std::size_t j = 0; j < spec.d; ++j) {
      noise_row[j] = spec.noise_x * noise.gaussian();
    }
  }

  if (spec.mixing_mode == MixingMode::kRotated) {
    // v = Q u per sample; with samples as rows that is assembled * Q^T.
    assembled = matmul_transpose_b(assembled, random_orthogonal(spec.d, spec.mixing_seed));
  }
  out.embeddings = add(assembled, observation_noise);
  return out;
}

Benchmark assemble_benchmark(ScmSpec spec, std::uint64_t seed, std::size_t train_n,
                             std::size_t val_n, std::size_t test_n) {
  spec.validate();
  Benchmark bench;
  bench.spec = std::move(spec);
  const int home = bench.spec.domain_styles.begin()->first;  // lowest id trains
  NoiseSource data_rng(seed ^ kDataStreamSalt);
  bench.train = sample_batch(bench.spec, home, train_n, data_rng);
  bench.val = sample_batch(bench.spec, home, val_n, data_rng);
  bench.test_same_domain = sample_batch(bench.spec, home, test_n, data_rng);
  for (const auto& entry : bench.spec.domain_styles) {
    if (entry.first != home) {
      bench.test_shifted.push_back(sample_batch(bench.spec, entry.first, test_n, data_rng));
    }
  }
  return bench;
}

ScmSpec canonical_spec(std::uint64_t seed) {
  ScmSpec spec;
  spec.d = 64;
  spec.causal_dims.resize(8);
  std::iota(spec.causal_dims.begin(), spec.causal_dims.end(), 0);
  spec.label_weights.assign(8, 1.0);
  spec.noise_c = 0.3;
  spec.noise_nc = 0.3;
  spec.noise_x = 0.05;
  spec.mixing_mode = MixingMode::kAligned;

  const std::size_t nc_count = spec.d - spec.causal_dims.size();
  NoiseSource style_rng(seed ^ kStyleStreamSalt);
  for (int domain = 0; domain < 4; ++domain) {
    DomainStyle style;
    style.style_mean.resize(nc_count);
    for (double& v : style.style_mean) {
      v = kStyleMeanScale * style_rng.gaussian();
    }
    style.spurious_rho = domain == 0 ? 0.9 : 0.0;
    spec.domain_styles.emplace(domain, std::move(style));
  }

  return spec;
}

Benchmark make_benchmark(std::uint64_t seed) {
  return assemble_benchmark(canonical_spec(seed), seed, 8192, 1024, 2048);
}

}  // namespace causalmask
