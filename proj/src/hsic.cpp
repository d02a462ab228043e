#include "causalmask/hsic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "causalmask/errors.hpp"

namespace causalmask {

namespace {

// Squared pairwise distances via ||a||^2 + ||b||^2 - 2<a,b>, clamped at 0
// against cancellation.
DenseMatrix squared_distances(const DenseMatrix& x) {
  const std::size_t n = x.rows;
  std::vector<double> norms(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = x.data.data() + i * x.cols;
    double acc = 0.0;
    for (std::size_t k = 0; k < x.cols; ++k) {
      acc += row[k] * row[k];
    }
    norms[i] = acc;
  }
  DenseMatrix inner = matmul_transpose_b(x, x);
  DenseMatrix d2(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double v = norms[i] + norms[j] - 2.0 * inner.at(i, j);
      d2.at(i, j) = v > 0.0 ? v : 0.0;
    }
  }
  return d2;
}

// Median of the n(n-1)/2 unsquared pairwise distances, each accumulated
// directly as sqrt(Σ_k (a_k - b_k)^2) rather than via the norm expansion used
// for the Gram matrices, so the result is the exact median of the literal
// distance values.
double median_pairwise_distance(const DenseMatrix& x) {
  const std::size_t n = x.rows;
  std::vector<double> dist;
  dist.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    const double* a = x.data.data() + i * x.cols;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double* b = x.data.data() + j * x.cols;
      double acc = 0.0;
      for (std::size_t k = 0; k < x.cols; ++k) {
        const double diff = a[k] - b[k];
        acc += diff * diff;
      }
      dist.push_back(std::sqrt(acc));
    }
  }
  const std::size_t m = dist.size();
  auto mid = dist.begin() + m / 2;
  std::nth_element(dist.begin(), mid, dist.end());
  if (m % 2 == 1) {
    return *mid;
  }
  const double upper = *mid;
  const double lower = *std::max_element(dist.begin(), mid);
  return 0.5 * (lower + upper);
}

DenseMatrix gram_from_squared(const DenseMatrix& d2, double sigma) {
  DenseMatrix k(d2.rows, d2.cols);
  const double inv = -1.0 / (2.0 * sigma * sigma);
  for (std::size_t i = 0; i < d2.data.size(); ++i) {
    k.data[i] = std::exp(d2.data[i] * inv);
  }
  return k;
}

// H M H for symmetric M via double centering: subtract row means, column
// means, add back the grand mean.
DenseMatrix double_center(const DenseMatrix& m) {
  const std::size_t n = m.rows;
  std::vector<double> row_mean(n, 0.0);
  double grand = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    const double* row = m.data.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      acc += row[j];
    }
    row_mean[i] = acc / static_cast<double>(n);
    grand += acc;
  }
  grand /= static_cast<double>(n) * static_cast<double>(n);
  DenseMatrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = m.data.data() + i * n;
    double* out_row = out.data.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      out_row[j] = row[j] - row_mean[i] - row_mean[j] + grand;
    }
  }
  return out;
}

double resolve_sigma(const DenseMatrix& x, const KernelConfig& cfg) {
  if (cfg.mode == KernelConfig::Bandwidth::kFixed) {
    return std::max(cfg.fixed_sigma, cfg.bandwidth_floor);
  }
  return std::max(median_pairwise_distance(x), cfg.bandwidth_floor);
}

// gradient of value = scale * sum(K ⊙ W) w.r.t. the kernel's own input:
// d/da_i = (2 scale / sigma^2) Σ_j W_ij K_ij (a_j - a_i)
DenseMatrix gram_input_grad(const DenseMatrix& x, const DenseMatrix& gram,
                            const DenseMatrix& centered_other, double sigma, double coeff) {
  const std::size_t n = x.rows;
  DenseMatrix s(n, n);
  std::vector<double> row_sums(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double v = gram.at(i, j) * centered_other.at(i, j);
      s.at(i, j) = v;
      acc += v;
    }
    row_sums[i] = acc;
  }
  DenseMatrix grad = matmul(s, x);  // Σ_j S_ij a_j
  const double c = 2.0 * coeff / (sigma * sigma);
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = x.data.data() + i * x.cols;
    double* gi = grad.data.data() + i * x.cols;
    for (std::size_t k = 0; k < x.cols; ++k) {
      gi[k] = c * (gi[k] - row_sums[i] * xi[k]);
    }
  }
  return grad;
}

}  // namespace

double median_bandwidth(const DenseMatrix& x, const KernelConfig& cfg) {
  if (x.rows < 2) {
    throw InsufficientBatchError("median_bandwidth: need n >= 2, got " + std::to_string(x.rows));
  }
  return std::max(median_pairwise_distance(x), cfg.bandwidth_floor);
}

DenseMatrix gaussian_gram(const DenseMatrix& x, double sigma) {
  if (sigma <= 0.0) {
    throw ConfigError("gaussian_gram: sigma must be positive, got " + std::to_string(sigma));
  }
  return gram_from_squared(squared_distances(x), sigma);
}

std::pair<double, HsicTape> hsic_biased(const DenseMatrix& a, const DenseMatrix& b,
                                        const KernelConfig& cfg) {
  if (a.rows != b.rows) {
    throw DimensionError("hsic_biased: batch sizes " + std::to_string(a.rows) + " vs " +
                         std::to_string(b.rows));
  }
  if (a.rows < 4) {
    throw InsufficientBatchError("hsic_biased: need n >= 4, got " + std::to_string(a.rows));
  }
  const std::size_t n = a.rows;

  HsicTape tape;
  tape.sigma_a = resolve_sigma(a, cfg);
  tape.sigma_b = resolve_sigma(b, cfg);
  tape.gram_a = gram_from_squared(squared_distances(a), tape.sigma_a);
  tape.gram_b = gram_from_squared(squared_distances(b), tape.sigma_b);
  tape.centered_a = double_center(tape.gram_a);
  tape.centered_b = double_center(tape.gram_b);
  tape.scale = 1.0 / (static_cast<double>(n - 1) * static_cast<double>(n - 1));
  tape.a = a;
  tape.b = b;

  // tr(K H L H) = Σ_ij (HKH)_ij (HLH)_ij because H is idempotent. This form
  // is exactly zero whenever either batch is constant (its centered Gram is
  // the zero matrix), which the one-sided contraction only achieves up to
  // rounding residue.
  double acc = 0.0;
  for (std::size_t i = 0; i < tape.centered_a.data.size(); ++i) {
    acc += tape.centered_a.data[i] * tape.centered_b.data[i];
  }
  tape.valid = true;
  return {tape.scale * acc, std::move(tape)};
}

std::pair<DenseMatrix, DenseMatrix> hsic_backward(const HsicTape& tape, double upstream) {
  if (!tape.valid) {
    throw InvalidTapeError("hsic_backward: tape is not a valid forward record");
  }
  const double coeff = tape.scale * upstream;
  DenseMatrix grad_a =
      gram_input_grad(tape.a, tape.gram_a, tape.centered_b, tape.sigma_a, coeff);
  DenseMatrix grad_b =
      gram_input_grad(tape.b, tape.gram_b, tape.centered_a, tape.sigma_b, coeff);
  return {std::move(grad_a), std::move(grad_b)};
}

double permutation_null(const DenseMatrix& a, const DenseMatrix& b, const KernelConfig& cfg,
                        std::size_t permutations, NoiseSource& noise) {
  if (permutations < 100) {
    throw ConfigError("permutation_null: need at least 100 permutations, got " +
                      std::to_string(permutations));
  }
  auto [observed, tape] = hsic_biased(a, b, cfg);
  (void)observed;
  const std::size_t n = a.rows;
  std::vector<std::size_t> perm(n);
  std::vector<double> values;
  values.reserve(permutations);
  DenseMatrix permuted_l(n, n);
  for (std::size_t p = 0; p < permutations; ++p) {
    std::iota(perm.begin(), perm.end(), 0);
    noise.shuffle(perm);
    // permuting B's rows turns L into L[perm(i)][perm(j)]; the bandwidth is
    // permutation-invariant, and H K H is untouched
    for (std::size_t i = 0; i < n; ++i) {
      const double* l_row = tape.gram_b.data.data() + perm[i] * n;
      double* out_row = permuted_l.data.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) {
        out_row[j] = l_row[perm[j]];
      }
    }
    const DenseMatrix centered = double_center(permuted_l);
    double acc = 0.0;
    for (std::size_t i = 0; i < centered.data.size(); ++i) {
      acc += tape.centered_a.data[i] * centered.data[i];
    }
    values.push_back(tape.scale * acc);
  }
  std::sort(values.begin(), values.end());
  const auto rank = static_cast<std::size_t>(
      std::ceil(0.95 * static_cast<double>(permutations)));
  return values[rank - 1];
}

}  // namespace causalmask
