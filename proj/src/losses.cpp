#include "causalmask/losses.hpp"

#include <cmath>
#include <string>

#include "causalmask/errors.hpp"
#include "causalmask/scalar.hpp"

namespace causalmask {

namespace {

void require_equal_length(std::size_t a, std::size_t b, const char* op) {
  if (a != b) {
    throw DimensionError(std::string(op) + ": lengths " + std::to_string(a) + " vs " +
                         std::to_string(b));
  }
  if (a == 0) {
    throw DimensionError(std::string(op) + ": empty input");
  }
}

void require_binary_labels(std::span<const double> label, const char* op) {
  for (double y : label) {
    if (y != 0.0 && y != 1.0) {
      throw ConfigError(std::string(op) + ": labels must be in {0,1}, got " + std::to_string(y));
    }
  }
}

}  // namespace

void LossWeights::validate() const {
  if (alpha < 0.0 || beta < 0.0 || lambda1 < 0.0 || lambda2 < 0.0) {
    throw ConfigError("LossWeights: alpha, beta, lambda1, lambda2 must be nonnegative");
  }
  if (drop_p < 0.0 || drop_p >= 1.0) {
    throw ConfigError("LossWeights: drop_p must lie in [0,1), got " + std::to_string(drop_p));
  }
}

double bce(std::span<const double> prob, std::span<const double> label) {
  require_equal_length(prob.size(), label.size(), "bce");
  require_binary_labels(label, "bce");
  double acc = 0.0;
  for (std::size_t i = 0; i < prob.size(); ++i) {
    const double p = clamp_prob(prob[i]);
    acc -= label[i] * std::log(p) + (1.0 - label[i]) * std::log(1.0 - p);
  }
  return acc / static_cast<double>(prob.size());
}

std::vector<double> bce_backward(std::span<const double> prob, std::span<const double> label) {
  require_equal_length(prob.size(), label.size(), "bce_backward");
  const double inv_n = 1.0 / static_cast<double>(prob.size());
  std::vector<double> grad(prob.size());
  for (std::size_t i = 0; i < prob.size(); ++i) {
    const double p = clamp_prob(prob[i]);
    grad[i] = inv_n * (-label[i] / p + (1.0 - label[i]) / (1.0 - p));
  }
  return grad;
}

AdversaryLoss adversary_loss(std::span<const double> d_prob, std::span<const double> label) {
  require_equal_length(d_prob.size(), label.size(), "adversary_loss");
  require_binary_labels(label, "adversary_loss");
  AdversaryLoss out;
  const double inv_n = 1.0 / static_cast<double>(d_prob.size());
  for (std::size_t i = 0; i < d_prob.size(); ++i) {
    const double p = clamp_prob(d_prob[i]);
    if (label[i] == 1.0) {
      out.positive_part -= inv_n * std::log(p);
    } else {
      out.negative_part -= inv_n * std::log(1.0 - p);
    }
  }
  out.total = out.positive_part + out.negative_part;
  return out;
}

std::vector<double> adversary_loss_backward(std::span<const double> d_prob,
                                            std::span<const double> label) {
  // both class partials are normalized by the full batch size, so the
  // gradient coincides with plain mean-BCE's
  return bce_backward(d_prob, label);
}

std::pair<DenseMatrix, DenseMatrix> counterfactual_drop(const DenseMatrix& z_c, double drop_p,
                                                        NoiseSource& noise) {
  if (drop_p < 0.0 || drop_p >= 1.0) {
    throw ConfigError("counterfactual_drop: drop_p must lie in [0,1), got " +
                      std::to_string(drop_p));
  }
  DenseMatrix drop_mask = sample_bernoulli(noise, z_c.rows, z_c.cols, drop_p);
  return {apply_drop(z_c, drop_mask), std::move(drop_mask)};
}

DenseMatrix apply_drop(const DenseMatrix& z_c, const DenseMatrix& drop_mask) {
  if (!z_c.same_shape(drop_mask)) {
    throw DimensionError("apply_drop: features (" + std::to_string(z_c.rows) + "x" +
                         std::to_string(z_c.cols) + ") vs drop mask (" +
                         std::to_string(drop_mask.rows) + "x" + std::to_string(drop_mask.cols) +
                         ")");
  }
  DenseMatrix out(z_c.rows, z_c.cols);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = z_c.data[i] * (1.0 - drop_mask.data[i]);
  }
  return out;
}

double kl_consistency(std::span<const double> p, std::span<const double> p_cf) {
  require_equal_length(p.size(), p_cf.size(), "kl_consistency");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double a = clamp_prob(p[i]);
    const double b = clamp_prob(p_cf[i]);
    acc += a * std::log(a / b) + (1.0 - a) * std::log((1.0 - a) / (1.0 - b));
  }
  return acc / static_cast<double>(p.size());
}

std::pair<std::vector<double>, std::vector<double>> kl_consistency_backward(
    std::span<const double> p, std::span<const double> p_cf) {
  require_equal_length(p.size(), p_cf.size(), "kl_consistency_backward");
  const double inv_n = 1.0 / static_cast<double>(p.size());
  std::vector<double> grad_p(p.size());
  std::vector<double> grad_cf(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double a = clamp_prob(p[i]);
    const double b = clamp_prob(p_cf[i]);
    grad_p[i] = inv_n * (std::log(a / b) - std::log((1.0 - a) / (1.0 - b)));
    grad_cf[i] = inv_n * (-a / b + (1.0 - a) / (1.0 - b));
  }
  return {std::move(grad_p), std::move(grad_cf)};
}

LossBreakdown total_loss(double cls, double adv, double mask_l1, double mask_hsic, double inv,
                         const LossWeights& w) {
  w.validate();
  const struct {
    const char* name;
    double value;
  } parts[] = {{"cls", cls}, {"adv", adv}, {"mask_l1", mask_l1},
               {"mask_hsic", mask_hsic}, {"inv", inv}};
  for (const auto& part : parts) {
    if (!std::isfinite(part.value)) {
      throw PoisonedError("total_loss: non-finite term " + std::string(part.name));
    }
  }
  LossBreakdown out;
  out.cls = cls;
  out.adv = adv;
  out.mask_l1 = mask_l1;
  out.mask_hsic = mask_hsic;
  out.inv = inv;
  out.total = cls - w.alpha * adv + w.lambda1 * mask_l1 + w.lambda2 * mask_hsic + w.beta * inv;
  return out;
}

}  // namespace causalmask
