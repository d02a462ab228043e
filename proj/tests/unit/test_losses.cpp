#include "causalmask/losses.hpp"

#include <cmath>
#include <vector>

#include "causalmask/errors.hpp"
#include "causalmask/gradcheck.hpp"
#include "doctest.h"

using namespace causalmask;

TEST_CASE("bce closed-form values") {
  std::vector<double> half{0.5, 0.5};
  std::vector<double> y01{0.0, 1.0};
  CHECK(bce(half, y01) == doctest::Approx(std::log(2.0)).epsilon(1e-15));

  std::vector<double> confident{1.0 - 1e-7};
  std::vector<double> one{1.0};
  CHECK(bce(confident, one) <= 2e-7);

  std::vector<double> p{0.9, 0.2};
  std::vector<double> y{1.0, 0.0};
  const double expected = (-std::log(0.9) - std::log(0.8)) / 2.0;
  CHECK(bce(p, y) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(bce(p, y) == doctest::Approx(0.164252).epsilon(1e-5));

  std::vector<double> short_y{1.0};
  CHECK_THROWS_AS(bce(p, short_y), DimensionError);
  std::vector<double> bad_y{0.5, 0.0};
  CHECK_THROWS_AS(bce(p, bad_y), ConfigError);
}

TEST_CASE("bce is permutation invariant and clamps an out-of-range input") {
  std::vector<double> p{0.9, 0.2, 0.7};
  std::vector<double> y{1.0, 0.0, 1.0};
  std::vector<double> p2{0.7, 0.9, 0.2};
  std::vector<double> y2{1.0, 1.0, 0.0};
  CHECK(bce(p, y) == doctest::Approx(bce(p2, y2)).epsilon(1e-15));

  std::vector<double> extreme{1.0, 0.0};
  std::vector<double> labels{0.0, 1.0};
  CHECK(std::isfinite(bce(extreme, labels)));
}

TEST_CASE("bce gradient matches finite differences") {
  std::vector<double> p{0.3, 0.8, 0.55, 0.21};
  std::vector<double> y{0.0, 1.0, 1.0, 0.0};
  auto grad = bce_backward(p, y);
  auto loss = [&](std::span<const double> q) {
    return bce(q, y);
  };
  auto result = finite_diff_check(loss, p, grad, 1e-6);
  CHECK(result.max_rel_error < 1e-4);
}

TEST_CASE("adversary loss partial terms") {
  std::vector<double> p{0.7, 0.4};
  std::vector<double> y{1.0, 0.0};
  auto loss = adversary_loss(p, y);
  CHECK(loss.positive_part == doctest::Approx(-0.5 * std::log(0.7)).epsilon(1e-12));
  CHECK(loss.negative_part == doctest::Approx(-0.5 * std::log(0.6)).epsilon(1e-12));
  CHECK(loss.total == doctest::Approx(0.433750).epsilon(1e-5));
  // per-batch-mean convention: partials sum to plain mean bce
  CHECK(loss.total == doctest::Approx(bce(p, y)).epsilon(1e-15));

  std::vector<double> all_ones{1.0, 1.0};
  std::vector<double> q{0.6, 0.2};
  auto one_class = adversary_loss(q, all_ones);
  CHECK(one_class.negative_part == 0.0);
  CHECK(one_class.total == one_class.positive_part);

  std::vector<double> perfect{1.0, 0.0};
  std::vector<double> labels{1.0, 0.0};
  CHECK(adversary_loss(perfect, labels).total <= 2e-7);
}

TEST_CASE("adversary gradient equals the mean-bce gradient") {
  std::vector<double> p{0.7, 0.4, 0.9};
  std::vector<double> y{1.0, 0.0, 1.0};
  CHECK(adversary_loss_backward(p, y) == bce_backward(p, y));
  auto grad = adversary_loss_backward(p, y);
  auto loss = [&](std::span<const double> q) {
    return adversary_loss(q, y).total;
  };
  auto result = finite_diff_check(loss, p, grad, 1e-6);
  CHECK(result.max_rel_error < 1e-4);
}

TEST_CASE("counterfactual drop: zero rate is the identity") {
  NoiseSource noise(3);
  auto z = sample_gaussian(noise, 4, 6);
  NoiseSource drop_noise(4);
  auto [z_cf, drop_mask] = counterfactual_drop(z, 0.0, drop_noise);
  CHECK(z_cf == z);
  for (double v : drop_mask.data) {
    CHECK(v == 0.0);
  }
  CHECK_THROWS_AS(counterfactual_drop(z, 1.0, drop_noise), ConfigError);
}

TEST_CASE("forced all-ones drop mask ablates everything") {
  NoiseSource noise(5);
  auto z = sample_gaussian(noise, 3, 4);
  auto z_cf = apply_drop(z, DenseMatrix(3, 4, 1.0));
  for (double v : z_cf.data) {
    CHECK(v == 0.0);
  }
  CHECK_THROWS_AS(apply_drop(z, DenseMatrix(2, 4, 1.0)), DimensionError);
}

TEST_CASE("drop fraction concentrates at drop_p") {
  NoiseSource noise(6);
  DenseMatrix z(100, 1000, 1.0);
  NoiseSource drop_noise(7);
  auto [z_cf, drop_mask] = counterfactual_drop(z, 0.1, drop_noise);
  double dropped = 0.0;
  for (double v : drop_mask.data) {
    dropped += v;
  }
  CHECK(std::fabs(dropped / 1e5 - 0.1) < 0.01);
}

TEST_CASE("kl consistency closed forms") {
  std::vector<double> p{0.3, 0.8};
  CHECK(kl_consistency(p, p) == 0.0);

  std::vector<double> a{0.9};
  std::vector<double> b{0.5};
  const double expected = 0.9 * std::log(1.8) + 0.1 * std::log(0.2);
  CHECK(kl_consistency(a, b) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(kl_consistency(a, b) == doctest::Approx(0.368064).epsilon(1e-5));
}

TEST_CASE("kl is nonnegative over random pairs") {
  NoiseSource noise(8);
  for (int i = 0; i < 10000; ++i) {
    std::vector<double> p{0.001 + 0.998 * noise.uniform()};
    std::vector<double> q{0.001 + 0.998 * noise.uniform()};
    CHECK(kl_consistency(p, q) >= 0.0);
  }
}

TEST_CASE("kl gradients flow through both arguments") {
  std::vector<double> p{0.3, 0.8, 0.6};
  std::vector<double> q{0.5, 0.7, 0.2};
  auto [grad_p, grad_q] = kl_consistency_backward(p, q);

  auto loss_p = [&](std::span<const double> pp) {
    return kl_consistency(pp, q);
  };
  auto rp = finite_diff_check(loss_p, p, grad_p, 1e-6);
  CHECK(rp.max_rel_error < 1e-4);

  auto loss_q = [&](std::span<const double> qq) {
    return kl_consistency(p, qq);
  };
  auto rq = finite_diff_check(loss_q, q, grad_q, 1e-6);
  CHECK(rq.max_rel_error < 1e-4);
}

TEST_CASE("total loss assembly") {
  LossWeights w;
  w.alpha = 0.1;
  w.beta = 1.0;
  w.lambda1 = 0.001;
  w.lambda2 = 1.0;
  auto breakdown = total_loss(1.0, 0.5, 2.0, 0.1, 0.3, w);
  CHECK(breakdown.total == doctest::Approx(1.352).epsilon(1e-12));
  CHECK(breakdown.cls == 1.0);
  CHECK(breakdown.adv == 0.5);

  LossWeights zero;
  zero.alpha = zero.beta = zero.lambda1 = zero.lambda2 = 0.0;
  CHECK(total_loss(0.7, 9.0, 9.0, 9.0, 9.0, zero).total == 0.7);

  // linearity in the adversarial part
  const double delta = 0.25;
  auto bumped = total_loss(1.0, 0.5 + delta, 2.0, 0.1, 0.3, w);
  CHECK(breakdown.total - bumped.total == doctest::Approx(w.alpha * delta).epsilon(1e-12));

  CHECK_THROWS_WITH_AS(total_loss(1.0, std::nan(""), 0.0, 0.0, 0.0, w),
                       doctest::Contains("adv"), PoisonedError);
  LossWeights bad;
  bad.drop_p = 1.0;
  CHECK_THROWS_AS(total_loss(1.0, 0.0, 0.0, 0.0, 0.0, bad), ConfigError);
}

TEST_CASE("breakdown recomposes from its parts") {
  NoiseSource noise(9);
  LossWeights w;
  for (int i = 0; i < 100; ++i) {
    const double cls = noise.gaussian();
    const double adv = noise.gaussian();
    const double l1 = noise.gaussian();
    const double hs = noise.gaussian();
    const double inv = noise.gaussian();
    auto b = total_loss(cls, adv, l1, hs, inv, w);
    const double recomposed =
        b.cls - w.alpha * b.adv + w.lambda1 * b.mask_l1 + w.lambda2 * b.mask_hsic + w.beta * b.inv;
    CHECK(std::fabs(b.total - recomposed) <= 1e-12);
  }
}
