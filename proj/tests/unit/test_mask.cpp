#include "causalmask/mask.hpp"

#include <cmath>

#include "causalmask/errors.hpp"
#include "causalmask/gradcheck.hpp"
#include "causalmask/scalar.hpp"
#include "doctest.h"

using namespace causalmask;

namespace {

MaskNet zero_logit_net(std::size_t d, double tau) {
  NoiseSource noise(1);
  auto m = make_mask_net(d, tau, noise, 0.0);
  for (auto& w : m.net.weights) {
    for (double& v : w.data) {
      v = 0.0;
    }
  }
  return m;
}

}  // namespace

TEST_CASE("zero logits in deterministic mode give an all-0.5 mask") {
  for (double tau : {0.1, 1.0, 5.0}) {
    auto net = zero_logit_net(4, tau);
    NoiseSource noise(2);
    auto e = sample_gaussian(noise, 3, 4);
    auto [mask, tape] = compute_mask(e, net, MaskMode::kDeterministic);
    for (double v : mask.data) {
      CHECK(v == 0.5);
    }
  }
}

TEST_CASE("small temperature saturates the mask") {
  // evaluate sigmoid(x/tau) through the module with fixed logits via bias
  auto net = zero_logit_net(2, 1e-3);
  net.net.biases[1] = {0.1, -0.1};
  NoiseSource noise(3);
  auto e = sample_gaussian(noise, 5, 2);
  auto [mask, tape] = compute_mask(e, net, MaskMode::kDeterministic);
  for (std::size_t i = 0; i < mask.rows; ++i) {
    CHECK(std::fabs(mask.at(i, 0) - 1.0) < 1e-6);
    CHECK(std::fabs(mask.at(i, 1) - 0.0) < 1e-6);
  }
}

TEST_CASE("temperature monotonicity at fixed logits") {
  std::vector<double> taus{0.25, 0.5, 1.0, 2.0, 4.0};
  // positive logit: non-increasing in tau; negative: non-decreasing
  double prev_pos = 1.0;
  double prev_neg = 0.0;
  for (double tau : taus) {
    auto net = zero_logit_net(2, tau);
    net.net.biases[1] = {0.7, -0.7};
    auto e = DenseMatrix(1, 2, 0.0);
    auto [mask, tape] = compute_mask(e, net, MaskMode::kDeterministic);
    CHECK(mask.at(0, 0) <= prev_pos);
    CHECK(mask.at(0, 1) >= prev_neg);
    prev_pos = mask.at(0, 0);
    prev_neg = mask.at(0, 1);
  }
}

TEST_CASE("deterministic mode is repeatable and draws no noise") {
  NoiseSource init(7);
  auto net = make_mask_net(6, 2.0, init);
  NoiseSource noise(8);
  auto e = sample_gaussian(noise, 4, 6);
  auto [m1, t1] = compute_mask(e, net, MaskMode::kDeterministic);
  auto [m2, t2] = compute_mask(e, net, MaskMode::kDeterministic);
  CHECK(m1 == m2);
}

TEST_CASE("stochastic mode replays under an equal seed and differs across draws") {
  NoiseSource init(9);
  auto net = make_mask_net(6, 2.0, init);
  NoiseSource data_noise(10);
  auto e = sample_gaussian(data_noise, 4, 6);
  NoiseSource g1(11);
  NoiseSource g2(11);
  auto [m1, t1] = compute_mask(e, net, MaskMode::kStochastic, &g1);
  auto [m2, t2] = compute_mask(e, net, MaskMode::kStochastic, &g2);
  CHECK(m1 == m2);
  auto [m3, t3] = compute_mask(e, net, MaskMode::kStochastic, &g1);
  CHECK(m1 != m3);
  for (double v : m1.data) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("configuration errors") {
  NoiseSource init(12);
  auto net = make_mask_net(3, 1.0, init);
  net.tau = 0.0;
  auto e = DenseMatrix(2, 3, 0.5);
  CHECK_THROWS_AS(compute_mask(e, net, MaskMode::kDeterministic), ConfigError);
  net.tau = 1.0;
  CHECK_THROWS_AS(compute_mask(e, net, MaskMode::kStochastic, nullptr), ConfigError);
  NoiseSource bad_tau(13);
  CHECK_THROWS_AS(make_mask_net(3, -1.0, bad_tau), ConfigError);
}

TEST_CASE("mask gradients match finite differences with frozen noise") {
  NoiseSource init(21);
  auto net = make_mask_net(5, 0.7, init);
  NoiseSource data_noise(22);
  auto e = sample_gaussian(data_noise, 6, 5);
  auto c = sample_gaussian(data_noise, 6, 5);  // projection weights
  NoiseSource gumbel_noise(23);
  auto g = sample_gumbel(gumbel_noise, 6, 5);

  // loss(params) = sum(c ⊙ sigmoid((MLP(E)+g)/tau)) with g frozen
  auto loss_at = [&](std::span<const double> flat) {
    MaskNet q = net;
    unflatten(flat, q.net);
    auto [logits, tape] = mlp_forward(q.net, e);
    double acc = 0.0;
    for (std::size_t i = 0; i < logits.data.size(); ++i) {
      acc += c.data[i] * clamp_prob(sigmoid((logits.data[i] + g.data[i]) / q.tau));
    }
    return acc;
  };

  // forward with the same frozen g, by injecting it through a fake stream:
  // compute logits, add g, squash manually through the public pieces
  auto [logits, net_tape] = mlp_forward(net.net, e);
  MaskTape tape;
  tape.net_tape = net_tape;
  tape.tau = net.tau;
  tape.mask = DenseMatrix(6, 5);
  for (std::size_t i = 0; i < logits.data.size(); ++i) {
    tape.mask.data[i] = clamp_prob(sigmoid((logits.data[i] + g.data[i]) / net.tau));
  }
  tape.valid = true;
  auto [grads, input_grad] = mask_backward(net, tape, c);
  auto result = finite_diff_check(loss_at, flatten(net.net), flatten_grads(grads), 1e-5);
  CHECK(result.max_rel_error < 1e-4);
}

TEST_CASE("mask_backward rejects stale tapes and bad shapes") {
  NoiseSource init(31);
  auto net = make_mask_net(3, 1.0, init);
  MaskTape blank;
  CHECK_THROWS_AS(mask_backward(net, blank, DenseMatrix(2, 3)), InvalidTapeError);
  auto e = DenseMatrix(2, 3, 0.25);
  auto [mask, tape] = compute_mask(e, net, MaskMode::kDeterministic);
  CHECK_THROWS_AS(mask_backward(net, tape, DenseMatrix(2, 4)), DimensionError);
}

TEST_CASE("split_features trivial masks") {
  auto e = DenseMatrix::from_rows({{2.0, -4.0}});

  auto ones = split_features(e, DenseMatrix(1, 2, 1.0));
  CHECK(ones.z_c == e);
  CHECK(ones.z_nc.at(0, 0) == 0.0);
  CHECK(ones.z_nc.at(0, 1) == 0.0);

  auto zeros = split_features(e, DenseMatrix(1, 2, 0.0));
  CHECK(zeros.z_nc == e);
  CHECK(zeros.z_c.at(0, 0) == 0.0);
  CHECK(zeros.z_c.at(0, 1) == 0.0);

  auto half = split_features(e, DenseMatrix(1, 2, 0.5));
  CHECK(half.z_c.at(0, 0) == 1.0);
  CHECK(half.z_c.at(0, 1) == -2.0);
  CHECK(half.z_nc.at(0, 0) == 1.0);
  CHECK(half.z_nc.at(0, 1) == -2.0);

  CHECK_THROWS_AS(split_features(e, DenseMatrix(2, 2, 0.5)), DimensionError);
}

TEST_CASE("reconstruction is exact over randomized masks and embeddings") {
  NoiseSource noise(41);
  for (int trial = 0; trial < 50; ++trial) {
    auto e = sample_gaussian(noise, 16, 24);
    for (double& v : e.data) {
      v *= std::pow(10.0, std::floor(noise.uniform() * 7.0) - 3.0);
    }
    DenseMatrix mask(16, 24);
    for (double& v : mask.data) {
      v = noise.uniform();
    }
    auto split = split_features(e, mask);
    for (std::size_t i = 0; i < e.data.size(); ++i) {
      CHECK(split.z_c.data[i] + split.z_nc.data[i] == e.data[i]);
    }
  }
}

TEST_CASE("mask_sparsity is the batch-mean row L1 norm") {
  CHECK(mask_sparsity(DenseMatrix(3, 8, 1.0)) == 8.0);
  CHECK(mask_sparsity(DenseMatrix(5, 8, 0.0)) == 0.0);
  auto rows = DenseMatrix::from_rows({{1.0, 0.0, 0.5}, {1.0, 0.0, 0.5}});
  CHECK(mask_sparsity(rows) == 1.5);
  auto grad = mask_sparsity_backward(rows);
  for (double v : grad.data) {
    CHECK(v == 0.5);
  }
  CHECK_THROWS_AS(mask_sparsity(DenseMatrix()), DimensionError);
}

TEST_CASE("deterministic mode equals the g=0 stochastic path") {
  // substituting g=0 into the stochastic formula must be the same function
  NoiseSource init(51);
  auto net = make_mask_net(4, 1.7, init);
  NoiseSource data_noise(52);
  auto e = sample_gaussian(data_noise, 5, 4);
  auto [logits, tape0] = mlp_forward(net.net, e);
  auto [det, tape1] = compute_mask(e, net, MaskMode::kDeterministic);
  for (std::size_t i = 0; i < det.data.size(); ++i) {
    CHECK(det.data[i] == clamp_prob(sigmoid((logits.data[i] + 0.0) / net.tau)));
  }
}
