#include "causalmask/gradsuite.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "causalmask/dense.hpp"
#include "causalmask/errors.hpp"
#include "causalmask/gradcheck.hpp"
#include "causalmask/hsic.hpp"
#include "causalmask/losses.hpp"
#include "causalmask/mask.hpp"
#include "causalmask/mlp.hpp"
#include "causalmask/noise.hpp"
#include "causalmask/trainer.hpp"

namespace causalmask {

namespace {

constexpr std::size_t kN = 12;  // rows per instance
constexpr std::size_t kD = 8;   // embedding width

// Central differences use this step; a hidden pre-activation (or a sigmoid
// output's distance to its clamp) must clear kKinkMargin so no probe can
// straddle a ReLU kink or the probability clamp. Parameter probes move a
// pre-activation by at most ~|input| * step, two orders below the margin.
constexpr double kFdStep = 1e-5;
constexpr double kKinkMargin = 1e-3;
constexpr int kMaxRedraws = 200;

DenseMatrix random_matrix(std::size_t rows, std::size_t cols, NoiseSource& rng,
                          double scale = 1.0) {
  DenseMatrix m(rows, cols);
  for (double& v : m.data) {
    v = scale * rng.gaussian();
  }
  return m;
}

std::vector<double> random_labels(std::size_t n, NoiseSource& rng) {
  std::vector<double> y(n);
  for (double& v : y) {
    v = rng.bernoulli(0.5) ? 1.0 : 0.0;
  }
  y[0] = 0.0;  // both classes always present
  y[1] = 1.0;
  return y;
}

// Probabilities well inside the clamped region, so the loss stays smooth
// under finite-difference probes.
std::vector<double> random_probs(std::size_t n, NoiseSource& rng) {
  std::vector<double> p(n);
  for (double& v : p) {
    v = 0.1 + 0.8 * rng.uniform();
  }
  return p;
}

double weighted_sum(const DenseMatrix& weights, const DenseMatrix& values) {
  double s = 0.0;
  for (std::size_t i = 0; i < values.data.size(); ++i) {
    s += weights.data[i] * values.data[i];
  }
  return s;
}

// Smallest |pre-activation| over the hidden (ReLU) layers of one recorded
// forward pass; infinity when the net has no hidden layer.
double hidden_margin(const GradTape& tape) {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l + 1 < tape.pre_activations.size(); ++l) {
    for (double v : tape.pre_activations[l].data) {
      m = std::min(m, std::fabs(v));
    }
  }
  return m;
}

// Distance of every entry to the {0, 1} saturation points.
double unit_interval_margin(const DenseMatrix& values) {
  double m = std::numeric_limits<double>::infinity();
  for (double v : values.data) {
    m = std::min(m, std::min(v, 1.0 - v));
  }
  return m;
}

// Redraws an instance until `conditioned` clears every margin it checks.
void condition_instance(const char* case_name, const std::function<bool()>& conditioned) {
  for (int tries = 0; !conditioned(); ++tries) {
    if (tries >= kMaxRedraws) {
      throw Error(std::string("gradient suite: no well-conditioned instance for '") + case_name +
                  "' after " + std::to_string(kMaxRedraws) + " redraws");
    }
  }
}

GradCheckCase run_case(std::string name, const std::function<double(std::span<const double>)>& f,
                       std::span<const double> at, std::span<const double> analytic) {
  GradCheckCase c;
  c.name = std::move(name);
  c.checked = at.size();
  const FiniteDiffResult r = finite_diff_check(f, at, analytic, kFdStep);
  c.max_rel_error = r.max_rel_error;
  c.worst_index = r.worst_index;
  c.analytic_at_worst = r.analytic_at_worst;
  c.numeric_at_worst = r.numeric_at_worst;
  c.passed = r.max_rel_error < kGradTolerance;
  return c;
}

// --- plain MLP gradients -----------------------------------------------

GradCheckCase case_mlp(const char* name, Activation output_activation,
                       const std::vector<std::size_t>& dims, bool check_input, NoiseSource& rng) {
  MlpParams net;
  DenseMatrix x;
  DenseMatrix upstream;
  condition_instance(name, [&] {
    net = make_mlp(dims, output_activation, rng);
    x = random_matrix(kN, dims.front(), rng);
    upstream = random_matrix(kN, dims.back(), rng);
    auto [out, tape] = mlp_forward(net, x);
    if (hidden_margin(tape) < kKinkMargin) {
      return false;
    }
    return output_activation != Activation::kSigmoid ||
           unit_interval_margin(out) >= kKinkMargin;
  });

  auto forward_tape = mlp_forward(net, x);
  auto grads = mlp_backward(net, forward_tape.second, upstream);

  if (check_input) {
    auto loss = [&](std::span<const double> flat) {
      DenseMatrix probe = x;
      std::copy(flat.begin(), flat.end(), probe.data.begin());
      return weighted_sum(upstream, mlp_forward(net, probe).first);
    };
    return run_case(name, loss, x.data, grads.second.data);
  }
  auto loss = [&](std::span<const double> flat) {
    MlpParams probe = net;
    unflatten(flat, probe);
    return weighted_sum(upstream, mlp_forward(probe, x).first);
  };
  const std::vector<double> at = flatten(net);
  const std::vector<double> analytic = flatten_grads(grads.first);
  return run_case(name, loss, at, analytic);
}

// --- mask generator gradients -------------------------------------------

GradCheckCase case_mask(const char* name, bool check_input, NoiseSource& rng) {
  MaskNet mask_net;
  DenseMatrix embeddings;
  DenseMatrix upstream;
  condition_instance(name, [&] {
    mask_net = make_mask_net(kD, 1.3, rng);
    embeddings = random_matrix(kN, kD, rng);
    upstream = random_matrix(kN, kD, rng);
    auto [mask, tape] = compute_mask(embeddings, mask_net, MaskMode::kDeterministic);
    return hidden_margin(tape.net_tape) >= kKinkMargin &&
           unit_interval_margin(mask) >= kKinkMargin;
  });

  auto forward = compute_mask(embeddings, mask_net, MaskMode::kDeterministic);
  auto grads = mask_backward(mask_net, forward.second, upstream);

  if (check_input) {
    auto loss = [&](std::span<const double> flat) {
      DenseMatrix probe = embeddings;
      std::copy(flat.begin(), flat.end(), probe.data.begin());
      return weighted_sum(upstream,
                          compute_mask(probe, mask_net, MaskMode::kDeterministic).first);
    };
    return run_case(name, loss, embeddings.data, grads.second.data);
  }
  auto loss = [&](std::span<const double> flat) {
    MaskNet probe = mask_net;
    unflatten(flat, probe.net);
    return weighted_sum(upstream,
                        compute_mask(embeddings, probe, MaskMode::kDeterministic).first);
  };
  const std::vector<double> at = flatten(mask_net.net);
  const std::vector<double> analytic = flatten_grads(grads.first);
  return run_case(name, loss, at, analytic);
}

// --- loss terms over their direct arguments ------------------------------

GradCheckCase case_bce(NoiseSource& rng) {
  const std::vector<double> probs = random_probs(kN, rng);
  const std::vector<double> labels = random_labels(kN, rng);
  auto loss = [&](std::span<const double> p) { return bce(p, labels); };
  return run_case("loss/bce", loss, probs, bce_backward(probs, labels));
}

GradCheckCase case_adversary_loss(NoiseSource& rng) {
  const std::vector<double> probs = random_probs(kN, rng);
  const std::vector<double> labels = random_labels(kN, rng);
  auto loss = [&](std::span<const double> p) { return adversary_loss(p, labels).total; };
  return run_case("loss/adversary", loss, probs, adversary_loss_backward(probs, labels));
}

GradCheckCase case_kl(NoiseSource& rng) {
  const std::vector<double> p = random_probs(kN, rng);
  const std::vector<double> p_cf = random_probs(kN, rng);
  std::vector<double> at = p;
  at.insert(at.end(), p_cf.begin(), p_cf.end());
  auto [d_p, d_pcf] = kl_consistency_backward(p, p_cf);
  std::vector<double> analytic = std::move(d_p);
  analytic.insert(analytic.end(), d_pcf.begin(), d_pcf.end());
  auto loss = [&](std::span<const double> both) {
    return kl_consistency(both.subspan(0, kN), both.subspan(kN));
  };
  return run_case("loss/kl-consistency", loss, at, analytic);
}

GradCheckCase case_mask_sparsity(NoiseSource& rng) {
  DenseMatrix mask(kN, kD);
  const std::vector<double> entries = random_probs(kN * kD, rng);
  mask.data = entries;
  auto loss = [&](std::span<const double> flat) {
    DenseMatrix probe = mask;
    std::copy(flat.begin(), flat.end(), probe.data.begin());
    return mask_sparsity(probe);
  };
  return run_case("loss/mask-sparsity", loss, mask.data, mask_sparsity_backward(mask).data);
}

GradCheckCase case_hsic(NoiseSource& rng) {
  // Fixed bandwidth: the per-batch median is a constant of the forward pass,
  // not a differentiable function, so the checker pins it.
  KernelConfig kernel;
  kernel.mode = KernelConfig::Bandwidth::kFixed;
  kernel.fixed_sigma = 1.5;
  const DenseMatrix a = random_matrix(kN, 3, rng);
  const DenseMatrix b = random_matrix(kN, 2, rng);

  auto forward = hsic_biased(a, b, kernel);
  auto [d_a, d_b] = hsic_backward(forward.second, 1.0);
  std::vector<double> at = a.data;
  at.insert(at.end(), b.data.begin(), b.data.end());
  std::vector<double> analytic = std::move(d_a.data);
  analytic.insert(analytic.end(), d_b.data.begin(), d_b.data.end());

  auto loss = [&](std::span<const double> both) {
    DenseMatrix pa = a;
    DenseMatrix pb = b;
    std::copy(both.begin(), both.begin() + static_cast<std::ptrdiff_t>(pa.data.size()),
              pa.data.begin());
    std::copy(both.begin() + static_cast<std::ptrdiff_t>(pa.data.size()), both.end(),
              pb.data.begin());
    return hsic_biased(pa, pb, kernel).first;
  };
  return run_case("hsic/inputs (fixed bandwidth)", loss, at, analytic);
}

// --- per-player objectives ------------------------------------------------

// One frozen scene shared by the objective cases: a full bundle, embeddings,
// labels, and a pre-sampled counterfactual drop mask, redrawn until every
// net's hidden layers and probability outputs clear the margins.
struct ObjectiveScene {
  ModelBundle bundle;
  DenseMatrix embeddings;
  std::vector<double> labels;
  DenseMatrix drop_mask;
  KernelConfig kernel;
};

ObjectiveScene make_scene(const char* case_name, NoiseSource& rng) {
  ObjectiveScene s;
  s.kernel.mode = KernelConfig::Bandwidth::kFixed;
  s.kernel.fixed_sigma = 1.5;
  condition_instance(case_name, [&] {
    s.bundle = make_bundle(kD, 1.3, rng);
    s.embeddings = random_matrix(kN, kD, rng);
    s.labels = random_labels(kN, rng);
    s.drop_mask = counterfactual_drop(DenseMatrix(kN, kD), 0.3, rng).first;

    auto mask_fwd = compute_mask(s.embeddings, s.bundle.mask_net, MaskMode::kDeterministic);
    if (hidden_margin(mask_fwd.second.net_tape) < kKinkMargin ||
        unit_interval_margin(mask_fwd.first) < kKinkMargin) {
      return false;
    }
    const SplitFeatures split = split_features(s.embeddings, mask_fwd.first);

    auto factual = mlp_forward(s.bundle.classifier_h, split.z_c);
    auto cf = mlp_forward(s.bundle.classifier_h, apply_drop(split.z_c, s.drop_mask));
    auto adv = mlp_forward(s.bundle.adversary_d, split.z_nc);
    return unit_interval_margin(factual.first) >= kKinkMargin &&
           unit_interval_margin(cf.first) >= kKinkMargin &&
           hidden_margin(adv.second) >= kKinkMargin &&
           unit_interval_margin(adv.first) >= kKinkMargin;
  });
  return s;
}

GradCheckCase case_objective_adversary(NoiseSource& rng) {
  const char* name = "objective/adversary (params)";
  const ObjectiveScene s = make_scene(name, rng);
  const SplitFeatures split = bundle_split(s.bundle, s.embeddings, MaskMode::kDeterministic);

  const AdversaryObjective obj = adversary_objective(s.bundle.adversary_d, split.z_nc, s.labels);
  auto loss = [&](std::span<const double> flat) {
    MlpParams probe = s.bundle.adversary_d;
    unflatten(flat, probe);
    return adversary_objective(probe, split.z_nc, s.labels).loss.total;
  };
  const std::vector<double> at = flatten(s.bundle.adversary_d);
  return run_case(name, loss, at, flatten_grads(obj.grads));
}

GradCheckCase case_objective_classifier(NoiseSource& rng) {
  const char* name = "objective/classifier (params, counterfactual branch)";
  const ObjectiveScene s = make_scene(name, rng);
  const SplitFeatures split = bundle_split(s.bundle, s.embeddings, MaskMode::kDeterministic);
  const double beta = 1.0;

  const ClassifierObjective obj =
      classifier_objective(s.bundle.classifier_h, split.z_c, s.labels, beta, &s.drop_mask);
  auto loss = [&](std::span<const double> flat) {
    MlpParams probe = s.bundle.classifier_h;
    unflatten(flat, probe);
    return classifier_objective(probe, split.z_c, s.labels, beta, &s.drop_mask).value;
  };
  const std::vector<double> at = flatten(s.bundle.classifier_h);
  return run_case(name, loss, at, flatten_grads(obj.grads));
}

GradCheckCase case_objective_mask(const char* name, const LossWeights& weights,
                                  NoiseSource& rng) {
  const ObjectiveScene s = make_scene(name, rng);

  const MaskObjective obj = mask_objective(s.bundle, s.embeddings, s.labels, weights, s.kernel,
                                           &s.drop_mask, MaskMode::kDeterministic, nullptr);
  auto loss = [&](std::span<const double> flat) {
    ModelBundle probe = s.bundle;
    unflatten(flat, probe.mask_net.net);
    return mask_objective(probe, s.embeddings, s.labels, weights, s.kernel, &s.drop_mask,
                          MaskMode::kDeterministic, nullptr)
        .loss.total;
  };
  const std::vector<double> at = flatten(s.bundle.mask_net.net);
  return run_case(name, loss, at, flatten_grads(obj.grads));
}

}  // namespace

std::vector<GradCheckCase> run_gradient_suite(std::uint64_t seed) {
  NoiseSource rng(seed);
  std::vector<GradCheckCase> cases;
  cases.reserve(14);

  cases.push_back(case_mlp("mlp/params (identity output)", Activation::kIdentity, {kD, 6, 3},
                           /*check_input=*/false, rng));
  cases.push_back(case_mlp("mlp/params (sigmoid output)", Activation::kSigmoid, {kD, 5, 2},
                           /*check_input=*/false, rng));
  cases.push_back(case_mlp("mlp/input", Activation::kIdentity, {kD, 6, 3},
                           /*check_input=*/true, rng));
  cases.push_back(case_mask("mask/params", /*check_input=*/false, rng));
  cases.push_back(case_mask("mask/input", /*check_input=*/true, rng));
  cases.push_back(case_bce(rng));
  cases.push_back(case_adversary_loss(rng));
  cases.push_back(case_kl(rng));
  cases.push_back(case_mask_sparsity(rng));
  cases.push_back(case_hsic(rng));
  cases.push_back(case_objective_adversary(rng));
  cases.push_back(case_objective_classifier(rng));

  LossWeights composite;
  composite.alpha = 0.3;
  composite.beta = 1.0;
  composite.lambda1 = 0.05;
  composite.lambda2 = 1.0;
  composite.drop_p = 0.3;
  cases.push_back(case_objective_mask("objective/mask (full composite)", composite, rng));

  LossWeights adversarial_only;
  adversarial_only.alpha = 0.7;
  adversarial_only.beta = 0.0;
  adversarial_only.lambda1 = 0.0;
  adversarial_only.lambda2 = 0.0;
  adversarial_only.drop_p = 0.3;
  cases.push_back(
      case_objective_mask("objective/mask (adversarial term sign)", adversarial_only, rng));
  return cases;
}

bool all_passed(const std::vector<GradCheckCase>& cases) {
  return std::all_of(cases.begin(), cases.end(),
                     [](const GradCheckCase& c) { return c.passed; });
}

std::string format_gradient_suite(const std::vector<GradCheckCase>& cases) {
  std::string out;
  char line[160];
  for (const GradCheckCase& c : cases) {
    std::snprintf(line, sizeof line, "%-4s  %-48s  %4zu coords  max rel err %.3e\n",
                  c.passed ? "PASS" : "FAIL", c.name.c_str(), c.checked, c.max_rel_error);
    out += line;
  }
  const std::size_t passed =
      static_cast<std::size_t>(std::count_if(cases.begin(), cases.end(),
                                             [](const GradCheckCase& c) { return c.passed; }));
  std::snprintf(line, sizeof line, "%zu/%zu gradient checks passed (tolerance %.1e)\n", passed,
                cases.size(), kGradTolerance);
  out += line;
  return out;
}

}  // namespace causalmask
