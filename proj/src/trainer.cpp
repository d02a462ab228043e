#include "causalmask/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>

#include "causalmask/errors.hpp"

namespace causalmask {

namespace {

// Probe regimen: full-batch Adam on a fresh net with the adversary's
// architecture. The rate is deliberately hot so a strong residual signal
// saturates well within the step budget.
constexpr std::size_t kProbeSteps = 300;
constexpr double kProbeLr = 0.01;
constexpr double kProbeTrainFraction = 0.7;

void validate_labels_01(std::span<const double> labels, const char* where) {
  for (const double y : labels) {
    if (y != 0.0 && y != 1.0) {
      throw ConfigError(std::string(where) + ": labels must be 0 or 1");
    }
  }
}

LabeledBatch gather_batch(const LabeledBatch& src, std::span<const std::size_t> indices) {
  LabeledBatch out;
  out.embeddings = gather_rows(src.embeddings, indices);
  out.labels.reserve(indices.size());
  for (const std::size_t i : indices) {
    out.labels.push_back(src.labels[i]);
  }
  out.domain_id = src.domain_id;
  out.ground_truth = src.ground_truth;
  return out;
}

std::vector<double> gather_values(const std::vector<double>& src,
                                  std::span<const std::size_t> indices) {
  std::vector<double> out;
  out.reserve(indices.size());
  for (const std::size_t i : indices) {
    out.push_back(src[i]);
  }
  return out;
}

// Re-throws PoisonedError with the sub-step's name prepended, so an aborted
// step says which player and which term went non-finite.
template <typename Fn>
auto labeled_step(const char* label, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const PoisonedError& e) {
    throw PoisonedError(std::string(label) + ": " + e.what());
  }
}

DenseMatrix column_vector(std::vector<double> values) {
  DenseMatrix m;
  m.rows = values.size();
  m.cols = 1;
  m.data = std::move(values);
  return m;
}

}  // namespace

const char* ablation_name(AblationMode mode) {
  switch (mode) {
    case AblationMode::kFull:
      return "full";
    case AblationMode::kFactorizationOnly:
      return "factorization_only";
    case AblationMode::kMaskingOnly:
      return "masking_only";
    case AblationMode::kBothOff:
      return "both_off";
  }
  return "full";
}

AblationMode ablation_from_name(const std::string& name) {
  for (const AblationMode mode : {AblationMode::kFull, AblationMode::kFactorizationOnly,
                                  AblationMode::kMaskingOnly, AblationMode::kBothOff}) {
    if (name == ablation_name(mode)) {
      return mode;
    }
  }
  throw ConfigError("unknown ablation mode '" + name + "'");
}

TrainConfig apply_ablation(TrainConfig cfg, AblationMode mode) {
  switch (mode) {
    case AblationMode::kFull:
      break;
    case AblationMode::kFactorizationOnly:
      cfg.loss_weights.alpha = 0.0;
      cfg.loss_weights.beta = 0.0;
      break;
    case AblationMode::kMaskingOnly:
      cfg.loss_weights.lambda1 = 0.0;
      cfg.loss_weights.lambda2 = 0.0;
      break;
    case AblationMode::kBothOff:
      cfg.loss_weights.alpha = 0.0;
      cfg.loss_weights.beta = 0.0;
      cfg.loss_weights.lambda1 = 0.0;
      cfg.loss_weights.lambda2 = 0.0;
      break;
  }
  return cfg;
}

ModelBundle make_bundle(std::size_t d, double tau, NoiseSource& noise, AblationMode mode) {
  if (d == 0) {
    throw ConfigError("make_bundle: embedding dimension must be positive");
  }
  ModelBundle bundle;
  bundle.mask_net = make_mask_net(d, tau, noise);
  bundle.classifier_h = make_mlp({d, 1}, Activation::kSigmoid, noise);
  bundle.adversary_d =
      make_mlp({d, std::max<std::size_t>(d / 4, 1), 1}, Activation::kSigmoid, noise);
  bundle.mask_frozen = mode == AblationMode::kMaskingOnly || mode == AblationMode::kBothOff;
  bundle.frozen_znc_copies_input = mode == AblationMode::kMaskingOnly;
  return bundle;
}

OptimStates make_optim_states(const ModelBundle& bundle) {
  OptimStates opt;
  opt.mask_net = make_adam_state(bundle.mask_net.net);
  opt.classifier_h = make_adam_state(bundle.classifier_h);
  opt.adversary_d = make_adam_state(bundle.adversary_d);
  return opt;
}

SplitFeatures bundle_split(const ModelBundle& bundle, const DenseMatrix& embeddings,
                           MaskMode mode, NoiseSource* noise) {
  if (embeddings.cols != bundle.dim()) {
    throw DimensionError("bundle_split: embeddings have " + std::to_string(embeddings.cols) +
                         " columns, the model expects " + std::to_string(bundle.dim()));
  }
  if (bundle.mask_frozen) {
    SplitFeatures out;
    out.mask = DenseMatrix(embeddings.rows, embeddings.cols, 1.0);
    out.z_c = embeddings;
    out.z_nc = bundle.frozen_znc_copies_input ? embeddings
                                              : DenseMatrix(embeddings.rows, embeddings.cols);
    return out;
  }
  auto [mask, tape] = compute_mask(embeddings, bundle.mask_net, mode, noise);
  (void)tape;
  return split_features(embeddings, mask);
}

AdversaryObjective adversary_objective(const MlpParams& adversary, const DenseMatrix& z_nc,
                                       std::span<const double> labels) {
  if (z_nc.rows != labels.size()) {
    throw DimensionError("adversary_objective: labels/rows mismatch");
  }
  auto [prob, tape] = mlp_forward(adversary, z_nc);
  AdversaryObjective out;
  out.loss = adversary_loss(prob.data, labels);
  auto [grads, input_grad] =
      mlp_backward(adversary, tape, column_vector(adversary_loss_backward(prob.data, labels)));
  (void)input_grad;
  out.grads = std::move(grads);
  return out;
}

ClassifierObjective classifier_objective(const MlpParams& classifier, const DenseMatrix& z_c,
                                         std::span<const double> labels, double beta,
                                         const DenseMatrix* drop_mask) {
  const std::size_t n = z_c.rows;
  if (n != labels.size()) {
    throw DimensionError("classifier_objective: labels/rows mismatch");
  }
  if (drop_mask != nullptr && !drop_mask->same_shape(z_c)) {
    throw DimensionError("classifier_objective: drop mask shape mismatch");
  }
  auto [prob, tape] = mlp_forward(classifier, z_c);
  const std::span<const double> p(prob.data);
  ClassifierObjective out;
  out.cls = bce(p, labels);
  std::vector<double> upstream = bce_backward(p, labels);
  MlpGrads cf_grads;
  bool have_cf = false;
  if (beta > 0.0 && drop_mask != nullptr) {
    const DenseMatrix z_cf = apply_drop(z_c, *drop_mask);
    auto [prob_cf, tape_cf] = mlp_forward(classifier, z_cf);
    const std::span<const double> p_cf(prob_cf.data);
    out.inv = kl_consistency(p, p_cf);
    auto [g_p, g_pcf] = kl_consistency_backward(p, p_cf);
    for (std::size_t i = 0; i < n; ++i) {
      upstream[i] += beta * g_p[i];
      g_pcf[i] *= beta;
    }
    auto [grads_cf, input_cf] = mlp_backward(classifier, tape_cf, column_vector(std::move(g_pcf)));
    (void)input_cf;
    cf_grads = std::move(grads_cf);
    have_cf = true;
  }
  auto [grads, input_grad] = mlp_backward(classifier, tape, column_vector(std::move(upstream)));
  (void)input_grad;
  out.grads = std::move(grads);
  if (have_cf) {
    accumulate_grads(out.grads, cf_grads);
  }
  out.value = out.cls + beta * out.inv;
  return out;
}

MaskObjective mask_objective(const ModelBundle& bundle, const DenseMatrix& embeddings,
                             std::span<const double> labels, const LossWeights& weights,
                             const KernelConfig& kernel, const DenseMatrix* drop_mask,
                             MaskMode mask_mode, NoiseSource* noise) {
  if (bundle.mask_frozen) {
    throw ConfigError("mask_objective: the bundle's mask is frozen");
  }
  const std::size_t n = embeddings.rows;
  if (labels.size() != n) {
    throw DimensionError("mask_objective: labels/rows mismatch");
  }
  if (embeddings.cols != bundle.dim()) {
    throw DimensionError("mask_objective: embedding width mismatch");
  }
  if (drop_mask != nullptr && !drop_mask->same_shape(embeddings)) {
    throw DimensionError("mask_objective: drop mask shape mismatch");
  }

  auto [mask, tape] = compute_mask(embeddings, bundle.mask_net, mask_mode, noise);
  SplitFeatures split = split_features(embeddings, mask);

  // Gradients of the total w.r.t. the split features, accumulated branch by
  // branch, then chained through z_c = M ⊙ E and z_nc = E - z_c into the mask.
  DenseMatrix g_zc(n, embeddings.cols);
  DenseMatrix g_znc(n, embeddings.cols);

  auto [prob, h_tape] = mlp_forward(bundle.classifier_h, split.z_c);
  const std::span<const double> p(prob.data);
  const double cls = bce(p, labels);
  std::vector<double> upstream_h = bce_backward(p, labels);

  double inv = 0.0;
  if (weights.beta > 0.0 && drop_mask != nullptr) {
    const DenseMatrix z_cf = apply_drop(split.z_c, *drop_mask);
    auto [prob_cf, tape_cf] = mlp_forward(bundle.classifier_h, z_cf);
    const std::span<const double> p_cf(prob_cf.data);
    inv = kl_consistency(p, p_cf);
    auto [g_p, g_pcf] = kl_consistency_backward(p, p_cf);
    for (std::size_t i = 0; i < n; ++i) {
      upstream_h[i] += weights.beta * g_p[i];
      g_pcf[i] *= weights.beta;
    }
    auto [grads_cf, g_zcf] = mlp_backward(bundle.classifier_h, tape_cf,
                                          column_vector(std::move(g_pcf)));
    (void)grads_cf;
    // z_cf = z_c ⊙ (1 - B)
    for (std::size_t i = 0; i < g_zcf.data.size(); ++i) {
      g_zc.data[i] += g_zcf.data[i] * (1.0 - drop_mask->data[i]);
    }
  }
  {
    auto [grads_h, g_main] =
        mlp_backward(bundle.classifier_h, h_tape, column_vector(std::move(upstream_h)));
    (void)grads_h;
    add_inplace(g_zc, g_main);
  }

  // The mask ascends the adversary's loss: the -alpha weight flips the
  // upstream into the adversary's input.
  double adv = 0.0;
  if (weights.alpha > 0.0) {
    auto [d_prob, d_tape] = mlp_forward(bundle.adversary_d, split.z_nc);
    const std::span<const double> dp(d_prob.data);
    adv = adversary_loss(dp, labels).total;
    std::vector<double> g_adv = adversary_loss_backward(dp, labels);
    for (double& g : g_adv) {
      g *= -weights.alpha;
    }
    auto [grads_d, g_in] = mlp_backward(bundle.adversary_d, d_tape,
                                        column_vector(std::move(g_adv)));
    (void)grads_d;
    add_inplace(g_znc, g_in);
  }

  double l1 = 0.0;
  DenseMatrix d_mask(n, embeddings.cols);
  if (weights.lambda1 > 0.0) {
    l1 = mask_sparsity(mask);
    d_mask = mask_sparsity_backward(mask, weights.lambda1);
  }

  double hs = 0.0;
  if (weights.lambda2 > 0.0) {
    auto [value, hsic_tape] = hsic_biased(split.z_c, split.z_nc, kernel);
    hs = value;
    auto [g_a, g_b] = hsic_backward(hsic_tape, weights.lambda2);
    add_inplace(g_zc, g_a);
    add_inplace(g_znc, g_b);
  }

  MaskObjective out;
  out.loss = total_loss(cls, adv, l1, hs, inv, weights);

  for (std::size_t i = 0; i < d_mask.data.size(); ++i) {
    d_mask.data[i] += (g_zc.data[i] - g_znc.data[i]) * embeddings.data[i];
  }
  auto [mask_grads, g_embed] = mask_backward(bundle.mask_net, tape, d_mask);
  (void)g_embed;
  out.grads = std::move(mask_grads);
  out.mask = std::move(split.mask);
  return out;
}

LossBreakdown train_step(ModelBundle& bundle, OptimStates& opt, const LabeledBatch& batch,
                         const TrainConfig& cfg, NoiseSource& noise) {
  const DenseMatrix& embeddings = batch.embeddings;
  const std::size_t n = embeddings.rows;
  if (embeddings.cols != bundle.dim()) {
    throw DimensionError("train_step: embedding width mismatch");
  }
  if (batch.labels.size() != n) {
    throw DimensionError("train_step: labels/rows mismatch");
  }
  if (n < 4) {
    throw InsufficientBatchError("train_step needs at least 4 rows, got " + std::to_string(n));
  }
  validate_labels_01(batch.labels, "train_step");
  const LossWeights& w = cfg.loss_weights;

  // Shared counterfactual drop mask, sampled before any sub-step.
  DenseMatrix drop;
  const DenseMatrix* drop_ptr = nullptr;
  if (w.beta > 0.0) {
    drop = sample_bernoulli(noise, n, embeddings.cols, w.drop_p);
    drop_ptr = &drop;
  }

  double adv_measured = 0.0;
  if (w.alpha > 0.0) {
    labeled_step("train step A (adversary)", [&] {
      const SplitFeatures split = bundle_split(bundle, embeddings, MaskMode::kStochastic, &noise);
      AdversaryObjective obj = adversary_objective(bundle.adversary_d, split.z_nc, batch.labels);
      adv_measured = obj.loss.total;
      adam_step(bundle.adversary_d, obj.grads, opt.adversary_d, cfg.learning_rate);
    });
  }

  double cls_measured = 0.0;
  double inv_measured = 0.0;
  labeled_step("train step B (classifier)", [&] {
    const SplitFeatures split = bundle_split(bundle, embeddings, MaskMode::kStochastic, &noise);
    ClassifierObjective obj =
        classifier_objective(bundle.classifier_h, split.z_c, batch.labels, w.beta, drop_ptr);
    cls_measured = obj.cls;
    inv_measured = obj.inv;
    adam_step(bundle.classifier_h, obj.grads, opt.classifier_h, cfg.learning_rate);
  });

  if (!bundle.mask_frozen) {
    return labeled_step("train step C (mask)", [&] {
      MaskObjective obj = mask_objective(bundle, embeddings, batch.labels, w, KernelConfig{},
                                         drop_ptr, MaskMode::kStochastic, &noise);
      adam_step(bundle.mask_net.net, obj.grads, opt.mask_net, cfg.learning_rate);
      return obj.loss;
    });
  }
  // Frozen mask: there is no step C; report the step-A/B measurements.
  return labeled_step("train step totals", [&] {
    return total_loss(cls_measured, adv_measured, 0.0, 0.0, inv_measured, w);
  });
}

TrainerState make_trainer_state(std::size_t d, const TrainConfig& cfg, AblationMode mode) {
  TrainConfig applied = apply_ablation(cfg, mode);
  applied.validate();
  TrainerState state;
  state.cfg = applied;
  state.mode = mode;
  state.noise = NoiseSource(applied.seed);
  state.bundle = make_bundle(d, applied.tau_start, state.noise, mode);
  state.opt = make_optim_states(state.bundle);
  state.best_bundle = state.bundle;
  return state;
}

void fit_epochs(TrainerState& state, const LabeledBatch& train_set, const LabeledBatch& val_set,
                std::size_t epoch_limit) {
  const TrainConfig& cfg = state.cfg;
  const LossWeights& w = cfg.loss_weights;
  const std::size_t d = state.bundle.dim();
  const std::size_t n_train = train_set.embeddings.rows;
  const std::size_t n_val = val_set.embeddings.rows;
  if (n_train == 0) {
    throw ConfigError("fit: training set is empty");
  }
  if (n_val == 0) {
    throw ConfigError("fit: validation set is empty");
  }
  if (train_set.embeddings.cols != d || val_set.embeddings.cols != d) {
    throw DimensionError("fit: dataset width disagrees with the model dimension");
  }
  if (train_set.labels.size() != n_train || val_set.labels.size() != n_val) {
    throw DimensionError("fit: labels/rows mismatch");
  }
  validate_labels_01(train_set.labels, "fit (train)");
  validate_labels_01(val_set.labels, "fit (val)");
  if (n_train < 4) {
    throw InsufficientBatchError("fit: the training set needs at least 4 rows");
  }
  if (w.lambda2 > 0.0 && n_val < 4) {
    throw InsufficientBatchError(
        "fit: the validation set needs at least 4 rows for the independence term");
  }

  if (state.finished) {
    return;
  }
  if (state.next_epoch >= cfg.max_epochs) {
    state.finished = true;
    return;
  }

  // Fixed validation drop mask: one draw per run, independent of the training
  // stream, so validation totals are comparable across epochs and resumes.
  DenseMatrix val_drop;
  const DenseMatrix* val_drop_ptr = nullptr;
  if (w.beta > 0.0) {
    NoiseSource val_rng(cfg.seed ^ kValDropSalt);
    val_drop = sample_bernoulli(val_rng, n_val, d, w.drop_p);
    val_drop_ptr = &val_drop;
  }

  const std::size_t batch_size = std::min(cfg.batch_size, n_train);
  std::vector<std::size_t> order(n_train);

  while (!state.finished && state.next_epoch < cfg.max_epochs && state.next_epoch < epoch_limit) {
    const std::size_t epoch = state.next_epoch;
    state.bundle.mask_net.tau = tau_at_epoch(cfg, epoch);
    std::iota(order.begin(), order.end(), std::size_t{0});
    state.noise.shuffle(order);

    double sum_cls = 0.0, sum_adv = 0.0, sum_l1 = 0.0, sum_hsic = 0.0, sum_inv = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n_train; start += batch_size) {
      const std::size_t len = std::min(batch_size, n_train - start);
      if (len < 4) {
        break;  // a trailing sliver cannot feed the independence estimator
      }
      const LabeledBatch batch = gather_batch(train_set, std::span(order).subspan(start, len));
      const LossBreakdown bd = train_step(state.bundle, state.opt, batch, cfg, state.noise);
      sum_cls += bd.cls;
      sum_adv += bd.adv;
      sum_l1 += bd.mask_l1;
      sum_hsic += bd.mask_hsic;
      sum_inv += bd.inv;
      ++batches;
    }

    const double nb = static_cast<double>(batches);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.tau = state.bundle.mask_net.tau;
    rec.train_loss =
        total_loss(sum_cls / nb, sum_adv / nb, sum_l1 / nb, sum_hsic / nb, sum_inv / nb, w);
    const EvalResult ev = evaluate(state.bundle, val_set, w, val_drop_ptr);
    rec.val_loss = ev.loss;
    rec.val_accuracy = ev.accuracy;
    rec.val_adversary_accuracy = ev.adversary_accuracy;
    rec.val_mask_sparsity = ev.mask_sparsity;
    rec.val_hsic = ev.loss.mask_hsic;
    state.history.epochs.push_back(rec);

    if (ev.loss.total < state.best_val_total) {
      state.best_val_total = ev.loss.total;
      state.best_bundle = state.bundle;
      state.history.best_epoch = epoch;
      state.epochs_since_improvement = 0;
    } else {
      ++state.epochs_since_improvement;
      if (state.epochs_since_improvement >= cfg.early_stop_patience) {
        state.history.stopped_early = true;
        state.finished = true;
      }
    }
    ++state.next_epoch;
    if (state.next_epoch >= cfg.max_epochs) {
      state.finished = true;
    }
  }
}

FitResult fit(const LabeledBatch& train_set, const LabeledBatch& val_set, const TrainConfig& cfg,
              AblationMode mode) {
  TrainerState state = make_trainer_state(train_set.embeddings.cols, cfg, mode);
  fit_epochs(state, train_set, val_set);
  return FitResult{state.best_bundle, state.history};
}

std::vector<double> predict(const ModelBundle& bundle, const DenseMatrix& embeddings) {
  const SplitFeatures split = bundle_split(bundle, embeddings, MaskMode::kDeterministic, nullptr);
  auto [prob, tape] = mlp_forward(bundle.classifier_h, split.z_c);
  (void)tape;
  return std::move(prob.data);
}

std::vector<double> mean_mask_profile(const ModelBundle& bundle, const DenseMatrix& embeddings) {
  if (embeddings.rows == 0) {
    throw ConfigError("mean_mask_profile: empty dataset");
  }
  const SplitFeatures split = bundle_split(bundle, embeddings, MaskMode::kDeterministic, nullptr);
  std::vector<double> profile = column_sums(split.mask);
  const double n = static_cast<double>(embeddings.rows);
  for (double& v : profile) {
    v /= n;
  }
  return profile;
}

EvalResult evaluate(const ModelBundle& bundle, const LabeledBatch& data,
                    const LossWeights& weights, const DenseMatrix* drop_mask) {
  const std::size_t n = data.embeddings.rows;
  if (n == 0) {
    throw ConfigError("evaluate: empty dataset");
  }
  if (data.embeddings.cols != bundle.dim()) {
    throw DimensionError("evaluate: embedding width mismatch");
  }
  if (data.labels.size() != n) {
    throw DimensionError("evaluate: labels/rows mismatch");
  }
  validate_labels_01(data.labels, "evaluate");
  if (drop_mask != nullptr && !drop_mask->same_shape(data.embeddings)) {
    throw DimensionError("evaluate: drop mask shape mismatch");
  }

  const SplitFeatures split = bundle_split(bundle, data.embeddings, MaskMode::kDeterministic,
                                           nullptr);
  // The probabilities come from the same path predict() uses, so reported
  // accuracies are reproducible from the returned bundle alone.
  const std::vector<double> p = predict(bundle, data.embeddings);

  EvalResult out;
  out.accuracy = accuracy(p, data.labels);
  out.mask_sparsity = mask_sparsity(split.mask);

  const double cls = bce(p, data.labels);

  auto [d_prob, d_tape] = mlp_forward(bundle.adversary_d, split.z_nc);
  (void)d_tape;
  out.adversary_accuracy = accuracy(d_prob.data, data.labels);
  const double adv =
      weights.alpha > 0.0 ? adversary_loss(d_prob.data, data.labels).total : 0.0;

  const double l1 = weights.lambda1 > 0.0 ? out.mask_sparsity : 0.0;

  double hs = 0.0;
  if (weights.lambda2 > 0.0) {
    hs = hsic_biased(split.z_c, split.z_nc, KernelConfig{}).first;
  }

  double inv = 0.0;
  if (weights.beta > 0.0 && drop_mask != nullptr) {
    const DenseMatrix z_cf = apply_drop(split.z_c, *drop_mask);
    auto [prob_cf, tape_cf] = mlp_forward(bundle.classifier_h, z_cf);
    (void)tape_cf;
    inv = kl_consistency(p, prob_cf.data);
  }

  out.loss = total_loss(cls, adv, l1, hs, inv, weights);
  return out;
}

double adversary_probe(const ModelBundle& bundle, const LabeledBatch& data, std::uint64_t seed) {
  const std::size_t n = data.embeddings.rows;
  if (n < 2) {
    throw InsufficientBatchError("adversary_probe needs at least 2 samples");
  }
  if (data.labels.size() != n) {
    throw DimensionError("adversary_probe: labels/rows mismatch");
  }
  validate_labels_01(data.labels, "adversary_probe");

  const SplitFeatures split = bundle_split(bundle, data.embeddings, MaskMode::kDeterministic,
                                           nullptr);
  NoiseSource rng(seed ^ kProbeSalt);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);
  const std::size_t train_n = std::clamp<std::size_t>(
      static_cast<std::size_t>(kProbeTrainFraction * static_cast<double>(n)), 1, n - 1);
  const std::span<const std::size_t> train_idx(order.data(), train_n);
  const std::span<const std::size_t> test_idx(order.data() + train_n, n - train_n);

  const DenseMatrix z_train = gather_rows(split.z_nc, train_idx);
  const DenseMatrix z_test = gather_rows(split.z_nc, test_idx);
  const std::vector<double> y_train = gather_values(data.labels, train_idx);
  const std::vector<double> y_test = gather_values(data.labels, test_idx);

  const std::size_t d = bundle.dim();
  MlpParams probe =
      make_mlp({d, std::max<std::size_t>(d / 4, 1), 1}, Activation::kSigmoid, rng);
  AdamState adam = make_adam_state(probe);
  for (std::size_t step = 0; step < kProbeSteps; ++step) {
    auto [prob, tape] = mlp_forward(probe, z_train);
    auto [grads, input_grad] =
        mlp_backward(probe, tape, column_vector(bce_backward(prob.data, y_train)));
    (void)input_grad;
    adam_step(probe, grads, adam, kProbeLr);
  }
  auto [prob_test, tape_test] = mlp_forward(probe, z_test);
  (void)tape_test;
  return accuracy(prob_test.data, y_test);
}

MetricsReport domain_shift_report(
    const ModelBundle& bundle,
    const std::vector<std::pair<std::string, const LabeledBatch*>>& datasets, std::uint64_t seed,
    const std::vector<std::pair<std::string, std::string>>& config_echo, double mask_threshold) {
  MetricsReport report;
  report.seed = seed;
  report.config_echo = config_echo;
  for (const auto& [name, batch] : datasets) {
    const std::vector<double> scores = predict(bundle, batch->embeddings);
    MetricsRow row;
    row.name = name;
    row.n = batch->embeddings.rows;
    row.accuracy = accuracy(scores, batch->labels);
    row.average_precision = average_precision(scores, batch->labels);
    report.rows.push_back(std::move(row));
  }
  for (const auto& [name, batch] : datasets) {
    (void)name;
    if (batch->ground_truth.empty()) {
      continue;
    }
    const SplitFeatures split =
        bundle_split(bundle, batch->embeddings, MaskMode::kDeterministic, nullptr);
    std::vector<double> profile = column_sums(split.mask);
    const double rows_n = static_cast<double>(batch->embeddings.rows);
    for (double& v : profile) {
      v /= rows_n;
    }
    const MaskRecovery recovery = mask_recovery(profile, batch->ground_truth, mask_threshold);
    MaskMetrics metrics;
    metrics.precision = recovery.precision;
    metrics.recall = recovery.recall;
    metrics.iou = recovery.iou;
    metrics.mean_sparsity = mask_sparsity(split.mask);
    metrics.vacuous_recall = recovery.vacuous_recall;
    report.mask = metrics;
    break;
  }
  return report;
}

AblationRow run_ablation_row(const Benchmark& bench, const TrainConfig& cfg, AblationMode mode) {
  if (bench.test_shifted.empty()) {
    throw ConfigError("run_ablation_row: the benchmark has no shifted test sets");
  }
  const FitResult result = fit(bench.train, bench.val, cfg, mode);
  AblationRow row;
  row.mode = mode;
  row.epochs_run = result.history.epochs.size();
  row.same_accuracy = accuracy(predict(result.bundle, bench.test_same_domain.embeddings),
                               bench.test_same_domain.labels);
  double shifted_sum = 0.0;
  for (const LabeledBatch& shifted : bench.test_shifted) {
    shifted_sum += accuracy(predict(result.bundle, shifted.embeddings), shifted.labels);
  }
  row.shifted_accuracy = shifted_sum / static_cast<double>(bench.test_shifted.size());
  const std::vector<double> profile =
      mean_mask_profile(result.bundle, bench.test_same_domain.embeddings);
  row.mask_iou = mask_recovery(profile, bench.test_same_domain.ground_truth).iou;
  row.probe_accuracy = adversary_probe(result.bundle, bench.test_shifted.front(), cfg.seed);
  return row;
}

namespace {

void breakdown_into_doc(TextDoc& doc, const std::string& prefix, const LossBreakdown& bd) {
  doc.set_double(prefix + "cls", bd.cls);
  doc.set_double(prefix + "adv", bd.adv);
  doc.set_double(prefix + "mask_l1", bd.mask_l1);
  doc.set_double(prefix + "mask_hsic", bd.mask_hsic);
  doc.set_double(prefix + "inv", bd.inv);
  doc.set_double(prefix + "total", bd.total);
}

LossBreakdown breakdown_from_doc(const TextDoc& doc, const std::string& prefix) {
  LossBreakdown bd;
  bd.cls = doc.require_double(prefix + "cls");
  bd.adv = doc.require_double(prefix + "adv");
  bd.mask_l1 = doc.require_double(prefix + "mask_l1");
  bd.mask_hsic = doc.require_double(prefix + "mask_hsic");
  bd.inv = doc.require_double(prefix + "inv");
  bd.total = doc.require_double(prefix + "total");
  return bd;
}

}  // namespace

TextDoc history_to_doc(const TrainHistory& history) {
  TextDoc doc;
  doc.schema = kHistorySchema;
  doc.set_u64("epoch.count", history.epochs.size());
  doc.set_u64("best_epoch", history.best_epoch);
  doc.set_bool("stopped_early", history.stopped_early);
  for (std::size_t i = 0; i < history.epochs.size(); ++i) {
    const EpochRecord& rec = history.epochs[i];
    const std::string prefix = "epoch." + std::to_string(i) + ".";
    doc.set_u64(prefix + "epoch", rec.epoch);
    doc.set_double(prefix + "tau", rec.tau);
    breakdown_into_doc(doc, prefix + "train.", rec.train_loss);
    breakdown_into_doc(doc, prefix + "val.", rec.val_loss);
    doc.set_double(prefix + "val_accuracy", rec.val_accuracy);
    doc.set_double(prefix + "val_adversary_accuracy", rec.val_adversary_accuracy);
    doc.set_double(prefix + "val_mask_sparsity", rec.val_mask_sparsity);
    doc.set_double(prefix + "val_hsic", rec.val_hsic);
  }
  return doc;
}

TrainHistory history_from_doc(const TextDoc& doc) {
  if (doc.schema != kHistorySchema) {
    throw FormatError("expected schema '" + std::string(kHistorySchema) + "', found '" +
                      doc.schema + "'");
  }
  TrainHistory history;
  const std::uint64_t count = doc.require_u64("epoch.count");
  history.best_epoch = doc.require_u64("best_epoch");
  history.stopped_early = doc.require_bool("stopped_early");
  if (count == 0 && history.best_epoch != 0) {
    throw FormatError("best_epoch refers past the recorded epochs");
  }
  if (count > 0 && history.best_epoch >= count) {
    throw FormatError("best_epoch refers past the recorded epochs");
  }
  history.epochs.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::string prefix = "epoch." + std::to_string(i) + ".";
    EpochRecord rec;
    rec.epoch = doc.require_u64(prefix + "epoch");
    if (rec.epoch != i) {
      throw FormatError("history epoch indices are not consecutive");
    }
    rec.tau = doc.require_double(prefix + "tau");
    rec.train_loss = breakdown_from_doc(doc, prefix + "train.");
    rec.val_loss = breakdown_from_doc(doc, prefix + "val.");
    rec.val_accuracy = doc.require_double(prefix + "val_accuracy");
    rec.val_adversary_accuracy = doc.require_double(prefix + "val_adversary_accuracy");
    rec.val_mask_sparsity = doc.require_double(prefix + "val_mask_sparsity");
    rec.val_hsic = doc.require_double(prefix + "val_hsic");
    history.epochs.push_back(rec);
  }
  return history;
}

}  // namespace causalmask
