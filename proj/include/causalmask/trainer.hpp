#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "causalmask/adam.hpp"
#include "causalmask/config.hpp"
#include "causalmask/hsic.hpp"
#include "causalmask/losses.hpp"
#include "causalmask/mask.hpp"
#include "causalmask/metrics.hpp"
#include "causalmask/mlp.hpp"
#include "causalmask/noise.hpp"
#include "causalmask/scm.hpp"

namespace causalmask {

// The four rows of the module-ablation comparison.
enum class AblationMode { kFull, kFactorizationOnly, kMaskingOnly, kBothOff };

const char* ablation_name(AblationMode mode);  // "full", "factorization_only", ...
AblationMode ablation_from_name(const std::string& name);  // ConfigError on unknown names

// Zeroes the loss weights a mode disables: factorization_only drops the
// adversarial and counterfactual terms (alpha = beta = 0), masking_only drops
// the mask regularizers (lambda1 = lambda2 = 0), both_off drops all four.
TrainConfig apply_ablation(TrainConfig cfg, AblationMode mode);

// The three players. When mask_frozen is set the mask net is carried but
// bypassed: the mask is all-ones, z_c = E, and z_nc is zero — unless
// frozen_znc_copies_input is also set, in which case the adversary is fed a
// full copy of E as z_nc (the "masking only" row; the z_c + z_nc == E
// identity is deliberately waived there, since a zero z_nc would starve the
// adversary).
struct ModelBundle {
  MaskNet mask_net;        // [d, d, d], identity output, logits biased +1
  MlpParams classifier_h;  // [d, 1], sigmoid output
  MlpParams adversary_d;   // [d, max(d/4, 1), 1], sigmoid output
  bool mask_frozen = false;
  bool frozen_znc_copies_input = false;

  std::size_t dim() const { return mask_net.net.layer_dims.front(); }
};

// Draws the mask net, then the classifier, then the adversary from `noise`
// (the order is part of the determinism contract) and applies the mode's
// structural flags.
ModelBundle make_bundle(std::size_t d, double tau, NoiseSource& noise,
                        AblationMode mode = AblationMode::kFull);

struct OptimStates {
  AdamState mask_net;
  AdamState classifier_h;
  AdamState adversary_d;
};
OptimStates make_optim_states(const ModelBundle& bundle);

// Mask + split honoring the bundle's freeze flags. In frozen mode the mask is
// all-ones and no noise is consumed; otherwise the mask is computed in `mode`
// (stochastic draws one Gumbel per entry from `noise`).
SplitFeatures bundle_split(const ModelBundle& bundle, const DenseMatrix& embeddings,
                           MaskMode mode, NoiseSource* noise = nullptr);

// ---------------------------------------------------------------------------
// Per-player objectives. Each returns the loss together with the analytic
// gradient of that loss w.r.t. its own player's parameters, the other players
// held fixed — exactly what one alternating update consumes, and what the
// finite-difference suite checks.
// ---------------------------------------------------------------------------

struct AdversaryObjective {
  AdversaryLoss loss;  // one-class partial terms + total
  MlpGrads grads;      // w.r.t. the adversary's parameters (descent direction)
};
// Prediction loss of the adversary on the non-causal features.
AdversaryObjective adversary_objective(const MlpParams& adversary, const DenseMatrix& z_nc,
                                       std::span<const double> labels);

struct ClassifierObjective {
  double cls = 0.0;    // mean BCE of h(z_c)
  double inv = 0.0;    // raw counterfactual KL (0 when beta == 0 or no drop mask)
  double value = 0.0;  // cls + beta * inv
  MlpGrads grads;      // w.r.t. the classifier's parameters
};
// Classification + counterfactual-consistency objective of h. The drop mask
// (same shape as z_c) is applied as z_cf = z_c ⊙ (1 - B); KL gradients flow
// through both the factual and counterfactual branches.
ClassifierObjective classifier_objective(const MlpParams& classifier, const DenseMatrix& z_c,
                                         std::span<const double> labels, double beta,
                                         const DenseMatrix* drop_mask);

struct MaskObjective {
  LossBreakdown loss;
  MlpGrads grads;    // w.r.t. the mask net's parameters
  DenseMatrix mask;  // the realized mask, for logging
};
// The full training objective as seen by the mask net, classifier and
// adversary frozen: cls - alpha*adv + lambda1*l1 + lambda2*hsic + beta*inv.
// Gradients reach the mask through z_c into h (both branches), through z_nc
// into the adversary, through the sparsity term, and through HSIC. Raw parts
// whose weight is zero are skipped and recorded as 0. Pass
// MaskMode::kDeterministic plus a fixed-bandwidth kernel to freeze every
// stochastic choice (the finite-difference setting). Throws ConfigError when
// the bundle's mask is frozen.
MaskObjective mask_objective(const ModelBundle& bundle, const DenseMatrix& embeddings,
                             std::span<const double> labels, const LossWeights& weights,
                             const KernelConfig& kernel, const DenseMatrix* drop_mask,
                             MaskMode mask_mode, NoiseSource* noise);

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

// One alternating optimization step on one batch, in fixed order:
//   (A) adversary: one Adam step descending its prediction loss under a fresh
//       stochastic mask (skipped when alpha == 0);
//   (B) classifier: one Adam step on cls + beta*inv under a fresh mask;
//   (C) mask net: one Adam step on the full objective under a fresh mask
//       (skipped when the mask is frozen).
// One counterfactual drop mask B is sampled first (iff beta > 0) and shared
// by every sub-step; the per-step draw order is therefore B, then one Gumbel
// field per executed masked sub-step. Returns the step-C loss breakdown (for
// a frozen mask, a breakdown assembled from the step-A/B measurements).
// Throws PoisonedError labeled with the sub-step on any non-finite loss or
// gradient; requires at least 4 rows and 0/1 labels. The config is trusted
// as given (fit validates it once).
LossBreakdown train_step(ModelBundle& bundle, OptimStates& opt, const LabeledBatch& batch,
                         const TrainConfig& cfg, NoiseSource& noise);

struct EpochRecord {
  std::size_t epoch = 0;  // 0-based, equals the record's index
  double tau = 0.0;
  LossBreakdown train_loss;  // means of the per-batch step returns
  LossBreakdown val_loss;    // whole-set deterministic evaluation
  double val_accuracy = 0.0;            // h(z_c) thresholded at 0.5
  double val_adversary_accuracy = 0.0;  // co-trained adversary on z_nc
  double val_mask_sparsity = 0.0;       // mean per-row L1 of the deterministic mask
  double val_hsic = 0.0;                // == val_loss.mask_hsic
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // index of the returned snapshot (0 if empty)
  bool stopped_early = false;
};

inline constexpr const char* kHistorySchema = "causalmask.history.v1";
TextDoc history_to_doc(const TrainHistory& history);
TrainHistory history_from_doc(const TextDoc& doc);

// The validation evaluation's fixed counterfactual drop mask is drawn once
// per run from NoiseSource(cfg.seed ^ kValDropSalt), so the validation
// objective is comparable across epochs and across resumed runs.
inline constexpr std::uint64_t kValDropSalt = 0x94d049bb133111ebULL;
// The adversary probe's data split and fresh net are seeded with
// (seed ^ kProbeSalt), keeping the probe independent of the training stream.
inline constexpr std::uint64_t kProbeSalt = 0xbf58476d1ce4e5b9ULL;

// Everything a resumable run carries between epochs. Fresh states come from
// make_trainer_state; checkpoints restore this struct bit-exactly.
struct TrainerState {
  TrainConfig cfg;  // post-ablation copy
  AblationMode mode = AblationMode::kFull;
  ModelBundle bundle;
  OptimStates opt;
  NoiseSource noise{0};  // training stream: shuffles + per-step draws
  std::size_t next_epoch = 0;
  double best_val_total = std::numeric_limits<double>::infinity();
  std::size_t epochs_since_improvement = 0;
  ModelBundle best_bundle;  // snapshot with the lowest validation total loss
  TrainHistory history;
  bool finished = false;
};

// Validates cfg, applies the mode's weight zeroing, seeds the training stream
// with cfg.seed, and draws the initial bundle from it. best_bundle starts as
// a copy of the initial bundle.
TrainerState make_trainer_state(std::size_t d, const TrainConfig& cfg,
                                AblationMode mode = AblationMode::kFull);

// Runs whole epochs until max_epochs is reached, the early-stopping rule
// fires (early_stop_patience epochs without strict improvement of the
// validation total loss), or next_epoch reaches epoch_limit (a deliberate
// interruption point for checkpointing; the state is then not finished).
// Each epoch: the temperature is set from the schedule, the training set is
// reshuffled, every batch gets one train_step (a trailing batch of fewer than
// 4 rows is dropped), and the whole validation set is evaluated
// deterministically. Throws ConfigError on empty inputs, DimensionError on
// dimension disagreements, InsufficientBatchError when a set is too small
// for the estimators it feeds.
void fit_epochs(TrainerState& state, const LabeledBatch& train_set, const LabeledBatch& val_set,
                std::size_t epoch_limit = std::numeric_limits<std::size_t>::max());

struct FitResult {
  ModelBundle bundle;  // best-validation snapshot
  TrainHistory history;
};

// make_trainer_state + fit_epochs to completion; returns the best-validation
// snapshot (the initialized bundle when max_epochs == 0, with empty history).
FitResult fit(const LabeledBatch& train_set, const LabeledBatch& val_set, const TrainConfig& cfg,
              AblationMode mode = AblationMode::kFull);

// ---------------------------------------------------------------------------
// Inference and diagnostics
// ---------------------------------------------------------------------------

// Deterministic inference: zero Gumbel noise at the bundle's stored
// temperature, z_c through the classifier; probabilities in (0,1).
std::vector<double> predict(const ModelBundle& bundle, const DenseMatrix& embeddings);

// Column means of the deterministic mask — the per-dimension selection
// profile a recovery metric thresholds.
std::vector<double> mean_mask_profile(const ModelBundle& bundle, const DenseMatrix& embeddings);

struct EvalResult {
  LossBreakdown loss;
  double accuracy = 0.0;            // h(z_c) vs labels at threshold 0.5
  double adversary_accuracy = 0.0;  // co-trained adversary on z_nc
  double mask_sparsity = 0.0;       // mean per-row L1 of the deterministic mask
};

// Whole-set deterministic evaluation at the bundle's stored temperature. The
// counterfactual part uses drop_mask when given (inv = 0 otherwise); HSIC
// runs over the full set in one pass (n >= 4 required when lambda2 > 0).
// Raw parts with zero weight are skipped and recorded as 0; the accuracy is
// computed from the same code path predict() uses.
EvalResult evaluate(const ModelBundle& bundle, const LabeledBatch& data,
                    const LossWeights& weights, const DenseMatrix* drop_mask = nullptr);

// Freshly trains a probe with the adversary's architecture on z_nc of a
// seeded 70% split and reports accuracy on the held-out 30%; the bundle is
// not modified. The probe's only purpose is to measure how much label signal
// the non-causal features still carry.
double adversary_probe(const ModelBundle& bundle, const LabeledBatch& data,
                       std::uint64_t seed = 0);

// One row of prediction metrics per named dataset, plus mask metrics from the
// first dataset that carries a ground-truth causal set (the mean mask profile
// thresholded at mask_threshold against that set).
MetricsReport domain_shift_report(
    const ModelBundle& bundle,
    const std::vector<std::pair<std::string, const LabeledBatch*>>& datasets, std::uint64_t seed,
    const std::vector<std::pair<std::string, std::string>>& config_echo,
    double mask_threshold = 0.5);

// Trains one ablation row on a benchmark and gathers its comparison numbers:
// same-domain test accuracy, mean shifted-domain accuracy, mask IoU on the
// same-domain test set, and the adversary probe on the first shifted set.
struct AblationRow {
  AblationMode mode = AblationMode::kFull;
  double same_accuracy = 0.0;
  double shifted_accuracy = 0.0;
  double mask_iou = 0.0;
  double probe_accuracy = 0.0;
  std::size_t epochs_run = 0;
};
AblationRow run_ablation_row(const Benchmark& bench, const TrainConfig& cfg, AblationMode mode);

}  // namespace causalmask
