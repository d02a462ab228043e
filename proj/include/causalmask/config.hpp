#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "causalmask/losses.hpp"
#include "causalmask/scm.hpp"
#include "causalmask/textio.hpp"

namespace causalmask {

// Hyperparameters of one training run. The defaults are the settings used by
// the canonical synthetic benchmark.
struct TrainConfig {
  double learning_rate = 1e-4;
  std::size_t batch_size = 256;         // truncated to the dataset size by fit
  std::size_t max_epochs = 60;
  std::size_t early_stop_patience = 10; // epochs without strict val-loss improvement
  std::uint64_t seed = 0;
  double tau_start = 5.0;  // mask temperature at the first epoch
  double tau_min = 0.5;    // temperature floor, reached at the last epoch
  LossWeights loss_weights;
  double validation_fraction = 0.125;  // used when no explicit val set is given

  // Throws ConfigError naming the violated field. Requires learning_rate > 0,
  // batch_size >= 4 (the HSIC estimator's floor), early_stop_patience >= 1,
  // 0 < tau_min <= tau_start, validation_fraction in (0, 0.5], and valid
  // loss weights.
  void validate() const;
};

// Exponential interpolation from tau_start (epoch 0) down to tau_min (epoch
// max_epochs - 1), constant within an epoch and clamped to
// [tau_min, tau_start]. A one-epoch schedule stays at tau_start.
double tau_at_epoch(const TrainConfig& cfg, std::size_t epoch);

inline constexpr const char* kConfigSchema = "causalmask.config.v1";

// Structured-text form of a TrainConfig. Keys mirror the field names, with
// the nested weights spelled loss_weights.<field>. config_from_doc starts
// from the defaults, overrides whichever keys are present, rejects unknown
// keys outside the scm. / synth. namespaces, and validates the result.
TextDoc config_to_doc(const TrainConfig& cfg);
TrainConfig config_from_doc(const TextDoc& doc);

// The flattened key/value pairs of config_to_doc, for embedding in reports.
std::vector<std::pair<std::string, std::string>> config_echo_entries(const TrainConfig& cfg);

// Optional generator override carried in the same document under the scm.
// prefix: scm.d, scm.causal_dims, scm.label_weights, scm.noise_c,
// scm.noise_nc, scm.noise_x, scm.mixing_mode (aligned|rotated),
// scm.mixing_seed, and per-domain scm.domain.<id>.style_mean /
// scm.domain.<id>.spurious_rho. List values are comma-separated.
// scm_from_doc returns nullopt when no scm. key is present; otherwise the
// mandatory keys are required and the assembled spec is validated. Document
// keys cannot spell a minus sign, so only domain ids >= 0 are serializable
// (scm_into_doc throws ConfigError on negative ids).
void scm_into_doc(const ScmSpec& spec, TextDoc& doc);
std::optional<ScmSpec> scm_from_doc(const TextDoc& doc);

}  // namespace causalmask
