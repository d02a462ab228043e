#include "causalmask/config.hpp"

#include <algorithm>
#include <cerrno>
#include <climits>
#include <cmath>
#include <cstdlib>
#include <string>
#include <string_view>
#include <vector>

#include "causalmask/errors.hpp"

namespace causalmask {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

std::vector<std::string> split_list(std::string_view key, std::string_view value) {
  std::vector<std::string> items;
  value = trim(value);
  if (value.empty()) {
    return items;
  }
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = value.find(',', start);
    const std::string_view item =
        trim(value.substr(start, comma == std::string_view::npos ? comma : comma - start));
    if (item.empty()) {
      throw FormatError("key '" + std::string(key) + "' has an empty list item");
    }
    items.emplace_back(item);
    if (comma == std::string_view::npos) {
      break;
    }
    start = comma + 1;
  }
  return items;
}

std::vector<double> parse_double_list(std::string_view key, std::string_view value) {
  std::vector<double> out;
  for (const std::string& item : split_list(key, value)) {
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(item.c_str(), &end);
    if (end != item.c_str() + item.size() || errno == ERANGE) {
      throw FormatError("key '" + std::string(key) + "' has a non-numeric list item '" + item +
                        "'");
    }
    out.push_back(v);
  }
  return out;
}

std::vector<std::size_t> parse_index_list(std::string_view key, std::string_view value) {
  std::vector<std::size_t> out;
  for (const std::string& item : split_list(key, value)) {
    if (item[0] == '-' || item[0] == '+') {
      throw FormatError("key '" + std::string(key) + "' has a non-index list item '" + item + "'");
    }
    char* end = nullptr;
    errno = 0;
    const unsigned long long v = std::strtoull(item.c_str(), &end, 10);
    if (end != item.c_str() + item.size() || errno == ERANGE) {
      throw FormatError("key '" + std::string(key) + "' has a non-index list item '" + item + "'");
    }
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

std::string join_doubles(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out += ", ";
    out += format_double(values[i]);
  }
  return out;
}

std::string join_indices(const std::vector<std::size_t>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out += ", ";
    out += std::to_string(values[i]);
  }
  return out;
}

// Keys accepted by config_from_doc outside the scm./synth. namespaces.
constexpr const char* kKnownConfigKeys[] = {
    "learning_rate",      "batch_size",          "max_epochs",
    "early_stop_patience", "seed",               "tau_start",
    "tau_min",            "validation_fraction", "loss_weights.alpha",
    "loss_weights.beta",  "loss_weights.lambda1", "loss_weights.lambda2",
    "loss_weights.drop_p",
};

bool has_prefix(std::string_view s, std::string_view prefix) {
  return s.size() >= prefix.size() && s.substr(0, prefix.size()) == prefix;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(std::isfinite(learning_rate) && learning_rate > 0.0)) {
    throw ConfigError("learning_rate must be positive and finite");
  }
  if (batch_size < 4) {
    throw ConfigError("batch_size must be at least 4");
  }
  if (early_stop_patience < 1) {
    throw ConfigError("early_stop_patience must be at least 1");
  }
  if (!(std::isfinite(tau_min) && tau_min > 0.0)) {
    throw ConfigError("tau_min must be positive and finite");
  }
  if (!(std::isfinite(tau_start) && tau_start >= tau_min)) {
    throw ConfigError("tau_start must be finite and at least tau_min");
  }
  if (!(std::isfinite(validation_fraction) && validation_fraction > 0.0 &&
        validation_fraction <= 0.5)) {
    throw ConfigError("validation_fraction must lie in (0, 0.5]");
  }
  loss_weights.validate();
}

double tau_at_epoch(const TrainConfig& cfg, std::size_t epoch) {
  if (cfg.max_epochs <= 1) {
    return cfg.tau_start;
  }
  const double last = static_cast<double>(cfg.max_epochs - 1);
  const double t = std::min(static_cast<double>(epoch), last) / last;
  const double tau = cfg.tau_start * std::pow(cfg.tau_min / cfg.tau_start, t);
  return std::clamp(tau, cfg.tau_min, cfg.tau_start);
}

TextDoc config_to_doc(const TrainConfig& cfg) {
  TextDoc doc;
  doc.schema = kConfigSchema;
  doc.set_double("learning_rate", cfg.learning_rate);
  doc.set_u64("batch_size", cfg.batch_size);
  doc.set_u64("max_epochs", cfg.max_epochs);
  doc.set_u64("early_stop_patience", cfg.early_stop_patience);
  doc.set_u64("seed", cfg.seed);
  doc.set_double("tau_start", cfg.tau_start);
  doc.set_double("tau_min", cfg.tau_min);
  doc.set_double("validation_fraction", cfg.validation_fraction);
  doc.set_double("loss_weights.alpha", cfg.loss_weights.alpha);
  doc.set_double("loss_weights.beta", cfg.loss_weights.beta);
  doc.set_double("loss_weights.lambda1", cfg.loss_weights.lambda1);
  doc.set_double("loss_weights.lambda2", cfg.loss_weights.lambda2);
  doc.set_double("loss_weights.drop_p", cfg.loss_weights.drop_p);
  return doc;
}

TrainConfig config_from_doc(const TextDoc& doc) {
  if (doc.schema != kConfigSchema) {
    throw FormatError("expected schema '" + std::string(kConfigSchema) + "', found '" +
                      doc.schema + "'");
  }
  for (const auto& [key, value] : doc.entries) {
    (void)value;
    if (has_prefix(key, "scm.") || has_prefix(key, "synth.")) {
      continue;
    }
    const bool known = std::any_of(std::begin(kKnownConfigKeys), std::end(kKnownConfigKeys),
                                   [&](const char* k) { return key == k; });
    if (!known) {
      throw FormatError("unknown config key '" + key + "'");
    }
  }
  TrainConfig cfg;
  if (doc.has("learning_rate")) cfg.learning_rate = doc.require_double("learning_rate");
  if (doc.has("batch_size")) cfg.batch_size = static_cast<std::size_t>(doc.require_u64("batch_size"));
  if (doc.has("max_epochs")) cfg.max_epochs = static_cast<std::size_t>(doc.require_u64("max_epochs"));
  if (doc.has("early_stop_patience")) {
    cfg.early_stop_patience = static_cast<std::size_t>(doc.require_u64("early_stop_patience"));
  }
  if (doc.has("seed")) cfg.seed = doc.require_u64("seed");
  if (doc.has("tau_start")) cfg.tau_start = doc.require_double("tau_start");
  if (doc.has("tau_min")) cfg.tau_min = doc.require_double("tau_min");
  if (doc.has("validation_fraction")) {
    cfg.validation_fraction = doc.require_double("validation_fraction");
  }
  if (doc.has("loss_weights.alpha")) cfg.loss_weights.alpha = doc.require_double("loss_weights.alpha");
  if (doc.has("loss_weights.beta")) cfg.loss_weights.beta = doc.require_double("loss_weights.beta");
  if (doc.has("loss_weights.lambda1")) {
    cfg.loss_weights.lambda1 = doc.require_double("loss_weights.lambda1");
  }
  if (doc.has("loss_weights.lambda2")) {
    cfg.loss_weights.lambda2 = doc.require_double("loss_weights.lambda2");
  }
  if (doc.has("loss_weights.drop_p")) cfg.loss_weights.drop_p = doc.require_double("loss_weights.drop_p");
  cfg.validate();
  return cfg;
}

std::vector<std::pair<std::string, std::string>> config_echo_entries(const TrainConfig& cfg) {
  return config_to_doc(cfg).entries;
}

void scm_into_doc(const ScmSpec& spec, TextDoc& doc) {
  doc.set_u64("scm.d", spec.d);
  doc.set("scm.causal_dims", join_indices(spec.causal_dims));
  doc.set("scm.label_weights", join_doubles(spec.label_weights));
  doc.set_double("scm.noise_c", spec.noise_c);
  doc.set_double("scm.noise_nc", spec.noise_nc);
  doc.set_double("scm.noise_x", spec.noise_x);
  doc.set("scm.mixing_mode", spec.mixing_mode == MixingMode::kAligned ? "aligned" : "rotated");
  doc.set_u64("scm.mixing_seed", spec.mixing_seed);
  for (const auto& [id, style] : spec.domain_styles) {
    if (id < 0) {
      // Document keys cannot carry a '-', so negative ids are unserializable.
      throw ConfigError("domain id " + std::to_string(id) +
                        " cannot be written to a document; use ids >= 0");
    }
    const std::string prefix = "scm.domain." + std::to_string(id) + ".";
    doc.set(prefix + "style_mean", join_doubles(style.style_mean));
    doc.set_double(prefix + "spurious_rho", style.spurious_rho);
  }
}

std::optional<ScmSpec> scm_from_doc(const TextDoc& doc) {
  bool any = false;
  std::vector<int> domain_ids;
  for (const auto& [key, value] : doc.entries) {
    (void)value;
    if (!has_prefix(key, "scm.")) {
      continue;
    }
    any = true;
    static constexpr const char* kScalarKeys[] = {
        "scm.d",       "scm.causal_dims", "scm.label_weights", "scm.noise_c",
        "scm.noise_nc", "scm.noise_x",    "scm.mixing_mode",   "scm.mixing_seed",
    };
    if (std::any_of(std::begin(kScalarKeys), std::end(kScalarKeys),
                    [&](const char* k) { return key == k; })) {
      continue;
    }
    if (has_prefix(key, "scm.domain.")) {
      const std::string_view rest = std::string_view(key).substr(11);
      const std::size_t dot = rest.find('.');
      const std::string_view suffix = dot == std::string_view::npos ? "" : rest.substr(dot + 1);
      if (dot != std::string_view::npos && (suffix == "style_mean" || suffix == "spurious_rho")) {
        const std::string id_text(rest.substr(0, dot));
        char* end = nullptr;
        errno = 0;
        const long id = std::strtol(id_text.c_str(), &end, 10);
        if (!id_text.empty() && end == id_text.c_str() + id_text.size() && errno != ERANGE &&
            id >= INT_MIN && id <= INT_MAX) {
          if (std::find(domain_ids.begin(), domain_ids.end(), static_cast<int>(id)) ==
              domain_ids.end()) {
            domain_ids.push_back(static_cast<int>(id));
          }
          continue;
        }
      }
    }
    throw FormatError("unknown generator key '" + key + "'");
  }
  if (!any) {
    return std::nullopt;
  }
  ScmSpec spec;
  spec.d = static_cast<std::size_t>(doc.require_u64("scm.d"));
  spec.causal_dims = parse_index_list("scm.causal_dims", doc.require("scm.causal_dims"));
  spec.label_weights = parse_double_list("scm.label_weights", doc.require("scm.label_weights"));
  spec.noise_c = doc.require_double("scm.noise_c");
  spec.noise_nc = doc.require_double("scm.noise_nc");
  spec.noise_x = doc.require_double("scm.noise_x");
  const std::string& mode = doc.require("scm.mixing_mode");
  if (mode == "aligned") {
    spec.mixing_mode = MixingMode::kAligned;
  } else if (mode == "rotated") {
    spec.mixing_mode = MixingMode::kRotated;
  } else {
    throw FormatError("key 'scm.mixing_mode' must be 'aligned' or 'rotated', found '" + mode +
                      "'");
  }
  if (doc.has("scm.mixing_seed")) {
    spec.mixing_seed = doc.require_u64("scm.mixing_seed");
  }
  if (domain_ids.empty()) {
    throw FormatError("generator override declares no scm.domain.<id> entries");
  }
  for (const int id : domain_ids) {
    const std::string prefix = "scm.domain." + std::to_string(id) + ".";
    DomainStyle style;
    style.style_mean =
        parse_double_list(prefix + "style_mean", doc.require(prefix + "style_mean"));
    style.spurious_rho = doc.require_double(prefix + "spurious_rho");
    spec.domain_styles.emplace(id, std::move(style));
  }
  spec.validate();
  return spec;
}

}  // namespace causalmask
