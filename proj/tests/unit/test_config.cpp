#include "causalmask/config.hpp"

#include <cmath>
#include <string>

#include "causalmask/errors.hpp"
#include "doctest.h"

using namespace causalmask;

namespace {

TrainConfig default_config() { return TrainConfig{}; }

// A config with every field moved off its default, for round-trip coverage.
TrainConfig custom_config() {
  TrainConfig cfg;
  cfg.learning_rate = 3e-3;
  cfg.batch_size = 32;
  cfg.max_epochs = 7;
  cfg.early_stop_patience = 2;
  cfg.seed = 424242;
  cfg.tau_start = 2.5;
  cfg.tau_min = 0.25;
  cfg.validation_fraction = 0.25;
  cfg.loss_weights.alpha = 0.05;
  cfg.loss_weights.beta = 0.5;
  cfg.loss_weights.lambda1 = 2e-3;
  cfg.loss_weights.lambda2 = 0.75;
  cfg.loss_weights.drop_p = 0.2;
  return cfg;
}

void check_equal(const TrainConfig& a, const TrainConfig& b) {
  CHECK(a.learning_rate == b.learning_rate);
  CHECK(a.batch_size == b.batch_size);
  CHECK(a.max_epochs == b.max_epochs);
  CHECK(a.early_stop_patience == b.early_stop_patience);
  CHECK(a.seed == b.seed);
  CHECK(a.tau_start == b.tau_start);
  CHECK(a.tau_min == b.tau_min);
  CHECK(a.validation_fraction == b.validation_fraction);
  CHECK(a.loss_weights.alpha == b.loss_weights.alpha);
  CHECK(a.loss_weights.beta == b.loss_weights.beta);
  CHECK(a.loss_weights.lambda1 == b.loss_weights.lambda1);
  CHECK(a.loss_weights.lambda2 == b.loss_weights.lambda2);
  CHECK(a.loss_weights.drop_p == b.loss_weights.drop_p);
}

}  // namespace

TEST_CASE("the default configuration validates") { CHECK_NOTHROW(default_config().validate()); }

TEST_CASE("validate rejects each out-of-range field") {
  auto cfg = default_config();
  cfg.learning_rate = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.learning_rate = -1e-4;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.learning_rate = INFINITY;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  cfg = default_config();
  cfg.batch_size = 3;
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("batch_size"), ConfigError);

  cfg = default_config();
  cfg.early_stop_patience = 0;
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("early_stop_patience"), ConfigError);

  cfg = default_config();
  cfg.tau_min = 0.0;
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("tau_min"), ConfigError);

  cfg = default_config();
  cfg.tau_start = 0.1;  // below tau_min = 0.5
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("tau_start"), ConfigError);

  cfg = default_config();
  cfg.validation_fraction = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.validation_fraction = 0.51;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.validation_fraction = std::nan("");
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  cfg = default_config();
  cfg.loss_weights.alpha = -0.1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = default_config();
  cfg.loss_weights.drop_p = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("validation_fraction boundary 0.5 is accepted") {
  auto cfg = default_config();
  cfg.validation_fraction = 0.5;
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("temperature schedule endpoints and monotonicity") {
  const auto cfg = default_config();  // tau 5.0 -> 0.5 over max_epochs

  CHECK(tau_at_epoch(cfg, 0) == 5.0);  // epoch 0 is exactly tau_start

  const double last = tau_at_epoch(cfg, cfg.max_epochs - 1);
  CHECK(last >= cfg.tau_min);  // clamp guarantee
  CHECK(last == doctest::Approx(cfg.tau_min).epsilon(1e-12));

  // Constant within the clamp beyond the schedule's end.
  CHECK(tau_at_epoch(cfg, cfg.max_epochs) == last);
  CHECK(tau_at_epoch(cfg, cfg.max_epochs + 1000) == last);

  double prev = tau_at_epoch(cfg, 0);
  for (std::size_t e = 1; e < cfg.max_epochs + 5; ++e) {
    const double cur = tau_at_epoch(cfg, e);
    CHECK(cur <= prev);
    CHECK(cur >= cfg.tau_min);
    CHECK(cur <= cfg.tau_start);
    prev = cur;
  }
}

TEST_CASE("temperature schedule midpoints match sqrt-based closed forms") {
  // Over three epochs the middle value is the geometric mean of the endpoints.
  auto cfg = default_config();
  cfg.max_epochs = 3;
  CHECK(tau_at_epoch(cfg, 1) ==
        doctest::Approx(std::sqrt(cfg.tau_start * cfg.tau_min)).epsilon(1e-14));

  // Over five epochs, epoch 1 sits a quarter of the way: start * (r)^(1/4).
  cfg.max_epochs = 5;
  const double ratio = cfg.tau_min / cfg.tau_start;
  CHECK(tau_at_epoch(cfg, 1) ==
        doctest::Approx(cfg.tau_start * std::sqrt(std::sqrt(ratio))).epsilon(1e-14));
}

TEST_CASE("one-epoch and degenerate schedules stay at tau_start") {
  auto cfg = default_config();
  cfg.max_epochs = 1;
  CHECK(tau_at_epoch(cfg, 0) == cfg.tau_start);
  CHECK(tau_at_epoch(cfg, 50) == cfg.tau_start);
  cfg.max_epochs = 0;
  CHECK(tau_at_epoch(cfg, 0) == cfg.tau_start);
}

TEST_CASE("flat schedule when tau_min equals tau_start") {
  auto cfg = default_config();
  cfg.tau_start = 1.5;
  cfg.tau_min = 1.5;
  cfg.validate();
  for (std::size_t e = 0; e < cfg.max_epochs; ++e) {
    CHECK(tau_at_epoch(cfg, e) == 1.5);
  }
}

TEST_CASE("config document round-trips bitwise") {
  for (const TrainConfig& cfg : {default_config(), custom_config()}) {
    const TextDoc doc = config_to_doc(cfg);
    CHECK(doc.schema == kConfigSchema);
    const TrainConfig back = config_from_doc(doc);
    check_equal(cfg, back);

    // And through the text form.
    const TrainConfig back2 = config_from_doc(parse_text_doc(serialize_text_doc(doc)));
    check_equal(cfg, back2);
  }
}

TEST_CASE("a schema-only document yields the defaults") {
  TextDoc doc;
  doc.schema = kConfigSchema;
  check_equal(config_from_doc(doc), default_config());
}

TEST_CASE("partial documents override only the present keys") {
  TextDoc doc;
  doc.schema = kConfigSchema;
  doc.set_u64("batch_size", 16);
  doc.set_double("loss_weights.alpha", 0.3);
  const TrainConfig cfg = config_from_doc(doc);
  CHECK(cfg.batch_size == 16);
  CHECK(cfg.loss_weights.alpha == 0.3);
  CHECK(cfg.learning_rate == default_config().learning_rate);
  CHECK(cfg.loss_weights.beta == default_config().loss_weights.beta);
}

TEST_CASE("unknown keys are rejected, generator namespaces are not") {
  TextDoc doc;
  doc.schema = kConfigSchema;
  doc.set("learningrate", "0.1");
  CHECK_THROWS_WITH_AS(config_from_doc(doc), doctest::Contains("learningrate"), FormatError);

  TextDoc ok;
  ok.schema = kConfigSchema;
  ok.set_u64("scm.d", 4);
  ok.set("synth.train_n", "128");
  check_equal(config_from_doc(ok), default_config());
}

TEST_CASE("wrong schema and malformed values are rejected") {
  TextDoc doc;
  doc.schema = "causalmask.history.v1";
  CHECK_THROWS_WITH_AS(config_from_doc(doc), doctest::Contains("schema"), FormatError);

  TextDoc bad;
  bad.schema = kConfigSchema;
  bad.set("learning_rate", "fast");
  CHECK_THROWS_WITH_AS(config_from_doc(bad), doctest::Contains("learning_rate"), FormatError);

  TextDoc neg;
  neg.schema = kConfigSchema;
  neg.set_double("learning_rate", -1.0);
  CHECK_THROWS_AS(config_from_doc(neg), ConfigError);  // parses, fails validation
}

TEST_CASE("config echo equals the document entries") {
  const auto cfg = custom_config();
  const auto echo = config_echo_entries(cfg);
  const auto doc = config_to_doc(cfg);
  REQUIRE(echo.size() == doc.entries.size());
  CHECK(echo.size() == 13);
  for (std::size_t i = 0; i < echo.size(); ++i) {
    CHECK(echo[i].first == doc.entries[i].first);
    CHECK(echo[i].second == doc.entries[i].second);
  }
}

namespace {

ScmSpec small_spec() {
  ScmSpec spec;
  spec.d = 6;
  spec.causal_dims = {0, 2, 5};
  spec.label_weights = {1.0, -0.5, 0.25};
  spec.noise_c = 0.3;
  spec.noise_nc = 0.2;
  spec.noise_x = 0.05;
  spec.mixing_mode = MixingMode::kRotated;
  spec.mixing_seed = 99;
  spec.domain_styles[0] = DomainStyle{{0.1, -0.2, 0.3}, 0.9};
  spec.domain_styles[7] = DomainStyle{{1.0, 2.0, 3.0}, -0.5};
  return spec;
}

void check_equal(const ScmSpec& a, const ScmSpec& b) {
  CHECK(a.d == b.d);
  CHECK(a.causal_dims == b.causal_dims);
  CHECK(a.label_weights == b.label_weights);
  CHECK(a.noise_c == b.noise_c);
  CHECK(a.noise_nc == b.noise_nc);
  CHECK(a.noise_x == b.noise_x);
  CHECK(a.mixing_mode == b.mixing_mode);
  CHECK(a.mixing_seed == b.mixing_seed);
  REQUIRE(a.domain_styles.size() == b.domain_styles.size());
  for (const auto& [id, style] : a.domain_styles) {
    REQUIRE(b.domain_styles.count(id) == 1);
    CHECK(style.style_mean == b.domain_styles.at(id).style_mean);
    CHECK(style.spurious_rho == b.domain_styles.at(id).spurious_rho);
  }
}

}  // namespace

TEST_CASE("generator override round-trips through a document") {
  const ScmSpec spec = small_spec();
  TextDoc doc;
  doc.schema = kConfigSchema;
  scm_into_doc(spec, doc);

  const auto back = scm_from_doc(doc);
  REQUIRE(back.has_value());
  check_equal(spec, *back);

  // And through the text form, alongside training keys.
  doc.set_u64("batch_size", 8);
  const TextDoc reparsed = parse_text_doc(serialize_text_doc(doc));
  const auto back2 = scm_from_doc(reparsed);
  REQUIRE(back2.has_value());
  check_equal(spec, *back2);
  CHECK(config_from_doc(reparsed).batch_size == 8);
}

TEST_CASE("a document without generator keys yields nullopt") {
  TextDoc doc;
  doc.schema = kConfigSchema;
  doc.set_u64("batch_size", 8);
  CHECK(!scm_from_doc(doc).has_value());
}

TEST_CASE("an all-causal spec round-trips its empty style mean") {
  ScmSpec spec;
  spec.d = 2;
  spec.causal_dims = {0, 1};
  spec.label_weights = {1.0, 1.0};
  spec.mixing_mode = MixingMode::kAligned;
  spec.domain_styles[3] = DomainStyle{{}, 0.0};
  spec.validate();

  TextDoc doc;
  doc.schema = kConfigSchema;
  scm_into_doc(spec, doc);
  const auto back = scm_from_doc(parse_text_doc(serialize_text_doc(doc)));
  REQUIRE(back.has_value());
  check_equal(spec, *back);
}

TEST_CASE("generator documents reject unknown keys and bad values") {
  const ScmSpec spec = small_spec();

  TextDoc doc;
  doc.schema = kConfigSchema;
  scm_into_doc(spec, doc);
  doc.set("scm.bogus", "1");
  CHECK_THROWS_WITH_AS(scm_from_doc(doc), doctest::Contains("scm.bogus"), FormatError);

  TextDoc missing;
  missing.schema = kConfigSchema;
  missing.set_u64("scm.d", 4);
  CHECK_THROWS_AS(scm_from_doc(missing), FormatError);  // mandatory keys absent

  TextDoc bad_mode;
  bad_mode.schema = kConfigSchema;
  scm_into_doc(spec, bad_mode);
  bad_mode.set("scm.mixing_mode", "diagonal");
  CHECK_THROWS_WITH_AS(scm_from_doc(bad_mode), doctest::Contains("mixing_mode"), FormatError);

  TextDoc bad_dims;
  bad_dims.schema = kConfigSchema;
  scm_into_doc(spec, bad_dims);
  bad_dims.set("scm.causal_dims", "0, -2");
  CHECK_THROWS_WITH_AS(scm_from_doc(bad_dims), doctest::Contains("causal_dims"), FormatError);

  TextDoc bad_weights;
  bad_weights.schema = kConfigSchema;
  scm_into_doc(spec, bad_weights);
  bad_weights.set("scm.label_weights", "1.0, soft");
  CHECK_THROWS_AS(scm_from_doc(bad_weights), FormatError);

  // Domain entry whose id does not parse is an unknown key, not a domain.
  TextDoc bad_id;
  bad_id.schema = kConfigSchema;
  scm_into_doc(spec, bad_id);
  bad_id.set("scm.domain.first.spurious_rho", "0.5");
  CHECK_THROWS_WITH_AS(scm_from_doc(bad_id), doctest::Contains("scm.domain.first"), FormatError);
}

TEST_CASE("a generator document needs at least one domain") {
  TextDoc doc;
  doc.schema = kConfigSchema;
  doc.set_u64("scm.d", 4);
  doc.set("scm.causal_dims", "0, 1");
  doc.set("scm.label_weights", "1.0, 1.0");
  doc.set_double("scm.noise_c", 0.1);
  doc.set_double("scm.noise_nc", 0.1);
  doc.set_double("scm.noise_x", 0.0);
  doc.set("scm.mixing_mode", "aligned");
  CHECK_THROWS_WITH_AS(scm_from_doc(doc), doctest::Contains("domain"), FormatError);
}

TEST_CASE("invalid assembled specs fail their own validation") {
  TextDoc doc;
  doc.schema = kConfigSchema;
  ScmSpec spec = small_spec();
  scm_into_doc(spec, doc);
  doc.set("scm.causal_dims", "0, 2");  // now label_weights has 3 entries for 2 dims
  CHECK_THROWS_AS(scm_from_doc(doc), ConfigError);
}

TEST_CASE("negative domain ids cannot be serialized") {
  // Document keys have no way to spell a minus sign, so writing such a spec
  // is rejected up front rather than failing inside the document layer.
  ScmSpec spec = small_spec();
  spec.domain_styles.clear();
  spec.domain_styles[-3] = DomainStyle{{0.0, 0.0, 0.0}, 0.25};
  TextDoc doc;
  doc.schema = kConfigSchema;
  CHECK_THROWS_WITH_AS(scm_into_doc(spec, doc), doctest::Contains("-3"), ConfigError);
}
