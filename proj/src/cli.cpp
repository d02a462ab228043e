#include "causalmask/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <system_error>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "causalmask/checkpoint.hpp"
#include "causalmask/config.hpp"
#include "causalmask/embfile.hpp"
#include "causalmask/errors.hpp"
#include "causalmask/gradsuite.hpp"
#include "causalmask/metrics.hpp"
#include "causalmask/noise.hpp"
#include "causalmask/scm.hpp"
#include "causalmask/textio.hpp"
#include "causalmask/trainer.hpp"

namespace causalmask {

namespace {

constexpr const char* kMaskingOnlyNote =
    "masking-only row: the mask is frozen to all-ones and the adversary reads a full copy of "
    "the features, so its probe measures total label leakage rather than complement leakage";

void prepare_out_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw IoError("cannot create output directory '" + dir + "': " + ec.message());
  }
}

std::string path_join(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

void require_labels(const LabeledBatch& batch, const std::string& path) {
  if (batch.labels.empty()) {
    throw ConfigError("'" + path + "' carries no labels; this command needs labeled data");
  }
}

void require_width(const LabeledBatch& batch, std::size_t d, const std::string& path) {
  if (batch.embeddings.cols != d) {
    throw DimensionError("'" + path + "' has width " + std::to_string(batch.embeddings.cols) +
                         " but the checkpointed model expects " + std::to_string(d));
  }
}

std::size_t doc_size_or(const TextDoc& doc, const char* key, std::size_t fallback) {
  return doc.has(key) ? static_cast<std::size_t>(doc.require_u64(key)) : fallback;
}

LabeledBatch take_rows(const LabeledBatch& src, std::span<const std::size_t> indices) {
  LabeledBatch out;
  out.embeddings = gather_rows(src.embeddings, indices);
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) {
    out.labels.push_back(src.labels[i]);
  }
  out.domain_id = src.domain_id;
  out.ground_truth = src.ground_truth;
  return out;
}

// Seeded shuffle, last round(n * fraction) rows (clamped to [1, n-1]) become
// the validation set; see kTrainSplitSalt in the header.
std::pair<LabeledBatch, LabeledBatch> split_train_val(const LabeledBatch& all, double fraction,
                                                      std::uint64_t seed) {
  const std::size_t n = all.embeddings.rows;
  if (n < 2) {
    throw InsufficientBatchError("training file has " + std::to_string(n) +
                                 " row(s); the internal validation split needs at least 2");
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  NoiseSource rng(seed ^ kTrainSplitSalt);
  rng.shuffle(idx);
  std::size_t n_val =
      static_cast<std::size_t>(std::llround(static_cast<double>(n) * fraction));
  n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
  const std::span<const std::size_t> train_idx(idx.data(), n - n_val);
  const std::span<const std::size_t> val_idx(idx.data() + (n - n_val), n_val);
  return {take_rows(all, train_idx), take_rows(all, val_idx)};
}

// --- synth ----------------------------------------------------------------

int run_synth(std::uint64_t seed, bool seed_set, const std::string& config_path,
              const std::string& out) {
  std::size_t train_n = 8192;
  std::size_t val_n = 1024;
  std::size_t test_n = 2048;
  std::optional<ScmSpec> custom;
  if (!config_path.empty()) {
    const TextDoc doc = read_text_doc(config_path);
    custom = scm_from_doc(doc);
    train_n = doc_size_or(doc, "synth.train_n", train_n);
    val_n = doc_size_or(doc, "synth.val_n", val_n);
    test_n = doc_size_or(doc, "synth.test_n", test_n);
    if (!seed_set && doc.has("synth.seed")) {
      seed = doc.require_u64("synth.seed");
    }
  }
  const ScmSpec spec = custom ? *custom : canonical_spec(seed);
  const Benchmark bench = assemble_benchmark(spec, seed, train_n, val_n, test_n);

  prepare_out_dir(out);
  auto emit = [&](const std::string& name, const LabeledBatch& batch) {
    const std::string path = path_join(out, name);
    write_emb(path, batch);
    std::printf("wrote %s  (n=%zu, d=%zu%s%s)\n", path.c_str(), batch.embeddings.rows,
                batch.embeddings.cols, batch.labels.empty() ? "" : ", labels",
                batch.ground_truth.empty() ? "" : ", truth-mask");
  };
  emit("train.emb", bench.train);
  emit("val.emb", bench.val);
  emit("test_same.emb", bench.test_same_domain);
  for (std::size_t i = 0; i < bench.test_shifted.size(); ++i) {
    emit("test_shifted_" + std::to_string(i) + ".emb", bench.test_shifted[i]);
  }

  TextDoc echo;
  echo.schema = kConfigSchema;
  scm_into_doc(bench.spec, echo);
  echo.set_u64("synth.seed", seed);
  echo.set_u64("synth.train_n", train_n);
  echo.set_u64("synth.val_n", val_n);
  echo.set_u64("synth.test_n", test_n);
  const std::string spec_path = path_join(out, "spec.txt");
  write_text_doc(spec_path, echo);
  std::printf("wrote %s\n", spec_path.c_str());
  return 0;
}

// --- train ------------------------------------------------------------------

int run_train(const std::string& train_path, const std::string& val_path,
              const std::string& config_path, const std::string& checkpoint_path,
              std::uint64_t seed, bool seed_set, const std::string& out) {
  LabeledBatch train = read_emb(train_path);
  require_labels(train, train_path);

  TrainerState state;
  if (!checkpoint_path.empty()) {
    if (!config_path.empty() || seed_set) {
      throw ConfigError(
          "--checkpoint resumes a run that carries its own configuration; drop --config and "
          "--seed");
    }
    state = load_checkpoint(checkpoint_path);
  } else {
    TrainConfig cfg;
    if (!config_path.empty()) {
      cfg = config_from_doc(read_text_doc(config_path));
    }
    if (seed_set) {
      cfg.seed = seed;
    }
    state = make_trainer_state(train.embeddings.cols, cfg);
  }

  LabeledBatch val;
  if (!val_path.empty()) {
    val = read_emb(val_path);
    require_labels(val, val_path);
  } else {
    auto split = split_train_val(train, state.cfg.validation_fraction, state.cfg.seed);
    std::printf("no --val given: split %zu rows into %zu train / %zu val\n",
                train.embeddings.rows, split.first.embeddings.rows,
                split.second.embeddings.rows);
    val = std::move(split.second);
    train = std::move(split.first);
  }

  fit_epochs(state, train, val);

  prepare_out_dir(out);
  const std::string ckpt_path = path_join(out, "checkpoint.ckpt");
  const std::string history_path = path_join(out, "history.txt");
  const std::string config_out_path = path_join(out, "config.txt");
  save_checkpoint(ckpt_path, state);
  write_text_doc(history_path, history_to_doc(state.history));
  write_text_doc(config_out_path, config_to_doc(state.cfg));

  const TrainHistory& history = state.history;
  std::printf("trained %zu epoch(s)%s%s\n", history.epochs.size(),
              history.stopped_early ? ", stopped early" : "",
              state.finished ? "" : " (epoch limit not reached; resume with --checkpoint)");
  if (!history.epochs.empty()) {
    const EpochRecord& best = history.epochs[history.best_epoch];
    std::printf("best epoch %zu: val total %.6f, val accuracy %.4f\n", history.best_epoch,
                best.val_loss.total, best.val_accuracy);
  }
  std::printf("wrote %s\nwrote %s\nwrote %s\n", ckpt_path.c_str(), history_path.c_str(),
              config_out_path.c_str());
  return 0;
}

// --- eval -------------------------------------------------------------------

int run_eval(const std::string& checkpoint_path, const std::vector<std::string>& test_paths,
             double threshold, std::uint64_t seed, bool seed_set, const std::string& out) {
  const TrainerState state = load_checkpoint(checkpoint_path);
  const ModelBundle& bundle = state.best_bundle;

  std::vector<LabeledBatch> batches;
  batches.reserve(test_paths.size());
  for (const std::string& path : test_paths) {
    LabeledBatch batch = read_emb(path);
    require_labels(batch, path);
    require_width(batch, bundle.dim(), path);
    batches.push_back(std::move(batch));
  }
  std::vector<std::pair<std::string, const LabeledBatch*>> datasets;
  datasets.reserve(batches.size());
  for (std::size_t i = 0; i < batches.size(); ++i) {
    datasets.emplace_back(test_paths[i], &batches[i]);
  }

  const MetricsReport report =
      domain_shift_report(bundle, datasets, seed_set ? seed : state.cfg.seed,
                          config_echo_entries(state.cfg), threshold);
  std::fputs(format_report_table(report).c_str(), stdout);

  if (!out.empty()) {
    prepare_out_dir(out);
    const std::string report_path = path_join(out, "report.txt");
    write_text_doc(report_path, report_to_doc(report));
    std::printf("wrote %s\n", report_path.c_str());
  }
  return 0;
}

// --- inspect ----------------------------------------------------------------

int run_inspect(const std::string& checkpoint_path, const std::string& test_path,
                double threshold, const std::string& out) {
  const TrainerState state = load_checkpoint(checkpoint_path);
  const ModelBundle& bundle = state.best_bundle;
  const LabeledBatch batch = read_emb(test_path);
  require_width(batch, bundle.dim(), test_path);

  const std::vector<double> profile = mean_mask_profile(bundle, batch.embeddings);
  const double sparsity = std::accumulate(profile.begin(), profile.end(), 0.0);
  std::vector<bool> in_truth(profile.size(), false);
  for (std::size_t dim : batch.ground_truth) {
    if (dim < in_truth.size()) {
      in_truth[dim] = true;
    }
  }

  std::printf("mode %s, input width %zu, %zu epoch(s) trained, best epoch %zu%s\n",
              ablation_name(state.mode), bundle.dim(), state.history.epochs.size(),
              state.history.best_epoch, state.finished ? "" : " (training unfinished)");
  std::printf("%-4s %12s %9s%s\n", "dim", "mean mask", "selected",
              batch.ground_truth.empty() ? "" : "  truth");
  for (std::size_t j = 0; j < profile.size(); ++j) {
    std::printf("%-4zu %12.6f %9s%s\n", j, profile[j], profile[j] >= threshold ? "*" : "",
                batch.ground_truth.empty() ? "" : (in_truth[j] ? "  *" : ""));
  }
  std::printf("mean per-row L1 (sparsity): %.6f of %zu dims\n", sparsity, profile.size());

  MaskRecovery recovery;
  if (!batch.ground_truth.empty()) {
    recovery = mask_recovery(profile, batch.ground_truth, threshold);
    std::printf("recovery at threshold %.3f: precision %.4f, recall %.4f, IoU %.4f%s\n",
                threshold, recovery.precision, recovery.recall, recovery.iou,
                recovery.vacuous_recall ? " (vacuous recall)" : "");
  }

  if (!out.empty()) {
    TextDoc doc;
    doc.schema = kInspectSchema;
    doc.set_double("threshold", threshold);
    doc.set_double("sparsity", sparsity);
    doc.set_u64("dim.count", profile.size());
    for (std::size_t j = 0; j < profile.size(); ++j) {
      const std::string p = "dim." + std::to_string(j) + ".";
      doc.set_double(p + "mean_mask", profile[j]);
      doc.set_bool(p + "selected", profile[j] >= threshold);
      if (!batch.ground_truth.empty()) {
        doc.set_bool(p + "truth", in_truth[j]);
      }
    }
    doc.set_bool("truth.present", !batch.ground_truth.empty());
    if (!batch.ground_truth.empty()) {
      doc.set_double("recovery.precision", recovery.precision);
      doc.set_double("recovery.recall", recovery.recall);
      doc.set_double("recovery.iou", recovery.iou);
      doc.set_bool("recovery.vacuous_recall", recovery.vacuous_recall);
    }
    prepare_out_dir(out);
    const std::string path = path_join(out, "inspect.txt");
    write_text_doc(path, doc);
    std::printf("wrote %s\n", path.c_str());
  }
  return 0;
}

// --- gradcheck ----------------------------------------------------------------

int run_gradcheck(std::uint64_t seed, const std::string& out) {
  const std::vector<GradCheckCase> cases = run_gradient_suite(seed);
  std::fputs(format_gradient_suite(cases).c_str(), stdout);

  if (!out.empty()) {
    TextDoc doc;
    doc.schema = kGradcheckSchema;
    doc.set_u64("seed", seed);
    doc.set_double("tolerance", kGradTolerance);
    doc.set_u64("case.count", cases.size());
    for (std::size_t i = 0; i < cases.size(); ++i) {
      const std::string p = "case." + std::to_string(i) + ".";
      doc.set(p + "name", cases[i].name);
      doc.set_u64(p + "checked", cases[i].checked);
      doc.set_double(p + "max_rel_error", cases[i].max_rel_error);
      doc.set_bool(p + "passed", cases[i].passed);
    }
    prepare_out_dir(out);
    const std::string path = path_join(out, "gradcheck.txt");
    write_text_doc(path, doc);
    std::printf("wrote %s\n", path.c_str());
  }
  return all_passed(cases) ? 0 : 1;
}

// --- ablate ----------------------------------------------------------------

int run_ablate(std::uint64_t seed, bool seed_set, const std::string& config_path,
               const std::string& out) {
  TrainConfig cfg;
  std::optional<ScmSpec> custom;
  std::size_t train_n = 8192;
  std::size_t val_n = 1024;
  std::size_t test_n = 2048;
  if (!config_path.empty()) {
    const TextDoc doc = read_text_doc(config_path);
    cfg = config_from_doc(doc);
    custom = scm_from_doc(doc);
    train_n = doc_size_or(doc, "synth.train_n", train_n);
    val_n = doc_size_or(doc, "synth.val_n", val_n);
    test_n = doc_size_or(doc, "synth.test_n", test_n);
  }
  if (seed_set) {
    cfg.seed = seed;
  }
  const Benchmark bench = custom
                              ? assemble_benchmark(*custom, cfg.seed, train_n, val_n, test_n)
                              : make_benchmark(cfg.seed);
  if (bench.test_shifted.empty()) {
    throw ConfigError("the ablation comparison needs at least one shifted domain");
  }

  constexpr AblationMode kModes[] = {AblationMode::kFull, AblationMode::kFactorizationOnly,
                                     AblationMode::kMaskingOnly, AblationMode::kBothOff};
  std::vector<AblationRow> rows;
  for (AblationMode mode : kModes) {
    std::printf("training %s ...\n", ablation_name(mode));
    std::fflush(stdout);
    rows.push_back(run_ablation_row(bench, cfg, mode));
  }

  std::printf("\n# %s\n", kMaskingOnlyNote);
  std::printf("%-20s %10s %10s %10s %10s %8s\n", "mode", "same-acc", "shift-acc", "mask-iou",
              "probe", "epochs");
  for (const AblationRow& row : rows) {
    std::printf("%-20s %10.4f %10.4f %10.4f %10.4f %8zu\n", ablation_name(row.mode),
                row.same_accuracy, row.shifted_accuracy, row.mask_iou, row.probe_accuracy,
                row.epochs_run);
  }
  const bool full_highest =
      std::all_of(rows.begin() + 1, rows.end(), [&](const AblationRow& row) {
        return row.shifted_accuracy < rows.front().shifted_accuracy;
      });
  std::printf("full model has the strictly highest shifted accuracy: %s\n",
              full_highest ? "yes" : "no");

  if (!out.empty()) {
    TextDoc doc;
    doc.schema = kAblateSchema;
    doc.set("note.masking_only", kMaskingOnlyNote);
    doc.set_bool("full_highest_shifted", full_highest);
    doc.set_u64("row.count", rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const std::string p = "row." + std::to_string(i) + ".";
      doc.set(p + "mode", ablation_name(rows[i].mode));
      doc.set_double(p + "same_accuracy", rows[i].same_accuracy);
      doc.set_double(p + "shifted_accuracy", rows[i].shifted_accuracy);
      doc.set_double(p + "mask_iou", rows[i].mask_iou);
      doc.set_double(p + "probe_accuracy", rows[i].probe_accuracy);
      doc.set_u64(p + "epochs_run", rows[i].epochs_run);
    }
    for (const auto& [k, v] : config_echo_entries(cfg)) {
      doc.set("config." + k, v);
    }
    prepare_out_dir(out);
    const std::string path = path_join(out, "ablate.txt");
    write_text_doc(path, doc);
    std::printf("wrote %s\n", path.c_str());
  }
  return 0;
}

}  // namespace

int cli_main(std::vector<std::string> args) {
  CLI::App app{
      "per-dimension causal feature masks over embeddings: synthetic benchmarks, adversarial "
      "training, evaluation"};
  app.name("causalmask");
  app.require_subcommand(1);
  int rc = 0;

  // synth
  auto* synth = app.add_subcommand("synth", "sample a benchmark and write its EMB1 files");
  std::uint64_t synth_seed = 0;
  std::string synth_config;
  std::string synth_out;
  CLI::Option* synth_seed_opt =
      synth->add_option("--seed", synth_seed, "data seed (synth.seed in --config when absent)");
  synth->add_option("--config", synth_config,
                    "config file with scm.* / synth.* keys (canonical generator when absent)");
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->callback([&] {
    rc = run_synth(synth_seed, synth_seed_opt->count() > 0, synth_config, synth_out);
  });

  // train
  auto* train = app.add_subcommand("train", "fit the masked classifier on EMB1 data");
  std::uint64_t train_seed = 0;
  std::string train_train;
  std::string train_val;
  std::string train_config;
  std::string train_ckpt;
  std::string train_out;
  train->add_option("--train", train_train, "training EMB1 file")->required();
  train->add_option("--val", train_val,
                    "validation EMB1 file (internal split of --train when absent)");
  train->add_option("--config", train_config, "training configuration file");
  CLI::Option* train_seed_opt =
      train->add_option("--seed", train_seed, "overrides the config seed");
  train->add_option("--checkpoint", train_ckpt, "resume from this checkpoint file");
  train->add_option("--out", train_out, "output directory (checkpoint, history, config echo)")
      ->required();
  train->callback([&] {
    rc = run_train(train_train, train_val, train_config, train_ckpt, train_seed,
                   train_seed_opt->count() > 0, train_out);
  });

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on one or more EMB1 files");
  std::uint64_t eval_seed = 0;
  std::vector<std::string> eval_tests;
  std::string eval_ckpt;
  std::string eval_out;
  double eval_threshold = 0.5;
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  eval->add_option("--test", eval_tests, "EMB1 file(s) to evaluate, one report row each")
      ->required();
  eval->add_option("--threshold", eval_threshold, "mask selection threshold for recovery")
      ->check(CLI::Range(0.0, 1.0));
  CLI::Option* eval_seed_opt =
      eval->add_option("--seed", eval_seed, "report seed (checkpoint config seed when absent)");
  eval->add_option("--out", eval_out, "directory for the structured report");
  eval->callback([&] {
    rc = run_eval(eval_ckpt, eval_tests, eval_threshold, eval_seed,
                  eval_seed_opt->count() > 0, eval_out);
  });

  // inspect
  auto* inspect =
      app.add_subcommand("inspect", "per-dimension mean mask of a checkpoint on a dataset");
  std::string inspect_ckpt;
  std::string inspect_test;
  std::string inspect_out;
  double inspect_threshold = 0.5;
  inspect->add_option("--checkpoint", inspect_ckpt, "checkpoint file")->required();
  inspect->add_option("--test", inspect_test, "EMB1 file the profile is averaged over")
      ->required();
  inspect->add_option("--threshold", inspect_threshold, "mask selection threshold")
      ->check(CLI::Range(0.0, 1.0));
  inspect->add_option("--out", inspect_out, "directory for the structured profile");
  inspect->callback(
      [&] { rc = run_inspect(inspect_ckpt, inspect_test, inspect_threshold, inspect_out); });

  // gradcheck
  auto* gradcheck =
      app.add_subcommand("gradcheck", "finite-difference check of every analytic gradient");
  std::uint64_t gradcheck_seed = 0;
  std::string gradcheck_out;
  gradcheck->add_option("--seed", gradcheck_seed, "instance seed");
  gradcheck->add_option("--out", gradcheck_out, "directory for the structured results");
  gradcheck->callback([&] { rc = run_gradcheck(gradcheck_seed, gradcheck_out); });

  // ablate
  auto* ablate =
      app.add_subcommand("ablate", "train all four module-ablation rows and compare them");
  std::uint64_t ablate_seed = 0;
  std::string ablate_config;
  std::string ablate_out;
  CLI::Option* ablate_seed_opt =
      ablate->add_option("--seed", ablate_seed, "overrides the config seed");
  ablate->add_option("--config", ablate_config,
                     "training config; scm.* / synth.* keys swap in a custom benchmark");
  ablate->add_option("--out", ablate_out, "directory for the structured comparison");
  ablate->callback([&] {
    rc = run_ablate(ablate_seed, ablate_seed_opt->count() > 0, ablate_config, ablate_out);
  });

  try {
    std::reverse(args.begin(), args.end());
    app.parse(std::move(args));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const Error& e) {
    std::fprintf(stderr, "causalmask: error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "causalmask: error: %s\n", e.what());
    return 1;
  }
  return rc;
}

}  // namespace causalmask
