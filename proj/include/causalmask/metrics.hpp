#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "causalmask/textio.hpp"

namespace causalmask {

// Fraction of samples where (score >= threshold) matches the 0/1 label; a
// score exactly at the threshold counts as a positive prediction.
double accuracy(std::span<const double> scores, std::span<const double> labels,
                double threshold = 0.5);

// Rank-based average precision: sort by score descending, ties broken by
// original order (stable); AP = mean over positives, in rank order, of
// (positives at rank <= k) / k. Throws MetricError when no positives exist.
double average_precision(std::span<const double> scores, std::span<const double> labels);

struct MaskRecovery {
  double precision = 0.0;
  double recall = 0.0;
  double iou = 0.0;
  // Empty truth set: recall is 1 by convention and flagged here.
  bool vacuous_recall = false;
};

// Compares the thresholded mask row against the ground-truth index set.
// selected = {i : mask[i] >= threshold}; precision = |sel ∩ truth| / |sel|
// (1 when both sel and truth are empty, 0 when only sel is); recall =
// |sel ∩ truth| / |truth| (vacuously 1 on empty truth); IoU = |∩| / |∪|
// (1 when both sides are empty).
MaskRecovery mask_recovery(std::span<const double> mask_row,
                           const std::vector<std::size_t>& truth, double threshold = 0.5);

struct MetricsRow {
  std::string name;
  std::size_t n = 0;
  double accuracy = 0.0;
  double average_precision = 0.0;
};

struct MaskMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double iou = 0.0;
  double mean_sparsity = 0.0;
  bool vacuous_recall = false;
};

struct MetricsReport {
  std::uint64_t seed = 0;
  std::vector<MetricsRow> rows;
  std::optional<MaskMetrics> mask;
  // Flattened key/value echo of the configuration that produced the run.
  std::vector<std::pair<std::string, std::string>> config_echo;

  // Unweighted means over rows; MetricError when there are no rows.
  double mean_accuracy() const;
  double mean_average_precision() const;
};

inline constexpr const char* kReportSchema = "causalmask.report.v1";

TextDoc report_to_doc(const MetricsReport& report);
// Validates the schema and that the stored aggregates equal the unweighted
// row means to 1e-12 (FormatError otherwise).
MetricsReport report_from_doc(const TextDoc& doc);

// Fixed-width human-readable rendering of the same report.
std::string format_report_table(const MetricsReport& report);

}  // namespace causalmask
