#include "causalmask/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <string>

#include "causalmask/errors.hpp"

namespace causalmask {

namespace {

void check_score_label_pair(std::span<const double> scores, std::span<const double> labels,
                            const char* op) {
  if (scores.size() != labels.size()) {
    throw DimensionError(std::string(op) + ": " + std::to_string(scores.size()) + " scores vs " +
                         std::to_string(labels.size()) + " labels");
  }
  if (scores.empty()) {
    throw MetricError(std::string(op) + ": empty input");
  }
  for (double y : labels) {
    if (y != 0.0 && y != 1.0) {
      throw MetricError(std::string(op) + ": label " + std::to_string(y) + " is not 0/1");
    }
  }
}

}  // namespace

double accuracy(std::span<const double> scores, std::span<const double> labels, double threshold) {
  check_score_label_pair(scores, labels, "accuracy");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double predicted = scores[i] >= threshold ? 1.0 : 0.0;
    if (predicted == labels[i]) {
      ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(scores.size());
}

double average_precision(std::span<const double> scores, std::span<const double> labels) {
  check_score_label_pair(scores, labels, "average_precision");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::size_t positives = 0;
  double sum_precision = 0.0;
  for (std::size_t rank = 1; rank <= n; ++rank) {
    if (labels[order[rank - 1]] == 1.0) {
      ++positives;
      sum_precision += static_cast<double>(positives) / static_cast<double>(rank);
    }
  }
  if (positives == 0) {
    throw MetricError("average_precision: no positive labels");
  }
  return sum_precision / static_cast<double>(positives);
}

MaskRecovery mask_recovery(std::span<const double> mask_row,
                           const std::vector<std::size_t>& truth, double threshold) {
  const std::size_t d = mask_row.size();
  for (double m : mask_row) {
    if (!(m >= 0.0 && m <= 1.0)) {
      throw MetricError("mask_recovery: mask value " + std::to_string(m) + " outside [0,1]");
    }
  }
  std::vector<bool> is_truth(d, false);
  std::size_t truth_count = 0;
  for (std::size_t idx : truth) {
    if (idx >= d) {
      throw DimensionError("mask_recovery: truth index " + std::to_string(idx) +
                           " out of range for d=" + std::to_string(d));
    }
    if (!is_truth[idx]) {
      is_truth[idx] = true;
      ++truth_count;
    }
  }
  std::size_t selected = 0;
  std::size_t inter = 0;
  for (std::size_t i = 0; i < d; ++i) {
    if (mask_row[i] >= threshold) {
      ++selected;
      if (is_truth[i]) {
        ++inter;
      }
    }
  }
  const std::size_t uni = selected + truth_count - inter;

  MaskRecovery out;
  if (selected == 0) {
    out.precision = truth_count == 0 ? 1.0 : 0.0;
  } else {
    out.precision = static_cast<double>(inter) / static_cast<double>(selected);
  }
  if (truth_count == 0) {
    out.recall = 1.0;
    out.vacuous_recall = true;
  } else {
    out.recall = static_cast<double>(inter) / static_cast<double>(truth_count);
  }
  out.iou = uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
  return out;
}

double MetricsReport::mean_accuracy() const {
  if (rows.empty()) {
    throw MetricError("MetricsReport: no rows to aggregate");
  }
  double acc = 0.0;
  for (const auto& row : rows) {
    acc += row.accuracy;
  }
  return acc / static_cast<double>(rows.size());
}

double MetricsReport::mean_average_precision() const {
  if (rows.empty()) {
    throw MetricError("MetricsReport: no rows to aggregate");
  }
  double ap = 0.0;
  for (const auto& row : rows) {
    ap += row.average_precision;
  }
  return ap / static_cast<double>(rows.size());
}

TextDoc report_to_doc(const MetricsReport& report) {
  TextDoc doc;
  doc.schema = kReportSchema;
  doc.set_u64("seed", report.seed);
  doc.set_u64("row.count", report.rows.size());
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    const std::string p = "row." + std::to_string(i) + ".";
    const MetricsRow& row = report.rows[i];
    doc.set(p + "name", row.name);
    doc.set_u64(p + "n", row.n);
    doc.set_double(p + "accuracy", row.accuracy);
    doc.set_double(p + "average_precision", row.average_precision);
  }
  if (!report.rows.empty()) {
    doc.set_double("aggregate.accuracy", report.mean_accuracy());
    doc.set_double("aggregate.average_precision", report.mean_average_precision());
  }
  doc.set_bool("mask.present", report.mask.has_value());
  if (report.mask) {
    doc.set_double("mask.precision", report.mask->precision);
    doc.set_double("mask.recall", report.mask->recall);
    doc.set_double("mask.iou", report.mask->iou);
    doc.set_double("mask.mean_sparsity", report.mask->mean_sparsity);
    doc.set_bool("mask.vacuous_recall", report.mask->vacuous_recall);
  }
  for (const auto& [k, v] : report.config_echo) {
    doc.set("config." + k, v);
  }
  return doc;
}

MetricsReport report_from_doc(const TextDoc& doc) {
  if (doc.schema != kReportSchema) {
    throw FormatError("expected schema " + std::string(kReportSchema) + ", got '" + doc.schema +
                      "'");
  }
  MetricsReport report;
  report.seed = doc.require_u64("seed");
  const std::uint64_t count = doc.require_u64("row.count");
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::string p = "row." + std::to_string(i) + ".";
    MetricsRow row;
    row.name = doc.require(p + "name");
    row.n = static_cast<std::size_t>(doc.require_u64(p + "n"));
    row.accuracy = doc.require_double(p + "accuracy");
    row.average_precision = doc.require_double(p + "average_precision");
    report.rows.push_back(std::move(row));
  }
  if (count > 0) {
    const double acc = doc.require_double("aggregate.accuracy");
    const double ap = doc.require_double("aggregate.average_precision");
    if (std::abs(acc - report.mean_accuracy()) > 1e-12 ||
        std::abs(ap - report.mean_average_precision()) > 1e-12) {
      throw FormatError("report aggregates do not equal the unweighted row means");
    }
  }
  if (doc.require_bool("mask.present")) {
    MaskMetrics mask;
    mask.precision = doc.require_double("mask.precision");
    mask.recall = doc.require_double("mask.recall");
    mask.iou = doc.require_double("mask.iou");
    mask.mean_sparsity = doc.require_double("mask.mean_sparsity");
    mask.vacuous_recall = doc.require_bool("mask.vacuous_recall");
    report.mask = mask;
  }
  for (const auto& [k, v] : doc.entries) {
    if (k.rfind("config.", 0) == 0) {
      report.config_echo.emplace_back(k.substr(7), v);
    }
  }
  return report;
}

std::string format_report_table(const MetricsReport& report) {
  char line[160];
  std::string out;
  std::snprintf(line, sizeof(line), "%-24s %8s %10s %10s\n", "dataset", "n", "accuracy", "ap");
  out += line;
  for (const auto& row : report.rows) {
    std::snprintf(line, sizeof(line), "%-24s %8zu %10.4f %10.4f\n", row.name.c_str(), row.n,
                  row.accuracy, row.average_precision);
    out += line;
  }
  if (!report.rows.empty()) {
    std::snprintf(line, sizeof(line), "%-24s %8s %10.4f %10.4f\n", "aggregate", "-",
                  report.mean_accuracy(), report.mean_average_precision());
    out += line;
  }
  if (report.mask) {
    std::snprintf(line, sizeof(line),
                  "mask: precision %.4f recall %.4f%s iou %.4f mean_sparsity %.4f\n",
                  report.mask->precision, report.mask->recall,
                  report.mask->vacuous_recall ? " (vacuous)" : "", report.mask->iou,
                  report.mask->mean_sparsity);
    out += line;
  }
  return out;
}

}  // namespace causalmask
