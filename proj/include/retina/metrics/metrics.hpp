#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "retina/core/error.hpp"
#include "retina/core/severity.hpp"

namespace retina::metrics {

enum class MetricsErrc { LengthMismatch, Empty, OutOfRange, InvalidProbabilities, SingleClassOnly };

const char* to_string(MetricsErrc code);

using MetricsError = CodedError<MetricsErrc>;

/// Square count matrix; rows are actual classes, columns predicted.
struct ConfusionMatrix {
  int classes = kSeverityCount;
  std::vector<std::uint64_t> counts;  // row-major, classes x classes

  explicit ConfusionMatrix(int k = kSeverityCount)
      : classes(k), counts(static_cast<std::size_t>(k) * static_cast<std::size_t>(k), 0) {}
  /// From nested rows; throws OutOfRange when not square.
  static ConfusionMatrix from_rows(const std::vector<std::vector<std::uint64_t>>& rows);

  std::uint64_t& at(int actual, int predicted) { return counts[index(actual, predicted)]; }
  std::uint64_t at(int actual, int predicted) const { return counts[index(actual, predicted)]; }
  std::uint64_t total() const;
  std::uint64_t trace() const;
  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::size_t index(int a, int p) const { return static_cast<std::size_t>(a) * static_cast<std::size_t>(classes) + static_cast<std::size_t>(p); }
};

/// Throws LengthMismatch, Empty, or OutOfRange for labels outside [0, classes).
ConfusionMatrix confusion(std::span<const int> predicted, std::span<const int> actual, int classes = kSeverityCount);
ConfusionMatrix confusion(std::span<const Severity> predicted, std::span<const Severity> actual);

/// One-vs-rest counts and the five ratios for one class.
struct ClassMetrics {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
  double accuracy = 0.0;     // (TP + TN) / total
  double recall = 0.0;       // TP / (TP + FN), 0 when no positives
  double specificity = 0.0;  // TN / (TN + FP), 1 when no negatives
  double precision = 0.0;    // TP / (TP + FP), 0 when nothing predicted positive
  double f1 = 0.0;           // 2PR / (P + R), 0 when P + R = 0
  bool degenerate = false;   // some denominator above was zero
};

/// Counts and ratios of `cls` against the rest.
ClassMetrics class_metrics(const ConfusionMatrix& cm, int cls);

/// 2TP / (2TP + FP + FN), 0 when the denominator is zero.
double f1_from_counts(const ClassMetrics& m);

enum class Averaging { Macro, Weighted };

struct Summary {
  double accuracy = 0.0, precision = 0.0, recall = 0.0, specificity = 0.0, f1 = 0.0;
};

struct AucResult {
  std::vector<std::optional<double>> per_class;  // empty where the class is absent from actuals
  double macro = 0.0;                            // mean over present classes
};

struct MetricReport {
  ConfusionMatrix cm;
  std::vector<ClassMetrics> per_class;
  Averaging averaging = Averaging::Macro;
  Summary average;               // macro (unweighted) or support-weighted
  double overall_accuracy = 0.0;  // trace / total
  std::optional<AucResult> auc;
  bool auc_undefined = false;  // scores were given but only one class occurs
};

/// Every class of `cm` against the rest; weighted averaging uses the
/// actual-class support as weights.
MetricReport metric_report(const ConfusionMatrix& cm, Averaging averaging = Averaging::Macro);

/// Area under the ROC curve of `scores` for label == positive against the
/// rest: one point per distinct threshold, trapezoids between them. Equal
/// scores form one step, which counts positive/negative ties as one half.
double binary_auc(std::span<const double> scores, std::span<const int> labels, int positive);

/// Macro one-vs-rest AUC. `scores` holds `classes` probabilities per
/// sample, each row summing to 1 within 1e-6 (else InvalidProbabilities).
/// Throws SingleClassOnly when fewer than two classes occur in `actual`.
AucResult roc_auc_ovr(std::span<const double> scores, std::span<const int> actual, int classes = kSeverityCount);

/// Report plus AUC; a single-class `actual` leaves auc empty and sets
/// auc_undefined instead of throwing.
MetricReport evaluate(std::span<const int> predicted, std::span<const int> actual, std::span<const double> scores,
                      int classes = kSeverityCount, Averaging averaging = Averaging::Macro);

nlohmann::json to_json(const ConfusionMatrix& cm);
nlohmann::json to_json(const MetricReport& r);

/// One row of a model comparison table.
struct BenchmarkRow {
  std::string model;
  double accuracy = 0.0;  // fraction
  double size_bytes = 0.0;
  double inference_ms = 0.0;
  double macs = 0.0;
  std::optional<double> auc;
  double precision = 0.0, recall = 0.0, f1 = 0.0;  // fractions
};

/// Columns: model, accuracy_pct, model_size_mb, inference_time_ms, flops_b,
/// auc, precision_pct, recall_pct, f1_pct. Sizes in 10^6 bytes, FLOPs as
/// 10^9 MACs; an undefined AUC is left empty.
std::string benchmark_csv(const std::vector<BenchmarkRow>& rows);

}  // namespace retina::metrics
