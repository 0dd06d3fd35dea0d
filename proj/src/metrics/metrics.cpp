#include "retina/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "retina/core/bytes.hpp"
#include "retina/core/csv.hpp"

namespace retina::metrics {

const char* to_string(MetricsErrc code) {
  switch (code) {
    case MetricsErrc::LengthMismatch: return "LengthMismatch";
    case MetricsErrc::Empty: return "Empty";
    case MetricsErrc::OutOfRange: return "OutOfRange";
    case MetricsErrc::InvalidProbabilities: return "InvalidProbabilities";
    case MetricsErrc::SingleClassOnly: return "SingleClassOnly";
  }
  return "?";
}

ConfusionMatrix ConfusionMatrix::from_rows(const std::vector<std::vector<std::uint64_t>>& rows) {
  ConfusionMatrix cm(static_cast<int>(rows.size()));
  for (std::size_t a = 0; a < rows.size(); ++a) {
    if (rows[a].size() != rows.size()) throw MetricsError(MetricsErrc::OutOfRange, "confusion matrix is not square");
    for (std::size_t p = 0; p < rows.size(); ++p) cm.at(static_cast<int>(a), static_cast<int>(p)) = rows[a][p];
  }
  return cm;
}

std::uint64_t ConfusionMatrix::total() const { return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}); }

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t t = 0;
  for (int c = 0; c < classes; ++c) t += at(c, c);
  return t;
}

ConfusionMatrix confusion(std::span<const int> predicted, std::span<const int> actual, int classes) {
  if (predicted.size() != actual.size())
    throw MetricsError(MetricsErrc::LengthMismatch, std::to_string(predicted.size()) + " predictions for " +
                                                        std::to_string(actual.size()) + " labels");
  if (actual.empty()) throw MetricsError(MetricsErrc::Empty, "no samples");
  ConfusionMatrix cm(classes);
  for (std::size_t i = 0; i < actual.size(); ++i) {
    if (actual[i] < 0 || actual[i] >= classes || predicted[i] < 0 || predicted[i] >= classes)
      throw MetricsError(MetricsErrc::OutOfRange, "label out of range at sample " + std::to_string(i));
    ++cm.at(actual[i], predicted[i]);
  }
  return cm;
}

ConfusionMatrix confusion(std::span<const Severity> predicted, std::span<const Severity> actual) {
  std::vector<int> p, a;
  for (auto s : predicted) p.push_back(ordinal(s));
  for (auto s : actual) a.push_back(ordinal(s));
  return confusion(p, a);
}

namespace {

double ratio(std::uint64_t num, std::uint64_t den, double if_zero, bool& degenerate) {
  if (den == 0) {
    degenerate = true;
    return if_zero;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

ClassMetrics class_metrics(const ConfusionMatrix& cm, int cls) {
  ClassMetrics m;
  std::uint64_t row = 0, col = 0;
  for (int k = 0; k < cm.classes; ++k) {
    row += cm.at(cls, k);
    col += cm.at(k, cls);
  }
  const auto total = cm.total();
  m.tp = cm.at(cls, cls);
  m.fn = row - m.tp;
  m.fp = col - m.tp;
  m.tn = total - m.tp - m.fn - m.fp;
  bool d = false;
  m.accuracy = ratio(m.tp + m.tn, total, 0.0, d);
  m.recall = ratio(m.tp, m.tp + m.fn, 0.0, d);
  m.specificity = ratio(m.tn, m.tn + m.fp, 1.0, d);
  m.precision = ratio(m.tp, m.tp + m.fp, 0.0, d);
  if (m.precision + m.recall > 0.0) {
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  } else {
    m.f1 = 0.0;
    d = true;
  }
  m.degenerate = d;
  return m;
}

double f1_from_counts(const ClassMetrics& m) {
  const auto den = 2 * m.tp + m.fp + m.fn;
  return den == 0 ? 0.0 : static_cast<double>(2 * m.tp) / static_cast<double>(den);
}

MetricReport metric_report(const ConfusionMatrix& cm, Averaging averaging) {
  MetricReport r{cm, {}, averaging, {}, 0.0, std::nullopt, false};
  const auto total = cm.total();
  r.overall_accuracy = total == 0 ? 0.0 : static_cast<double>(cm.trace()) / static_cast<double>(total);
  for (int c = 0; c < cm.classes; ++c) {
    const auto m = class_metrics(cm, c);
    r.per_class.push_back(m);
    const double w = averaging == Averaging::Macro
                         ? 1.0 / cm.classes
                         : (total == 0 ? 0.0 : static_cast<double>(m.tp + m.fn) / static_cast<double>(total));
    r.average.accuracy += w * m.accuracy;
    r.average.precision += w * m.precision;
    r.average.recall += w * m.recall;
    r.average.specificity += w * m.specificity;
    r.average.f1 += w * m.f1;
  }
  return r;
}

double binary_auc(std::span<const double> scores, std::span<const int> labels, int positive) {
  if (scores.size() != labels.size()) throw MetricsError(MetricsErrc::LengthMismatch, "scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  // Twice the area times P*N stays an exact integer: each threshold step
  // adds fp_step * (2 * tp_before + tp_step).
  std::uint64_t tp = 0, fp = 0, twice_area = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::uint64_t step_tp = 0, step_fp = 0;
    const double s = scores[order[i]];
    for (; i < order.size() && scores[order[i]] == s; ++i) (labels[order[i]] == positive ? step_tp : step_fp) += 1;
    twice_area += step_fp * (2 * tp + step_tp);
    tp += step_tp;
    fp += step_fp;
  }
  if (tp == 0 || fp == 0) throw MetricsError(MetricsErrc::SingleClassOnly, "AUC needs positives and negatives");
  return static_cast<double>(twice_area) / (2.0 * static_cast<double>(tp) * static_cast<double>(fp));
}

AucResult roc_auc_ovr(std::span<const double> scores, std::span<const int> actual, int classes) {
  if (actual.empty()) throw MetricsError(MetricsErrc::Empty, "no samples");
  if (scores.size() != actual.size() * static_cast<std::size_t>(classes))
    throw MetricsError(MetricsErrc::LengthMismatch, "expected " + std::to_string(classes) + " scores per sample");
  std::vector<std::size_t> support(static_cast<std::size_t>(classes), 0);
  for (std::size_t i = 0; i < actual.size(); ++i) {
    if (actual[i] < 0 || actual[i] >= classes)
      throw MetricsError(MetricsErrc::OutOfRange, "label out of range at sample " + std::to_string(i));
    ++support[static_cast<std::size_t>(actual[i])];
    double s = 0.0;
    for (int c = 0; c < classes; ++c) s += scores[i * static_cast<std::size_t>(classes) + static_cast<std::size_t>(c)];
    if (!(std::abs(s - 1.0) <= 1e-6))
      throw MetricsError(MetricsErrc::InvalidProbabilities, "scores of sample " + std::to_string(i) + " sum to " +
                                                                format_double(s));
  }
  if (std::count_if(support.begin(), support.end(), [](std::size_t n) { return n > 0; }) < 2)
    throw MetricsError(MetricsErrc::SingleClassOnly, "AUC is undefined with a single class present");
  AucResult r;
  std::vector<double> col(actual.size());
  int present = 0;
  for (int c = 0; c < classes; ++c) {
    if (support[static_cast<std::size_t>(c)] == 0) {
      r.per_class.push_back(std::nullopt);
      continue;
    }
    for (std::size_t i = 0; i < actual.size(); ++i)
      col[i] = scores[i * static_cast<std::size_t>(classes) + static_cast<std::size_t>(c)];
    const double a = binary_auc(col, actual, c);
    r.per_class.push_back(a);
    r.macro += a;
    ++present;
  }
  r.macro /= present;
  return r;
}

MetricReport evaluate(std::span<const int> predicted, std::span<const int> actual, std::span<const double> scores,
                      int classes, Averaging averaging) {
  auto r = metric_report(confusion(predicted, actual, classes), averaging);
  try {
    r.auc = roc_auc_ovr(scores, actual, classes);
  } catch (const MetricsError& e) {
    if (e.code() != MetricsErrc::SingleClassOnly) throw;
    r.auc_undefined = true;
  }
  return r;
}

nlohmann::json to_json(const ConfusionMatrix& cm) {
  auto rows = nlohmann::json::array();
  for (int a = 0; a < cm.classes; ++a) {
    auto row = nlohmann::json::array();
    for (int p = 0; p < cm.classes; ++p) row.push_back(cm.at(a, p));
    rows.push_back(row);
  }
  return rows;
}

nlohmann::json to_json(const MetricReport& r) {
  auto classes = nlohmann::json::array();
  for (std::size_t c = 0; c < r.per_class.size(); ++c) {
    const auto& m = r.per_class[c];
    nlohmann::json j = {{"class", static_cast<int>(c)}, {"tp", m.tp}, {"fp", m.fp}, {"fn", m.fn}, {"tn", m.tn},
                        {"accuracy", m.accuracy}, {"precision", m.precision}, {"recall", m.recall},
                        {"specificity", m.specificity}, {"f1", m.f1}, {"degenerate", m.degenerate}};
    if (r.per_class.size() == kSeverityCount) j["name"] = severity_name(static_cast<Severity>(c));
    if (r.auc) {
      const auto& a = r.auc->per_class[c];
      j["auc"] = a ? nlohmann::json(*a) : nlohmann::json(nullptr);
    }
    classes.push_back(j);
  }
  nlohmann::json j = {{"samples", r.cm.total()},
                      {"confusion_matrix", to_json(r.cm)},
                      {"overall_accuracy", r.overall_accuracy},
                      {"averaging", r.averaging == Averaging::Macro ? "macro" : "weighted"},
                      {"accuracy", r.average.accuracy},
                      {"precision", r.average.precision},
                      {"recall", r.average.recall},
                      {"specificity", r.average.specificity},
                      {"f1", r.average.f1},
                      {"per_class", classes},
                      {"auc", r.auc ? nlohmann::json(r.auc->macro) : nlohmann::json(nullptr)},
                      {"auc_undefined", r.auc_undefined}};
  return j;
}

std::string benchmark_csv(const std::vector<BenchmarkRow>& rows) {
  std::vector<csv::Row> out{{"model", "accuracy_pct", "model_size_mb", "inference_time_ms", "flops_b", "auc",
                             "precision_pct", "recall_pct", "f1_pct"}};
  for (const auto& r : rows)
    out.push_back({r.model, format_double(100 * r.accuracy), format_double(r.size_bytes / 1e6),
                   format_double(r.inference_ms), format_double(r.macs / 1e9), r.auc ? format_double(*r.auc) : "",
                   format_double(100 * r.precision), format_double(100 * r.recall), format_double(100 * r.f1)});
  return csv::format(out);
}

}  // namespace retina::metrics
