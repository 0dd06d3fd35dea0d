// Acceptance run: one PASS/FAIL line per criterion, exit status 1 when any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "histeq_oracle.hpp"
#include "json.hpp"
#include "metric_oracle.hpp"
#include "retina/cli/cli.hpp"
#include "retina/core/rng.hpp"
#include "retina/dataset/synthetic.hpp"
#include "retina/imaging/clahe.hpp"
#include "retina/metrics/metrics.hpp"
#include "retina/nn/model_io.hpp"
#include "retina/nn/train.hpp"
#include "retina/quant/latency.hpp"
#include "retina/quant/quantize.hpp"
#include "service_harness.hpp"

using namespace retina;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string id;
  double budget_s;  // 0 = no runtime bound
  std::function<Outcome()> body;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// Runs the CLI in-process and returns the RESULT payload (null on failure).
json cli(std::vector<std::string> args, int* status = nullptr) {
  args.insert(args.begin(), "retina");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int rc = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  if (status) *status = rc;
  std::istringstream lines(out.str());
  for (std::string line; std::getline(lines, line);) {
    if (line.rfind("RESULT ", 0) != 0) continue;
    const auto sp = line.find(' ', 7);
    return json::parse(line.substr(sp + 1));
  }
  return nullptr;
}

// ---- shared state for the training and quantization criteria ----

struct Trained {
  nn::ModelConfig config = nn::micro_preset();
  std::vector<dataset::LabeledImage> train, val, test;
  nn::TrainHistory first, second;
  double seconds = 0.0;
};

Trained& trained() {
  static Trained t = [] {
    Trained r;
    dataset::SyntheticCorpusConfig sc;
    sc.per_class = 100;
    sc.seed = cli::kDefaultSeed;
    const auto corpus = dataset::make_synthetic_corpus(sc);
    // samples are interleaved by class, so contiguous slices stay balanced
    r.train.assign(corpus.begin(), corpus.begin() + 350);
    r.val.assign(corpus.begin() + 350, corpus.begin() + 425);
    r.test.assign(corpus.begin() + 425, corpus.end());
    nn::TrainConfig tc;
    tc.epochs = 20;
    tc.batch_size = 32;
    tc.adam.lr = 1e-4;
    tc.seed = cli::kDefaultSeed;
    const auto t0 = std::chrono::steady_clock::now();
    r.first = nn::train(r.config, tc, r.train, r.val);
    r.second = nn::train(r.config, tc, r.train, r.val);
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 2;
    return r;
  }();
  return t;
}

nn::Tensor4 batch_of(const std::vector<dataset::LabeledImage>& s, std::size_t from, std::size_t to) {
  std::vector<const imaging::PlaneTensor*> p;
  for (std::size_t i = from; i < std::min(to, s.size()); ++i) p.push_back(&s[i].image);
  return nn::to_batch(p);
}

// ---- byte accounting oracles ----

void count_float(const std::vector<nn::LayerSpec>& layers, const nn::ModelParams& params, std::size_t& t,
                 std::size_t& bytes) {
  for (const auto& l : layers) {
    if (l.kind == nn::LayerKind::ResidualAdd) {
      count_float(l.branch, params, t, bytes);
      count_float(l.shortcut, params, t, bytes);
      continue;
    }
    const auto n = nn::tensor_count(l);
    if (n == 0) continue;
    bytes += 4;
    for (std::size_t i = 0; i < n; ++i, ++t) {
      const auto& tensor = params.tensors[t];
      bytes += 4 + 4 * tensor.shape.size() + 4 * tensor.data.size();
    }
  }
}

std::size_t float_bytes(const nn::ModelConfig& cfg, const nn::ModelParams& params) {
  std::size_t t = 0, bytes = 8 + 8 + 4;
  count_float(cfg.layers, params, t, bytes);
  return bytes;
}

void count_quant(const std::vector<quant::QNode>& nodes, std::size_t& bytes) {
  for (const auto& n : nodes) {
    count_quant(n.branch, bytes);
    count_quant(n.shortcut, bytes);
    if (n.kind != quant::QNode::Kind::Conv && n.kind != quant::QNode::Kind::Dense) continue;
    const std::size_t rank = n.kind == quant::QNode::Kind::Conv ? 4 : 2;
    const std::size_t scales = static_cast<std::size_t>(n.spec.c_out);
    bytes += 1 + 4 + 4 * rank + 4 + 8 * scales + 4 + n.qweight.size();
    bytes += 1 + 4 + 4 + 4 + 8 * scales + 4 + 4 * n.qbias.size();
  }
}

std::size_t quant_bytes(const quant::QuantizedModel& m) {
  std::size_t bytes = 8 + 8 + 4 + m.qparams.edges.size() * (8 + 1 + 4 + 4) + 4;
  count_quant(m.graph, bytes);
  return bytes;
}

// ---- criteria ----

Outcome augmentation_counts() {
  int rc = 0;
  const json r = cli({"prepare", "--table2-targets"}, &rc);
  if (rc != 0 || r.is_null()) return {false, "prepare exited " + std::to_string(rc)};
  const std::vector<long> want_orig{1805, 370, 999, 193, 295}, want_after{1805, 900, 1200, 900, 1000};
  const auto orig = r["originals"].get<std::vector<long>>();
  const auto after = r["after"].get<std::vector<long>>();
  const long total = r["total_after"].get<long>();
  return {orig == want_orig && after == want_after && total == 5805,
          "after=" + r["after"].dump() + " total=" + std::to_string(total)};
}

Outcome flops() {
  int rc = 0;
  const json r = cli({"bench", "--config", "resnet18_226", "--input", "226x226", "--runs", "1", "--warmup", "0"}, &rc);
  if (rc != 0 || r.is_null()) return {false, "bench exited " + std::to_string(rc)};
  const double macs = r["flops"]["total_macs"].get<double>();
  const double rel = macs / 1.8e9 - 1.0;
  return {std::abs(rel) <= 0.15, "total_macs=" + std::to_string(static_cast<long long>(macs)) + " deviation=" +
                                     fmt("%+.2f%%", 100 * rel)};
}

Outcome parameters() {
  std::string detail;
  bool ok = true;
  for (const char* name : {"micro", "resnet18_226"}) {
    const auto cfg = nn::preset(name);
    const auto params = nn::init_params(cfg, cli::kDefaultSeed);
    const auto fbytes = nn::serialize_model(cfg, params).size();
    const std::vector<nn::Tensor4> calib{quant::bench_input(cfg.input, cli::kDefaultSeed, 0)};
    const auto qm = quant::quantize(cfg, params, quant::calibrate(cfg, params, calib));
    const auto qbytes = quant::serialize_quantized(qm).size();
    const bool exact = fbytes == float_bytes(cfg, params) && fbytes == quant::model_size(cfg, params) &&
                       qbytes == quant_bytes(qm) && qbytes == quant::model_size(qm);
    const double ratio = static_cast<double>(qbytes) / static_cast<double>(fbytes);
    ok = ok && exact && ratio <= 0.30;
    detail += std::string(name) + ": float=" + std::to_string(fbytes) + "B int8=" + std::to_string(qbytes) +
              "B ratio=" + fmt("%.4f", ratio) + (exact ? "" : " (byte accounting mismatch)") + "; ";
    if (std::string(name) == "resnet18_226") {
      const auto count = params.parameter_count();
      ok = ok && count >= 11'000'000 && count <= 12'500'000;
      detail += "parameters=" + std::to_string(count);
    }
  }
  return {ok, detail};
}

Outcome gradients() {
  double worst = 0.0;
  std::size_t checked = 0, skipped = 0;
  std::string worst_case;
  bool every_case_checked = true;
  for (auto c : gradcheck::kAllCases) {
    std::size_t case_checked = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      const auto rep = gradcheck::check(gradcheck::make_instance(c, seed));
      if (rep.max_rel_error > worst) {
        worst = rep.max_rel_error;
        worst_case = gradcheck::name(c);
      }
      case_checked += rep.checked;
      skipped += rep.skipped;
    }
    every_case_checked = every_case_checked && case_checked > 0;
    checked += case_checked;
  }
  return {worst < 1e-3 && every_case_checked,
          std::to_string(std::size(gradcheck::kAllCases)) + " layer kinds x 20 seeds, " + std::to_string(checked) +
              " coordinates, max rel error " + fmt("%.3g", worst) + " (" + worst_case + "), " +
              std::to_string(skipped) + " kink coordinates skipped"};
}

Outcome metric_oracle_check() {
  using namespace retina::metrics;
  Rng rng(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto n = 1 + rng.uniform_int(80);
    const int k = trial % 4 == 0 ? 2 : 5;
    std::vector<int> pred(n), act(n);
    for (std::size_t i = 0; i < n; ++i) {
      act[i] = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(k)));
      pred[i] = rng.uniform01() < 0.6 ? act[i] : static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(k)));
    }
    const bool weighted = trial % 2 == 1;
    const auto r = metric_report(confusion(pred, act, k), weighted ? Averaging::Weighted : Averaging::Macro);
    const auto o = metric_oracle::evaluate(pred, act, k, weighted);
    auto diff = [&worst](double a, double b) { worst = std::max(worst, std::abs(a - b)); };
    diff(r.overall_accuracy, o.overall_accuracy);
    for (int c = 0; c < k; ++c) {
      const auto& m = r.per_class[static_cast<std::size_t>(c)];
      const auto& e = o.per_class[static_cast<std::size_t>(c)];
      diff(m.accuracy, e[0]);
      diff(m.precision, e[1]);
      diff(m.recall, e[2]);
      diff(m.specificity, e[3]);
      diff(m.f1, e[4]);
    }
    diff(r.average.accuracy, o.average[0]);
    diff(r.average.precision, o.average[1]);
    diff(r.average.recall, o.average[2]);
    diff(r.average.specificity, o.average[3]);
    diff(r.average.f1, o.average[4]);
  }
  const auto m = class_metrics(ConfusionMatrix::from_rows({{50, 10}, {5, 35}}), 1);
  const double got[5] = {m.accuracy, m.recall, m.specificity, m.precision, m.f1};
  const double want[5] = {0.85, 0.875, 0.8333, 0.7778, 0.8235};
  double worked = 0.0;
  for (int i = 0; i < 5; ++i) worked = std::max(worked, std::abs(got[i] - want[i]));
  return {worst <= 1e-12 && worked <= 1e-4, "1000 sets, max |diff| " + fmt("%.3g", worst) +
                                                "; worked binary case (acc, rec, spec, prec, f1) = (" +
                                                fmt("%.4f", got[0]) + ", " + fmt("%.4f", got[1]) + ", " +
                                                fmt("%.4f", got[2]) + ", " + fmt("%.4f", got[3]) + ", " +
                                                fmt("%.4f", got[4]) + ")"};
}

Outcome auc_oracle() {
  Rng rng(77);
  double worst = 0.0;
  bool presence = true;
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = 2 + rng.uniform_int(60);
    std::vector<int> act(n);
    std::vector<double> scores(n * 5);
    for (std::size_t i = 0; i < n; ++i) {
      act[i] = static_cast<int>(rng.uniform_int(5));
      double s = 0.0;
      for (int k = 0; k < 5; ++k) s += (scores[i * 5 + static_cast<std::size_t>(k)] = 1.0 + static_cast<double>(rng.uniform_int(4)));
      for (int k = 0; k < 5; ++k) scores[i * 5 + static_cast<std::size_t>(k)] /= s;
    }
    if (std::all_of(act.begin(), act.end(), [&](int a) { return a == act[0]; })) act[0] = (act[0] + 1) % 5;
    const auto r = metrics::roc_auc_ovr(scores, act);
    const auto o = metric_oracle::pairwise_auc(scores, act, 5);
    worst = std::max(worst, std::abs(r.macro - o.macro));
    for (std::size_t c = 0; c < 5; ++c) {
      presence = presence && r.per_class[c].has_value() == o.present[c];
      if (r.per_class[c]) worst = std::max(worst, std::abs(*r.per_class[c] - o.per_class[c]));
    }
  }
  return {worst <= 1e-12 && presence, "200 sets, max |diff| " + fmt("%.3g", worst)};
}

Outcome clahe_oracle() {
  Rng rng(2024);
  int equal = 0;
  const imaging::ClaheConfig cfg{std::numeric_limits<double>::infinity(), 1, 1};
  for (int trial = 0; trial < 50; ++trial) {
    imaging::RasterImage img(16, 16, 1);
    const int lo = static_cast<int>(rng.uniform_int(200));
    const int span = 1 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(256 - lo)));
    for (auto& v : img.data) v = static_cast<std::uint8_t>(lo + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(span))));
    equal += imaging::clahe(img, cfg) == histeq_oracle::equalize(img);
  }
  return {equal == 50, std::to_string(equal) + "/50 images identical"};
}

Outcome quant_fidelity() {
  const auto& t = trained();
  const auto& params = t.first.best_params;
  std::vector<nn::Tensor4> calib;
  for (std::size_t i = 0; i < 100; i += 50) calib.push_back(batch_of(t.train, i, i + 50));
  const auto qm = quant::quantize(t.config, params, quant::calibrate(t.config, params, calib));

  dataset::SyntheticCorpusConfig sc;
  sc.per_class = 100;
  sc.seed = cli::kDefaultSeed + 1000;  // disjoint from the training corpus
  const auto eval = dataset::make_synthetic_corpus(sc);
  const auto fl = nn::evaluate(t.config, params, eval);
  std::size_t agree = 0, qcorrect = 0;
  for (std::size_t i = 0; i < eval.size(); i += 50) {
    const auto r = quant::qforward(qm, batch_of(eval, i, i + 50));
    for (std::size_t j = 0; j < r.predictions.size(); ++j) {
      agree += r.predictions[j] == fl.predictions[i + j];
      qcorrect += r.predictions[j] == eval[i + j].label;
    }
  }
  const double agreement = static_cast<double>(agree) / static_cast<double>(eval.size());

  // Round trip over every element of every edge. Calibration activations
  // lie inside the calibrated ranges by construction; evaluation values
  // outside the representable interval saturate and are counted apart.
  double worst = 0.0;  // in units of scale
  std::size_t elements = 0, saturated = 0;
  auto sweep = [&](const nn::Tensor4& x) {
    const auto acts = quant::edge_activations(t.config, params, x);
    for (std::size_t e = 0; e < acts.size(); ++e) {
      const auto& p = qm.qparams.edges[e];
      const double lo = p.scale * (0 - p.zero_point), hi = p.scale * (255 - p.zero_point);
      for (float v : acts[e]) {
        if (v < lo - p.scale / 2 || v > hi + p.scale / 2) {
          ++saturated;
          continue;
        }
        const double err = std::abs(quant::dequantize_activation(quant::quantize_activation(v, p), p) - v);
        worst = std::max(worst, err / p.scale);
        ++elements;
      }
    }
  };
  for (const auto& x : calib) sweep(x);
  const std::size_t calib_saturated = saturated;
  for (std::size_t i = 0; i < eval.size(); i += 50) sweep(batch_of(eval, i, i + 50));

  const bool round_trip = worst <= 0.5 * (1 + 1e-9) && calib_saturated == 0;
  return {agreement >= 0.95 && round_trip,
          "agreement=" + fmt("%.4f", agreement) + " (" + std::to_string(agree) + "/500), float acc=" +
              fmt("%.4f", fl.accuracy) + " int8 acc=" + fmt("%.4f", static_cast<double>(qcorrect) / 500.0) +
              "; round trip max " + fmt("%.6f", worst) + " scale over " + std::to_string(elements) +
              " elements, " + std::to_string(saturated) + " saturated evaluation values"};
}

Outcome desk_training() {
  const auto& t = trained();
  double best_any = 0.0;
  int reached = 0;
  for (const auto& e : t.first.epochs) {
    best_any = std::max(best_any, e.val_acc);
    if (!reached && e.val_acc >= 0.90) reached = e.epoch;
  }
  const bool identical = nn::history_csv(t.first) == nn::history_csv(t.second);
  const auto test_acc = nn::evaluate(t.config, t.first.best_params, t.test).accuracy;
  return {reached > 0 && reached <= 20 && identical,
          "epochs run=" + std::to_string(t.first.stop_epoch) + " max val_acc=" + fmt("%.4f", best_any) +
              (reached ? " (>= 0.90 at epoch " + std::to_string(reached) + ")" : "") + " best-loss epoch " +
              std::to_string(t.first.best_epoch) + " val_acc=" + fmt("%.4f", t.first.best().val_acc) +
              " test acc=" + fmt("%.4f", test_acc) + "; histories " + (identical ? "identical" : "DIFFER") +
              "; " + fmt("%.1f", t.seconds) + " s per run"};
}

Outcome service_e2e() {
  std::vector<std::string> failures;
  {
    harness::LiveServer s("acc-e2e");
    for (auto& f : harness::e2e_flow(s)) failures.push_back("e2e: " + f);
  }
  {
    harness::LiveServer s("acc-roles");
    for (auto& f : harness::role_matrix(s)) failures.push_back("roles: " + f);
  }
  for (auto& f : harness::report_determinism()) failures.push_back("report: " + f);
  std::string detail = failures.empty() ? "flow, role matrix and report determinism passed"
                                        : std::to_string(failures.size()) + " failures, first: " + failures.front();
  return {failures.empty(), detail};
}

Outcome latency() {
  harness::TempDir dir("acc-bench");
  const auto& t = trained();
  const std::vector<nn::Tensor4> calib{batch_of(t.train, 0, 50)};
  const auto qm = quant::quantize(t.config, t.first.best_params, quant::calibrate(t.config, t.first.best_params, calib));
  const auto qpath = dir.path() / "micro.rcnq";
  quant::save_quantized(qpath, qm);
  bool ok = true;
  std::string detail;
  const std::vector<std::vector<std::string>> variants{{"--config", "micro"}, {"--qmodel", qpath.string()}};
  for (const auto& v : variants) {
    json runs[2];
    for (int i = 0; i < 2; ++i) {
      std::vector<std::string> args{"bench", "--runs", "7", "--warmup", "2", "--seed", "11"};
      args.insert(args.end(), v.begin(), v.end());
      runs[i] = cli(args);
      if (runs[i].is_null()) return {false, "bench failed for " + v[1]};
    }
    for (const auto& r : runs) {
      const auto& l = r["latency"];
      ok = ok && l["samples_ms"].size() == 7 && l["p50_ms"].get<double>() <= l["p95_ms"].get<double>();
    }
    const bool same = runs[0]["latency"]["input_checksum"] == runs[1]["latency"]["input_checksum"];
    ok = ok && same;
    detail += std::string(runs[0]["precision"].get<std::string>()) + ": 7 samples, p50=" +
              fmt("%.3f", runs[0]["latency"]["p50_ms"].get<double>()) +
              " ms p95=" + fmt("%.3f", runs[0]["latency"]["p95_ms"].get<double>()) + " ms, checksum " +
              runs[0]["latency"]["input_checksum"].get<std::string>() + (same ? " stable" : " UNSTABLE") + "; ";
  }
  return {ok, detail.substr(0, detail.size() - 2)};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"augmentation_counts", 1, augmentation_counts},
      {"flops_reproduction", 5, flops},
      {"parameter_sanity", 0, parameters},
      {"gradient_suite", 60, gradients},
      {"metric_oracle", 5, metric_oracle_check},
      {"auc_oracle", 0, auc_oracle},
      {"clahe_oracle", 0, clahe_oracle},
      {"desk_training", 600, desk_training},
      {"quantization_fidelity", 60, quant_fidelity},
      {"service_e2e", 60, service_e2e},
      {"latency_harness", 0, latency},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.body();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    // the shared training runs are charged to the training criterion only
    if (c.id == "desk_training") secs = trained().seconds;
    const bool in_time = c.budget_s <= 0 || secs < c.budget_s;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::cout << (pass ? "PASS " : "FAIL ") << c.id << " [" << fmt("%.2f", secs) << " s"
              << (c.budget_s > 0 ? " / " + fmt("%.0f", c.budget_s) + " s" : "") << "] " << o.detail
              << (in_time ? "" : " (over time budget)") << std::endl;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " criteria passed"
            << std::endl;
  return failed == 0 ? 0 : 1;
}
