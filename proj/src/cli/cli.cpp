#include "retina/cli/cli.hpp"

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "retina/dataset/augmentation.hpp"
#include "retina/dataset/split.hpp"
#include "retina/dataset/synthetic.hpp"
#include "retina/imaging/codec.hpp"
#include "retina/imaging/pipeline.hpp"
#include "retina/metrics/metrics.hpp"
#include "retina/nn/model_io.hpp"
#include "retina/nn/optim.hpp"
#include "retina/nn/train.hpp"
#include "retina/quant/flops.hpp"
#include "retina/quant/latency.hpp"
#include "retina/quant/quantize.hpp"
#include "retina/service/clock.hpp"
#include "retina/service/http.hpp"
#include "retina/service/outbox.hpp"
#include "retina/service/service.hpp"

namespace retina::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string manifest, out, config = "micro", model, qmodel, data_dir, input;
  std::uint64_t seed = kDefaultSeed;
  int epochs = 20, batch_size = 32, runs = 5, warmup = 1, port = 0, folds = 5, synthetic = 0, calibration = 100;
  double lr = 1e-4;
  bool table2 = false;
};

void emit(std::ostream& out, const std::string& sub, const json& j) { out << "RESULT " << sub << " " << j.dump() << std::endl; }

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : fallback;
}

nn::Shape3 parse_input(const std::string& text, int channels) {
  const auto x = text.find('x');
  int w = 0, h = 0;
  try {
    if (x == std::string::npos) throw std::invalid_argument("");
    std::size_t used = 0;
    w = std::stoi(text.substr(0, x), &used);
    if (used != x) throw std::invalid_argument("");
    h = std::stoi(text.substr(x + 1), &used);
    if (used != text.size() - x - 1) throw std::invalid_argument("");
  } catch (const std::exception&) {
    throw UsageError("--input must look like 226x226");
  }
  if (w < 1 || h < 1) throw UsageError("--input dimensions must be positive");
  return {channels, h, w};
}

nn::ModelConfig config_for(const std::string& name, const std::string& input) {
  nn::ModelConfig cfg;
  try {
    cfg = nn::preset(name);
  } catch (const nn::NnError&) {
    throw UsageError("--config must be micro or resnet18_226");
  }
  if (!input.empty()) {
    const nn::Shape3 in = parse_input(input, cfg.input.c);
    if (name == "resnet18_226" && in.w == in.h) {
      cfg = nn::resnet18_preset(in.w);
    } else {
      cfg.input = in;
    }
  }
  return cfg;
}

imaging::PlaneTensor to_model_input(const imaging::RasterImage& img, const nn::ModelConfig& cfg) {
  imaging::PreprocessConfig pc;
  pc.target_width = cfg.input.w;
  pc.target_height = cfg.input.h;
  imaging::PlaneTensor t = imaging::preprocess(img, pc);
  if (t.channels == 1 && cfg.input.c == 3) {
    imaging::PlaneTensor rgb(t.width, t.height, 3);
    for (std::size_t i = 0; i < t.pixel_count(); ++i)
      for (int c = 0; c < 3; ++c) rgb.data[i * 3 + c] = t.data[i];
    t = std::move(rgb);
  }
  return t;
}

std::vector<dataset::LabeledImage> load_samples(const std::vector<const dataset::ManifestEntry*>& entries,
                                                const fs::path& root, const nn::ModelConfig& cfg) {
  std::vector<dataset::LabeledImage> out;
  out.reserve(entries.size());
  for (const auto* e : entries) {
    const Bytes bytes = read_file(root / e->path);
    out.push_back({to_model_input(imaging::decode_image(bytes), cfg), e->label});
  }
  return out;
}

struct LoadedManifest {
  dataset::DatasetManifest manifest;
  fs::path root;
  dataset::SplitAssignment split;
};

LoadedManifest open_manifest(const Options& o) {
  LoadedManifest m;
  m.manifest = dataset::load_manifest(o.manifest);
  m.root = fs::absolute(o.manifest).parent_path();
  m.split = dataset::stratified_split(m.manifest, {}, o.seed);
  return m;
}

fs::path out_dir(const Options& o) {
  if (o.out.empty()) throw UsageError("--out is required");
  fs::create_directories(o.out);
  return o.out;
}

json counts_json(const dataset::ClassCounts& c) { return json(std::vector<std::size_t>(c.begin(), c.end())); }

// Loads originals relative to the manifest directory and writes synthetic
// images under <out>/synthetic.
class SplitRootStore : public dataset::ImageStore {
 public:
  SplitRootStore(fs::path in, fs::path out) : in_(std::move(in)), out_(std::move(out)) {}
  imaging::RasterImage load(const dataset::ManifestEntry& e) override {
    return imaging::decode_image(read_file(in_ / e.path));
  }
  std::string store(const std::string& id, const imaging::RasterImage& img) override {
    const std::string rel = "synthetic/" + id + ".ppm";
    write_file(out_ / rel, imaging::encode_ppm(img));
    return rel;
  }

 private:
  fs::path in_, out_;
};

int cmd_prepare(const Options& o, std::ostream& out) {
  json result;
  if (o.synthetic > 0) {
    if (!o.manifest.empty()) throw UsageError("--synthetic and --manifest are exclusive");
    const fs::path dir = out_dir(o);
    dataset::SyntheticCorpusConfig sc;
    sc.per_class = o.synthetic;
    sc.seed = o.seed;
    const auto m = dataset::write_synthetic_corpus(sc, dir);
    dataset::save_manifest(m, dir / "manifest.csv");
    result["synthetic_manifest"] = (dir / "manifest.csv").string();
    result["originals"] = counts_json(m.class_counts());
    emit(out, "prepare", result);
    return 0;
  }

  if (o.manifest.empty()) {
    if (!o.table2) throw UsageError("prepare needs --manifest, --synthetic or --table2-targets");
    // Plan only: the reference breakdown without images.
    const auto plan = dataset::build_augmentation_plan(dataset::table2_originals(), dataset::table2_targets(), o.seed);
    result = {{"originals", counts_json(plan.original_counts)},
              {"synthetic", counts_json(plan.synthetic_counts())},
              {"after", counts_json(plan.target_counts)},
              {"total_after", plan.total_after()}};
    if (!o.out.empty()) {
      const fs::path dir = out_dir(o);
      write_file(dir / "plan.json", result.dump(2) + "\n");
    }
    emit(out, "prepare", result);
    return 0;
  }

  const LoadedManifest lm = open_manifest(o);
  const auto originals = lm.manifest.originals();
  std::vector<std::string> ids;
  std::vector<Severity> labels;
  for (const auto* e : originals) {
    ids.push_back(e->image_id);
    labels.push_back(e->label);
  }
  const auto folds = dataset::assign_folds(ids, labels, o.folds, o.seed);
  result["originals"] = counts_json(lm.manifest.class_counts());
  result["split"] = {{"train", lm.split.ids(dataset::Partition::Train).size()},
                     {"validation", lm.split.ids(dataset::Partition::Validation).size()},
                     {"test", lm.split.ids(dataset::Partition::Test).size()}};
  result["folds"] = o.folds;

  std::optional<dataset::AugmentationPlan> plan;
  if (o.table2)
    plan = dataset::build_augmentation_plan(dataset::sources_by_class(originals), dataset::table2_targets(), o.seed);
  if (plan) {
    result["synthetic"] = counts_json(plan->synthetic_counts());
    result["after"] = counts_json(plan->target_counts);
    result["total_after"] = plan->total_after();
  }
  if (!o.out.empty()) {
    const fs::path dir = out_dir(o);
    write_file(dir / "split.csv", dataset::format_split(lm.split));
    write_file(dir / "folds.csv", dataset::format_folds(folds));
    dataset::DatasetManifest written = lm.manifest;
    if (plan) {
      SplitRootStore store(lm.root, dir);
      written = dataset::execute_plan(*plan, lm.manifest, store);
    }
    // Rewrite original paths so the new manifest resolves from <out>.
    dataset::DatasetManifest relocated;
    const fs::path abs_out = fs::absolute(dir);
    for (auto e : written.entries()) {
      if (!e.synthetic()) e.path = fs::relative(lm.root / e.path, abs_out).generic_string();
      relocated.add(std::move(e));
    }
    dataset::save_manifest(relocated, dir / "manifest.csv");
    result["manifest"] = (dir / "manifest.csv").string();
  }
  emit(out, "prepare", result);
  return 0;
}

int cmd_train(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.manifest.empty()) throw UsageError("--manifest is required");
  const fs::path dir = out_dir(o);
  const nn::ModelConfig cfg = config_for(o.config, "");
  const LoadedManifest lm = open_manifest(o);
  const auto train_set =
      load_samples(dataset::partition_members(lm.manifest, lm.split, dataset::Partition::Train), lm.root, cfg);
  const auto val_set =
      load_samples(dataset::partition_members(lm.manifest, lm.split, dataset::Partition::Validation), lm.root, cfg);
  if (train_set.empty() || val_set.empty()) throw std::runtime_error("train and validation partitions must be non-empty");

  nn::TrainConfig tc;
  tc.epochs = o.epochs;
  tc.batch_size = o.batch_size;
  tc.adam.lr = o.lr;
  tc.seed = o.seed;
  try {
    tc.validate();
  } catch (const nn::NnError& e) {
    throw UsageError(e.what());
  }
  const auto history = nn::train(cfg, tc, train_set, val_set, [&](const nn::EpochRecord& r) {
    err << "epoch " << r.epoch << " train_loss " << r.train_loss << " val_loss " << r.val_loss << " val_acc "
        << r.val_acc << "\n";
  });
  nn::save_model(dir / "model.rcnn", cfg, history.best_params);
  write_file(dir / "history.csv", nn::history_csv(history));
  write_file(dir / "split.csv", dataset::format_split(lm.split));
  emit(out, "train",
       {{"model", (dir / "model.rcnn").string()},
        {"history", (dir / "history.csv").string()},
        {"epochs_run", history.stop_epoch},
        {"best_epoch", history.best_epoch},
        {"best_val_acc", history.best().val_acc},
        {"best_val_loss", history.best().val_loss},
        {"early_stopped", history.early_stopped},
        {"train_images", train_set.size()},
        {"validation_images", val_set.size()}});
  return 0;
}

bool ends_in_softmax(const nn::ModelConfig& cfg) {
  return !cfg.layers.empty() && cfg.layers.back().kind == nn::LayerKind::Softmax;
}

// Predictions and per-class probabilities of the int8 model.
void quantized_scores(const quant::QuantizedModel& m, const std::vector<dataset::LabeledImage>& samples,
                      std::vector<int>& pred, std::vector<double>& scores) {
  for (std::size_t i = 0; i < samples.size(); i += 32) {
    std::vector<const imaging::PlaneTensor*> batch;
    for (std::size_t j = i; j < std::min(samples.size(), i + 32); ++j) batch.push_back(&samples[j].image);
    const auto r = quant::qforward(m, nn::to_batch(batch));
    for (int n = 0; n < r.logits.n; ++n) {
      const std::span<const float> row(r.logits.sample(n), r.logits.sample_size());
      const std::vector<double> p = ends_in_softmax(m.config) ? std::vector<double>(row.begin(), row.end()) : nn::softmax(row);
      scores.insert(scores.end(), p.begin(), p.end());
      pred.push_back(ordinal(r.predictions[static_cast<std::size_t>(n)]));
    }
  }
}

int cmd_eval(const Options& o, std::ostream& out) {
  if (o.manifest.empty()) throw UsageError("--manifest is required");
  if (o.model.empty() == o.qmodel.empty()) throw UsageError("eval needs exactly one of --model or --qmodel");
  const LoadedManifest lm = open_manifest(o);
  const auto members = dataset::partition_members(lm.manifest, lm.split, dataset::Partition::Test);

  std::vector<int> pred, actual;
  std::vector<double> scores;
  std::string model_path;
  if (!o.model.empty()) {
    const nn::LoadedModel m = nn::load_model(o.model);
    const auto samples = load_samples(members, lm.root, m.config);
    const nn::Evaluation ev = nn::evaluate(m.config, m.params, samples);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      pred.push_back(ordinal(ev.predictions[i]));
      scores.insert(scores.end(), ev.probabilities[i].begin(), ev.probabilities[i].end());
    }
    for (const auto& s : samples) actual.push_back(ordinal(s.label));
    model_path = o.model;
  } else {
    const quant::QuantizedModel m = quant::load_quantized(o.qmodel);
    const auto samples = load_samples(members, lm.root, m.config);
    quantized_scores(m, samples, pred, scores);
    for (const auto& s : samples) actual.push_back(ordinal(s.label));
    model_path = o.qmodel;
  }
  if (actual.empty()) throw std::runtime_error("test partition is empty");
  const metrics::MetricReport report = metrics::evaluate(pred, actual, scores);
  json result = {{"model", model_path},
                 {"partition", "test"},
                 {"images", actual.size()},
                 {"accuracy", report.overall_accuracy},
                 {"precision", report.average.precision},
                 {"recall", report.average.recall},
                 {"specificity", report.average.specificity},
                 {"f1", report.average.f1},
                 {"auc", report.auc ? json(report.auc->macro) : json(nullptr)}};
  if (!o.out.empty()) {
    const fs::path dir = out_dir(o);
    json full = result;
    full["report"] = metrics::to_json(report);
    write_file(dir / "metrics.json", full.dump(2) + "\n");
    result["metrics"] = (dir / "metrics.json").string();
  }
  emit(out, "eval", result);
  return 0;
}

int cmd_quantize(const Options& o, std::ostream& out) {
  if (o.model.empty()) throw UsageError("--model is required");
  if (o.manifest.empty()) throw UsageError("--manifest is required");
  if (o.calibration < 1) throw UsageError("--calibration must be >= 1");
  const fs::path dir = out_dir(o);
  const nn::LoadedModel fm = nn::load_model(o.model);
  const LoadedManifest lm = open_manifest(o);

  auto calib_members = dataset::partition_members(lm.manifest, lm.split, dataset::Partition::Train);
  if (calib_members.size() > static_cast<std::size_t>(o.calibration)) calib_members.resize(static_cast<std::size_t>(o.calibration));
  const auto calib = load_samples(calib_members, lm.root, fm.config);
  std::vector<nn::Tensor4> batches;
  for (std::size_t i = 0; i < calib.size(); i += 32) {
    std::vector<const imaging::PlaneTensor*> b;
    for (std::size_t j = i; j < std::min(calib.size(), i + 32); ++j) b.push_back(&calib[j].image);
    batches.push_back(nn::to_batch(b));
  }
  const quant::QuantParams qp = quant::calibrate(fm.config, fm.params, batches);
  const quant::QuantizedModel qm = quant::quantize(fm.config, fm.params, qp);
  quant::save_quantized(dir / "model.rcnq", qm);

  // Fidelity on the test partition.
  const auto eval = load_samples(dataset::partition_members(lm.manifest, lm.split, dataset::Partition::Test), lm.root,
                                 fm.config);
  std::size_t agree = 0;
  double worst = 0.0;
  for (std::size_t i = 0; i < eval.size(); i += 32) {
    std::vector<const imaging::PlaneTensor*> b;
    for (std::size_t j = i; j < std::min(eval.size(), i + 32); ++j) b.push_back(&eval[j].image);
    const nn::Tensor4 x = nn::to_batch(b);
    const nn::Tensor4 ref = nn::forward(fm.config, fm.params, x);
    const quant::QResult q = quant::qforward(qm, x);
    const auto fp = nn::predict(ref);
    for (std::size_t n = 0; n < fp.size(); ++n) agree += fp[n] == q.predictions[n];
    for (std::size_t k = 0; k < ref.data.size(); ++k)
      worst = std::max(worst, std::abs(static_cast<double>(ref.data[k]) - q.logits.data[k]));
  }
  const std::size_t float_size = quant::model_size(fm.config, fm.params), q_size = quant::model_size(qm);
  json summary = {{"qmodel", (dir / "model.rcnq").string()},
                  {"model_id", to_hex(nn::config_hash(qm.config))},
                  {"calibration_images", calib.size()},
                  {"eval_images", eval.size()},
                  {"agreement", eval.empty() ? json(nullptr) : json(double(agree) / double(eval.size()))},
                  {"max_abs_logit_diff", worst},
                  {"float_size_bytes", float_size},
                  {"quantized_size_bytes", q_size},
                  {"size_ratio", double(q_size) / double(float_size)}};
  json full = summary;
  full["edges"] = quant::to_json(qp);
  write_file(dir / "quant_summary.json", full.dump(2) + "\n");
  emit(out, "quantize", summary);
  return 0;
}

int cmd_bench(const Options& o, std::ostream& out) {
  if (o.runs < 1) throw UsageError("--runs must be >= 1");
  if (o.warmup < 0) throw UsageError("--warmup must be >= 0");
  if (!o.model.empty() && !o.qmodel.empty()) throw UsageError("--model and --qmodel are exclusive");
  json result;
  if (!o.qmodel.empty()) {
    const quant::QuantizedModel qm = quant::load_quantized(o.qmodel);
    if (!o.input.empty() && parse_input(o.input, qm.config.input.c) != qm.config.input)
      throw UsageError("--input does not match the model");
    result["flops"] = quant::to_json(quant::count_flops(qm.config, qm.config.input));
    result["latency"] = quant::to_json(quant::bench_latency(qm, o.runs, o.warmup, o.seed));
    result["model_size_bytes"] = quant::model_size(qm);
    result["precision"] = "int8";
  } else {
    nn::ModelConfig cfg;
    nn::ModelParams params;
    if (!o.model.empty()) {
      auto m = nn::load_model(o.model);
      if (!o.input.empty() && parse_input(o.input, m.config.input.c) != m.config.input)
        throw UsageError("--input does not match the model");
      cfg = std::move(m.config);
      params = std::move(m.params);
    } else {
      cfg = config_for(o.config, o.input);
      params = nn::init_params(cfg, o.seed);
    }
    result["flops"] = quant::to_json(quant::count_flops(cfg, cfg.input));
    result["latency"] = quant::to_json(quant::bench_latency(cfg, params, o.runs, o.warmup, o.seed));
    result["parameter_count"] = params.parameter_count();
    result["model_size_bytes"] = quant::model_size(cfg, params);
    result["precision"] = "float32";
  }
  if (!o.out.empty()) {
    const fs::path dir = out_dir(o);
    write_file(dir / "bench.json", result.dump(2) + "\n");
  }
  emit(out, "bench", result);
  return 0;
}

int cmd_serve(const Options& o, std::ostream& out, std::ostream& err) {
  const std::string data_dir = o.data_dir.empty() ? env_or("RETINA_DATA_DIR", "") : o.data_dir;
  if (data_dir.empty()) throw UsageError("--data-dir (or RETINA_DATA_DIR) is required");
  const std::string host = env_or("RETINA_BIND", "127.0.0.1");
  int port = o.port;
  if (port == 0) port = std::stoi(env_or("RETINA_PORT", "8080"));
  if (port < 0 || port > 65535) throw UsageError("--port out of range");
  const std::string model_path = o.qmodel.empty() ? env_or("RETINA_MODEL", "") : o.qmodel;

  std::shared_ptr<const quant::QuantizedModel> model;
  if (!model_path.empty())
    model = std::make_shared<const quant::QuantizedModel>(quant::load_quantized(model_path));
  else
    err << "warning: no model loaded; predictions answer ModelUnavailable\n";

  // Block the shutdown signals before any thread starts so that only
  // sigwait below sees them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  service::ServiceConfig sc;
  sc.data_dir = data_dir;
  fs::create_directories(sc.data_dir);
  service::Service svc(sc, service::system_clock(), model);
  const std::string admin_email = env_or("RETINA_ADMIN_EMAIL", "");
  if (!admin_email.empty())
    svc.ensure_admin(admin_email, env_or("RETINA_ADMIN_PASSWORD", ""), env_or("RETINA_ADMIN_NAME", "Administrator"));

  service::ApiServer api(svc);
  const int bound = api.start(host, port);
  if (bound < 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));

  std::atomic<bool> stopping{false};
  std::thread mailer;
  const std::string smtp = env_or("RETINA_SMTP_URL", "");
  if (!smtp.empty()) {
    mailer = std::thread([&] {
      service::SmtpTransport t(smtp, env_or("RETINA_SMTP_FROM", "noreply@localhost"), env_or("RETINA_SMTP_USER", ""),
                               env_or("RETINA_SMTP_PASSWORD", ""));
      while (!stopping) {
        service::drain_outbox(svc, t);
        for (int i = 0; i < 50 && !stopping; ++i) std::this_thread::sleep_for(std::chrono::milliseconds(100));
      }
    });
  }

  emit(out, "serve",
       {{"host", host},
        {"port", bound},
        {"data_dir", data_dir},
        {"model_id", svc.model_id()},
        {"smtp", !smtp.empty()}});
  int sig = 0;
  sigwait(&signals, &sig);
  stopping = true;
  api.stop();
  if (mailer.joinable()) mailer.join();
  err << "stopped on signal " << sig << "\n";
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Diabetic retinopathy screening toolkit", "retina"};
  app.require_subcommand(1);
  Options o;

  auto seed = [&](CLI::App* s) { s->add_option("--seed", o.seed, "Seed for every random choice (default 7)"); };
  auto* prepare = app.add_subcommand("prepare", "Split, fold and augment a manifest");
  prepare->add_option("--manifest", o.manifest, "Manifest CSV");
  prepare->add_option("--out", o.out, "Output directory");
  prepare->add_flag("--table2-targets", o.table2, "Augment to the reference per-grade targets");
  prepare->add_option("--synthetic", o.synthetic, "Write a synthetic corpus with this many images per grade");
  prepare->add_option("--folds", o.folds, "Cross-validation folds")->check(CLI::Range(2, 100));
  seed(prepare);

  auto* train = app.add_subcommand("train", "Train a model on a manifest");
  train->add_option("--manifest", o.manifest, "Manifest CSV");
  train->add_option("--out", o.out, "Output directory");
  train->add_option("--config", o.config, "micro or resnet18_226");
  train->add_option("--epochs", o.epochs, "Epoch budget");
  train->add_option("--batch-size", o.batch_size, "Mini-batch size");
  train->add_option("--lr", o.lr, "Adam learning rate");
  seed(train);

  auto* eval = app.add_subcommand("eval", "Evaluate a model on the test partition");
  eval->add_option("--manifest", o.manifest, "Manifest CSV");
  eval->add_option("--model", o.model, "Float model (RCNN1)");
  eval->add_option("--qmodel", o.qmodel, "Quantized model (RCNQ1)");
  eval->add_option("--out", o.out, "Output directory");
  seed(eval);

  auto* quantize = app.add_subcommand("quantize", "Calibrate and quantize a float model to int8");
  quantize->add_option("--model", o.model, "Float model (RCNN1)");
  quantize->add_option("--manifest", o.manifest, "Manifest CSV for calibration and fidelity");
  quantize->add_option("--out", o.out, "Output directory");
  quantize->add_option("--calibration", o.calibration, "Calibration images taken from the train partition");
  seed(quantize);

  auto* bench = app.add_subcommand("bench", "Count FLOPs and time inference");
  bench->add_option("--config", o.config, "micro or resnet18_226 (ignored with --model or --qmodel)");
  bench->add_option("--model", o.model, "Float model (RCNN1)");
  bench->add_option("--qmodel", o.qmodel, "Quantized model (RCNQ1)");
  bench->add_option("--input", o.input, "Input size WxH");
  bench->add_option("--runs", o.runs, "Timed runs");
  bench->add_option("--warmup", o.warmup, "Untimed warm-up runs");
  bench->add_option("--out", o.out, "Output directory");
  seed(bench);

  auto* serve = app.add_subcommand("serve", "Run the HTTP service until SIGINT or SIGTERM");
  serve->add_option("--port", o.port, "TCP port (default RETINA_PORT or 8080)");
  serve->add_option("--data-dir", o.data_dir, "Record and image store directory");
  serve->add_option("--qmodel", o.qmodel, "Quantized model to serve (default RETINA_MODEL)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  try {
    if (name == "prepare") return cmd_prepare(o, out);
    if (name == "train") return cmd_train(o, out, err);
    if (name == "eval") return cmd_eval(o, out);
    if (name == "quantize") return cmd_quantize(o, out);
    if (name == "bench") return cmd_bench(o, out);
    if (name == "serve") return cmd_serve(o, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n" << sub->help();
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace retina::cli
