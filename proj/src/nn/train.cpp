#include "retina/nn/train.hpp"

#include <cmath>
#include <numeric>

#include "retina/core/bytes.hpp"
#include "retina/core/rng.hpp"

namespace retina::nn {

void TrainConfig::validate() const {
  if (epochs < 1) throw NnError(NnErrc::InvalidArgument, "epochs must be >= 1");
  if (batch_size < 1) throw NnError(NnErrc::InvalidArgument, "batch_size must be >= 1");
  if (!(plateau.factor > 0.0 && plateau.factor < 1.0)) throw NnError(NnErrc::InvalidArgument, "factor must be in (0, 1)");
  if (!(adam.lr > 0.0)) throw NnError(NnErrc::InvalidArgument, "learning rate must be > 0");
  if (plateau.patience < 1 || early_stop.patience < 1) throw NnError(NnErrc::InvalidArgument, "patience must be >= 1");
}

namespace {

Tensor4 gather(std::span<const LabeledImage> samples, const std::vector<std::size_t>& order, std::size_t begin,
               std::size_t end, std::vector<int>& labels) {
  std::vector<const imaging::PlaneTensor*> images;
  labels.clear();
  for (std::size_t i = begin; i < end; ++i) {
    images.push_back(&samples[order[i]].image);
    labels.push_back(ordinal(samples[order[i]].label));
  }
  return to_batch(images);
}

int correct(const Tensor4& logits, const std::vector<int>& labels) {
  int hits = 0;
  for (int n = 0; n < logits.n; ++n)
    if (argmax(logits.sample(n), static_cast<int>(logits.sample_size())) == labels[static_cast<std::size_t>(n)]) ++hits;
  return hits;
}

/// The optimized loss works on logits, so a trailing Softmax is dropped.
std::vector<LayerSpec> logit_layers(const ModelConfig& config) {
  auto layers = config.layers;
  if (!layers.empty() && layers.back().kind == LayerKind::Softmax) layers.pop_back();
  return layers;
}

}  // namespace

Evaluation evaluate(const ModelConfig& config, const ModelParams& params, std::span<const LabeledImage> samples,
                    int batch_size) {
  if (samples.empty()) throw NnError(NnErrc::InvalidArgument, "nothing to evaluate");
  const auto layers = logit_layers(config);
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Evaluation ev;
  double loss = 0.0;
  int hits = 0;
  std::vector<int> labels;
  for (std::size_t b = 0; b < samples.size(); b += static_cast<std::size_t>(batch_size)) {
    const std::size_t e = std::min(samples.size(), b + static_cast<std::size_t>(batch_size));
    const auto x = gather(samples, order, b, e, labels);
    const auto logits = forward(layers, params, x);
    loss += softmax_cross_entropy(logits, labels).loss * static_cast<double>(e - b);
    hits += correct(logits, labels);
    for (int n = 0; n < logits.n; ++n) {
      const auto d = logits.sample_size();
      ev.probabilities.push_back(softmax({logits.sample(n), d}));
      ev.predictions.push_back(static_cast<Severity>(argmax(logits.sample(n), static_cast<int>(d))));
    }
  }
  ev.loss = loss / static_cast<double>(samples.size());
  ev.accuracy = static_cast<double>(hits) / static_cast<double>(samples.size());
  return ev;
}

TrainHistory train(const ModelConfig& config, const TrainConfig& tcfg, std::span<const LabeledImage> train_set,
                   std::span<const LabeledImage> val_set, const EpochCallback& on_epoch) {
  tcfg.validate();
  if (train_set.empty() || val_set.empty())
    throw NnError(NnErrc::InvalidArgument, "training and validation sets must be non-empty");
  ModelConfig cfg = config;
  validate(cfg);
  const auto layers = logit_layers(cfg);

  auto params = init_params(cfg, derive_seed(tcfg.seed, 0));
  AdamState adam;
  ReduceOnPlateau scheduler(tcfg.adam.lr, tcfg.plateau);
  EarlyStopping stopper(tcfg.early_stop);
  double lr = tcfg.adam.lr;

  TrainHistory history;
  double best_loss = 0.0;
  std::vector<std::size_t> order(train_set.size());
  std::vector<int> labels;
  for (int epoch = 1; epoch <= tcfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(tcfg.seed, 1 + static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.uniform_int(i)]);

    double loss_sum = 0.0;
    int hits = 0;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(tcfg.batch_size)) {
      const std::size_t e = std::min(order.size(), b + static_cast<std::size_t>(tcfg.batch_size));
      const auto x = gather(train_set, order, b, e, labels);
      ForwardCache<float> cache;
      const auto logits = forward(layers, params, x, Mode::Train, &cache);
      const auto loss = softmax_cross_entropy(logits, labels);
      loss_sum += loss.loss * static_cast<double>(e - b);
      hits += correct(logits, labels);
      const auto grads = backward(layers, params, cache, loss.grad);
      adam_step(params, grads.params, adam, lr, tcfg.adam);
      update_running_stats(layers, params, cache, tcfg.bn_momentum);
    }

    const auto val = evaluate(cfg, params, val_set);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(train_set.size());
    rec.train_acc = static_cast<double>(hits) / static_cast<double>(train_set.size());
    rec.val_loss = val.loss;
    rec.val_acc = val.accuracy;
    rec.lr = lr;
    history.epochs.push_back(rec);
    history.stop_epoch = epoch;
    if (on_epoch) on_epoch(rec);

    if (history.best_epoch == 0 || val.loss < best_loss) {
      best_loss = val.loss;
      history.best_epoch = epoch;
      history.best_params = params;
    }
    if (tcfg.use_scheduler) lr = scheduler.step(val.loss);
    if (tcfg.use_early_stop && stopper.step(val.loss) == StopDecision::Stop) {
      history.early_stopped = epoch < tcfg.epochs;
      break;
    }
  }
  return history;
}

std::string history_csv(const TrainHistory& history) {
  std::string out = "epoch,train_loss,train_acc,val_loss,val_acc,lr\n";
  for (const auto& r : history.epochs) {
    out += std::to_string(r.epoch) + "," + format_double(r.train_loss) + "," + format_double(r.train_acc) + "," +
           format_double(r.val_loss) + "," + format_double(r.val_acc) + "," + format_double(r.lr) + "\n";
  }
  return out;
}

namespace {

std::pair<double, double> mean_stdev(const std::vector<double>& v) {
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (v.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

}  // namespace

CvReport cross_validate(const ModelConfig& config, const TrainConfig& tcfg, std::span<const LabeledImage> samples,
                        std::span<const int> fold_of, int k, const EpochCallback& on_epoch) {
  if (k < 2) throw NnError(NnErrc::InvalidArgument, "cross-validation needs k >= 2");
  if (fold_of.size() != samples.size()) throw NnError(NnErrc::InvalidArgument, "one fold index per sample required");
  for (int f : fold_of)
    if (f < 0 || f >= k) throw NnError(NnErrc::InvalidArgument, "fold index out of range");
  CvReport report;
  for (int fold = 0; fold < k; ++fold) {
    std::vector<LabeledImage> tr, va;
    for (std::size_t i = 0; i < samples.size(); ++i) (fold_of[i] == fold ? va : tr).push_back(samples[i]);
    if (tr.empty() || va.empty())
      throw NnError(NnErrc::InvalidArgument, "fold " + std::to_string(fold) + " leaves an empty subset");
    auto h = train(config, tcfg, tr, va, on_epoch);
    report.val_acc.push_back(h.best().val_acc);
    report.val_loss.push_back(h.best().val_loss);
    report.folds.push_back(std::move(h));
  }
  std::tie(report.mean_val_acc, report.stdev_val_acc) = mean_stdev(report.val_acc);
  std::tie(report.mean_val_loss, report.stdev_val_loss) = mean_stdev(report.val_loss);
  return report;
}

nlohmann::json to_json(const CvReport& r) {
  nlohmann::json j;
  j["k"] = r.folds.size();
  j["val_acc"] = r.val_acc;
  j["val_loss"] = r.val_loss;
  j["mean_val_acc"] = r.mean_val_acc;
  j["stdev_val_acc"] = r.stdev_val_acc;
  j["mean_val_loss"] = r.mean_val_loss;
  j["stdev_val_loss"] = r.stdev_val_loss;
  j["best_epochs"] = nlohmann::json::array();
  for (const auto& h : r.folds) j["best_epochs"].push_back(h.best_epoch);
  return j;
}

}  // namespace retina::nn
