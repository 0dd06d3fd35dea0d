#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "retina/dataset/synthetic.hpp"
#include "retina/nn/network.hpp"
#include "retina/nn/optim.hpp"

namespace retina::nn {

using dataset::LabeledImage;

struct TrainConfig {
  int epochs = 20;
  AdamConfig adam;
  int batch_size = 32;
  bool use_scheduler = true;
  PlateauConfig plateau;
  bool use_early_stop = true;
  EarlyStopConfig early_stop;
  double bn_momentum = 0.9;
  std::uint64_t seed = 1;

  /// Throws InvalidArgument unless epochs >= 1, batch_size >= 1,
  /// 0 < factor < 1 and lr > 0.
  void validate() const;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
  double lr = 0.0;  // rate used during the epoch
  bool operator==(const EpochRecord&) const = default;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int stop_epoch = 0;  // last epoch run
  int best_epoch = 0;  // epoch with the lowest validation loss
  bool early_stopped = false;
  ModelParams best_params;

  const EpochRecord& best() const { return epochs.at(static_cast<std::size_t>(best_epoch - 1)); }
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mini-batch training: He-normal init from the seed, epoch-wise seeded
/// reshuffle (last partial batch kept), Adam, then per epoch a validation
/// pass, plateau scheduling and early stopping on validation loss.
/// Deterministic for a given seed. `val` must not be empty.
TrainHistory train(const ModelConfig& config, const TrainConfig& tcfg, std::span<const LabeledImage> train_set,
                   std::span<const LabeledImage> val_set, const EpochCallback& on_epoch = {});

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
  std::vector<Severity> predictions;
  std::vector<std::vector<double>> probabilities;
};

/// Inference-mode loss/accuracy over a sample set.
Evaluation evaluate(const ModelConfig& config, const ModelParams& params, std::span<const LabeledImage> samples,
                    int batch_size = 64);

/// CSV with header epoch,train_loss,train_acc,val_loss,val_acc,lr; values
/// use the shortest round-trip decimal form.
std::string history_csv(const TrainHistory& history);

struct CvReport {
  std::vector<TrainHistory> folds;
  std::vector<double> val_acc;   // per fold, at its best epoch
  std::vector<double> val_loss;  // per fold, at its best epoch
  double mean_val_acc = 0.0, stdev_val_acc = 0.0;
  double mean_val_loss = 0.0, stdev_val_loss = 0.0;
};

/// Fold i trains on every sample whose fold differs from i and validates on
/// fold i, always with the same seed. Sample order inside each subset is
/// the input order. Standard deviations use the k - 1 denominator.
CvReport cross_validate(const ModelConfig& config, const TrainConfig& tcfg, std::span<const LabeledImage> samples,
                        std::span<const int> fold_of, int k, const EpochCallback& on_epoch = {});

nlohmann::json to_json(const CvReport& report);

}  // namespace retina::nn
