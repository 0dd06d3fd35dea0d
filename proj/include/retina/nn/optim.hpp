#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "retina/nn/params.hpp"

namespace retina::nn {

template <class T>
struct LossResult {
  double loss = 0.0;
  Tensor<T> grad;  // d loss / d logits
};

inline constexpr double kProbabilityFloor = 1e-12;

/// Mean softmax cross-entropy over the batch. Probabilities are floored at
/// 1e-12 before the log; the gradient is (softmax - onehot) / batch.
template <class T>
LossResult<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> labels);

/// Numerically stable softmax of one sample.
std::vector<double> softmax(std::span<const float> logits);

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::uint64_t step = 0;
  std::vector<std::vector<double>> m, v;
};

/// Bias-corrected Adam on every trainable tensor, arithmetic in double:
/// theta -= lr * m_hat / (sqrt(v_hat) + eps).
void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, double lr, const AdamConfig& cfg = {});

/// Shared plateau rule: a loss improves on `best` when loss <= best - min_delta.
inline bool improves(double loss, double best, double min_delta) { return loss <= best - min_delta; }

struct PlateauConfig {
  double factor = 0.5;
  int patience = 2;
  double min_lr = 1e-6;
  double min_delta = 1e-4;
};

/// Halves (by `factor`) the learning rate once `patience` consecutive
/// epochs fail to improve on the best validation loss, then restarts the
/// count. Never goes below min_lr.
class ReduceOnPlateau {
 public:
  ReduceOnPlateau(double lr0, PlateauConfig cfg = {});
  double step(double val_loss);
  double lr() const { return lr_; }

 private:
  PlateauConfig cfg_;
  double lr_;
  double best_;
  int bad_epochs_ = 0;
  bool seen_ = false;
};

struct EarlyStopConfig {
  int patience = 3;
  double min_delta = 1e-4;
};

enum class StopDecision { Continue, Stop };

class EarlyStopping {
 public:
  explicit EarlyStopping(EarlyStopConfig cfg = {}) : cfg_(cfg) {}
  StopDecision step(double val_loss);

 private:
  EarlyStopConfig cfg_;
  double best_ = 0.0;
  int bad_epochs_ = 0;
  bool seen_ = false;
};

}  // namespace retina::nn
