#include "retina/nn/optim.hpp"

#include <algorithm>
#include <cmath>

namespace retina::nn {

template <class T>
LossResult<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> labels) {
  if (logits.n < 1 || labels.size() != static_cast<std::size_t>(logits.n))
    throw NnError(NnErrc::InvalidArgument, "label count does not match the batch");
  const auto d = static_cast<int>(logits.sample_size());
  LossResult<T> out;
  out.grad = Tensor<T>(logits.n, logits.c, logits.h, logits.w);
  double total = 0.0;
  std::vector<double> p(static_cast<std::size_t>(d));
  for (int n = 0; n < logits.n; ++n) {
    const int label = labels[static_cast<std::size_t>(n)];
    if (label < 0 || label >= d) throw NnError(NnErrc::InvalidArgument, "label out of range");
    const T* z = logits.sample(n);
    double mx = z[0];
    for (int i = 1; i < d; ++i) mx = std::max<double>(mx, z[i]);
    double s = 0.0;
    for (int i = 0; i < d; ++i) s += (p[static_cast<std::size_t>(i)] = std::exp(z[i] - mx));
    for (auto& v : p) v /= s;
    total -= std::log(std::max(p[static_cast<std::size_t>(label)], kProbabilityFloor));
    for (int i = 0; i < d; ++i)
      out.grad.sample(n)[i] = static_cast<T>((p[static_cast<std::size_t>(i)] - (i == label ? 1.0 : 0.0)) / logits.n);
  }
  out.loss = total / logits.n;
  return out;
}

template LossResult<float> softmax_cross_entropy<float>(const Tensor<float>&, std::span<const int>);
template LossResult<double> softmax_cross_entropy<double>(const Tensor<double>&, std::span<const int>);

std::vector<double> softmax(std::span<const float> logits) {
  std::vector<double> p(logits.size());
  if (logits.empty()) return p;
  const double mx = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) s += (p[i] = std::exp(logits[i] - mx));
  for (auto& v : p) v /= s;
  return p;
}

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, double lr, const AdamConfig& cfg) {
  if (grads.tensors.size() != params.tensors.size())
    throw NnError(NnErrc::ShapeMismatch, "gradient tensors do not match parameters");
  if (state.m.empty()) {
    for (const auto& t : params.tensors) {
      state.m.emplace_back(t.data.size(), 0.0);
      state.v.emplace_back(t.data.size(), 0.0);
    }
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t t = 0; t < params.tensors.size(); ++t) {
    auto& p = params.tensors[t];
    if (!p.trainable()) continue;
    const auto& g = grads.tensors[t].data;
    auto& m = state.m[t];
    auto& v = state.v[t];
    for (std::size_t i = 0; i < p.data.size(); ++i) {
      const double gi = g[i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
      const double mhat = m[i] / c1, vhat = v[i] / c2;
      p.data[i] = static_cast<float>(p.data[i] - lr * mhat / (std::sqrt(vhat) + cfg.eps));
    }
  }
}

ReduceOnPlateau::ReduceOnPlateau(double lr0, PlateauConfig cfg) : cfg_(cfg), lr_(lr0), best_(0.0) {
  if (!(cfg.factor > 0.0 && cfg.factor < 1.0)) throw NnError(NnErrc::InvalidArgument, "factor must be in (0, 1)");
  if (cfg.patience < 1) throw NnError(NnErrc::InvalidArgument, "patience must be >= 1");
  if (!(lr0 > 0.0)) throw NnError(NnErrc::InvalidArgument, "learning rate must be > 0");
}

double ReduceOnPlateau::step(double val_loss) {
  if (!seen_ || improves(val_loss, best_, cfg_.min_delta)) {
    best_ = seen_ ? std::min(best_, val_loss) : val_loss;
    seen_ = true;
    bad_epochs_ = 0;
    return lr_;
  }
  if (++bad_epochs_ >= cfg_.patience) {
    lr_ = std::max(cfg_.min_lr, lr_ * cfg_.factor);
    bad_epochs_ = 0;
  }
  return lr_;
}

StopDecision EarlyStopping::step(double val_loss) {
  if (!seen_ || improves(val_loss, best_, cfg_.min_delta)) {
    best_ = seen_ ? std::min(best_, val_loss) : val_loss;
    seen_ = true;
    bad_epochs_ = 0;
    return StopDecision::Continue;
  }
  return ++bad_epochs_ >= cfg_.patience ? StopDecision::Stop : StopDecision::Continue;
}

}  // namespace retina::nn
