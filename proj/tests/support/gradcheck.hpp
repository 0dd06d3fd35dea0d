#pragma once

// Central finite-difference reference for the layer engine, in double.
// Coordinates whose +-h perturbation flips a ReLU sign or a max-pool
// winner are reported as skipped: the function is not differentiable
// there and the finite difference is meaningless.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "retina/core/bytes.hpp"
#include "retina/core/rng.hpp"
#include "retina/nn/network.hpp"
#include "retina/nn/optim.hpp"

namespace gradcheck {

using retina::nn::ForwardCache;
using retina::nn::LayerCache;
using retina::nn::LayerKind;
using retina::nn::LayerSpec;
using retina::nn::Mode;
using retina::nn::Params;
using retina::nn::Tensor;

inline constexpr double kStep = 1e-3;

inline double rel_error(double a, double n) { return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-6}); }

/// Hash of the piecewise-linear region: ReLU input signs and max-pool
/// winners.
inline std::uint64_t region(const std::vector<LayerSpec>& layers, const std::vector<LayerCache<double>>& caches,
                            std::uint64_t h = 1469598103934665603ULL) {
  auto mix = [&h](std::uint64_t v) { h = (h ^ v) * 1099511628211ULL; };
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].kind == LayerKind::ReLU)
      for (double v : caches[i].input.data) mix(v > 0.0 ? 1 : 2);
    if (layers[i].kind == LayerKind::MaxPool)
      for (auto a : caches[i].argmax) mix(a + 3);
    if (layers[i].kind == LayerKind::ResidualAdd) {
      h = region(layers[i].branch, caches[i].branch, h);
      h = region(layers[i].shortcut, caches[i].shortcut, h);
    }
  }
  return h;
}

/// Scalar objective of a forward output; returns value and d/d output.
using Objective = std::function<double(const Tensor<double>&, Tensor<double>*)>;

/// sum(out * r) for a fixed random r.
inline Objective projection(std::uint64_t seed) {
  return [seed](const Tensor<double>& out, Tensor<double>* grad) {
    retina::Rng rng(seed);
    double s = 0.0;
    if (grad) *grad = Tensor<double>(out.n, out.c, out.h, out.w);
    for (std::size_t i = 0; i < out.data.size(); ++i) {
      const double r = rng.normal();
      s += out.data[i] * r;
      if (grad) grad->data[i] = r;
    }
    return s;
  };
}

inline Objective cross_entropy(std::vector<int> labels) {
  return [labels](const Tensor<double>& out, Tensor<double>* grad) {
    auto r = retina::nn::softmax_cross_entropy(out, labels);
    if (grad) *grad = r.grad;
    return r.loss;
  };
}

struct Report {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
};

struct Coordinate {
  int tensor = -1;  // -1 = network input
  std::size_t index = 0;
};

/// Compares the engine's analytic gradient with central differences at
/// the listed coordinates (all coordinates when `coords` is empty).
inline Report check(const std::vector<LayerSpec>& layers, Params<double> params, Tensor<double> x, Mode mode,
                    const Objective& objective, std::vector<Coordinate> coords = {}) {
  ForwardCache<double> cache;
  const auto out = retina::nn::forward(layers, params, x, mode, &cache);
  Tensor<double> g;
  objective(out, &g);
  const auto analytic = retina::nn::backward(layers, params, cache, g);
  const auto base = region(layers, cache.layers);

  if (coords.empty()) {
    for (std::size_t i = 0; i < x.data.size(); ++i) coords.push_back({-1, i});
    for (std::size_t t = 0; t < params.tensors.size(); ++t)
      if (params.tensors[t].trainable())
        for (std::size_t i = 0; i < params.tensors[t].data.size(); ++i) coords.push_back({static_cast<int>(t), i});
  }

  Report rep;
  for (const auto& c : coords) {
    double& slot = c.tensor < 0 ? x.data[c.index] : params.tensors[static_cast<std::size_t>(c.tensor)].data[c.index];
    const double a = c.tensor < 0 ? analytic.input.data[c.index]
                                   : analytic.params.tensors[static_cast<std::size_t>(c.tensor)].data[c.index];
    const double orig = slot;
    double f[2];
    bool same_region = true;
    for (int s = 0; s < 2; ++s) {
      slot = orig + (s == 0 ? kStep : -kStep);
      ForwardCache<double> pc;
      f[s] = objective(retina::nn::forward(layers, params, x, mode, &pc), nullptr);
      same_region = same_region && region(layers, pc.layers) == base;
    }
    slot = orig;
    if (!same_region) {
      ++rep.skipped;
      continue;
    }
    const double numeric = (f[0] - f[1]) / (2 * kStep);
    rep.max_rel_error = std::max(rep.max_rel_error, rel_error(a, numeric));
    ++rep.checked;
  }
  return rep;
}

/// Fills every trainable tensor and the input with N(0, scale) values.
inline void randomize(Params<double>& p, Tensor<double>& x, retina::Rng& rng, double scale = 1.0) {
  for (auto& t : p.tensors) {
    if (t.role == retina::nn::ParamRole::RunningVar) {
      for (auto& v : t.data) v = 0.5 + rng.uniform01();
    } else {
      for (auto& v : t.data) v = scale * rng.normal();
    }
  }
  for (auto& v : x.data) v = rng.normal();
}

struct Instance {
  std::vector<LayerSpec> layers;
  Params<double> params;
  Tensor<double> x;
  Mode mode = Mode::Inference;
  std::uint64_t objective_seed = 0;
};

enum class Case { Conv2d, ReLU, MaxPool, GlobalAvgPool, Dense, ResidualIdentity, ResidualProjection, BatchNormTrain, BatchNormInference, Softmax };

inline constexpr Case kAllCases[] = {Case::Conv2d,          Case::ReLU,           Case::MaxPool,
                                     Case::GlobalAvgPool,   Case::Dense,          Case::ResidualIdentity,
                                     Case::ResidualProjection, Case::BatchNormTrain, Case::BatchNormInference,
                                     Case::Softmax};

inline const char* name(Case c) {
  switch (c) {
    case Case::Conv2d: return "conv2d";
    case Case::ReLU: return "relu";
    case Case::MaxPool: return "max_pool";
    case Case::GlobalAvgPool: return "global_avg_pool";
    case Case::Dense: return "dense";
    case Case::ResidualIdentity: return "residual_add(identity)";
    case Case::ResidualProjection: return "residual_add(projection)";
    case Case::BatchNormTrain: return "batch_norm(train)";
    case Case::BatchNormInference: return "batch_norm(inference)";
    case Case::Softmax: return "softmax";
  }
  return "?";
}

/// A small random network exercising one layer kind.
inline Instance make_instance(Case kind, std::uint64_t seed) {
  retina::Rng rng(retina::derive_seed(seed, static_cast<std::uint64_t>(kind)));
  auto pick = [&rng](int lo, int hi) { return lo + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(hi - lo + 1))); };
  Instance in;
  const int n = pick(1, 3);
  const int c = pick(1, 3);
  const int h = pick(4, 7), w = pick(4, 7);
  using L = LayerSpec;
  switch (kind) {
    case Case::Conv2d: {
      const int k = pick(1, 3);
      in.layers = {L::conv(c, pick(1, 4), k, pick(1, 2), pick(0, k - 1), rng.uniform01() < 0.5)};
      break;
    }
    case Case::ReLU: in.layers = {L::relu()}; break;
    case Case::MaxPool: {
      const int k = pick(2, 3);
      in.layers = {L::max_pool(k, pick(1, 2), pick(0, k / 2))};
      break;
    }
    case Case::GlobalAvgPool: in.layers = {L::global_avg_pool()}; break;
    case Case::Dense: in.layers = {L::dense(c * h * w, pick(1, 5))}; break;
    case Case::ResidualIdentity:
      in.layers = {L::residual({L::conv(c, c, 3, 1, 1), L::relu(), L::conv(c, c, 3, 1, 1)})};
      break;
    case Case::ResidualProjection: {
      const int co = c + pick(1, 2);
      in.layers = {L::residual({L::conv(c, co, 3, 2, 1), L::relu(), L::conv(co, co, 3, 1, 1)})};
      break;
    }
    case Case::BatchNormTrain:
    case Case::BatchNormInference:
      in.layers = {L::batch_norm(c)};
      in.mode = kind == Case::BatchNormTrain ? Mode::Train : Mode::Inference;
      break;
    case Case::Softmax: in.layers = {L::softmax()}; break;
  }
  const int batch = kind == Case::BatchNormTrain ? std::max(n, 2) : n;
  retina::nn::resolve_layers(in.layers, {c, h, w});
  in.params = retina::nn::make_params<double>(in.layers);
  in.x = Tensor<double>(batch, c, h, w);
  randomize(in.params, in.x, rng, 0.5);
  in.objective_seed = rng.next_u64();
  return in;
}

inline Report check(const Instance& in) {
  return check(in.layers, in.params, in.x, in.mode, projection(in.objective_seed));
}

}  // namespace gradcheck
