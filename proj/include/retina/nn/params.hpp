#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "retina/nn/config.hpp"

namespace retina::nn {

enum class ParamRole { Weight, Bias, Gamma, Beta, RunningMean, RunningVar };

std::string_view to_string(ParamRole role);

template <class T>
struct ParamTensor {
  std::string name;
  ParamRole role = ParamRole::Weight;
  std::vector<int> shape;
  std::vector<T> data;

  /// Running BatchNorm statistics are buffers, not trained.
  bool trainable() const { return role != ParamRole::RunningMean && role != ParamRole::RunningVar; }
  bool operator==(const ParamTensor&) const = default;
};

/// Parameter tensors of every parametric layer, in depth-first layer order
/// (residual branch before shortcut). Per layer:
///
///   Conv2d     weight [c_out, c_in, k, k], bias [c_out] if biased
///   Dense      weight [out, in], bias [out]
///   BatchNorm  gamma, beta, running_mean, running_var, each [c]
template <class T>
struct Params {
  std::vector<ParamTensor<T>> tensors;

  /// Number of trainable scalars.
  std::size_t parameter_count() const;
  bool operator==(const Params&) const = default;
};

using ModelParams = Params<float>;

/// Number of parameter tensors a layer (and its children) owns.
std::size_t tensor_count(const LayerSpec& layer);
std::size_t tensor_count(const std::vector<LayerSpec>& layers);

/// Zero-filled tensors with the right names and shapes; running_var is 1.
template <class T>
Params<T> make_params(const std::vector<LayerSpec>& layers);

/// He-normal weights (std sqrt(2 / fan_in)), zero biases, gamma 1, beta 0,
/// running stats (0, 1).
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

/// Throws ShapeMismatch when `params` does not fit `layers`.
template <class T>
void check_params(const std::vector<LayerSpec>& layers, const Params<T>& params);

template <class To, class From>
Params<To> params_cast(const Params<From>& p) {
  Params<To> out;
  out.tensors.reserve(p.tensors.size());
  for (const auto& t : p.tensors) out.tensors.push_back({t.name, t.role, t.shape, {t.data.begin(), t.data.end()}});
  return out;
}

}  // namespace retina::nn
