#include "retina/nn/params.hpp"

#include <cmath>

#include "retina/core/rng.hpp"

namespace retina::nn {

std::string_view to_string(ParamRole role) {
  switch (role) {
    case ParamRole::Weight: return "weight";
    case ParamRole::Bias: return "bias";
    case ParamRole::Gamma: return "gamma";
    case ParamRole::Beta: return "beta";
    case ParamRole::RunningMean: return "running_mean";
    case ParamRole::RunningVar: return "running_var";
  }
  return "unknown";
}

template <class T>
std::size_t Params<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors)
    if (t.trainable()) n += t.data.size();
  return n;
}

std::size_t tensor_count(const LayerSpec& l) {
  switch (l.kind) {
    case LayerKind::Conv2d: return l.bias ? 2 : 1;
    case LayerKind::Dense: return 2;
    case LayerKind::BatchNorm: return 4;
    case LayerKind::ResidualAdd: return tensor_count(l.branch) + tensor_count(l.shortcut);
    default: return 0;
  }
}

std::size_t tensor_count(const std::vector<LayerSpec>& layers) {
  std::size_t n = 0;
  for (const auto& l : layers) n += tensor_count(l);
  return n;
}

namespace {

template <class T>
void add(Params<T>& p, const std::string& prefix, ParamRole role, std::vector<int> shape, T fill = T(0)) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  p.tensors.push_back({prefix + std::string(to_string(role)), role, std::move(shape), std::vector<T>(n, fill)});
}

template <class T>
void collect(Params<T>& p, const std::vector<LayerSpec>& layers, const std::string& prefix) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    const std::string name = prefix + std::to_string(i) + ".";
    switch (l.kind) {
      case LayerKind::Conv2d:
        add(p, name, ParamRole::Weight, {l.c_out, l.c_in, l.k, l.k});
        if (l.bias) add(p, name, ParamRole::Bias, {l.c_out});
        break;
      case LayerKind::Dense:
        add(p, name, ParamRole::Weight, {l.c_out, l.c_in});
        add(p, name, ParamRole::Bias, {l.c_out});
        break;
      case LayerKind::BatchNorm:
        add(p, name, ParamRole::Gamma, {l.c_out}, T(1));
        add(p, name, ParamRole::Beta, {l.c_out});
        add(p, name, ParamRole::RunningMean, {l.c_out});
        add(p, name, ParamRole::RunningVar, {l.c_out}, T(1));
        break;
      case LayerKind::ResidualAdd:
        collect(p, l.branch, name + "branch.");
        collect(p, l.shortcut, name + "shortcut.");
        break;
      default: break;
    }
  }
}

}  // namespace

template <class T>
Params<T> make_params(const std::vector<LayerSpec>& layers) {
  Params<T> p;
  collect(p, layers, "");
  return p;
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  auto p = make_params<float>(config.layers);
  Rng rng(seed);
  for (auto& t : p.tensors) {
    if (t.role != ParamRole::Weight) continue;
    std::size_t fan_in = 1;
    for (std::size_t d = 1; d < t.shape.size(); ++d) fan_in *= static_cast<std::size_t>(t.shape[d]);
    const double std = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (auto& v : t.data) v = static_cast<float>(std * rng.normal());
  }
  return p;
}

template <class T>
void check_params(const std::vector<LayerSpec>& layers, const Params<T>& params) {
  const auto expect = make_params<T>(layers);
  if (expect.tensors.size() != params.tensors.size())
    throw NnError(NnErrc::ShapeMismatch, "expected " + std::to_string(expect.tensors.size()) +
                                             " parameter tensors, got " + std::to_string(params.tensors.size()));
  for (std::size_t i = 0; i < expect.tensors.size(); ++i) {
    const auto& e = expect.tensors[i];
    const auto& g = params.tensors[i];
    if (e.shape != g.shape || e.role != g.role || e.data.size() != g.data.size())
      throw NnError(NnErrc::ShapeMismatch, "parameter tensor " + std::to_string(i) + " (" + e.name +
                                               ") does not match the layer graph");
  }
}

template struct Params<float>;
template struct Params<double>;
template Params<float> make_params<float>(const std::vector<LayerSpec>&);
template Params<double> make_params<double>(const std::vector<LayerSpec>&);
template void check_params<float>(const std::vector<LayerSpec>&, const Params<float>&);
template void check_params<double>(const std::vector<LayerSpec>&, const Params<double>&);

}  // namespace retina::nn
