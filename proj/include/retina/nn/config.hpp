#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "retina/core/severity.hpp"
#include "retina/nn/tensor.hpp"

namespace retina::nn {

inline constexpr int kClassCount = kSeverityCount;

enum class LayerKind { Conv2d, ReLU, MaxPool, GlobalAvgPool, Dense, ResidualAdd, BatchNorm, Softmax };

std::string_view to_string(LayerKind kind);

/// One node of the layer graph. Only the fields relevant to `kind` are
/// meaningful:
///
///   Conv2d       k, stride, pad, c_in, c_out, bias
///   MaxPool      k, stride, pad (padding cells never win the max)
///   Dense        c_in (features in), c_out (features out); always biased
///   BatchNorm    c_out (channels)
///   ResidualAdd  branch, shortcut (empty shortcut = identity)
struct LayerSpec {
  LayerKind kind = LayerKind::ReLU;
  int k = 0;
  int stride = 1;
  int pad = 0;
  int c_in = 0;
  int c_out = 0;
  bool bias = true;
  std::vector<LayerSpec> branch;
  std::vector<LayerSpec> shortcut;

  static LayerSpec conv(int c_in, int c_out, int k, int stride = 1, int pad = 0, bool bias = true);
  static LayerSpec relu();
  static LayerSpec max_pool(int k, int stride, int pad = 0);
  static LayerSpec global_avg_pool();
  static LayerSpec dense(int in, int out);
  static LayerSpec batch_norm(int channels);
  static LayerSpec softmax();
  static LayerSpec residual(std::vector<LayerSpec> branch, std::vector<LayerSpec> shortcut = {});

  bool operator==(const LayerSpec&) const = default;
};

struct ModelConfig {
  std::string name;
  Shape3 input;
  int class_count = 5;
  std::vector<LayerSpec> layers;

  bool operator==(const ModelConfig&) const = default;
};

/// Output shape of a layer sequence applied to `in`. Throws ShapeMismatch
/// (or InvalidConfig for nonsensical hyper-parameters).
Shape3 infer_shape(const std::vector<LayerSpec>& layers, Shape3 in);

/// Checks every layer and inserts a 1x1 projection conv into each residual
/// block whose shortcut is empty but whose branch changes the shape. The
/// projection carries a bias unless the branch contains BatchNorm, in which
/// case it is conv (no bias) + BatchNorm.
void resolve_layers(std::vector<LayerSpec>& layers, Shape3 in);

/// resolve_layers plus: output is class_count x 1 x 1 (optionally followed
/// by a trailing Softmax), class_count == 5.
void validate(ModelConfig& config);

/// Seed-free presets. "micro" takes 3x32x32 input and has no BatchNorm;
/// "resnet18_226" is the 18-layer residual network (BatchNorm, bias-free
/// convs, 5-way head) at the given square input size.
ModelConfig micro_preset();
ModelConfig resnet18_preset(int input_size = 226);
/// "micro" or "resnet18_226"; throws InvalidConfig otherwise.
ModelConfig preset(std::string_view name);

nlohmann::json to_json(const LayerSpec& layer);
nlohmann::json to_json(const ModelConfig& config);
ModelConfig config_from_json(const nlohmann::json& j);
/// Sorted-key compact JSON; the config hash is FNV-1a of this text.
std::string canonical_json(const ModelConfig& config);
std::uint64_t config_hash(const ModelConfig& config);

}  // namespace retina::nn
