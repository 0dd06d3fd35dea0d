#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "retina/nn/config.hpp"

namespace retina::quant {

/// Multiply-accumulate counts. Conv2d: Ho*Wo*Cout*Cin*k*k; Dense: in*out;
/// pooling, ReLU, BatchNorm, residual adds and softmax count as 0.
struct LayerFlops {
  std::string name;  // depth-first path, e.g. "4.branch.0"
  std::string kind;
  std::uint64_t macs = 0;
  bool operator==(const LayerFlops&) const = default;
};

struct FlopsReport {
  std::string model;
  nn::Shape3 input;
  std::vector<LayerFlops> layers;  // parametric layers only
  std::uint64_t total_macs = 0;
  /// 2 reports FLOPs as two operations per MAC; the MAC counts are unchanged.
  int ops_per_mac = 1;
  std::uint64_t total_flops() const { return total_macs * static_cast<std::uint64_t>(ops_per_mac); }
  bool operator==(const FlopsReport&) const = default;
};

/// Throws nn::NnError(ShapeMismatch) when `input` does not fit the layers.
FlopsReport count_flops(const nn::ModelConfig& config, nn::Shape3 input, bool double_flops = false);

nlohmann::json to_json(const FlopsReport& r);

}  // namespace retina::quant
