#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "json.hpp"
#include "retina/core/bytes.hpp"
#include "retina/core/error.hpp"
#include "retina/nn/network.hpp"

namespace retina::quant {

enum class QuantErrc {
  EmptyCalibration,
  MissingParams,
  ShapeMismatch,
  AccumulatorOverflow,
  Unsupported,
  FormatError,
  IoError,
};

const char* to_string(QuantErrc code);

using QuantError = CodedError<QuantErrc>;

inline constexpr double kMinScale = 1e-8;

/// Unsigned 8-bit affine parameters of one activation edge:
/// x ~ scale * (q - zero_point). Scales are kept in double so that the
/// rounding of x / scale is not disturbed by a float32 scale.
struct ActivationParams {
  double scale = 1.0;
  int zero_point = 0;
  float min = 0.0f;  // calibrated range
  float max = 0.0f;
  bool degenerate = false;  // calibrated min == max
  bool operator==(const ActivationParams&) const = default;
};

/// The range is first widened to contain 0 so that real zero (ReLU floor,
/// zero padding) is exactly representable; then scale = (max - min) / 255
/// floored at 1e-8, zero_point = round(-min / scale) clamped to [0, 255].
ActivationParams activation_params(float min, float max);

/// Per output channel max|w| / 127, floored at 1e-8. `w` is [channels, ...].
std::vector<double> weight_scales(std::span<const float> w, int channels);

std::uint8_t quantize_activation(float x, const ActivationParams& p);
double dequantize_activation(std::uint8_t q, const ActivationParams& p);
inline double dequantize_weight(std::int8_t q, double scale) { return q * scale; }
std::int8_t quantize_weight(float w, double scale);
/// Round half to even.
inline long round_half_even(double v) { return std::lrint(v); }

/// One step of the integer graph. BatchNorm is folded into the conv before
/// it; a ReLU directly after a conv, dense or residual add is fused into
/// that step's requantization. MaxPool, GlobalAvgPool and standalone ReLU
/// work on codes and keep their input's parameters.
struct QNode {
  enum class Kind { Conv, Dense, MaxPool, GlobalAvgPool, ReLU, Residual, Softmax };
  Kind kind = Kind::Conv;
  nn::LayerSpec spec;  // geometry for Conv/Dense/MaxPool
  bool relu = false;
  int in_edge = 0;
  int out_edge = 0;
  std::vector<QNode> branch, shortcut;
  // Conv / Dense after folding: float reference and integer form.
  std::vector<float> weight, bias;
  std::vector<std::int8_t> qweight;
  std::vector<double> wscale;
  std::vector<std::int32_t> qbias;
};

struct QuantParams {
  std::vector<ActivationParams> edges;  // edge 0 is the network input
  bool operator==(const QuantParams&) const = default;
};

struct QuantizedModel {
  nn::ModelConfig config;
  std::vector<QNode> graph;
  QuantParams qparams;
  int edge_count() const { return static_cast<int>(qparams.edges.size()); }
};

/// Folded float graph (no integer data yet).
std::vector<QNode> build_graph(const nn::ModelConfig& config, const nn::ModelParams& params, int* edge_count = nullptr);

/// Runs the folded float graph over every calibration batch and records
/// each edge's min/max. Throws EmptyCalibration.
QuantParams calibrate(const nn::ModelConfig& config, const nn::ModelParams& params,
                      std::span<const nn::Tensor4> batches);

/// Every value the folded float graph puts on each edge for input `x`,
/// indexed like QuantParams::edges.
std::vector<std::vector<float>> edge_activations(const nn::ModelConfig& config, const nn::ModelParams& params,
                                                 const nn::Tensor4& x);

/// Throws MissingParams when `qparams` does not cover every edge, and
/// AccumulatorOverflow when a layer could exceed the 32-bit accumulator.
QuantizedModel quantize(const nn::ModelConfig& config, const nn::ModelParams& params, const QuantParams& qparams);

struct QResult {
  nn::Tensor4 logits;
  std::vector<Severity> predictions;
};

/// Integer inference. Throws ShapeMismatch when the input does not match
/// the config.
QResult qforward(const QuantizedModel& model, const nn::Tensor4& x);

/// Float reference of the folded graph (what calibration observes).
nn::Tensor4 folded_forward(const std::vector<QNode>& graph, const nn::Tensor4& x);

/// "RCNQ1" layout, little-endian:
///
///   magic "RCNQ1\0\0\0", u64 config hash
///   u32 edge count; per edge: f64 scale, u8 zero_point, f32 min, f32 max
///   u32 tensor count; per tensor: u8 dtype (1 = int8, 2 = int32),
///     u32 rank, dims, u32 scale count, f64 scales, i32 zero_point, payload
///
/// Tensors come in graph order, weight then bias for every Conv/Dense.
inline constexpr char kQuantMagic[8] = {'R', 'C', 'N', 'Q', '1', 0, 0, 0};

Bytes serialize_quantized(const QuantizedModel& model);
QuantizedModel deserialize_quantized(const nn::ModelConfig& config, std::span<const std::uint8_t> bytes);
/// Writes `path` and the config sidecar `path.json`.
void save_quantized(const std::filesystem::path& path, const QuantizedModel& model);
QuantizedModel load_quantized(const std::filesystem::path& path);

/// Exact byte counts of the serialized forms (sidecar excluded).
std::size_t model_size(const nn::ModelConfig& config, const nn::ModelParams& params);
std::size_t model_size(const QuantizedModel& model);

nlohmann::json to_json(const QuantParams& qp);

}  // namespace retina::quant
