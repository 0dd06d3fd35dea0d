#pragma once

#include <filesystem>

#include "retina/core/bytes.hpp"
#include "retina/nn/params.hpp"

namespace retina::nn {

/// "RCNN1" layout, little-endian:
///
///   magic "RCNN1\0\0\0"   8 bytes
///   config hash           u64 (FNV-1a of the canonical config JSON)
///   layer count           u32 (parametric layers, depth-first)
///   per layer:            u32 tensor count
///     per tensor:         u32 rank, rank x u32 dims, f32 values
///
/// The config itself lives in a sidecar `<file>.json`.
inline constexpr char kFloatMagic[8] = {'R', 'C', 'N', 'N', '1', 0, 0, 0};

Bytes serialize_model(const ModelConfig& config, const ModelParams& params);
/// Throws FormatError on bad magic, hash mismatch, shape mismatch or
/// truncation.
ModelParams deserialize_model(const ModelConfig& config, std::span<const std::uint8_t> bytes);

struct LoadedModel {
  ModelConfig config;
  ModelParams params;
};

/// Writes `path` and `path.json`. Throws IoError.
void save_model(const std::filesystem::path& path, const ModelConfig& config, const ModelParams& params);
LoadedModel load_model(const std::filesystem::path& path);

/// Sidecar path for a model file.
std::filesystem::path config_path(const std::filesystem::path& model_path);

/// Tensor count of each parametric layer in depth-first order.
std::vector<std::size_t> parametric_layers(const std::vector<LayerSpec>& layers);

}  // namespace retina::nn
