#include "retina/nn/model_io.hpp"

#include <cstring>

namespace retina::nn {

namespace {

void collect_layers(const std::vector<LayerSpec>& layers, std::vector<std::size_t>& out) {
  for (const auto& l : layers) {
    if (l.kind == LayerKind::ResidualAdd) {
      collect_layers(l.branch, out);
      collect_layers(l.shortcut, out);
    } else if (const auto n = tensor_count(l); n > 0) {
      out.push_back(n);
    }
  }
}

}  // namespace

std::vector<std::size_t> parametric_layers(const std::vector<LayerSpec>& layers) {
  std::vector<std::size_t> out;
  collect_layers(layers, out);
  return out;
}

Bytes serialize_model(const ModelConfig& config, const ModelParams& params) {
  check_params(config.layers, params);
  ByteWriter w;
  w.raw(std::string_view(kFloatMagic, sizeof kFloatMagic));
  w.u64(config_hash(config));
  const auto groups = parametric_layers(config.layers);
  w.u32(static_cast<std::uint32_t>(groups.size()));
  std::size_t t = 0;
  for (const auto count : groups) {
    w.u32(static_cast<std::uint32_t>(count));
    for (std::size_t i = 0; i < count; ++i, ++t) {
      const auto& tensor = params.tensors[t];
      w.u32(static_cast<std::uint32_t>(tensor.shape.size()));
      for (int d : tensor.shape) w.u32(static_cast<std::uint32_t>(d));
      for (float v : tensor.data) w.f32(v);
    }
  }
  return std::move(w).take();
}

ModelParams deserialize_model(const ModelConfig& config, std::span<const std::uint8_t> bytes) {
  auto fail = [](const std::string& what) { return NnError(NnErrc::FormatError, "RCNN1: " + what); };
  try {
    ByteReader r(bytes);
    const auto magic = r.take(sizeof kFloatMagic);
    if (std::memcmp(magic.data(), kFloatMagic, sizeof kFloatMagic) != 0) throw fail("bad magic");
    if (r.u64() != config_hash(config)) throw fail("config hash mismatch");
    auto params = make_params<float>(config.layers);
    const auto groups = parametric_layers(config.layers);
    if (r.u32() != groups.size()) throw fail("layer count mismatch");
    std::size_t t = 0;
    for (const auto count : groups) {
      if (r.u32() != count) throw fail("tensor count mismatch");
      for (std::size_t i = 0; i < count; ++i, ++t) {
        auto& tensor = params.tensors[t];
        if (r.u32() != tensor.shape.size()) throw fail("rank mismatch in " + tensor.name);
        for (int d : tensor.shape)
          if (r.u32() != static_cast<std::uint32_t>(d)) throw fail("shape mismatch in " + tensor.name);
        for (auto& v : tensor.data) v = r.f32();
      }
    }
    if (r.remaining() != 0) throw fail("trailing bytes");
    return params;
  } catch (const std::out_of_range&) {
    throw fail("truncated");
  }
}

std::filesystem::path config_path(const std::filesystem::path& model_path) {
  auto p = model_path;
  p += ".json";
  return p;
}

void save_model(const std::filesystem::path& path, const ModelConfig& config, const ModelParams& params) {
  const auto bytes = serialize_model(config, params);
  try {
    write_file(path, bytes);
    write_file(config_path(path), canonical_json(config));
  } catch (const std::exception& e) {
    throw NnError(NnErrc::IoError, e.what());
  }
}

LoadedModel load_model(const std::filesystem::path& path) {
  Bytes bytes, cfg_bytes;
  try {
    bytes = read_file(path);
    cfg_bytes = read_file(config_path(path));
  } catch (const std::exception& e) {
    throw NnError(NnErrc::IoError, e.what());
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(cfg_bytes.begin(), cfg_bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw NnError(NnErrc::FormatError, std::string("model config: ") + e.what());
  }
  LoadedModel m;
  m.config = config_from_json(j);
  m.params = deserialize_model(m.config, bytes);
  return m;
}

}  // namespace retina::nn
