#include "retina/nn/config.hpp"

#include <algorithm>

#include "retina/core/bytes.hpp"

namespace retina::nn {

using nlohmann::json;

const char* to_string(NnErrc code) {
  switch (code) {
    case NnErrc::ShapeMismatch: return "ShapeMismatch";
    case NnErrc::NonFiniteActivation: return "NonFiniteActivation";
    case NnErrc::InvalidConfig: return "InvalidConfig";
    case NnErrc::InvalidArgument: return "InvalidArgument";
    case NnErrc::FormatError: return "FormatError";
    case NnErrc::IoError: return "IoError";
  }
  return "Unknown";
}

std::string to_string(const Shape3& s) {
  return std::to_string(s.c) + "x" + std::to_string(s.h) + "x" + std::to_string(s.w);
}

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv2d: return "conv2d";
    case LayerKind::ReLU: return "relu";
    case LayerKind::MaxPool: return "max_pool";
    case LayerKind::GlobalAvgPool: return "global_avg_pool";
    case LayerKind::Dense: return "dense";
    case LayerKind::ResidualAdd: return "residual_add";
    case LayerKind::BatchNorm: return "batch_norm";
    case LayerKind::Softmax: return "softmax";
  }
  return "unknown";
}

LayerSpec LayerSpec::conv(int c_in, int c_out, int k, int stride, int pad, bool bias) {
  LayerSpec l;
  l.kind = LayerKind::Conv2d;
  l.c_in = c_in;
  l.c_out = c_out;
  l.k = k;
  l.stride = stride;
  l.pad = pad;
  l.bias = bias;
  return l;
}

LayerSpec LayerSpec::relu() { return LayerSpec{}; }

LayerSpec LayerSpec::max_pool(int k, int stride, int pad) {
  LayerSpec l;
  l.kind = LayerKind::MaxPool;
  l.k = k;
  l.stride = stride;
  l.pad = pad;
  return l;
}

LayerSpec LayerSpec::global_avg_pool() {
  LayerSpec l;
  l.kind = LayerKind::GlobalAvgPool;
  return l;
}

LayerSpec LayerSpec::dense(int in, int out) {
  LayerSpec l;
  l.kind = LayerKind::Dense;
  l.c_in = in;
  l.c_out = out;
  return l;
}

LayerSpec LayerSpec::batch_norm(int channels) {
  LayerSpec l;
  l.kind = LayerKind::BatchNorm;
  l.c_out = channels;
  return l;
}

LayerSpec LayerSpec::softmax() {
  LayerSpec l;
  l.kind = LayerKind::Softmax;
  return l;
}

LayerSpec LayerSpec::residual(std::vector<LayerSpec> branch, std::vector<LayerSpec> shortcut) {
  LayerSpec l;
  l.kind = LayerKind::ResidualAdd;
  l.branch = std::move(branch);
  l.shortcut = std::move(shortcut);
  return l;
}

namespace {

[[noreturn]] void shape_error(const LayerSpec& l, Shape3 in, const std::string& what) {
  throw NnError(NnErrc::ShapeMismatch,
                std::string(to_string(l.kind)) + " on input " + to_string(in) + ": " + what);
}

[[noreturn]] void config_error(const LayerSpec& l, const std::string& what) {
  throw NnError(NnErrc::InvalidConfig, std::string(to_string(l.kind)) + ": " + what);
}

int window_out(int size, int k, int stride, int pad) { return (size + 2 * pad - k) / stride + 1; }

Shape3 layer_shape(const LayerSpec& l, Shape3 in) {
  switch (l.kind) {
    case LayerKind::Conv2d: {
      if (l.k < 1 || l.stride < 1 || l.pad < 0 || l.c_in < 1 || l.c_out < 1)
        config_error(l, "k, stride, c_in, c_out must be >= 1 and pad >= 0");
      if (in.c != l.c_in) shape_error(l, in, "expected " + std::to_string(l.c_in) + " channels");
      if (in.h + 2 * l.pad < l.k || in.w + 2 * l.pad < l.k) shape_error(l, in, "kernel larger than padded input");
      return {l.c_out, window_out(in.h, l.k, l.stride, l.pad), window_out(in.w, l.k, l.stride, l.pad)};
    }
    case LayerKind::MaxPool: {
      if (l.k < 1 || l.stride < 1 || l.pad < 0 || 2 * l.pad > l.k) config_error(l, "need k, stride >= 1, 0 <= pad <= k/2");
      if (in.h + 2 * l.pad < l.k || in.w + 2 * l.pad < l.k) shape_error(l, in, "window larger than padded input");
      return {in.c, window_out(in.h, l.k, l.stride, l.pad), window_out(in.w, l.k, l.stride, l.pad)};
    }
    case LayerKind::ReLU:
    case LayerKind::Softmax: return in;
    case LayerKind::GlobalAvgPool: return {in.c, 1, 1};
    case LayerKind::Dense:
      if (l.c_in < 1 || l.c_out < 1) config_error(l, "in, out must be >= 1");
      if (static_cast<int>(in.size()) != l.c_in) shape_error(l, in, "expected " + std::to_string(l.c_in) + " features");
      return {l.c_out, 1, 1};
    case LayerKind::BatchNorm:
      if (l.c_out < 1) config_error(l, "channels must be >= 1");
      if (in.c != l.c_out) shape_error(l, in, "expected " + std::to_string(l.c_out) + " channels");
      return in;
    case LayerKind::ResidualAdd: {
      const Shape3 b = infer_shape(l.branch, in);
      const Shape3 s = infer_shape(l.shortcut, in);
      if (!(b == s)) shape_error(l, in, "branch gives " + to_string(b) + " but shortcut gives " + to_string(s));
      return b;
    }
  }
  return in;
}

bool contains_batch_norm(const std::vector<LayerSpec>& layers) {
  return std::any_of(layers.begin(), layers.end(), [](const LayerSpec& l) {
    return l.kind == LayerKind::BatchNorm || contains_batch_norm(l.branch) || contains_batch_norm(l.shortcut);
  });
}

}  // namespace

Shape3 infer_shape(const std::vector<LayerSpec>& layers, Shape3 in) {
  if (in.c < 1 || in.h < 1 || in.w < 1)
    throw NnError(NnErrc::ShapeMismatch, "non-positive shape " + to_string(in));
  for (const auto& l : layers) in = layer_shape(l, in);
  return in;
}

void resolve_layers(std::vector<LayerSpec>& layers, Shape3 in) {
  for (auto& l : layers) {
    if (l.kind == LayerKind::ResidualAdd) {
      resolve_layers(l.branch, in);
      resolve_layers(l.shortcut, in);
      const Shape3 out = infer_shape(l.branch, in);
      if (l.shortcut.empty() && !(out == in)) {
        int stride = 0;
        for (int s = 1; s <= std::max(in.h, in.w); ++s)
          if (window_out(in.h, 1, s, 0) == out.h && window_out(in.w, 1, s, 0) == out.w) {
            stride = s;
            break;
          }
        if (stride == 0) shape_error(l, in, "no 1x1 projection maps it to " + to_string(out));
        const bool bn = contains_batch_norm(l.branch);
        l.shortcut.push_back(LayerSpec::conv(in.c, out.c, 1, stride, 0, !bn));
        if (bn) l.shortcut.push_back(LayerSpec::batch_norm(out.c));
      }
    }
    in = layer_shape(l, in);
  }
}

void validate(ModelConfig& config) {
  if (config.class_count != kClassCount)
    throw NnError(NnErrc::InvalidConfig, "class_count must be " + std::to_string(kClassCount));
  resolve_layers(config.layers, config.input);
  const Shape3 out = infer_shape(config.layers, config.input);
  if (!(out == Shape3{config.class_count, 1, 1}))
    throw NnError(NnErrc::ShapeMismatch, "model output " + to_string(out) + " is not " +
                                             std::to_string(config.class_count) + " logits");
  for (std::size_t i = 0; i + 1 < config.layers.size(); ++i)
    if (config.layers[i].kind == LayerKind::Softmax)
      throw NnError(NnErrc::InvalidConfig, "softmax is only allowed as the final layer");
}

ModelConfig micro_preset() {
  using L = LayerSpec;
  ModelConfig m;
  m.name = "micro";
  m.input = {3, 32, 32};
  m.layers = {
      L::conv(3, 16, 3, 1, 1),
      L::relu(),
      L::max_pool(2, 2),
      L::residual({L::conv(16, 16, 3, 1, 1), L::relu(), L::conv(16, 16, 3, 1, 1)}),
      L::relu(),
      L::residual({L::conv(16, 32, 3, 2, 1), L::relu(), L::conv(32, 32, 3, 1, 1)}, {L::conv(16, 32, 1, 2, 0)}),
      L::relu(),
      L::global_avg_pool(),
      L::dense(32, kClassCount),
  };
  validate(m);
  return m;
}

namespace {

void basic_block(std::vector<LayerSpec>& out, int c_in, int c_out, int stride) {
  using L = LayerSpec;
  std::vector<L> shortcut;
  if (stride != 1 || c_in != c_out) shortcut = {L::conv(c_in, c_out, 1, stride, 0, false), L::batch_norm(c_out)};
  out.push_back(L::residual({L::conv(c_in, c_out, 3, stride, 1, false), L::batch_norm(c_out), L::relu(),
                             L::conv(c_out, c_out, 3, 1, 1, false), L::batch_norm(c_out)},
                            std::move(shortcut)));
  out.push_back(L::relu());
}

}  // namespace

ModelConfig resnet18_preset(int input_size) {
  using L = LayerSpec;
  ModelConfig m;
  m.name = "resnet18_" + std::to_string(input_size);
  m.input = {3, input_size, input_size};
  m.layers = {L::conv(3, 64, 7, 2, 3, false), L::batch_norm(64), L::relu(), L::max_pool(3, 2, 1)};
  int c = 64;
  for (int width : {64, 128, 256, 512}) {
    basic_block(m.layers, c, width, width == 64 ? 1 : 2);
    basic_block(m.layers, width, width, 1);
    c = width;
  }
  m.layers.push_back(L::global_avg_pool());
  m.layers.push_back(L::dense(512, kClassCount));
  validate(m);
  return m;
}

ModelConfig preset(std::string_view name) {
  if (name == "micro") return micro_preset();
  if (name == "resnet18_226") return resnet18_preset(226);
  throw NnError(NnErrc::InvalidConfig, "unknown preset '" + std::string(name) + "'");
}

json to_json(const LayerSpec& l) {
  json j;
  j["kind"] = to_string(l.kind);
  switch (l.kind) {
    case LayerKind::Conv2d:
      j["k"] = l.k;
      j["stride"] = l.stride;
      j["pad"] = l.pad;
      j["c_in"] = l.c_in;
      j["c_out"] = l.c_out;
      j["bias"] = l.bias;
      break;
    case LayerKind::MaxPool:
      j["k"] = l.k;
      j["stride"] = l.stride;
      j["pad"] = l.pad;
      break;
    case LayerKind::Dense:
      j["in"] = l.c_in;
      j["out"] = l.c_out;
      break;
    case LayerKind::BatchNorm: j["channels"] = l.c_out; break;
    case LayerKind::ResidualAdd: {
      j["branch"] = json::array();
      for (const auto& b : l.branch) j["branch"].push_back(to_json(b));
      j["shortcut"] = json::array();
      for (const auto& s : l.shortcut) j["shortcut"].push_back(to_json(s));
      break;
    }
    default: break;
  }
  return j;
}

json to_json(const ModelConfig& config) {
  json j;
  j["name"] = config.name;
  j["input"] = {config.input.c, config.input.h, config.input.w};
  j["class_count"] = config.class_count;
  j["layers"] = json::array();
  for (const auto& l : config.layers) j["layers"].push_back(to_json(l));
  return j;
}

namespace {

LayerSpec layer_from_json(const json& j) {
  const auto kind = j.at("kind").get<std::string>();
  auto layers = [](const json& arr) {
    std::vector<LayerSpec> out;
    for (const auto& e : arr) out.push_back(layer_from_json(e));
    return out;
  };
  if (kind == "conv2d")
    return LayerSpec::conv(j.at("c_in"), j.at("c_out"), j.at("k"), j.at("stride"), j.at("pad"), j.at("bias"));
  if (kind == "relu") return LayerSpec::relu();
  if (kind == "max_pool") return LayerSpec::max_pool(j.at("k"), j.at("stride"), j.value("pad", 0));
  if (kind == "global_avg_pool") return LayerSpec::global_avg_pool();
  if (kind == "dense") return LayerSpec::dense(j.at("in"), j.at("out"));
  if (kind == "batch_norm") return LayerSpec::batch_norm(j.at("channels"));
  if (kind == "softmax") return LayerSpec::softmax();
  if (kind == "residual_add")
    return LayerSpec::residual(layers(j.at("branch")), j.contains("shortcut") ? layers(j.at("shortcut")) : std::vector<LayerSpec>{});
  throw NnError(NnErrc::InvalidConfig, "unknown layer kind '" + kind + "'");
}

}  // namespace

ModelConfig config_from_json(const json& j) {
  try {
    ModelConfig m;
    m.name = j.value("name", "");
    const auto& in = j.at("input");
    if (!in.is_array() || in.size() != 3) throw NnError(NnErrc::InvalidConfig, "input must be [c, h, w]");
    m.input = {in[0].get<int>(), in[1].get<int>(), in[2].get<int>()};
    m.class_count = j.value("class_count", kClassCount);
    for (const auto& l : j.at("layers")) m.layers.push_back(layer_from_json(l));
    validate(m);
    return m;
  } catch (const json::exception& e) {
    throw NnError(NnErrc::InvalidConfig, std::string("malformed model config: ") + e.what());
  }
}

std::string canonical_json(const ModelConfig& config) { return to_json(config).dump(); }

std::uint64_t config_hash(const ModelConfig& config) { return fnv1a64(canonical_json(config)); }

}  // namespace retina::nn
