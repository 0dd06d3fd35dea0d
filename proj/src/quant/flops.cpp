#include "retina/quant/flops.hpp"

namespace retina::quant {

namespace {

void walk(const std::vector<nn::LayerSpec>& layers, nn::Shape3 in, const std::string& prefix,
          std::vector<LayerFlops>& out) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    const auto name = prefix + std::to_string(i);
    const auto y = nn::infer_shape({l}, in);
    switch (l.kind) {
      case nn::LayerKind::Conv2d:
        out.push_back({name, "conv2d",
                       static_cast<std::uint64_t>(y.h) * y.w * l.c_out * l.c_in * l.k * l.k});
        break;
      case nn::LayerKind::Dense:
        out.push_back({name, "dense", static_cast<std::uint64_t>(l.c_in) * l.c_out});
        break;
      case nn::LayerKind::ResidualAdd:
        walk(l.branch, in, name + ".branch.", out);
        walk(l.shortcut, in, name + ".shortcut.", out);
        break;
      default: break;
    }
    in = y;
  }
}

}  // namespace

FlopsReport count_flops(const nn::ModelConfig& config, nn::Shape3 input, bool double_flops) {
  FlopsReport r;
  r.model = config.name;
  r.input = input;
  r.ops_per_mac = double_flops ? 2 : 1;
  walk(config.layers, input, "", r.layers);
  for (const auto& l : r.layers) r.total_macs += l.macs;
  return r;
}

nlohmann::json to_json(const FlopsReport& r) {
  auto layers = nlohmann::json::array();
  for (const auto& l : r.layers) layers.push_back({{"name", l.name}, {"kind", l.kind}, {"macs", l.macs}});
  nlohmann::json j = {{"model", r.model},
                      {"input", {r.input.c, r.input.h, r.input.w}},
                      {"convention", r.ops_per_mac == 2 ? "FLOPs (2 per MAC)" : "MACs"},
                      {"total_macs", r.total_macs},
                      {"layers", layers}};
  if (r.ops_per_mac == 2) j["total_flops"] = r.total_flops();
  return j;
}

}  // namespace retina::quant
