#include "retina/quant/latency.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "retina/core/rng.hpp"
#include "retina/nn/network.hpp"

namespace retina::quant {

nn::Tensor4 bench_input(nn::Shape3 input, std::uint64_t seed, int index) {
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(index)));
  nn::Tensor4 x(1, input);
  for (auto& v : x.data) v = static_cast<float>(rng.uniform01());
  return x;
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw std::invalid_argument("percentile of an empty sample");
  std::sort(values.begin(), values.end());
  const auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(values.size())));
  return values[std::clamp<std::size_t>(rank, 1, values.size()) - 1];
}

LatencyReport bench_latency(const std::function<void(const nn::Tensor4&)>& infer, const std::string& model,
                            nn::Shape3 input, int runs, int warmup, std::uint64_t seed) {
  if (runs < 1) throw std::invalid_argument("runs must be at least 1");
  if (warmup < 0) throw std::invalid_argument("warmup must not be negative");
  LatencyReport r;
  r.model = model;
  r.input = input;
  r.runs = runs;
  r.warmup = warmup;
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (int i = 0; i < warmup + runs; ++i) {
    const auto x = bench_input(input, seed, i);
    const auto t0 = std::chrono::steady_clock::now();
    infer(x);
    const auto t1 = std::chrono::steady_clock::now();
    if (i < warmup) continue;
    r.samples_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    h = fnv1a64(std::span(reinterpret_cast<const std::uint8_t*>(x.data.data()), x.data.size() * sizeof(float)), h);
  }
  r.input_checksum = h;
  r.mean_ms = std::accumulate(r.samples_ms.begin(), r.samples_ms.end(), 0.0) / runs;
  r.p50_ms = percentile(r.samples_ms, 50);
  r.p95_ms = percentile(r.samples_ms, 95);
  r.max_ms = *std::max_element(r.samples_ms.begin(), r.samples_ms.end());
  return r;
}

LatencyReport bench_latency(const nn::ModelConfig& config, const nn::ModelParams& params, int runs, int warmup,
                            std::uint64_t seed) {
  return bench_latency([&](const nn::Tensor4& x) { nn::forward(config, params, x); }, config.name + " (float)",
                       config.input, runs, warmup, seed);
}

LatencyReport bench_latency(const QuantizedModel& model, int runs, int warmup, std::uint64_t seed) {
  return bench_latency([&](const nn::Tensor4& x) { qforward(model, x); }, model.config.name + " (int8)",
                       model.config.input, runs, warmup, seed);
}

nlohmann::json to_json(const LatencyReport& r) {
  return {{"model", r.model},
          {"input", {r.input.c, r.input.h, r.input.w}},
          {"runs", r.runs},
          {"warmup", r.warmup},
          {"samples_ms", r.samples_ms},
          {"mean_ms", r.mean_ms},
          {"p50_ms", r.p50_ms},
          {"p95_ms", r.p95_ms},
          {"max_ms", r.max_ms},
          {"input_checksum", to_hex(r.input_checksum)}};
}

}  // namespace retina::quant
