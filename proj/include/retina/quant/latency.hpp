#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "retina/nn/params.hpp"
#include "retina/quant/quantize.hpp"

namespace retina::quant {

struct LatencyReport {
  std::string model;
  nn::Shape3 input;
  int runs = 0;
  int warmup = 0;
  std::vector<double> samples_ms;  // timed runs only, in run order
  double mean_ms = 0.0;
  double p50_ms = 0.0;
  double p95_ms = 0.0;
  double max_ms = 0.0;
  std::uint64_t input_checksum = 0;  // FNV-1a over the timed inputs' bytes
};

/// Seeded one-sample input for run `index` (warmup runs come first):
/// uniform [0, 1) values from derive_seed(seed, index).
nn::Tensor4 bench_input(nn::Shape3 input, std::uint64_t seed, int index);

/// Times `infer` on warmup + runs seeded inputs with a monotonic clock and
/// keeps the last `runs` timings. Percentiles are nearest-rank. Throws
/// std::invalid_argument when runs < 1 or warmup < 0.
LatencyReport bench_latency(const std::function<void(const nn::Tensor4&)>& infer, const std::string& model,
                            nn::Shape3 input, int runs, int warmup, std::uint64_t seed);

LatencyReport bench_latency(const nn::ModelConfig& config, const nn::ModelParams& params, int runs, int warmup,
                            std::uint64_t seed);
LatencyReport bench_latency(const QuantizedModel& model, int runs, int warmup, std::uint64_t seed);

/// Nearest-rank percentile (p in (0, 100]) of unsorted values.
double percentile(std::vector<double> values, double p);

nlohmann::json to_json(const LatencyReport& r);

}  // namespace retina::quant
