#include "retina/dataset/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "retina/core/bytes.hpp"
#include "retina/core/rng.hpp"
#include "retina/imaging/codec.hpp"

namespace retina::dataset {

namespace {

double pattern(Severity label, int x, int y) {
  switch (label) {
    case Severity::NoDR: return 0.0;
    case Severity::Mild: return (y / 4) % 2 == 0 ? 1.0 : -1.0;
    case Severity::Moderate: return (x / 4) % 2 == 0 ? 1.0 : -1.0;
    case Severity::Severe: return ((x / 4) + (y / 4)) % 2 == 0 ? 1.0 : -1.0;
    case Severity::ProliferateDR: return ((x + y) / 4) % 2 == 0 ? 1.0 : -1.0;
  }
  return 0.0;
}

constexpr double kTint[kSeverityCount][3] = {
    {0.0, 0.0, 0.0}, {0.04, -0.02, 0.0}, {-0.02, 0.04, 0.0}, {0.0, -0.02, 0.04}, {0.03, 0.03, -0.04}};
constexpr double kChannelGain[3] = {1.0, 0.7, 0.4};

}  // namespace

std::vector<LabeledImage> make_synthetic_corpus(const SyntheticCorpusConfig& cfg) {
  if (cfg.per_class < 1 || cfg.width < 8 || cfg.height < 8)
    throw DatasetError(DatasetErrc::InvalidArgument, "synthetic corpus needs >= 1 image per class and >= 8x8 pixels");
  Rng rng(cfg.seed);
  std::vector<LabeledImage> out;
  const int total = cfg.per_class * kSeverityCount;
  out.reserve(static_cast<std::size_t>(total));
  for (int i = 0; i < total; ++i) {
    const auto label = static_cast<Severity>(i % kSeverityCount);
    const double jitter = rng.uniform(-0.08, 0.08);
    const double amplitude = rng.uniform(0.20, 0.30);
    const double base[3] = {0.45 + jitter, 0.25 + jitter, 0.15 + jitter};
    imaging::PlaneTensor img(cfg.width, cfg.height, 3);
    for (int y = 0; y < cfg.height; ++y) {
      for (int x = 0; x < cfg.width; ++x) {
        const double p = pattern(label, x, y);
        for (int c = 0; c < 3; ++c) {
          const double v = base[c] + kTint[ordinal(label)][c] + amplitude * kChannelGain[c] * p +
                           cfg.noise_sigma * rng.normal();
          img.at(x, y, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
      }
    }
    out.push_back({std::move(img), label});
  }
  return out;
}

DatasetManifest write_synthetic_corpus(const SyntheticCorpusConfig& cfg, const std::filesystem::path& root) {
  const auto corpus = make_synthetic_corpus(cfg);
  DatasetManifest manifest;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "syn%05zu", i);
    const std::string rel = std::string("images/") + id + ".ppm";
    try {
      write_file(root / rel, imaging::encode_ppm(imaging::to_raster(corpus[i].image)));
    } catch (const std::exception& e) {
      throw DatasetError(DatasetErrc::WriteFailure, e.what());
    }
    manifest.add({id, rel, corpus[i].label, std::nullopt, std::nullopt});
  }
  return manifest;
}

}  // namespace retina::dataset
