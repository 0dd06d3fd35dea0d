#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "retina/core/severity.hpp"
#include "retina/dataset/manifest.hpp"
#include "retina/imaging/image.hpp"

namespace retina::dataset {

struct LabeledImage {
  imaging::PlaneTensor image;
  Severity label = Severity::NoDR;
};

/// Seeded five-pattern corpus for desk-scale training and quantization
/// checks. Every grade but No_DR carries a fixed-position zero-mean pattern
/// (horizontal bars, vertical bars, checkerboard, diagonal bars) and
/// a small chroma tint on top of a jittered reddish background with pixel
/// noise. The classes are linearly separable in pixel space.
struct SyntheticCorpusConfig {
  int per_class = 100;
  int width = 32;
  int height = 32;
  double noise_sigma = 0.06;
  std::uint64_t seed = 7;
};

/// Samples are interleaved by class (i-th sample has label i mod 5).
std::vector<LabeledImage> make_synthetic_corpus(const SyntheticCorpusConfig& cfg);

/// Writes the corpus as PPM files under `root/images/` and returns a
/// manifest whose paths are relative to `root`.
DatasetManifest write_synthetic_corpus(const SyntheticCorpusConfig& cfg, const std::filesystem::path& root);

}  // namespace retina::dataset
