#pragma once

#include <array>
#include <cstdint>
#include <limits>

#include "retina/imaging/image.hpp"

namespace retina::imaging {

struct ClaheConfig {
  /// Normalized clip limit (>= 1). A bin may hold at most
  /// ceil(clip_limit * tile_pixels / 256) samples; +infinity disables clipping.
  double clip_limit = 2.0;
  int tiles_x = 8;
  int tiles_y = 8;
};

using Histogram = std::array<std::uint64_t, 256>;

/// Clips every bin to `limit` and redistributes the excess over the bins
/// that are still below the limit, so no bin ends above it.
void clip_histogram(Histogram& hist, std::uint64_t limit);

/// CDF mapping round((cdf(v) - cdf_min) * 255 / (N - cdf_min)); identity
/// when the histogram holds a single occupied bin.
std::array<std::uint8_t, 256> equalization_lut(const Histogram& hist);

/// Contrast-limited adaptive histogram equalization. Tile mappings are
/// blended bilinearly between tile centers. Three-channel images are
/// equalized on Y = round(0.299R + 0.587G + 0.114B), and each channel is
/// rescaled by Y' / max(Y, 1).
RasterImage clahe(const RasterImage& img, const ClaheConfig& cfg = {});

}  // namespace retina::imaging
