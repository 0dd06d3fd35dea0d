#include "retina/imaging/clahe.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace retina::imaging {

void clip_histogram(Histogram& hist, std::uint64_t limit) {
  std::uint64_t excess = 0;
  for (auto& bin : hist) {
    if (bin > limit) {
      excess += bin - limit;
      bin = limit;
    }
  }
  while (excess > 0) {
    const auto below = static_cast<std::uint64_t>(std::count_if(hist.begin(), hist.end(), [&](auto b) { return b < limit; }));
    if (below == 0) break;  // only reachable when limit * 256 < total
    const std::uint64_t share = excess / below;
    if (share == 0) {
      for (auto& bin : hist) {
        if (excess == 0) break;
        if (bin < limit) {
          ++bin;
          --excess;
        }
      }
    } else {
      for (auto& bin : hist) {
        if (bin < limit) {
          const auto add = std::min(share, limit - bin);
          bin += add;
          excess -= add;
        }
      }
    }
  }
}

std::array<std::uint8_t, 256> equalization_lut(const Histogram& hist) {
  std::array<std::uint8_t, 256> lut{};
  std::uint64_t total = 0;
  for (auto b : hist) total += b;
  std::uint64_t cdf_min = 0;
  for (auto b : hist) {
    if (b > 0) {
      cdf_min = b;
      break;
    }
  }
  const std::uint64_t den = total - cdf_min;
  if (den == 0) {
    for (int v = 0; v < 256; ++v) lut[static_cast<std::size_t>(v)] = static_cast<std::uint8_t>(v);
    return lut;
  }
  std::uint64_t cdf = 0;
  for (int v = 0; v < 256; ++v) {
    cdf += hist[static_cast<std::size_t>(v)];
    if (cdf < cdf_min) {
      lut[static_cast<std::size_t>(v)] = 0;
      continue;
    }
    // round-half-up of (cdf - cdf_min) * 255 / den in exact integer arithmetic
    const std::uint64_t num = (cdf - cdf_min) * 255;
    lut[static_cast<std::size_t>(v)] = static_cast<std::uint8_t>((2 * num + den) / (2 * den));
  }
  return lut;
}

namespace {

struct TileAxis {
  std::vector<int> start;   // tiles + 1 boundaries
  std::vector<double> center;
};

TileAxis split_axis(int dim, int tiles) {
  tiles = std::clamp(tiles, 1, dim);
  TileAxis axis;
  for (int i = 0; i <= tiles; ++i)
    axis.start.push_back(static_cast<int>(static_cast<long long>(i) * dim / tiles));
  for (int i = 0; i < tiles; ++i) axis.center.push_back((axis.start[i] + axis.start[i + 1] - 1) / 2.0);
  return axis;
}

struct Blend {
  int lo;
  int hi;
  double w_hi;
};

Blend blend_for(const TileAxis& axis, int p) {
  const auto& c = axis.center;
  const int n = static_cast<int>(c.size());
  if (p <= c.front()) return {0, 0, 0.0};
  if (p >= c.back()) return {n - 1, n - 1, 0.0};
  int i = 0;
  while (i + 1 < n && c[static_cast<std::size_t>(i + 1)] <= p) ++i;
  const double w = (p - c[static_cast<std::size_t>(i)]) / (c[static_cast<std::size_t>(i + 1)] - c[static_cast<std::size_t>(i)]);
  return {i, i + 1, w};
}

std::vector<std::uint8_t> clahe_plane(const std::vector<std::uint8_t>& plane, int width, int height,
                                      const ClaheConfig& cfg) {
  const TileAxis ax = split_axis(width, cfg.tiles_x);
  const TileAxis ay = split_axis(height, cfg.tiles_y);
  const int tx = static_cast<int>(ax.center.size());
  const int ty = static_cast<int>(ay.center.size());

  std::vector<std::array<std::uint8_t, 256>> luts(static_cast<std::size_t>(tx * ty));
  for (int j = 0; j < ty; ++j) {
    for (int i = 0; i < tx; ++i) {
      Histogram hist{};
      for (int y = ay.start[j]; y < ay.start[j + 1]; ++y)
        for (int x = ax.start[i]; x < ax.start[i + 1]; ++x)
          ++hist[plane[static_cast<std::size_t>(y) * width + x]];
      const std::uint64_t n = static_cast<std::uint64_t>(ax.start[i + 1] - ax.start[i]) * (ay.start[j + 1] - ay.start[j]);
      const bool constant_tile = std::count_if(hist.begin(), hist.end(), [](auto b) { return b > 0; }) == 1;
      if (std::isfinite(cfg.clip_limit) && !constant_tile) {
        const auto limit = static_cast<std::uint64_t>(std::ceil(cfg.clip_limit * static_cast<double>(n) / 256.0));
        clip_histogram(hist, std::max<std::uint64_t>(limit, 1));
      }
      luts[static_cast<std::size_t>(j * tx + i)] = equalization_lut(hist);
    }
  }

  std::vector<Blend> xb(static_cast<std::size_t>(width));
  for (int x = 0; x < width; ++x) xb[static_cast<std::size_t>(x)] = blend_for(ax, x);
  std::vector<std::uint8_t> out(plane.size());
  for (int y = 0; y < height; ++y) {
    const Blend by = blend_for(ay, y);
    for (int x = 0; x < width; ++x) {
      const Blend& bx = xb[static_cast<std::size_t>(x)];
      const auto v = plane[static_cast<std::size_t>(y) * width + x];
      auto lut = [&](int tj, int ti) { return static_cast<double>(luts[static_cast<std::size_t>(tj * tx + ti)][v]); };
      double mapped;
      if (bx.w_hi == 0.0 && by.w_hi == 0.0) {
        mapped = lut(by.lo, bx.lo);
      } else {
        const double top = (1 - bx.w_hi) * lut(by.lo, bx.lo) + bx.w_hi * lut(by.lo, bx.hi);
        const double bottom = (1 - bx.w_hi) * lut(by.hi, bx.lo) + bx.w_hi * lut(by.hi, bx.hi);
        mapped = (1 - by.w_hi) * top + by.w_hi * bottom;
      }
      out[static_cast<std::size_t>(y) * width + x] = static_cast<std::uint8_t>(std::clamp(std::nearbyint(mapped), 0.0, 255.0));
    }
  }
  return out;
}

}  // namespace

RasterImage clahe(const RasterImage& img, const ClaheConfig& cfg) {
  if (!(cfg.clip_limit >= 1.0)) throw ImageError(ImageErrc::InvalidArgument, "clip limit must be >= 1");
  if (cfg.tiles_x < 1 || cfg.tiles_y < 1) throw ImageError(ImageErrc::InvalidArgument, "tile grid must be >= 1x1");
  if (img.channels == 1) {
    return RasterImage(img.width, img.height, 1, clahe_plane(img.data, img.width, img.height, cfg));
  }
  const std::size_t n = img.pixel_count();
  std::vector<std::uint8_t> luma(n);
  for (std::size_t p = 0; p < n; ++p) {
    const double y = 0.299 * img.data[3 * p] + 0.587 * img.data[3 * p + 1] + 0.114 * img.data[3 * p + 2];
    luma[p] = static_cast<std::uint8_t>(std::clamp(std::nearbyint(y), 0.0, 255.0));
  }
  const auto equalized = clahe_plane(luma, img.width, img.height, cfg);
  RasterImage out(img.width, img.height, 3);
  for (std::size_t p = 0; p < n; ++p) {
    const double gain = static_cast<double>(equalized[p]) / std::max<double>(luma[p], 1.0);
    for (std::size_t c = 0; c < 3; ++c)
      out.data[3 * p + c] = static_cast<std::uint8_t>(std::clamp(std::nearbyint(img.data[3 * p + c] * gain), 0.0, 255.0));
  }
  return out;
}

}  // namespace retina::imaging
