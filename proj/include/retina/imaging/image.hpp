#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "retina/core/error.hpp"

namespace retina::imaging {

enum class ImageErrc {
  UnsupportedFormat,
  CorruptData,
  ZeroDimension,
  InvalidArgument,
};

const char* to_string(ImageErrc code);

using ImageError = CodedError<ImageErrc>;

/// Interleaved, row-major image: sample (x, y, c) lives at
/// `(y * width + x) * channels + c`.
template <class T>
struct BasicImage {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<T> data;

  BasicImage() = default;
  BasicImage(int w, int h, int c, T fill = T{}) : width(w), height(h), channels(c) {
    check_dims(w, h, c);
    data.assign(static_cast<std::size_t>(w) * h * c, fill);
  }
  BasicImage(int w, int h, int c, std::vector<T> samples)
      : width(w), height(h), channels(c), data(std::move(samples)) {
    check_dims(w, h, c);
    if (data.size() != static_cast<std::size_t>(w) * h * c)
      throw ImageError(ImageErrc::InvalidArgument, "sample count does not match dimensions");
  }

  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width + x) * channels + c;
  }
  T& at(int x, int y, int c = 0) { return data[index(x, y, c)]; }
  const T& at(int x, int y, int c = 0) const { return data[index(x, y, c)]; }

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }

  bool operator==(const BasicImage&) const = default;

 private:
  static void check_dims(int w, int h, int c) {
    if (w < 1 || h < 1) throw ImageError(ImageErrc::ZeroDimension, "image dimensions must be >= 1");
    if (c != 1 && c != 3) throw ImageError(ImageErrc::InvalidArgument, "channel count must be 1 or 3");
  }
};

/// Decoded 8-bit image, samples in [0, 255].
using RasterImage = BasicImage<std::uint8_t>;
/// Floating image fed to the network; normalized samples are in [0, 1].
using PlaneTensor = BasicImage<float>;

/// raw / 255.
PlaneTensor normalize(const RasterImage& img);
/// Inverse of normalize: round-half-even(v * 255) clamped to [0, 255].
RasterImage to_raster(const PlaneTensor& img);

}  // namespace retina::imaging
