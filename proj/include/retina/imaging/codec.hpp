#pragma once

#include <cstdint>
#include <span>

#include "retina/core/bytes.hpp"
#include "retina/imaging/image.hpp"

namespace retina::imaging {

enum class ImageFormat { Png, Jpeg, Ppm, Unknown };

ImageFormat sniff_format(std::span<const std::uint8_t> bytes);

/// Decodes PNG, baseline JPEG or binary PPM ("P6"). PNG alpha is dropped;
/// gray PNG/JPEG decode to one channel, everything else to three.
RasterImage decode_image(std::span<const std::uint8_t> bytes);

Bytes encode_png(const RasterImage& img);
/// Binary PPM; one-channel images are written as gray RGB triples.
Bytes encode_ppm(const RasterImage& img);

/// "PTNS" container: 16-byte header (magic, u32 width, u32 height,
/// u32 channels) followed by little-endian f32 samples.
Bytes serialize_plane(const PlaneTensor& img);
PlaneTensor deserialize_plane(std::span<const std::uint8_t> bytes);

}  // namespace retina::imaging
