#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "retina/imaging/image.hpp"

namespace retina::imaging {

enum class AugmentKind { HFlip, VFlip, Rotate, Brightness, Contrast, GaussianNoise, Zoom };

const char* to_string(AugmentKind kind);

/// One augmentation step. `param` is the angle in degrees (Rotate), the
/// factor (Brightness, Contrast, Zoom) or sigma (GaussianNoise); `seed`
/// drives the noise generator.
struct AugmentOp {
  AugmentKind kind = AugmentKind::HFlip;
  double param = 0.0;
  std::uint64_t seed = 0;

  static AugmentOp hflip() { return {AugmentKind::HFlip}; }
  static AugmentOp vflip() { return {AugmentKind::VFlip}; }
  static AugmentOp rotate(double deg) { return {AugmentKind::Rotate, deg}; }
  static AugmentOp brightness(double f) { return {AugmentKind::Brightness, f}; }
  static AugmentOp contrast(double f) { return {AugmentKind::Contrast, f}; }
  static AugmentOp noise(double sigma, std::uint64_t seed) { return {AugmentKind::GaussianNoise, sigma, seed}; }
  static AugmentOp zoom(double f) { return {AugmentKind::Zoom, f}; }

  bool operator==(const AugmentOp&) const = default;
};

/// Throws ImageError(InvalidArgument) when a parameter is out of range.
void validate(const AugmentOp& op);

/// Text form used in manifests: "hflip", "rotate(12.5)", "noise(0.02)#seed".
/// Parameters use the shortest round-trip decimal form.
std::string format_op(const AugmentOp& op);
AugmentOp parse_op(std::string_view text);

/// clamp(in * factor, 0, 1)
PlaneTensor adjust_brightness(const PlaneTensor& img, double factor);
/// clamp(mean + factor * (in - mean), 0, 1), mean over every sample.
PlaneTensor adjust_contrast(const PlaneTensor& img, double factor);
/// clamp(in + N(0, sigma^2), 0, 1) from Rng(seed), one variate per sample.
PlaneTensor gaussian_noise(const PlaneTensor& img, double sigma, std::uint64_t seed);

PlaneTensor apply(const AugmentOp& op, const PlaneTensor& img);
/// Geometric ops act on the raster directly; tonal ops round-trip through
/// normalize / to_raster.
RasterImage apply(const AugmentOp& op, const RasterImage& img);

}  // namespace retina::imaging
