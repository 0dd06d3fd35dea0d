#include "retina/imaging/augment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "retina/core/bytes.hpp"
#include "retina/core/rng.hpp"
#include "retina/imaging/transform.hpp"

namespace retina::imaging {

const char* to_string(AugmentKind kind) {
  switch (kind) {
    case AugmentKind::HFlip: return "hflip";
    case AugmentKind::VFlip: return "vflip";
    case AugmentKind::Rotate: return "rotate";
    case AugmentKind::Brightness: return "brightness";
    case AugmentKind::Contrast: return "contrast";
    case AugmentKind::GaussianNoise: return "noise";
    case AugmentKind::Zoom: return "zoom";
  }
  return "unknown";
}

void validate(const AugmentOp& op) {
  auto fail = [](const char* what) { throw ImageError(ImageErrc::InvalidArgument, what); };
  if (!std::isfinite(op.param)) fail("augmentation parameter must be finite");
  switch (op.kind) {
    case AugmentKind::Brightness:
    case AugmentKind::Contrast:
      if (!(op.param > 0.0)) fail("brightness/contrast factor must be > 0");
      break;
    case AugmentKind::Zoom:
      if (!(op.param >= 1.0)) fail("zoom factor must be >= 1");
      break;
    case AugmentKind::GaussianNoise:
      if (!(op.param >= 0.0)) fail("noise sigma must be >= 0");
      break;
    default:
      break;
  }
}

std::string format_op(const AugmentOp& op) {
  switch (op.kind) {
    case AugmentKind::HFlip:
    case AugmentKind::VFlip:
      return to_string(op.kind);
    case AugmentKind::GaussianNoise:
      return std::string(to_string(op.kind)) + "(" + format_double(op.param) + ")#" + std::to_string(op.seed);
    default:
      return std::string(to_string(op.kind)) + "(" + format_double(op.param) + ")";
  }
}

AugmentOp parse_op(std::string_view text) {
  auto fail = [&] { throw ImageError(ImageErrc::InvalidArgument, "malformed augmentation op '" + std::string(text) + "'"); };
  static constexpr AugmentKind kKinds[] = {AugmentKind::HFlip, AugmentKind::VFlip, AugmentKind::Rotate,
                                           AugmentKind::Brightness, AugmentKind::Contrast,
                                           AugmentKind::GaussianNoise, AugmentKind::Zoom};
  const auto paren = text.find('(');
  const std::string_view name = text.substr(0, paren);
  AugmentOp op;
  bool found = false;
  for (auto k : kKinds) {
    if (name == to_string(k)) {
      op.kind = k;
      found = true;
    }
  }
  if (!found) fail();
  if (op.kind == AugmentKind::HFlip || op.kind == AugmentKind::VFlip) {
    if (paren != std::string_view::npos) fail();
    return op;
  }
  const auto close = text.find(')', paren == std::string_view::npos ? 0 : paren);
  if (paren == std::string_view::npos || close == std::string_view::npos) fail();
  const auto num = text.substr(paren + 1, close - paren - 1);
  auto [p, ec] = std::from_chars(num.data(), num.data() + num.size(), op.param);
  if (ec != std::errc() || p != num.data() + num.size()) fail();
  auto rest = text.substr(close + 1);
  if (op.kind == AugmentKind::GaussianNoise) {
    if (rest.empty() || rest.front() != '#') fail();
    rest.remove_prefix(1);
    auto [q, ec2] = std::from_chars(rest.data(), rest.data() + rest.size(), op.seed);
    if (ec2 != std::errc() || q != rest.data() + rest.size()) fail();
  } else if (!rest.empty()) {
    fail();
  }
  validate(op);
  return op;
}

PlaneTensor adjust_brightness(const PlaneTensor& img, double factor) {
  PlaneTensor out = img;
  for (auto& v : out.data) v = static_cast<float>(std::clamp(v * factor, 0.0, 1.0));
  return out;
}

PlaneTensor adjust_contrast(const PlaneTensor& img, double factor) {
  double sum = 0.0;
  for (float v : img.data) sum += v;
  const double mean = sum / static_cast<double>(img.data.size());
  PlaneTensor out = img;
  for (auto& v : out.data) v = static_cast<float>(std::clamp(mean + factor * (v - mean), 0.0, 1.0));
  return out;
}

PlaneTensor gaussian_noise(const PlaneTensor& img, double sigma, std::uint64_t seed) {
  if (sigma == 0.0) return img;
  Rng rng(seed);
  PlaneTensor out = img;
  for (auto& v : out.data) v = static_cast<float>(std::clamp(v + sigma * rng.normal(), 0.0, 1.0));
  return out;
}

PlaneTensor apply(const AugmentOp& op, const PlaneTensor& img) {
  validate(op);
  switch (op.kind) {
    case AugmentKind::HFlip: return hflip(img);
    case AugmentKind::VFlip: return vflip(img);
    case AugmentKind::Rotate: return rotate(img, op.param);
    case AugmentKind::Brightness: return adjust_brightness(img, op.param);
    case AugmentKind::Contrast: return adjust_contrast(img, op.param);
    case AugmentKind::GaussianNoise: return gaussian_noise(img, op.param, op.seed);
    case AugmentKind::Zoom: return zoom(img, op.param);
  }
  return img;
}

RasterImage apply(const AugmentOp& op, const RasterImage& img) {
  validate(op);
  switch (op.kind) {
    case AugmentKind::HFlip: return hflip(img);
    case AugmentKind::VFlip: return vflip(img);
    case AugmentKind::Rotate: return rotate(img, op.param);
    case AugmentKind::Zoom: return zoom(img, op.param);
    default: return to_raster(apply(op, normalize(img)));
  }
}

}  // namespace retina::imaging
