#pragma once

#include <cstdint>
#include <span>

#include "retina/imaging/clahe.hpp"
#include "retina/imaging/image.hpp"

namespace retina::imaging {

enum class StageOrder { ResizeThenClahe, ClaheThenResize };

struct PreprocessConfig {
  int target_width = 226;
  int target_height = 226;
  ClaheConfig clahe;
  StageOrder order = StageOrder::ResizeThenClahe;
  bool apply_clahe = true;
};

void validate(const PreprocessConfig& cfg);

/// resize -> CLAHE -> normalize (or CLAHE first, per `order`).
PlaneTensor preprocess(const RasterImage& img, const PreprocessConfig& cfg);
PlaneTensor preprocess_bytes(std::span<const std::uint8_t> encoded, const PreprocessConfig& cfg);

}  // namespace retina::imaging
