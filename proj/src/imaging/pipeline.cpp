#include "retina/imaging/pipeline.hpp"

#include "retina/imaging/codec.hpp"
#include "retina/imaging/transform.hpp"

namespace retina::imaging {

void validate(const PreprocessConfig& cfg) {
  if (cfg.target_width < 8 || cfg.target_height < 8)
    throw ImageError(ImageErrc::InvalidArgument, "preprocess target dimensions must be >= 8");
  if (!(cfg.clahe.clip_limit >= 1.0)) throw ImageError(ImageErrc::InvalidArgument, "clip limit must be >= 1");
  if (cfg.clahe.tiles_x < 1 || cfg.clahe.tiles_y < 1)
    throw ImageError(ImageErrc::InvalidArgument, "tile grid must be >= 1x1");
}

PlaneTensor preprocess(const RasterImage& img, const PreprocessConfig& cfg) {
  validate(cfg);
  RasterImage work = img;
  if (cfg.apply_clahe && cfg.order == StageOrder::ClaheThenResize) work = clahe(work, cfg.clahe);
  work = resize_bilinear(work, cfg.target_width, cfg.target_height);
  if (cfg.apply_clahe && cfg.order == StageOrder::ResizeThenClahe) work = clahe(work, cfg.clahe);
  return normalize(work);
}

PlaneTensor preprocess_bytes(std::span<const std::uint8_t> encoded, const PreprocessConfig& cfg) {
  return preprocess(decode_image(encoded), cfg);
}

}  // namespace retina::imaging
