#pragma once

#include "retina/imaging/image.hpp"

namespace retina::imaging {

// Geometric transforms are instantiated for RasterImage and PlaneTensor.
// Raster outputs are rounded half-even and clamped to [0, 255].

/// Bilinear resampling with half-pixel centers (align-corners false):
/// source = (dst + 0.5) * src_dim / dst_dim - 0.5, clamped to the edge.
template <class T>
BasicImage<T> resize_bilinear(const BasicImage<T>& img, int width, int height);

template <class T>
BasicImage<T> hflip(const BasicImage<T>& img);

template <class T>
BasicImage<T> vflip(const BasicImage<T>& img);

/// Clockwise rotation about the image center with bilinear resampling.
/// Neighbors outside the source contribute 0. Multiples of 90 degrees are
/// exact index permutations (non-square images keep their dimensions, so
/// 90/270 degree turns crop and pad like any other angle).
template <class T>
BasicImage<T> rotate(const BasicImage<T>& img, double angle_deg);

/// Integer center crop of round(dim / factor) then bilinear resize back.
template <class T>
BasicImage<T> zoom(const BasicImage<T>& img, double factor);

/// Copies the rectangle [x0, x0 + w) x [y0, y0 + h).
template <class T>
BasicImage<T> crop(const BasicImage<T>& img, int x0, int y0, int width, int height);

}  // namespace retina::imaging
