#include "retina/imaging/transform.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace retina::imaging {

namespace {

template <class T>
T store(double v) {
  if constexpr (std::is_same_v<T, std::uint8_t>) {
    return static_cast<std::uint8_t>(std::clamp(std::nearbyint(v), 0.0, 255.0));
  } else {
    return static_cast<T>(v);
  }
}

struct Tap {
  int i0;
  int i1;
  double frac;
};

// Edge-clamped interpolation taps along one axis.
Tap clamped_tap(double src, int dim) {
  src = std::clamp(src, 0.0, static_cast<double>(dim - 1));
  const int i0 = static_cast<int>(std::floor(src));
  const int i1 = std::min(i0 + 1, dim - 1);
  return {i0, i1, src - i0};
}

}  // namespace

PlaneTensor normalize(const RasterImage& img) {
  PlaneTensor out(img.width, img.height, img.channels);
  std::transform(img.data.begin(), img.data.end(), out.data.begin(),
                 [](std::uint8_t v) { return static_cast<float>(v / 255.0); });
  return out;
}

RasterImage to_raster(const PlaneTensor& img) {
  RasterImage out(img.width, img.height, img.channels);
  std::transform(img.data.begin(), img.data.end(), out.data.begin(),
                 [](float v) { return store<std::uint8_t>(static_cast<double>(v) * 255.0); });
  return out;
}

template <class T>
BasicImage<T> resize_bilinear(const BasicImage<T>& img, int width, int height) {
  if (width < 1 || height < 1) throw ImageError(ImageErrc::ZeroDimension, "resize target must be >= 1x1");
  if (width == img.width && height == img.height) return img;
  BasicImage<T> out(width, height, img.channels);
  const double sx = static_cast<double>(img.width) / width;
  const double sy = static_cast<double>(img.height) / height;
  std::vector<Tap> xtaps(static_cast<std::size_t>(width));
  for (int x = 0; x < width; ++x) xtaps[static_cast<std::size_t>(x)] = clamped_tap((x + 0.5) * sx - 0.5, img.width);
  for (int y = 0; y < height; ++y) {
    const Tap ty = clamped_tap((y + 0.5) * sy - 0.5, img.height);
    for (int x = 0; x < width; ++x) {
      const Tap& tx = xtaps[static_cast<std::size_t>(x)];
      for (int c = 0; c < img.channels; ++c) {
        const double top = (1.0 - tx.frac) * img.at(tx.i0, ty.i0, c) + tx.frac * img.at(tx.i1, ty.i0, c);
        const double bottom = (1.0 - tx.frac) * img.at(tx.i0, ty.i1, c) + tx.frac * img.at(tx.i1, ty.i1, c);
        out.at(x, y, c) = store<T>((1.0 - ty.frac) * top + ty.frac * bottom);
      }
    }
  }
  return out;
}

template <class T>
BasicImage<T> hflip(const BasicImage<T>& img) {
  BasicImage<T> out(img.width, img.height, img.channels);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) out.at(x, y, c) = img.at(img.width - 1 - x, y, c);
  return out;
}

template <class T>
BasicImage<T> vflip(const BasicImage<T>& img) {
  BasicImage<T> out(img.width, img.height, img.channels);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) out.at(x, y, c) = img.at(x, img.height - 1 - y, c);
  return out;
}

template <class T>
BasicImage<T> rotate(const BasicImage<T>& img, double angle_deg) {
  double a = std::fmod(angle_deg, 360.0);
  if (a < 0) a += 360.0;
  double cs, sn;
  // Exact values at right angles keep those rotations pure permutations.
  if (a == 0.0) {
    return img;
  } else if (a == 90.0) {
    cs = 0.0;
    sn = 1.0;
  } else if (a == 180.0) {
    cs = -1.0;
    sn = 0.0;
  } else if (a == 270.0) {
    cs = 0.0;
    sn = -1.0;
  } else {
    const double rad = a * std::numbers::pi / 180.0;
    cs = std::cos(rad);
    sn = std::sin(rad);
  }
  const double cx = (img.width - 1) / 2.0;
  const double cy = (img.height - 1) / 2.0;
  BasicImage<T> out(img.width, img.height, img.channels);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const double dx = x - cx;
      const double dy = y - cy;
      const double src_x = cx + cs * dx + sn * dy;
      const double src_y = cy - sn * dx + cs * dy;
      const double fx0 = std::floor(src_x);
      const double fy0 = std::floor(src_y);
      const double fx = src_x - fx0;
      const double fy = src_y - fy0;
      const int x0 = static_cast<int>(fx0);
      const int y0 = static_cast<int>(fy0);
      for (int c = 0; c < img.channels; ++c) {
        double acc = 0.0;
        const double weights[4] = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
        const int xs[4] = {x0, x0 + 1, x0, x0 + 1};
        const int ys[4] = {y0, y0, y0 + 1, y0 + 1};
        for (int k = 0; k < 4; ++k) {
          if (weights[k] == 0.0) continue;
          if (xs[k] < 0 || ys[k] < 0 || xs[k] >= img.width || ys[k] >= img.height) continue;
          acc += weights[k] * img.at(xs[k], ys[k], c);
        }
        out.at(x, y, c) = store<T>(acc);
      }
    }
  }
  return out;
}

template <class T>
BasicImage<T> crop(const BasicImage<T>& img, int x0, int y0, int width, int height) {
  if (width < 1 || height < 1) throw ImageError(ImageErrc::ZeroDimension, "crop must be >= 1x1");
  if (x0 < 0 || y0 < 0 || x0 + width > img.width || y0 + height > img.height)
    throw ImageError(ImageErrc::InvalidArgument, "crop rectangle outside image");
  BasicImage<T> out(width, height, img.channels);
  for (int y = 0; y < height; ++y) {
    auto src = img.data.begin() + static_cast<std::ptrdiff_t>(img.index(x0, y0 + y, 0));
    std::copy(src, src + static_cast<std::ptrdiff_t>(width) * img.channels,
              out.data.begin() + static_cast<std::ptrdiff_t>(out.index(0, y, 0)));
  }
  return out;
}

template <class T>
BasicImage<T> zoom(const BasicImage<T>& img, double factor) {
  if (!(factor >= 1.0)) throw ImageError(ImageErrc::InvalidArgument, "zoom factor must be >= 1");
  const int cw = std::max(1, static_cast<int>(std::lround(img.width / factor)));
  const int ch = std::max(1, static_cast<int>(std::lround(img.height / factor)));
  const auto window = crop(img, (img.width - cw) / 2, (img.height - ch) / 2, cw, ch);
  return resize_bilinear(window, img.width, img.height);
}

#define RETINA_INSTANTIATE(T)                                                  \
  template BasicImage<T> resize_bilinear(const BasicImage<T>&, int, int);     \
  template BasicImage<T> hflip(const BasicImage<T>&);                         \
  template BasicImage<T> vflip(const BasicImage<T>&);                         \
  template BasicImage<T> rotate(const BasicImage<T>&, double);                \
  template BasicImage<T> zoom(const BasicImage<T>&, double);                  \
  template BasicImage<T> crop(const BasicImage<T>&, int, int, int, int);

RETINA_INSTANTIATE(std::uint8_t)
RETINA_INSTANTIATE(float)

#undef RETINA_INSTANTIATE

}  // namespace retina::imaging
