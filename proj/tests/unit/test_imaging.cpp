#include <cmath>

#include "doctest.h"
#include "retina/core/rng.hpp"
#include "retina/imaging/augment.hpp"
#include "retina/imaging/pipeline.hpp"
#include "retina/imaging/transform.hpp"

using namespace retina;
using namespace retina::imaging;

namespace {

RasterImage random_raster(Rng& rng, int w, int h, int c) {
  RasterImage img(w, h, c);
  for (auto& v : img.data) v = static_cast<std::uint8_t>(rng.uniform_int(256));
  return img;
}

PlaneTensor random_plane(Rng& rng, int w, int h, int c) { return normalize(random_raster(rng, w, h, c)); }

bool in_unit_range(const PlaneTensor& t) {
  for (float v : t.data)
    if (!(v >= 0.0f && v <= 1.0f)) return false;
  return true;
}

}  // namespace

TEST_CASE("image invariants") {
  CHECK_THROWS_AS(RasterImage(0, 3, 1), ImageError);
  CHECK_THROWS_AS(RasterImage(3, 3, 2), ImageError);
  CHECK_THROWS_AS(RasterImage(2, 2, 1, std::vector<std::uint8_t>(3)), ImageError);
}

TEST_CASE("normalize boundaries and monotonicity") {
  RasterImage img(256, 1, 1);
  for (int i = 0; i < 256; ++i) img.data[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(i);
  const auto t = normalize(img);
  CHECK(t.data[0] == 0.0f);
  CHECK(t.data[255] == 1.0f);
  CHECK(t.data[128] == doctest::Approx(0.50196).epsilon(1e-5));
  CHECK(t.data[128] == static_cast<float>(128.0 / 255.0));
  for (int i = 1; i < 256; ++i) CHECK(t.data[static_cast<std::size_t>(i)] > t.data[static_cast<std::size_t>(i - 1)]);
  CHECK(to_raster(t) == img);
}

TEST_CASE("resize_bilinear") {
  SUBCASE("2x2 -> 1x1 samples the center") {
    PlaneTensor t(2, 2, 1, std::vector<float>{0, 0, 1, 1});
    const auto r = resize_bilinear(t, 1, 1);
    CHECK(r.data[0] == 0.5f);
  }
  SUBCASE("identity dims are bitwise identical") {
    Rng rng(7);
    const auto img = random_raster(rng, 9, 5, 3);
    CHECK(resize_bilinear(img, 9, 5) == img);
    const auto t = random_plane(rng, 4, 6, 1);
    CHECK(resize_bilinear(t, 4, 6) == t);
  }
  SUBCASE("1x1 -> 3x3 is constant") {
    PlaneTensor t(1, 1, 1, std::vector<float>{0.3f});
    const auto r = resize_bilinear(t, 3, 3);
    for (float v : r.data) CHECK(v == 0.3f);
    RasterImage g(1, 1, 3, std::vector<std::uint8_t>{10, 20, 30});
    const auto rg = resize_bilinear(g, 3, 3);
    CHECK(rg.channels == 3);
    CHECK(rg.at(2, 2, 2) == 30);
  }
  SUBCASE("zero target") {
    PlaneTensor t(1, 1, 1);
    CHECK_THROWS_AS(resize_bilinear(t, 0, 3), ImageError);
  }
  SUBCASE("upsampling a ramp stays within source range") {
    Rng rng(3);
    const auto img = random_raster(rng, 7, 7, 1);
    const auto r = resize_bilinear(normalize(img), 226, 226);
    CHECK(r.width == 226);
    CHECK(in_unit_range(r));
  }
}

TEST_CASE("flips") {
  PlaneTensor row(2, 1, 1, std::vector<float>{1, 2});
  CHECK(hflip(row).data == std::vector<float>{2, 1});
  Rng rng(11);
  for (int trial = 0; trial < 25; ++trial) {
    const int w = 1 + static_cast<int>(rng.uniform_int(9));
    const int h = 1 + static_cast<int>(rng.uniform_int(9));
    const auto img = random_raster(rng, w, h, trial % 2 ? 3 : 1);
    CHECK(hflip(hflip(img)) == img);
    CHECK(vflip(vflip(img)) == img);
  }
  PlaneTensor sq(2, 2, 1, std::vector<float>{1, 2, 3, 4});
  CHECK(vflip(hflip(sq)) == rotate(sq, 180));
}

TEST_CASE("rotate") {
  PlaneTensor sq(2, 2, 1, std::vector<float>{1, 2, 3, 4});  // [[a,b],[c,d]]
  CHECK(rotate(sq, 0) == sq);
  CHECK(rotate(sq, 90).data == std::vector<float>{3, 1, 4, 2});  // [[c,a],[d,b]]
  CHECK(rotate(sq, 360) == sq);
  CHECK(rotate(sq, -270) == rotate(sq, 90));

  SUBCASE("right angles are permutations on square images") {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
      const int n = 1 + static_cast<int>(rng.uniform_int(8));
      const auto img = random_plane(rng, n, n, 3);
      const auto r90 = rotate(img, 90);
      for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x)
          for (int c = 0; c < 3; ++c) CHECK(r90.at(x, y, c) == img.at(y, n - 1 - x, c));
      CHECK(rotate(rotate(rotate(rotate(img, 90), 90), 90), 90) == img);
      CHECK(rotate(img, 270) == rotate(rotate(img, 180), 90));
    }
  }
  SUBCASE("arbitrary angles keep dims and range") {
    Rng rng(9);
    const auto img = random_plane(rng, 13, 9, 3);
    for (double a : {-25.0, 7.5, 33.0, 123.0}) {
      const auto r = rotate(img, a);
      CHECK(r.width == 13);
      CHECK(r.height == 9);
      CHECK(in_unit_range(r));
    }
    const auto raster = random_raster(rng, 10, 10, 1);
    const auto rr = rotate(raster, 45);
    // corners fall outside the rotated source and are filled with 0
    CHECK(rr.at(0, 0) == 0);
  }
}

TEST_CASE("tonal operators") {
  PlaneTensor half(1, 1, 1, std::vector<float>{0.5f});
  CHECK(adjust_brightness(half, 1.2).data[0] == doctest::Approx(0.6));
  Rng rng(21);
  const auto img = random_plane(rng, 8, 8, 3);
  CHECK(adjust_brightness(img, 1.0) == img);
  CHECK(adjust_contrast(img, 1.0) == img);
  CHECK(gaussian_noise(img, 0.0, 99) == img);
  CHECK(zoom(img, 1.0) == img);

  SUBCASE("contrast pivots on the plane mean") {
    PlaneTensor t(2, 1, 1, std::vector<float>{0.25f, 0.75f});
    const auto c = adjust_contrast(t, 2.0);
    CHECK(c.data[0] == 0.0f);
    CHECK(c.data[1] == 1.0f);
  }
  SUBCASE("seeded noise is bit-reproducible and clamped") {
    const auto a = gaussian_noise(img, 0.03, 1234);
    const auto b = gaussian_noise(img, 0.03, 1234);
    const auto c = gaussian_noise(img, 0.03, 1235);
    CHECK(a == b);
    CHECK_FALSE(a == c);
    CHECK(in_unit_range(gaussian_noise(img, 5.0, 1)));
  }
  SUBCASE("range invariant for every operator") {
    for (auto op : {AugmentOp::hflip(), AugmentOp::vflip(), AugmentOp::rotate(17), AugmentOp::brightness(1.9),
                    AugmentOp::contrast(3.0), AugmentOp::noise(0.2, 4), AugmentOp::zoom(1.7)}) {
      const auto out = apply(op, img);
      CHECK(out.width == img.width);
      CHECK(out.height == img.height);
      CHECK(in_unit_range(out));
    }
  }
  SUBCASE("zoom crops the center") {
    PlaneTensor t(4, 4, 1);
    t.at(1, 1) = t.at(2, 1) = t.at(1, 2) = t.at(2, 2) = 1.0f;
    const auto z = zoom(t, 2.0);
    for (float v : z.data) CHECK(v == 1.0f);
  }
  SUBCASE("parameter validation") {
    CHECK_THROWS_AS(validate(AugmentOp::brightness(0)), ImageError);
    CHECK_THROWS_AS(validate(AugmentOp::zoom(0.9)), ImageError);
    CHECK_THROWS_AS(validate(AugmentOp::noise(-0.1, 0)), ImageError);
  }
}

TEST_CASE("augment op text form round-trips") {
  Rng rng(77);
  for (int i = 0; i < 50; ++i) {
    const AugmentOp ops[] = {AugmentOp::hflip(), AugmentOp::vflip(), AugmentOp::rotate(rng.uniform(-25, 25)),
                             AugmentOp::brightness(rng.uniform(0.8, 1.2)), AugmentOp::contrast(rng.uniform(1.1, 1.5)),
                             AugmentOp::noise(rng.uniform(0.01, 0.03), rng.next_u64()), AugmentOp::zoom(rng.uniform(1.05, 1.2))};
    for (const auto& op : ops) CHECK(parse_op(format_op(op)) == op);
  }
  CHECK(format_op(AugmentOp::rotate(12.5)) == "rotate(12.5)");
  CHECK(format_op(AugmentOp::noise(0.02, 7)) == "noise(0.02)#7");
  CHECK_THROWS_AS(parse_op("spin(3)"), ImageError);
  CHECK_THROWS_AS(parse_op("noise(0.1)"), ImageError);
  CHECK_THROWS_AS(parse_op("zoom(0.5)"), ImageError);
}

TEST_CASE("raster augmentation: geometric ops act directly on samples") {
  Rng rng(4);
  const auto img = random_raster(rng, 6, 4, 3);
  CHECK(apply(AugmentOp::hflip(), img) == hflip(img));
  CHECK(apply(AugmentOp::brightness(1.0), img) == img);
}

TEST_CASE("preprocess pipeline") {
  Rng rng(8);
  const auto img = random_raster(rng, 300, 280, 3);
  PreprocessConfig cfg;
  const auto t = preprocess(img, cfg);
  CHECK(t.width == 226);
  CHECK(t.height == 226);
  CHECK(t.channels == 3);
  CHECK(in_unit_range(t));
  CHECK(preprocess(img, cfg) == t);

  cfg.order = StageOrder::ClaheThenResize;
  CHECK(preprocess(img, cfg).width == 226);

  cfg.target_width = 4;
  CHECK_THROWS_AS(preprocess(img, cfg), ImageError);
}
