#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "doctest.h"
#include "ilr/corpus.hpp"
#include "ilr/imaging.hpp"
#include "test_support.hpp"

using namespace ilr;
using namespace ilr::test;

namespace {

// Reference resampler: builds the forward matrix from its factors, inverts
// it, and samples with edge replication.
Raster reference_transform(const Raster& img, double rot_deg, double shear) {
  const double th = rot_deg * std::numbers::pi / 180.0;
  const double R[2][2] = {{std::cos(th), -std::sin(th)}, {std::sin(th), std::cos(th)}};
  const double S[2][2] = {{1.0, shear}, {0.0, 1.0}};
  double A[2][2] = {};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k) A[i][j] += R[i][k] * S[k][j];
  const double det = A[0][0] * A[1][1] - A[0][1] * A[1][0];
  const double inv[2][2] = {{A[1][1] / det, -A[0][1] / det}, {-A[1][0] / det, A[0][0] / det}};
  const double cx = (img.width() - 1) / 2.0, cy = (img.height() - 1) / 2.0;
  Raster out(img.width(), img.height(), img.scale());
  auto px = [&](int x, int y, int c) {
    x = std::clamp(x, 0, img.width() - 1);
    y = std::clamp(y, 0, img.height() - 1);
    return double(img.channel(x, y, c));
  };
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      double sx = inv[0][0] * (x - cx) + inv[0][1] * (y - cy) + cx;
      double sy = inv[1][0] * (x - cx) + inv[1][1] * (y - cy) + cy;
      sx = std::clamp(sx, 0.0, img.width() - 1.0);
      sy = std::clamp(sy, 0.0, img.height() - 1.0);
      const int x0 = int(sx), y0 = int(sy);
      const double fx = sx - x0, fy = sy - y0;
      for (int c = 0; c < 3; ++c) {
        const double v = (1 - fy) * ((1 - fx) * px(x0, y0, c) + fx * px(x0 + 1, y0, c)) +
                         fy * ((1 - fx) * px(x0, y0 + 1, c) + fx * px(x0 + 1, y0 + 1, c));
        out.set_channel(x, y, c, std::uint8_t(std::clamp(std::floor(v + 0.5), 0.0, 255.0)));
      }
    }
  return out;
}

}  // namespace

TEST_CASE("PNG round trip is bit exact and keeps the scale") {
  const auto dir = tmp_dir("imaging_png");
  const Raster r = random_raster(16, 16, 99, 2.5);
  save_image(r, dir / "r.png");
  CHECK(load_image(dir / "r.png") == r);
  CHECK(std::filesystem::exists(sidecar_path(dir / "r.png")));

  const Raster black(4, 4);
  save_image(black, dir / "black.png");
  const Raster back = load_image(dir / "black.png");
  CHECK(back.width() == 4);
  for (auto b : back.bytes()) CHECK(b == 0);
}

TEST_CASE("binary PPM loads exactly") {
  const auto dir = tmp_dir("imaging_ppm");
  {
    std::ofstream out(dir / "two.ppm", std::ios::binary);
    out << "P6\n2 1\n255\n";
    const unsigned char px[] = {0, 0, 0, 255, 255, 255};
    out.write(reinterpret_cast<const char*>(px), 6);
  }
  const Raster r = load_image(dir / "two.ppm");
  CHECK(r.width() == 2);
  CHECK(r.height() == 1);
  CHECK(r.at(0, 0) == Rgb8{0, 0, 0});
  CHECK(r.at(1, 0) == Rgb8{255, 255, 255});
  save_image(r, dir / "copy.ppm");
  CHECK(load_image(dir / "copy.ppm") == r);
  CHECK_THROWS(load_image(dir / "missing.png"));
}

TEST_CASE("rendered corpus image reports 4 px/cm") {
  const auto dir = tmp_dir("imaging_scale");
  const RenderedSign s = render_sign(sign_spec("stop"), kDefaultPxPerCm, kDefaultBackground, RenderJitter{});
  save_image(s.image, dir / "stop.png");
  CHECK(load_image(dir / "stop.png").scale() == 4.0);
  std::ifstream meta(sidecar_path(dir / "stop.png"));
  std::string line;
  std::getline(meta, line);
  CHECK(line == "px_per_cm=4");
}

TEST_CASE("identity transform without noise is the identity") {
  const Raster r = random_raster(23, 17, 5);
  CHECK(apply_transform(r, {}, 1) == r);
}

TEST_CASE("brightness clamps at 255") {
  const Raster r = uniform_raster(8, 8, {128, 128, 128});
  AffinePhotometricTransform t;
  t.brightness = 2.0;
  const Raster out = apply_transform(r, t, 0);
  for (auto b : out.bytes()) CHECK(b == 255);
}

TEST_CASE("rotation and shear match the reference resampler on a sign crop") {
  const RenderedSign s = render_sign(sign_spec("stop"), kDefaultPxPerCm, kDefaultBackground, RenderJitter{});
  const Raster patch = crop(s.image, {s.image.width() / 2 - 16, s.image.height() / 2 - 40, 32, 32});
  AffinePhotometricTransform t;
  t.rotation_deg = 5.0;
  t.shear = 0.05;
  const Raster got = apply_transform(patch, t, 0);
  const Raster want = reference_transform(patch, 5.0, 0.05);
  int worst = 0;
  for (std::size_t i = 0; i < got.bytes().size(); ++i) worst = std::max(worst, std::abs(int(got.bytes()[i]) - int(want.bytes()[i])));
  CHECK(worst <= 1);
}

TEST_CASE("region transform equals cropping the full transform, noise included") {
  const Raster r = random_raster(40, 30, 8);
  AffinePhotometricTransform t;
  t.rotation_deg = -7.0;
  t.scale_x = 0.9;
  t.translate_y = 2.5;
  t.noise_sigma = 4.0;
  const Raster full = apply_transform(r, t, 77);
  const Box region{5, 3, 20, 12};
  CHECK(apply_transform(r, t, 77, region) == crop(full, region));
  CHECK(apply_transform_resized(r, t, 77, region, 10, 6) == resize_bilinear(crop(full, region), 10, 6));
  CHECK_FALSE(apply_transform(r, t, 78) == full);
}

TEST_CASE("average_frames") {
  const Raster a = random_raster(6, 5, 1);
  std::vector<Raster> same(10, a);
  CHECK(average_frames(same) == a);

  std::vector<Raster> two{uniform_raster(3, 3, {100, 100, 100}), uniform_raster(3, 3, {102, 102, 102})};
  const Raster avg = average_frames(two);
  for (auto b : avg.bytes()) CHECK(b == 101);

  std::vector<Raster> rev{two[1], two[0]};
  CHECK(average_frames(rev) == average_frames(two));

  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 5.0);
  std::vector<Raster> noisy;
  for (int k = 0; k < 10; ++k) {
    Raster f(12, 12);
    for (auto& b : f.bytes()) b = to_u8(100.0 + n(rng));
    noisy.push_back(f);
  }
  // Each output pixel is the rounded mean of its inputs, and the population
  // mean stays at the noise-free level.
  const Raster m = average_frames(noisy);
  double mean = 0.0;
  for (std::size_t i = 0; i < m.bytes().size(); ++i) {
    double exact = 0.0;
    for (const auto& f : noisy) exact += f.bytes()[i];
    exact /= 10.0;
    CHECK(std::abs(double(m.bytes()[i]) - exact) <= 0.5 + 1e-9);
    mean += m.bytes()[i];
  }
  mean /= double(m.bytes().size());
  CHECK(std::abs(mean - 100.0) <= 1.0);
  CHECK_THROWS(average_frames(std::vector<Raster>{}));
}

TEST_CASE("circular masks") {
  CHECK(circular_mask({10, 10}, 0.25, 4.0, 21, 21).count() == 1);

  const Mask big = circular_mask({100, 100}, 15.0, 4.0, 201, 201);
  const double area = std::numbers::pi * 30.0 * 30.0;
  CHECK(std::abs(double(big.count()) - area) / area < 0.02);

  const Mask corner = circular_mask({0, 0}, 15.0, 4.0, 201, 201);
  CHECK(double(corner.count()) == doctest::Approx(big.count() / 4.0).epsilon(0.06));

  std::size_t prev = 0;
  for (double d = 0.5; d < 20.0; d += 0.37) {
    const std::size_t n = circular_mask({50.3, 49.8}, d, 4.0, 101, 101).count();
    CHECK(n >= prev);
    prev = n;
  }
  CHECK_THROWS(circular_mask({0, 0}, 0.0, 4.0, 5, 5));
}

TEST_CASE("gaussian blur of a constant plane is the constant") {
  std::vector<float> plane(30 * 20, 77.0f);
  for (float v : gaussian_blur(plane, 30, 20, 2.0, 4)) CHECK(v == doctest::Approx(77.0f).epsilon(1e-5));
  CHECK_THROWS(gaussian_blur(plane, 30, 20, 0.0));
}

TEST_CASE("resize to the same size is the identity") {
  const Raster r = random_raster(9, 7, 2);
  CHECK(resize_bilinear(r, 9, 7) == r);
  const Raster half = resize_bilinear(uniform_raster(10, 10, {10, 20, 30}), 5, 5);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 5; ++x) CHECK(half.at(x, y) == Rgb8{10, 20, 30});
}
