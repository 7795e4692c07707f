#include <cmath>
#include <fstream>
#include <random>

#include "doctest.h"
#include "ilr/trace.hpp"
#include "spline_oracle.hpp"
#include "test_support.hpp"

using namespace ilr;
using namespace ilr::test;

namespace {

TraceField uniform_trace(double diameter_cm, RgbD offset, double px_per_cm = 4.0, int side = 0) {
  if (side == 0) side = trace_grid_side(diameter_cm, px_per_cm);
  TraceField t(side, side, px_per_cm);
  t.nominal_diameter_cm = diameter_cm;
  t.support = circular_mask(t.grid_center(), diameter_cm, px_per_cm, side, side);
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x)
      if (t.support.test(x, y))
        for (int c = 0; c < 3; ++c) t.at(x, y, c) = offset[std::size_t(c)];
  return t;
}

RgbD support_mean(const TraceField& t) {
  RgbD m{};
  std::size_t n = 0;
  for (int y = 0; y < t.height; ++y)
    for (int x = 0; x < t.width; ++x)
      if (t.support.test(x, y)) {
        ++n;
        for (int c = 0; c < 3; ++c) m[std::size_t(c)] += t.at(x, y, c);
      }
  for (auto& v : m) v /= double(n);
  return m;
}

// Library whose offsets follow a known function of (pixel, channel, power, diameter).
template <class F>
TraceLibrary function_library(std::vector<double> powers, std::vector<double> diameters, F f) {
  TraceLibrary lib;
  lib.power_levels = powers;
  lib.diameter_levels = diameters;
  const int side = trace_grid_side(diameters.back(), 4.0);
  for (double d : diameters)
    for (double p : powers) {
      TraceField t = uniform_trace(d, {0, 0, 0}, 4.0, side);
      t.nominal_power_mw = p;
      for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x)
          if (t.support.test(x, y))
            for (int c = 0; c < 3; ++c) t.at(x, y, c) = f(x, y, c, p, d);
      lib.entries.push_back(t);
    }
  lib.validate();
  return lib;
}

}  // namespace

TEST_CASE("extract_trace") {
  const Raster benign = uniform_raster(40, 40, {100, 100, 100});
  std::vector<Raster> b(3, benign);
  const TraceField zero = extract_trace(b, b, {20, 20}, 5.0);
  for (double v : zero.offsets) CHECK(v == 0.0);
  CHECK(zero.base_color == RgbD{100, 100, 100});

  Raster attacked = benign;
  const Mask disk = circular_mask({20, 20}, 5.0, 4.0, 40, 40);
  for (int y = 0; y < 40; ++y)
    for (int x = 0; x < 40; ++x)
      if (disk.test(x, y)) attacked.set(x, y, {110, 140, 180});
  std::vector<Raster> a(3, attacked);
  const TraceField t = extract_trace(b, a, {20, 20}, 5.0);
  t.validate();
  CHECK(t.support.count() == disk.count());
  for (int y = 0; y < t.height; ++y)
    for (int x = 0; x < t.width; ++x) {
      const RgbD want = t.support.test(x, y) ? RgbD{10, 40, 80} : RgbD{0, 0, 0};
      for (int c = 0; c < 3; ++c) CHECK(t.at(x, y, c) == want[std::size_t(c)]);
    }
}

TEST_CASE("extract_trace recovers a noisy synthetic speckle on average") {
  const TraceField truth = synthesize_speckle(IntensityModel{}, 30.0, 8.0, 100.0, {120, 120, 120}, 4.0, 5);
  const Raster base = uniform_raster(60, 60, {120, 120, 120});
  const Raster clean = apply_trace(base, truth, {30, 30});
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n(0.0, 3.0);
  auto noisy = [&](const Raster& r) {
    Raster o = r;
    for (auto& v : o.bytes()) v = to_u8(v + n(rng));
    return o;
  };
  std::vector<Raster> bf, af;
  for (int i = 0; i < 10; ++i) {
    bf.push_back(noisy(base));
    af.push_back(noisy(clean));
  }
  const TraceField got = extract_trace(bf, af, {30, 30}, 8.0);
  const RgbD gm = support_mean(got), tm = support_mean(truth);
  for (int c = 0; c < 3; ++c) CHECK(std::abs(gm[std::size_t(c)] - tm[std::size_t(c)]) <= 1.0);
}

TEST_CASE("extract after apply is exact without clamping") {
  const TraceField t = synthesize_speckle(IntensityModel{}, 10.0, 6.0, 100.0, {128, 128, 128}, 4.0, 9);
  const Raster base = uniform_raster(50, 50, {60, 60, 60});
  const Raster att = apply_trace(base, t, {25, 25});
  const std::vector<Raster> b{base}, a{att};
  const TraceField back = extract_trace(b, a, {25, 25}, 6.0);
  REQUIRE(back.width == t.width);
  for (int y = 0; y < t.height; ++y)
    for (int x = 0; x < t.width; ++x)
      if (t.support.test(x, y))
        for (int c = 0; c < 3; ++c) CHECK(back.at(x, y, c) == round_half_up(t.at(x, y, c)));
}

TEST_CASE("adjust_trace_color") {
  TraceField t = uniform_trace(4.0, {20, -100, -100});
  t.base_color = {178, 34, 52};
  const TraceField same = adjust_trace_color(t, t.base_color, 0.6);
  CHECK(same.offsets == t.offsets);

  const TraceField relabel = adjust_trace_color(t, {240, 240, 240}, 0.0);
  CHECK(relabel.offsets == t.offsets);
  CHECK(relabel.base_color == RgbD{240, 240, 240});

  const TraceField white = adjust_trace_color(t, {240, 240, 240}, 1.0);
  const Point c = white.grid_center();
  const int cx = int(c.x), cy = int(c.y);
  CHECK(white.at(cx, cy, 0) == 20.0 + (178.0 - 240.0));
  CHECK(white.at(cx, cy, 1) == -255.0);  // -100 - 206 floors
  CHECK(white.at(cx, cy, 2) == -255.0);  // -100 - 188 floors
  white.validate();
}

TEST_CASE("interpolate_power reproduces knots") {
  const std::vector<double> powers{2.5, 5, 10, 20, 40, 80};
  const TraceLibrary lib = synthesize_library(IntensityModel{}, powers, {3.5, 7.5}, 100.0, {178, 34, 52}, 4.0, 3);
  for (std::size_t d = 0; d < 2; ++d)
    for (std::size_t p = 0; p < powers.size(); ++p) {
      const TraceField t = interpolate_power(lib, d, powers[p]);
      const TraceField& e = lib.entry(d, p);
      REQUIRE(t.offsets.size() == e.offsets.size());
      for (std::size_t i = 0; i < t.offsets.size(); ++i) CHECK(std::abs(t.offsets[i] - e.offsets[i]) <= 1e-9);
    }
  CHECK_THROWS(interpolate_power(lib, 0, 1.0));
  CHECK_THROWS(interpolate_power(lib, 0, 100.0));
}

TEST_CASE("interpolate_power is exact on data linear in power") {
  const TraceLibrary lib = function_library({1, 2, 3}, {5.0}, [](int x, int y, int c, double p, double) {
    return (x - y) * 0.5 + c + 7.0 * p;
  });
  const TraceField t = interpolate_power(lib, 0, 1.5);
  for (int y = 0; y < t.height; ++y)
    for (int x = 0; x < t.width; ++x)
      if (t.support.test(x, y))
        for (int c = 0; c < 3; ++c) CHECK(t.at(x, y, c) == doctest::Approx((x - y) * 0.5 + c + 7.0 * 1.5).epsilon(1e-12));
}

TEST_CASE("interpolate_power matches a dense reference spline on per-pixel cubics") {
  const std::vector<double> P{2, 5, 9, 14, 20};
  auto cubic = [](int x, int y, int c, double p, double) {
    const double a = 0.01 * (x + 1) - 0.005 * y, b = -0.3 + 0.02 * c, k = 1.5 - 0.1 * x;
    return a * p * p * p / 40.0 + b * p * p + k * p - 20.0 + c;
  };
  const TraceLibrary lib = function_library(P, {6.0}, cubic);
  for (std::size_t s = 0; s + 1 < P.size(); ++s) {
    const double mid = 0.5 * (P[s] + P[s + 1]);
    const TraceField t = interpolate_power(lib, 0, mid);
    double worst = 0.0;
    for (int y = 0; y < t.height; ++y)
      for (int x = 0; x < t.width; ++x) {
        if (!t.support.test(x, y)) continue;
        for (int c = 0; c < 3; ++c) {
          std::vector<double> vals;
          for (double p : P) vals.push_back(cubic(x, y, c, p, 0));
          worst = std::max(worst, std::abs(t.at(x, y, c) - DenseSpline(P, vals)(mid)));
        }
      }
    CHECK(worst <= 1e-6);
  }
}

TEST_CASE("interpolate_diameter") {
  TraceField lo = uniform_trace(4.0, {10, 10, 10});
  TraceField hi = uniform_trace(8.0, {30, 30, 30});
  const TraceField at_lo = interpolate_diameter(lo, hi, 4.0);
  CHECK(at_lo.support.count() == circular_mask(at_lo.grid_center(), 4.0, 4.0, at_lo.width, at_lo.height).count());
  for (int y = 0; y < at_lo.height; ++y)
    for (int x = 0; x < at_lo.width; ++x)
      if (at_lo.support.test(x, y))
        for (int c = 0; c < 3; ++c) CHECK(at_lo.at(x, y, c) == 10.0);

  const TraceField mid = interpolate_diameter(lo, hi, 6.0);
  mid.validate();
  for (int y = 0; y < mid.height; ++y)
    for (int x = 0; x < mid.width; ++x)
      if (mid.support.test(x, y))
        for (int c = 0; c < 3; ++c) CHECK(mid.at(x, y, c) == doctest::Approx(20.0));
  CHECK_THROWS(interpolate_diameter(lo, hi, 9.0));
}

TEST_CASE("diameter blend is exact for offsets linear in diameter") {
  const TraceLibrary lib = function_library({10, 20}, {4.0, 8.0, 12.0}, [](int, int, int c, double p, double d) {
    return 3.0 * d + 0.5 * p - 10.0 * c;
  });
  const TraceBuilder builder(lib, IntensityModel{}, 100.0, 0.0);
  for (double d : {4.0, 5.0, 7.3, 8.0, 11.9, 12.0}) {
    const TraceField t = builder.build(d, 10.0);
    t.validate();
    for (int y = 0; y < t.height; ++y)
      for (int x = 0; x < t.width; ++x)
        if (t.support.test(x, y))
          for (int c = 0; c < 3; ++c) CHECK(std::abs(t.at(x, y, c) - (3.0 * d + 5.0 - 10.0 * c)) <= 1e-6);
  }
  CHECK_THROWS_AS(builder.build(3.0, 10.0), Error);
}

TEST_CASE("TraceBuilder at library knots returns the stored entries") {
  const TraceLibrary lib = synthesize_library(IntensityModel{}, {5, 20, 80}, {3.5, 7.5, 12.5}, 100.0, {178, 34, 52}, 4.0, 8);
  const TraceBuilder builder(lib, IntensityModel{}, 100.0);
  for (std::size_t d = 0; d < 3; ++d)
    for (std::size_t p = 0; p < 3; ++p) {
      const TraceField t = builder.build(lib.diameter_levels[d], lib.power_levels[p]);
      const TraceField& e = lib.entry(d, p);
      CHECK(t.support == e.support);
      double worst = 0.0;
      for (std::size_t i = 0; i < t.offsets.size(); ++i) worst = std::max(worst, std::abs(t.offsets[i] - e.offsets[i]));
      CHECK(worst <= 1e-9);
    }
}

TEST_CASE("synthesize_speckle") {
  const IntensityModel m;
  const TraceField zero = synthesize_speckle(m, 0.0, 10.0, 100.0, {178, 34, 52}, 4.0, 1);
  for (double v : zero.offsets) CHECK(v == 0.0);

  // 15 cm at 4 px/cm: radius 30 px.
  const TraceField a = synthesize_speckle(m, 30.0, 15.0, 100.0, {178, 34, 52}, 4.0, 1);
  const TraceField b = synthesize_speckle(m, 30.0, 15.0, 100.0, {178, 34, 52}, 4.0, 2);
  a.validate();
  const auto level = intensity_offset(m, 30.0, 15.0, 100.0);
  const RgbD ma = support_mean(a), mb = support_mean(b);
  for (int c = 0; c < 3; ++c) {
    CHECK(std::abs(ma[std::size_t(c)] - level[std::size_t(c)]) <= 0.03 * level[std::size_t(c)]);
    CHECK(std::abs(ma[std::size_t(c)] - mb[std::size_t(c)]) <= 0.05 * ma[std::size_t(c)]);
  }
  CHECK(a.offsets != b.offsets);
  CHECK(synthesize_speckle(m, 30.0, 15.0, 100.0, {178, 34, 52}, 4.0, 1).offsets == a.offsets);
}

TEST_CASE("apply_trace and saturation") {
  const Raster base = random_raster(40, 40, 4);
  CHECK(apply_trace(base, uniform_trace(5.0, {0, 0, 0}), {20, 20}) == base);

  const TraceField full = uniform_trace(5.0, {255, 255, 255});
  const Raster sat = apply_trace(base, full, {20, 20});
  const Mask placed = placed_support(full, {20, 20}, 40, 40);
  for (int y = 0; y < 40; ++y)
    for (int x = 0; x < 40; ++x) {
      if (placed.test(x, y))
        CHECK(sat.at(x, y) == Rgb8{255, 255, 255});
      else
        CHECK(sat.at(x, y) == base.at(x, y));
    }
  CHECK(saturation_fraction(sat, placed) == 1.0);

  // Invertibility away from the clamps.
  const Raster gray = uniform_raster(40, 40, {128, 128, 128});
  TraceField t = uniform_trace(6.0, {0, 0, 0});
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> off(-100, 100);
  for (int y = 0; y < t.height; ++y)
    for (int x = 0; x < t.width; ++x)
      if (t.support.test(x, y))
        for (int c = 0; c < 3; ++c) t.at(x, y, c) = off(rng);
  TraceField neg = t;
  for (auto& v : neg.offsets) v = -v;
  CHECK(apply_trace(apply_trace(gray, t, {20, 20}), neg, {20, 20}) == gray);

  CHECK_THROWS(apply_trace(base, t, {500, 500}));
}

TEST_CASE("saturation_fraction counts") {
  Raster img = uniform_raster(20, 20, {255, 255, 255});
  const Mask disk = circular_mask({10, 10}, 3.0, 4.0, 20, 20);
  CHECK(saturation_fraction(img, disk) == 1.0);

  img = uniform_raster(20, 20, {100, 100, 100});
  std::size_t total = 0, half = 0;
  for (int y = 0; y < 20; ++y)
    for (int x = 0; x < 20; ++x)
      if (disk.test(x, y)) {
        ++total;
        if (x < 10 || (x == 10 && y < 10)) {
          img.set(x, y, {255, 0, 0});
          ++half;
        }
      }
  CHECK(saturation_fraction(img, disk) == doctest::Approx(double(half) / double(total)));
  CHECK(double(half) / double(total) == doctest::Approx(0.5).epsilon(0.05));

  // Strong trace on a white sign, counted by hand.
  const TraceField t = synthesize_speckle(IntensityModel{}, 240.0, 10.0, 100.0, {240, 240, 240}, 4.0, 3);
  const Raster white = uniform_raster(60, 60, {240, 240, 240});
  const Raster att = apply_trace(white, t, {30, 30});
  const Mask s = placed_support(t, {30, 30}, 60, 60);
  std::size_t n = 0, k = 0;
  for (int y = 0; y < 60; ++y)
    for (int x = 0; x < 60; ++x)
      if (s.test(x, y)) {
        ++n;
        const Rgb8 p = att.at(x, y);
        k += (p.r == 255 || p.g == 255 || p.b == 255);
      }
  CHECK(saturation_fraction(att, s) == double(k) / double(n));
  CHECK(k > 0);
}

TEST_CASE("ambient rescale lowers offsets in brighter scenes") {
  const TraceField t = synthesize_speckle(IntensityModel{}, 40.0, 10.0, 100.0, {178, 34, 52}, 4.0, 2);
  const TraceField dark = rescale_for_ambient(t, IntensityModel{}, 100.0, 50.0);
  const TraceField bright = rescale_for_ambient(t, IntensityModel{}, 100.0, 300.0);
  const RgbD md = support_mean(dark), mb = support_mean(bright);
  for (int c = 0; c < 3; ++c) CHECK(mb[std::size_t(c)] < md[std::size_t(c)]);
}

TEST_CASE("library persistence") {
  const auto dir = tmp_dir("trace_library");
  const TraceLibrary lib = synthesize_library(IntensityModel{}, {5, 20}, {3.5, 7.5}, 100.0, {178, 34, 52}, 4.0, 4);
  save_library(lib, dir);
  const TraceLibrary back = load_library(dir);
  REQUIRE(back.entries.size() == lib.entries.size());
  CHECK(back.power_levels == lib.power_levels);
  CHECK(back.diameter_levels == lib.diameter_levels);
  CHECK(back.base_color() == lib.base_color());
  for (std::size_t e = 0; e < lib.entries.size(); ++e) {
    CHECK(back.entries[e].support == lib.entries[e].support);
    for (std::size_t i = 0; i < lib.entries[e].offsets.size(); ++i)
      CHECK(back.entries[e].offsets[i] == double(float(lib.entries[e].offsets[i])));
  }

  write_trace_file(lib.entries[0], dir / "one.ilrt");
  std::ifstream in(dir / "one.ilrt", std::ios::binary);
  char magic[5];
  in.read(magic, 5);
  CHECK(std::string(magic, 5) == "ILRT1");
  std::uint32_t w = 0, h = 0;
  in.read(reinterpret_cast<char*>(&w), 4);
  in.read(reinterpret_cast<char*>(&h), 4);
  CHECK(int(w) == lib.entries[0].width);
  CHECK(int(h) == lib.entries[0].height);
  in.seekg(0, std::ios::end);
  CHECK(std::size_t(in.tellg()) == 13 + std::size_t(w) * h * 3 * 4 + std::size_t(w) * h);

  CHECK_THROWS(load_library(dir / "nope"));
}
