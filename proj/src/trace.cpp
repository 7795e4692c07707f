#include "ilr/trace.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "ilr/spline.hpp"

namespace ilr {

TraceField::TraceField(int w, int h, double px_per_cm)
    : width(w), height(h), offsets(std::size_t(w) * std::size_t(h) * 3, 0.0), support(w, h), scale(px_per_cm) {
  if (w <= 0 || h <= 0) throw invalid_argument("trace grid must be non-empty");
  if (!(px_per_cm > 0.0)) throw invalid_argument("trace scale must be positive");
}

Point TraceField::support_centroid() const {
  double sx = 0.0, sy = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      if (support.test(x, y)) {
        sx += x;
        sy += y;
        ++n;
      }
  if (n == 0) return grid_center();
  return {sx / double(n), sy / double(n)};
}

void TraceField::validate() const {
  if (offsets.size() != std::size_t(width) * std::size_t(height) * 3) throw invalid_argument("trace offsets size mismatch");
  if (support.width != width || support.height != height) throw invalid_argument("trace support size mismatch");
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < 3; ++c) {
        const double v = at(x, y, c);
        if (!support.test(x, y) && v != 0.0) throw invalid_argument("trace offset outside support");
        if (!(v >= -255.0 && v <= 255.0)) throw invalid_argument("trace offset out of [-255, 255]");
      }
}

void TraceLibrary::validate() const {
  if (power_levels.empty() || diameter_levels.empty()) throw invalid_argument("trace library levels are empty");
  for (std::size_t i = 1; i < power_levels.size(); ++i)
    if (!(power_levels[i] > power_levels[i - 1])) throw invalid_argument("power levels must be strictly ascending");
  for (std::size_t i = 1; i < diameter_levels.size(); ++i)
    if (!(diameter_levels[i] > diameter_levels[i - 1])) throw invalid_argument("diameter levels must be strictly ascending");
  if (entries.size() != power_levels.size() * diameter_levels.size())
    throw invalid_argument("trace library grid is not fully populated");
  for (const auto& e : entries) {
    if (e.scale != entries.front().scale) throw invalid_argument("trace library entries disagree on scale");
    if (e.base_color != entries.front().base_color) throw invalid_argument("trace library entries disagree on base color");
    if (e.width != entries.front().width || e.height != entries.front().height)
      throw invalid_argument("trace library entries disagree on grid size");
  }
}

int trace_grid_side(double diameter_cm, double px_per_cm) {
  return 2 * int(std::ceil(diameter_cm * px_per_cm * 0.5)) + 1;
}

TraceField extract_trace(std::span<const Raster> benign_frames, std::span<const Raster> attack_frames, Point center,
                         double diameter_cm) {
  if (benign_frames.empty() || attack_frames.empty()) throw invalid_argument("extract_trace: empty frame sequence");
  const Raster& ref = benign_frames.front();
  for (auto frames : {benign_frames, attack_frames})
    for (const auto& f : frames)
      if (f.width() != ref.width() || f.height() != ref.height())
        throw invalid_argument("extract_trace: dimension mismatch");

  const std::size_t n = ref.bytes().size();
  auto mean_of = [n](std::span<const Raster> frames) {
    std::vector<double> m(n, 0.0);
    for (const auto& f : frames) {
      const auto b = f.bytes();
      for (std::size_t i = 0; i < n; ++i) m[i] += b[i];
    }
    for (auto& v : m) v /= double(frames.size());
    return m;
  };
  const auto benign = mean_of(benign_frames);
  const auto attack = mean_of(attack_frames);

  const double scale = ref.scale();
  const int side = trace_grid_side(diameter_cm, scale);
  const int gx0 = int(round_half_up(center.x)) - side / 2;
  const int gy0 = int(round_half_up(center.y)) - side / 2;
  const Mask disk = circular_mask(center, diameter_cm, scale, ref.width(), ref.height());

  TraceField t(side, side, scale);
  t.nominal_diameter_cm = diameter_cm;
  RgbD base_sum{};
  std::size_t count = 0;
  for (int j = 0; j < side; ++j)
    for (int i = 0; i < side; ++i) {
      const int x = gx0 + i, y = gy0 + j;
      if (!ref.in_bounds(x, y) || !disk.test(x, y)) continue;
      t.support.put(i, j, true);
      const std::size_t k = (std::size_t(y) * std::size_t(ref.width()) + std::size_t(x)) * 3;
      for (int c = 0; c < 3; ++c) {
        t.at(i, j, c) = std::clamp(attack[k + std::size_t(c)] - benign[k + std::size_t(c)], -255.0, 255.0);
        base_sum[std::size_t(c)] += benign[k + std::size_t(c)];
      }
      ++count;
    }
  if (count == 0) throw invalid_argument("extract_trace: disk lies outside the frames");
  for (auto& v : base_sum) v /= double(count);
  t.base_color = base_sum;
  return t;
}

TraceField adjust_trace_color(const TraceField& t, const RgbD& target_base_color, double transfer_k) {
  TraceField out = t;
  for (int y = 0; y < t.height; ++y)
    for (int x = 0; x < t.width; ++x) {
      if (!t.support.test(x, y)) continue;
      for (int c = 0; c < 3; ++c) {
        const double shift = transfer_k * (t.base_color[std::size_t(c)] - target_base_color[std::size_t(c)]);
        out.at(x, y, c) = std::clamp(t.at(x, y, c) + shift, -255.0, 255.0);
      }
    }
  out.base_color = target_base_color;
  return out;
}

TraceField interpolate_power(const TraceLibrary& lib, std::size_t diameter_index, double power_mw) {
  if (diameter_index >= lib.diameter_levels.size()) throw invalid_argument("interpolate_power: diameter index out of range");
  const auto& levels = lib.power_levels;
  if (!(power_mw >= levels.front() && power_mw <= levels.back()))
    throw invalid_argument("interpolate_power: power outside the library range");

  const std::size_t np = levels.size();
  std::vector<double> w(np, 0.0);
  if (np == 1) {
    w[0] = 1.0;
  } else {
    w = NaturalSplineBasis(levels).weights(power_mw);
  }
  std::size_t nearest = 0;
  for (std::size_t i = 1; i < np; ++i)
    if (std::abs(levels[i] - power_mw) < std::abs(levels[nearest] - power_mw)) nearest = i;

  const TraceField& near = lib.entry(diameter_index, nearest);
  TraceField out(near.width, near.height, near.scale);
  out.support = near.support;
  out.nominal_power_mw = power_mw;
  out.nominal_diameter_cm = lib.diameter_levels[diameter_index];
  out.base_color = near.base_color;

  std::vector<const double*> cols(np);
  for (std::size_t i = 0; i < np; ++i) cols[i] = lib.entry(diameter_index, i).offsets.data();
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) {
      if (!out.support.test(x, y)) continue;
      const std::size_t base = (std::size_t(y) * std::size_t(out.width) + std::size_t(x)) * 3;
      for (std::size_t c = 0; c < 3; ++c) {
        double s = 0.0;
        for (std::size_t i = 0; i < np; ++i)
          if (w[i] != 0.0) s += w[i] * cols[i][base + c];
        out.offsets[base + c] = std::clamp(s, -255.0, 255.0);
      }
    }
  return out;
}

namespace {

// Bilinear read of a trace channel that only mixes supported neighbours.
double sample_supported(const TraceField& t, double x, double y, int c) {
  const int x0 = int(std::floor(x)), y0 = int(std::floor(y));
  const double fx = x - x0, fy = y - y0;
  double acc = 0.0, wsum = 0.0;
  for (int dy = 0; dy <= 1; ++dy)
    for (int dx = 0; dx <= 1; ++dx) {
      const int xx = x0 + dx, yy = y0 + dy;
      const double w = (dx ? fx : 1.0 - fx) * (dy ? fy : 1.0 - fy);
      if (w == 0.0 || xx < 0 || yy < 0 || xx >= t.width || yy >= t.height || !t.support.test(xx, yy)) continue;
      acc += w * t.at(xx, yy, c);
      wsum += w;
    }
  if (wsum > 0.0) return acc / wsum;
  // Rim pixel with no supported bilinear neighbour: nearest supported pixel in 3x3.
  const int rx = int(round_half_up(x)), ry = int(round_half_up(y));
  double best_d = 1e300, best_v = 0.0;
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx) {
      const int xx = rx + dx, yy = ry + dy;
      if (xx < 0 || yy < 0 || xx >= t.width || yy >= t.height || !t.support.test(xx, yy)) continue;
      const double d = (xx - x) * (xx - x) + (yy - y) * (yy - y);
      if (d < best_d) {
        best_d = d;
        best_v = t.at(xx, yy, c);
      }
    }
  return best_v;
}

}  // namespace

TraceField interpolate_diameter(const TraceField& lo, const TraceField& hi, double diameter_cm) {
  if (lo.scale != hi.scale) throw invalid_argument("interpolate_diameter: mismatched scales");
  const double d_lo = lo.nominal_diameter_cm, d_hi = hi.nominal_diameter_cm;
  constexpr double eps = 1e-9;
  if (!(diameter_cm >= d_lo - eps && diameter_cm <= d_hi + eps))
    throw invalid_argument("interpolate_diameter: diameter outside the bracket");
  const double lambda = d_hi > d_lo ? std::clamp((diameter_cm - d_lo) / (d_hi - d_lo), 0.0, 1.0) : 0.0;

  const int side = trace_grid_side(diameter_cm, lo.scale);
  const int w = std::max({lo.width, hi.width, side});
  const int h = std::max({lo.height, hi.height, side});
  TraceField out(w, h, lo.scale);
  out.nominal_diameter_cm = diameter_cm;
  out.nominal_power_mw = (1.0 - lambda) * lo.nominal_power_mw + lambda * hi.nominal_power_mw;
  out.base_color = lo.base_color;

  const Point oc = out.grid_center();
  out.support = circular_mask(oc, diameter_cm, lo.scale, w, h);
  const Point lc = lo.grid_center(), hc = hi.grid_center();
  const double rl = d_lo / diameter_cm, rh = d_hi / diameter_cm;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!out.support.test(x, y)) continue;
      const double dx = x - oc.x, dy = y - oc.y;
      for (int c = 0; c < 3; ++c) {
        double v = 0.0;
        if (lambda < 1.0) v += (1.0 - lambda) * sample_supported(lo, dx * rl + lc.x, dy * rl + lc.y, c);
        if (lambda > 0.0) v += lambda * sample_supported(hi, dx * rh + hc.x, dy * rh + hc.y, c);
        out.at(x, y, c) = std::clamp(v, -255.0, 255.0);
      }
    }
  return out;
}

std::vector<double> speckle_gain(const Mask& support, double grain_px, std::uint64_t rng_seed) {
  if (!(grain_px > 0.0)) throw invalid_argument("speckle grain must be positive");
  const int w = support.width, h = support.height;
  // Fully developed speckle: exponential intensity, correlated over the grain.
  std::mt19937_64 rng(rng_seed);
  std::exponential_distribution<double> expo(1.0);
  std::vector<float> raw(std::size_t(w) * std::size_t(h));
  for (auto& v : raw) v = float(expo(rng));
  const auto blurred = gaussian_blur(raw, w, h, grain_px);
  double mean = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < raw.size(); ++i)
    if (support.bits[i]) {
      mean += blurred[i];
      ++n;
    }
  mean = n > 0 ? mean / double(n) : 1.0;
  std::vector<double> gain(raw.size(), 0.0);
  for (std::size_t i = 0; i < raw.size(); ++i)
    if (support.bits[i]) gain[i] = blurred[i] / mean;
  return gain;
}

TraceField synthesize_speckle(const IntensityModel& m, double power_mw, double diameter_cm, double ambient_lux,
                              const RgbD& base_color, double px_per_cm, std::uint64_t rng_seed,
                              const SpeckleOptions& opts) {
  if (!(diameter_cm > 0.0) || !(px_per_cm > 0.0) || !(opts.grain_px > 0.0))
    throw invalid_argument("synthesize_speckle: diameter, scale and grain must be positive");
  const int min_side = trace_grid_side(diameter_cm, px_per_cm);
  const int side = opts.grid_side > 0 ? opts.grid_side : min_side;
  if (side < min_side) throw invalid_argument("synthesize_speckle: grid too small for the disk");

  TraceField t(side, side, px_per_cm);
  t.nominal_power_mw = power_mw;
  t.nominal_diameter_cm = diameter_cm;
  t.base_color = base_color;
  t.support = circular_mask(t.grid_center(), diameter_cm, px_per_cm, side, side);

  const auto level = intensity_offset(m, power_mw, diameter_cm, ambient_lux);

  const auto gain = speckle_gain(t.support, opts.grain_px, rng_seed);
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x) {
      if (!t.support.test(x, y)) continue;
      const double g = gain[std::size_t(y) * std::size_t(side) + std::size_t(x)];
      for (int c = 0; c < 3; ++c) t.at(x, y, c) = std::clamp(g * level[std::size_t(c)], -255.0, 255.0);
    }
  return t;
}

TraceLibrary synthesize_library(const IntensityModel& m, std::vector<double> power_levels,
                                std::vector<double> diameter_levels, double ambient_lux, const RgbD& base_color,
                                double px_per_cm, std::uint64_t seed, double grain_px) {
  TraceLibrary lib;
  lib.power_levels = std::move(power_levels);
  lib.diameter_levels = std::move(diameter_levels);
  if (lib.power_levels.empty() || lib.diameter_levels.empty()) throw invalid_argument("library levels are empty");
  const int side = trace_grid_side(*std::max_element(lib.diameter_levels.begin(), lib.diameter_levels.end()), px_per_cm);
  for (std::size_t d = 0; d < lib.diameter_levels.size(); ++d)
    for (double p : lib.power_levels)
      lib.entries.push_back(synthesize_speckle(m, p, lib.diameter_levels[d], ambient_lux, base_color, px_per_cm,
                                               derive_seed(seed, d), {grain_px, side}));
  lib.validate();
  return lib;
}

std::pair<int, int> trace_translation(const TraceField& t, Point center) {
  const Point c = t.support_centroid();
  return {int(round_half_up(center.x - c.x)), int(round_half_up(center.y - c.y))};
}

Mask placed_support(const TraceField& t, Point center, int width, int height) {
  const auto [dx, dy] = trace_translation(t, center);
  Mask m(width, height);
  for (int y = 0; y < t.height; ++y)
    for (int x = 0; x < t.width; ++x) {
      const int ix = x + dx, iy = y + dy;
      if (t.support.test(x, y) && ix >= 0 && iy >= 0 && ix < width && iy < height) m.put(ix, iy, true);
    }
  return m;
}

Raster apply_trace(const Raster& base, const TraceField& t, Point center) {
  if (std::abs(base.scale() - t.scale) > 1e-9 * base.scale())
    throw invalid_argument("apply_trace: image and trace scales differ");
  const auto [dx, dy] = trace_translation(t, center);
  Raster out = base;
  std::size_t placed = 0;
  for (int y = 0; y < t.height; ++y)
    for (int x = 0; x < t.width; ++x) {
      if (!t.support.test(x, y)) continue;
      const int ix = x + dx, iy = y + dy;
      if (!base.in_bounds(ix, iy)) continue;
      ++placed;
      for (int c = 0; c < 3; ++c) out.set_channel(ix, iy, c, to_u8(base.channel(ix, iy, c) + t.at(x, y, c)));
    }
  if (placed == 0) throw invalid_argument("apply_trace: trace support lies entirely outside the image");
  return out;
}

double saturation_fraction(const Raster& img, const Mask& support) {
  if (support.width != img.width() || support.height != img.height())
    throw invalid_argument("saturation_fraction: mask does not match the image");
  std::size_t total = 0, saturated = 0;
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      if (!support.test(x, y)) continue;
      ++total;
      const Rgb8 p = img.at(x, y);
      if (p.r == 255 || p.g == 255 || p.b == 255) ++saturated;
    }
  if (total == 0) throw invalid_argument("saturation_fraction: empty mask");
  return double(saturated) / double(total);
}

TraceField rescale_for_ambient(const TraceField& t, const IntensityModel& m, double from_lux, double to_lux) {
  if (from_lux == to_lux) return t;
  const double d = t.nominal_diameter_cm > 0.0 ? t.nominal_diameter_cm : m.ref_diameter_cm;
  const auto src = intensity_offset(m, std::max(0.0, t.nominal_power_mw), d, from_lux);
  const auto dst = intensity_offset(m, std::max(0.0, t.nominal_power_mw), d, to_lux);
  TraceField out = t;
  for (int c = 0; c < 3; ++c) {
    const double f = src[std::size_t(c)] > 0.0 ? dst[std::size_t(c)] / src[std::size_t(c)] : 0.0;
    for (std::size_t i = std::size_t(c); i < out.offsets.size(); i += 3)
      out.offsets[i] = std::clamp(out.offsets[i] * f, -255.0, 255.0);
  }
  return out;
}

TraceBuilder::TraceBuilder(const TraceLibrary& lib, IntensityModel model, double library_lux, double color_transfer_k)
    : lib_(&lib), model_(model), library_lux_(library_lux), color_k_(color_transfer_k) {
  lib.validate();
}

TraceField TraceBuilder::build(double diameter_cm, double power_mw) const {
  const auto& dl = lib_->diameter_levels;
  constexpr double eps = 1e-9;
  if (!(diameter_cm >= dl.front() - eps && diameter_cm <= dl.back() + eps))
    throw infeasible("diameter outside the trace library range");
  if (dl.size() == 1) return interpolate_power(*lib_, 0, power_mw);
  std::size_t i = std::size_t(std::upper_bound(dl.begin(), dl.end(), diameter_cm) - dl.begin());
  i = std::clamp<std::size_t>(i, 1, dl.size() - 1) - 1;
  const TraceField lo = interpolate_power(*lib_, i, power_mw);
  const TraceField hi = interpolate_power(*lib_, i + 1, power_mw);
  return interpolate_diameter(lo, hi, std::clamp(diameter_cm, dl[i], dl[i + 1]));
}

TraceField TraceBuilder::build(double diameter_cm, double power_mw, double ambient_lux, const RgbD& target_base) const {
  TraceField t = build(diameter_cm, power_mw);
  if (ambient_lux != library_lux_) t = rescale_for_ambient(t, model_, library_lux_, ambient_lux);
  if (target_base != t.base_color) t = adjust_trace_color(t, target_base, color_k_);
  return t;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

constexpr char kTraceMagic[5] = {'I', 'L', 'R', 'T', '1'};

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4] = {};
  in.read(reinterpret_cast<char*>(b), 4);
  return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 | std::uint32_t(b[3]) << 24;
}

}  // namespace

void write_trace_file(const TraceField& t, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot write " + path.string());
  out.write(kTraceMagic, 5);
  put_u32(out, std::uint32_t(t.width));
  put_u32(out, std::uint32_t(t.height));
  for (double v : t.offsets) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  out.write(reinterpret_cast<const char*>(t.support.bits.data()), std::streamsize(t.support.bits.size()));
  if (!out) throw io_error("write failed for " + path.string());
}

TraceField read_trace_file(const std::filesystem::path& path, double px_per_cm) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path.string());
  char magic[5] = {};
  in.read(magic, 5);
  if (!in || std::memcmp(magic, kTraceMagic, 5) != 0) throw io_error("bad trace magic in " + path.string());
  const std::uint32_t w = get_u32(in), h = get_u32(in);
  if (!in || w == 0 || h == 0 || w > 100000 || h > 100000) throw io_error("bad trace header in " + path.string());
  TraceField t(int(w), int(h), px_per_cm);
  for (auto& v : t.offsets) v = std::bit_cast<float>(get_u32(in));
  in.read(reinterpret_cast<char*>(t.support.bits.data()), std::streamsize(t.support.bits.size()));
  if (!in) throw io_error("truncated trace file " + path.string());
  for (auto& b : t.support.bits) b = b ? 1 : 0;
  return t;
}

void save_library(const TraceLibrary& lib, const std::filesystem::path& dir) {
  lib.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw io_error("cannot create " + dir.string());
  nlohmann::json manifest;
  manifest["format"] = "ILRT1";
  manifest["scale"] = lib.scale();
  const RgbD bc = lib.base_color();
  manifest["base_color"] = {bc[0], bc[1], bc[2]};
  manifest["power_levels"] = lib.power_levels;
  manifest["diameter_levels"] = lib.diameter_levels;
  nlohmann::json entries = nlohmann::json::array();
  for (std::size_t d = 0; d < lib.diameter_levels.size(); ++d)
    for (std::size_t p = 0; p < lib.power_levels.size(); ++p) {
      char name[64];
      std::snprintf(name, sizeof name, "trace_d%02zu_p%02zu.ilrt", d, p);
      const TraceField& e = lib.entry(d, p);
      write_trace_file(e, dir / name);
      entries.push_back({{"diameter_index", d},
                         {"power_index", p},
                         {"file", name},
                         {"nominal_power_mw", e.nominal_power_mw},
                         {"nominal_diameter_cm", e.nominal_diameter_cm}});
    }
  manifest["entries"] = entries;
  std::ofstream out(dir / "library.json", std::ios::trunc);
  if (!out) throw io_error("cannot write library manifest in " + dir.string());
  out << manifest.dump(2) << "\n";
}

TraceLibrary load_library(const std::filesystem::path& dir) {
  std::ifstream in(dir / "library.json");
  if (!in) throw io_error("no library.json in " + dir.string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw io_error("malformed library manifest: " + std::string(e.what()));
  }
  TraceLibrary lib;
  try {
    const double scale = manifest.at("scale").get<double>();
    const auto bc = manifest.at("base_color").get<std::vector<double>>();
    if (bc.size() != 3) throw io_error("library base_color must have 3 entries");
    lib.power_levels = manifest.at("power_levels").get<std::vector<double>>();
    lib.diameter_levels = manifest.at("diameter_levels").get<std::vector<double>>();
    lib.entries.resize(lib.power_levels.size() * lib.diameter_levels.size());
    std::vector<bool> seen(lib.entries.size(), false);
    for (const auto& e : manifest.at("entries")) {
      const auto d = e.at("diameter_index").get<std::size_t>();
      const auto p = e.at("power_index").get<std::size_t>();
      if (d >= lib.diameter_levels.size() || p >= lib.power_levels.size()) throw io_error("library entry index out of range");
      TraceField t = read_trace_file(dir / e.at("file").get<std::string>(), scale);
      t.nominal_power_mw = e.at("nominal_power_mw").get<double>();
      t.nominal_diameter_cm = e.at("nominal_diameter_cm").get<double>();
      t.base_color = {bc[0], bc[1], bc[2]};
      const std::size_t k = d * lib.power_levels.size() + p;
      lib.entries[k] = std::move(t);
      seen[k] = true;
    }
    if (std::find(seen.begin(), seen.end(), false) != seen.end()) throw io_error("library grid has missing entries");
  } catch (const nlohmann::json::exception& e) {
    throw io_error("malformed library manifest: " + std::string(e.what()));
  }
  lib.validate();
  return lib;
}

}  // namespace ilr
