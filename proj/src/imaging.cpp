#include "ilr/imaging.hpp"

#include <png.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

namespace ilr {

Raster::Raster(int width, int height, double px_per_cm, Rgb8 fill) : width_(width), height_(height), scale_(px_per_cm) {
  if (width <= 0 || height <= 0) throw invalid_argument("raster dimensions must be positive");
  if (!(px_per_cm > 0.0)) throw invalid_argument("raster scale must be positive");
  data_.resize(pixel_count() * 3);
  for (std::size_t i = 0; i < pixel_count(); ++i) {
    data_[3 * i] = fill.r;
    data_[3 * i + 1] = fill.g;
    data_[3 * i + 2] = fill.b;
  }
}

Raster::Raster(int width, int height, double px_per_cm, std::vector<std::uint8_t> interleaved)
    : width_(width), height_(height), scale_(px_per_cm), data_(std::move(interleaved)) {
  if (width <= 0 || height <= 0) throw invalid_argument("raster dimensions must be positive");
  if (!(px_per_cm > 0.0)) throw invalid_argument("raster scale must be positive");
  if (data_.size() != pixel_count() * 3) throw invalid_argument("pixel buffer does not match width x height");
}

std::size_t Mask::count() const { return std::size_t(std::count(bits.begin(), bits.end(), std::uint8_t{1})); }

void AffinePhotometricTransform::validate() const {
  if (!(brightness > 0.0)) throw invalid_argument("brightness must be positive");
  if (!(noise_sigma >= 0.0)) throw invalid_argument("noise_sigma must be non-negative");
  if (scale_x == 0.0 || scale_y == 0.0) throw invalid_argument("scale factors must be non-zero");
}

std::array<double, 4> linear_part(const AffinePhotometricTransform& t) {
  const double th = t.rotation_deg * std::numbers::pi / 180.0;
  const double c = std::cos(th), s = std::sin(th);
  // R * [[1, shear], [0, 1]] * diag(sx, sy)
  const double a00 = c * t.scale_x;
  const double a01 = (c * t.shear - s) * t.scale_y;
  const double a10 = s * t.scale_x;
  const double a11 = (s * t.shear + c) * t.scale_y;
  return {a00, a01, a10, a11};
}

Point transform_point(const AffinePhotometricTransform& t, Point p, int width, int height) {
  const auto a = linear_part(t);
  const double cx = (width - 1) * 0.5, cy = (height - 1) * 0.5;
  const double dx = p.x - cx, dy = p.y - cy;
  return {a[0] * dx + a[1] * dy + cx + t.translate_x, a[2] * dx + a[3] * dy + cy + t.translate_y};
}

// ---------------------------------------------------------------------------
// File I/O

std::filesystem::path sidecar_path(const std::filesystem::path& image_path) {
  auto p = image_path;
  p += ".meta";
  return p;
}

namespace {

double read_sidecar_scale(const std::filesystem::path& image_path) {
  std::ifstream in(sidecar_path(image_path));
  if (!in) return kDefaultPxPerCm;
  std::string line;
  while (std::getline(in, line)) {
    constexpr std::string_view key = "px_per_cm=";
    if (line.rfind(key, 0) == 0) {
      try {
        const double v = std::stod(line.substr(key.size()));
        if (v > 0.0) return v;
      } catch (const std::exception&) {
      }
      throw io_error("malformed scale sidecar for " + image_path.string());
    }
  }
  return kDefaultPxPerCm;
}

void write_sidecar_scale(const std::filesystem::path& image_path, double scale) {
  std::ofstream out(sidecar_path(image_path), std::ios::trunc);
  if (!out) throw io_error("cannot write " + sidecar_path(image_path).string());
  std::ostringstream s;
  s.precision(17);
  s << "px_per_cm=" << scale << "\n";
  out << s.str();
  if (!out) throw io_error("cannot write " + sidecar_path(image_path).string());
}

bool has_extension(const std::filesystem::path& p, std::string_view ext) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return char(std::tolower(c)); });
  return e == ext;
}

// Reads the next whitespace-delimited PPM header token, skipping comments.
std::string ppm_token(std::istream& in) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(char(ch));
  }
  return tok;
}

Raster load_ppm(const std::filesystem::path& path, double scale) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path.string());
  const std::string magic = ppm_token(in);
  if (magic != "P6") throw io_error("unsupported PPM variant in " + path.string() + " (only binary P6)");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(ppm_token(in));
    h = std::stoi(ppm_token(in));
    maxval = std::stoi(ppm_token(in));
  } catch (const std::exception&) {
    throw io_error("malformed PPM header in " + path.string());
  }
  if (w <= 0 || h <= 0) throw io_error("bad PPM dimensions in " + path.string());
  if (maxval != 255) throw io_error("non-8-bit PPM content in " + path.string());
  std::vector<std::uint8_t> data(std::size_t(w) * std::size_t(h) * 3);
  in.read(reinterpret_cast<char*>(data.data()), std::streamsize(data.size()));
  if (in.gcount() != std::streamsize(data.size())) throw io_error("truncated PPM " + path.string());
  return Raster(w, h, scale, std::move(data));
}

void save_ppm(const Raster& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot write " + path.string());
  out << "P6\n" << img.width() << " " << img.height() << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.bytes().data()), std::streamsize(img.bytes().size()));
  if (!out) throw io_error("write failed for " + path.string());
}

Raster load_png(const std::filesystem::path& path, double scale) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str()))
    throw io_error("cannot read PNG " + path.string() + ": " + image.message);
  const bool rgb = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  const bool alpha = (image.format & PNG_FORMAT_FLAG_ALPHA) != 0;
  const bool linear = (image.format & PNG_FORMAT_FLAG_LINEAR) != 0;
  if (!rgb || alpha || linear) {
    png_image_free(&image);
    throw io_error("non-RGB PNG content in " + path.string());
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> data(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, data.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw io_error("PNG decode failed for " + path.string() + ": " + msg);
  }
  return Raster(int(image.width), int(image.height), scale, std::move(data));
}

void save_png(const Raster& img, const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = png_uint_32(img.width());
  image.height = png_uint_32(img.height());
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, img.bytes().data(), 0, nullptr))
    throw io_error("PNG write failed for " + path.string() + ": " + image.message);
}

}  // namespace

Raster load_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw io_error("no such image: " + path.string());
  const double scale = read_sidecar_scale(path);
  if (has_extension(path, ".png")) return load_png(path, scale);
  if (has_extension(path, ".ppm")) return load_ppm(path, scale);
  throw io_error("unsupported image format: " + path.string());
}

void save_image(const Raster& img, const std::filesystem::path& path) {
  if (path.has_parent_path() && !std::filesystem::is_directory(path.parent_path()))
    throw io_error("destination directory does not exist: " + path.parent_path().string());
  if (has_extension(path, ".png"))
    save_png(img, path);
  else if (has_extension(path, ".ppm"))
    save_ppm(img, path);
  else
    throw io_error("unsupported image format: " + path.string());
  write_sidecar_scale(path, img.scale());
}

// ---------------------------------------------------------------------------
// Transforms

double sample_bilinear(const Raster& img, double x, double y, int c) {
  const int w = img.width(), h = img.height();
  x = std::clamp(x, 0.0, double(w - 1));
  y = std::clamp(y, 0.0, double(h - 1));
  const int x0 = int(std::floor(x)), y0 = int(std::floor(y));
  const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
  const double fx = x - x0, fy = y - y0;
  const double top = img.channel(x0, y0, c) * (1.0 - fx) + img.channel(x1, y0, c) * fx;
  const double bot = img.channel(x0, y1, c) * (1.0 - fx) + img.channel(x1, y1, c) * fx;
  return top * (1.0 - fy) + bot * fy;
}

namespace {

// Standard normal draw keyed by (seed, pixel, channel), so any sub-region of
// a transformed image matches the same region of the full transform.
double pixel_noise(std::uint64_t seed, int x, int y, int c) {
  const std::uint64_t h = derive_seed(seed, (std::uint64_t(std::uint32_t(y)) << 32) | std::uint32_t(x), std::uint64_t(c));
  const double u1 = (double(h >> 11) + 0.5) * 0x1.0p-53;
  const double u2 = double(mix_seed(h) >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

class PixelTransformer {
 public:
  PixelTransformer(const Raster& img, const AffinePhotometricTransform& t, std::uint64_t seed)
      : img_(img), t_(t), seed_(seed), identity_(t.geometric_identity()) {
    t.validate();
    const auto a = linear_part(t);
    const double det = a[0] * a[3] - a[1] * a[2];
    i00_ = a[3] / det;
    i01_ = -a[1] / det;
    i10_ = -a[2] / det;
    i11_ = a[0] / det;
    cx_ = (img.width() - 1) * 0.5;
    cy_ = (img.height() - 1) * 0.5;
  }

  // Output pixel (x, y) in full-image coordinates.
  std::array<std::uint8_t, 3> operator()(int x, int y) const {
    double sx = x, sy = y;
    if (!identity_) {
      const double dx = x - cx_ - t_.translate_x, dy = y - cy_ - t_.translate_y;
      sx = i00_ * dx + i01_ * dy + cx_;
      sy = i10_ * dx + i11_ * dy + cy_;
    }
    const bool inside = x >= 0 && y >= 0 && x < img_.width() && y < img_.height();
    std::array<std::uint8_t, 3> v{};
    for (int c = 0; c < 3; ++c) {
      double s = identity_ && inside ? double(img_.channel(x, y, c)) : sample_bilinear(img_, sx, sy, c);
      s *= t_.brightness;
      if (t_.noise_sigma > 0.0) s += t_.noise_sigma * pixel_noise(seed_, x, y, c);
      v[std::size_t(c)] = to_u8(s);
    }
    return v;
  }

 private:
  const Raster& img_;
  AffinePhotometricTransform t_;
  std::uint64_t seed_;
  bool identity_;
  double i00_ = 1, i01_ = 0, i10_ = 0, i11_ = 1, cx_ = 0, cy_ = 0;
};

}  // namespace

Raster apply_transform(const Raster& img, const AffinePhotometricTransform& t, std::uint64_t rng_seed) {
  return apply_transform(img, t, rng_seed, Box{0, 0, img.width(), img.height()});
}

Raster apply_transform(const Raster& img, const AffinePhotometricTransform& t, std::uint64_t rng_seed,
                       const Box& region) {
  if (region.empty()) throw invalid_argument("apply_transform: empty output region");
  const PixelTransformer px(img, t, rng_seed);
  Raster out(region.w, region.h, img.scale());
  for (int oy = 0; oy < region.h; ++oy)
    for (int ox = 0; ox < region.w; ++ox) {
      const auto v = px(region.x + ox, region.y + oy);
      out.set(ox, oy, {v[0], v[1], v[2]});
    }
  return out;
}

Raster apply_transform_resized(const Raster& img, const AffinePhotometricTransform& t, std::uint64_t rng_seed,
                               const Box& region, int width, int height) {
  if (region.empty()) throw invalid_argument("apply_transform: empty output region");
  if (width <= 0 || height <= 0) throw invalid_argument("apply_transform: empty output size");
  if (width == region.w && height == region.h) return apply_transform(img, t, rng_seed, region);
  const PixelTransformer px(img, t, rng_seed);
  const double fx = double(region.w) / width, fy = double(region.h) / height;
  Raster out(width, height, img.scale() / fx);
  for (int y = 0; y < height; ++y) {
    const double sy = std::clamp((y + 0.5) * fy - 0.5, 0.0, double(region.h - 1));
    const int y0 = int(std::floor(sy)), y1 = std::min(y0 + 1, region.h - 1);
    const double wy = sy - y0;
    for (int x = 0; x < width; ++x) {
      const double sx = std::clamp((x + 0.5) * fx - 0.5, 0.0, double(region.w - 1));
      const int x0 = int(std::floor(sx)), x1 = std::min(x0 + 1, region.w - 1);
      const double wx = sx - x0;
      const auto p00 = px(region.x + x0, region.y + y0), p10 = px(region.x + x1, region.y + y0);
      const auto p01 = px(region.x + x0, region.y + y1), p11 = px(region.x + x1, region.y + y1);
      for (std::size_t c = 0; c < 3; ++c) {
        const double top = p00[c] * (1.0 - wx) + p10[c] * wx;
        const double bot = p01[c] * (1.0 - wx) + p11[c] * wx;
        out.set_channel(x, y, int(c), to_u8(top * (1.0 - wy) + bot * wy));
      }
    }
  }
  return out;
}

Raster average_frames(std::span<const Raster> frames) {
  if (frames.empty()) throw invalid_argument("average_frames: empty frame sequence");
  const Raster& first = frames.front();
  for (const auto& f : frames)
    if (f.width() != first.width() || f.height() != first.height())
      throw invalid_argument("average_frames: dimension mismatch");
  const std::size_t n = frames.size();
  std::vector<std::uint32_t> sum(first.bytes().size(), 0);
  for (const auto& f : frames) {
    const auto b = f.bytes();
    for (std::size_t i = 0; i < b.size(); ++i) sum[i] += b[i];
  }
  std::vector<std::uint8_t> out(sum.size());
  // Integer half-up rounding of sum / n.
  for (std::size_t i = 0; i < sum.size(); ++i) out[i] = std::uint8_t((2 * sum[i] + n) / (2 * n));
  return Raster(first.width(), first.height(), first.scale(), std::move(out));
}

Mask circular_mask(Point center, double diameter_cm, double px_per_cm, int width, int height) {
  if (!(diameter_cm > 0.0)) throw invalid_argument("circular_mask: diameter must be positive");
  Mask m(width, height);
  const double r = diameter_cm * px_per_cm * 0.5;
  const double r2 = r * r;
  const int y0 = std::max(0, int(std::floor(center.y - r))), y1 = std::min(height - 1, int(std::ceil(center.y + r)));
  const int x0 = std::max(0, int(std::floor(center.x - r))), x1 = std::min(width - 1, int(std::ceil(center.x + r)));
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const double dx = x - center.x, dy = y - center.y;
      if (dx * dx + dy * dy <= r2) m.put(x, y, true);
    }
  return m;
}

Raster crop(const Raster& img, const Box& box) {
  const int x0 = std::max(0, box.x), y0 = std::max(0, box.y);
  const int x1 = std::min(img.width(), box.x + box.w), y1 = std::min(img.height(), box.y + box.h);
  if (x1 <= x0 || y1 <= y0) throw invalid_argument("crop: box does not intersect the image");
  Raster out(x1 - x0, y1 - y0, img.scale());
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) out.set(x - x0, y - y0, img.at(x, y));
  return out;
}

Raster resize_bilinear(const Raster& img, int width, int height) {
  if (width == img.width() && height == img.height()) return img;
  const double fx = double(img.width()) / width, fy = double(img.height()) / height;
  Raster out(width, height, img.scale() / fx);
  for (int y = 0; y < height; ++y) {
    const double sy = (y + 0.5) * fy - 0.5;
    for (int x = 0; x < width; ++x) {
      const double sx = (x + 0.5) * fx - 0.5;
      for (int c = 0; c < 3; ++c) out.set_channel(x, y, c, to_u8(sample_bilinear(img, sx, sy, c)));
    }
  }
  return out;
}

std::vector<float> channel_plane(const Raster& img, int c) {
  std::vector<float> p(img.pixel_count());
  const auto b = img.bytes();
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = b[3 * i + std::size_t(c)];
  return p;
}

std::vector<float> gaussian_blur(std::span<const float> plane, int width, int height, double sigma, int radius) {
  if (!(sigma > 0.0)) throw invalid_argument("gaussian_blur: sigma must be positive");
  if (radius <= 0) radius = int(std::ceil(3.0 * sigma));
  std::vector<double> k(std::size_t(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[std::size_t(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[std::size_t(i + radius)];
  }
  for (auto& v : k) v /= sum;

  std::vector<float> tmp(plane.size()), out(plane.size());
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const int xx = std::clamp(x + i, 0, width - 1);
        acc += k[std::size_t(i + radius)] * plane[std::size_t(y) * width + xx];
      }
      tmp[std::size_t(y) * width + x] = float(acc);
    }
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const int yy = std::clamp(y + i, 0, height - 1);
        acc += k[std::size_t(i + radius)] * tmp[std::size_t(yy) * width + x];
      }
      out[std::size_t(y) * width + x] = float(acc);
    }
  return out;
}

}  // namespace ilr
