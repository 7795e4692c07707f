#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ilr/common.hpp"

namespace ilr {

inline constexpr double kDefaultPxPerCm = 4.0;

struct Rgb8 {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb8&, const Rgb8&) = default;
};

using RgbD = std::array<double, 3>;

inline RgbD to_rgbd(Rgb8 c) { return {double(c.r), double(c.g), double(c.b)}; }

/// 8-bit RGB image with a physical scale in pixels per centimeter.
/// Pixels are stored interleaved, row-major.
class Raster {
 public:
  Raster() = default;
  Raster(int width, int height, double px_per_cm = kDefaultPxPerCm, Rgb8 fill = {});
  Raster(int width, int height, double px_per_cm, std::vector<std::uint8_t> interleaved);

  int width() const { return width_; }
  int height() const { return height_; }
  double scale() const { return scale_; }
  std::size_t pixel_count() const { return std::size_t(width_) * std::size_t(height_); }

  Rgb8 at(int x, int y) const {
    const std::uint8_t* p = &data_[index(x, y)];
    return {p[0], p[1], p[2]};
  }
  std::uint8_t channel(int x, int y, int c) const { return data_[index(x, y) + std::size_t(c)]; }
  void set(int x, int y, Rgb8 v) {
    std::uint8_t* p = &data_[index(x, y)];
    p[0] = v.r;
    p[1] = v.g;
    p[2] = v.b;
  }
  void set_channel(int x, int y, int c, std::uint8_t v) { data_[index(x, y) + std::size_t(c)] = v; }

  std::span<const std::uint8_t> bytes() const { return data_; }
  std::span<std::uint8_t> bytes() { return data_; }

  bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  friend bool operator==(const Raster& a, const Raster& b) {
    return a.width_ == b.width_ && a.height_ == b.height_ && a.scale_ == b.scale_ && a.data_ == b.data_;
  }

 private:
  std::size_t index(int x, int y) const { return (std::size_t(y) * std::size_t(width_) + std::size_t(x)) * 3; }

  int width_ = 0;
  int height_ = 0;
  double scale_ = kDefaultPxPerCm;
  std::vector<std::uint8_t> data_;
};

/// Binary mask over a width x height grid.
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  Mask() = default;
  Mask(int w, int h) : width(w), height(h), bits(std::size_t(w) * std::size_t(h), 0) {}

  bool test(int x, int y) const { return bits[std::size_t(y) * std::size_t(width) + std::size_t(x)] != 0; }
  void put(int x, int y, bool v) { bits[std::size_t(y) * std::size_t(width) + std::size_t(x)] = v ? 1 : 0; }
  std::size_t count() const;
  friend bool operator==(const Mask&, const Mask&) = default;
};

/// Geometric part (about the image center) followed by a photometric part.
struct AffinePhotometricTransform {
  double rotation_deg = 0.0;
  double shear = 0.0;
  double scale_x = 1.0;
  double scale_y = 1.0;
  double translate_x = 0.0;
  double translate_y = 0.0;
  double brightness = 1.0;
  double noise_sigma = 0.0;

  bool geometric_identity() const {
    return rotation_deg == 0.0 && shear == 0.0 && scale_x == 1.0 && scale_y == 1.0 && translate_x == 0.0 &&
           translate_y == 0.0;
  }
  void validate() const;
};

/// Forward 2x2 linear part of the geometric transform: rotation * shear * scale.
std::array<double, 4> linear_part(const AffinePhotometricTransform& t);

/// Maps a point of the source image into the transformed image.
Point transform_point(const AffinePhotometricTransform& t, Point p, int width, int height);

Raster load_image(const std::filesystem::path& path);
void save_image(const Raster& img, const std::filesystem::path& path);
std::filesystem::path sidecar_path(const std::filesystem::path& image_path);

Raster apply_transform(const Raster& img, const AffinePhotometricTransform& t, std::uint64_t rng_seed);
/// Only the pixels of `region` (output coordinates, may extend past the
/// image) are produced; equals cropping the full transform. Noise is keyed
/// per pixel, so this holds with noise too.
Raster apply_transform(const Raster& img, const AffinePhotometricTransform& t, std::uint64_t rng_seed,
                       const Box& region);
/// resize_bilinear(apply_transform(img, t, seed, region), width, height),
/// computing only the pixels the resize reads.
Raster apply_transform_resized(const Raster& img, const AffinePhotometricTransform& t, std::uint64_t rng_seed,
                               const Box& region, int width, int height);

Raster average_frames(std::span<const Raster> frames);

/// Pixels whose centers lie within (diameter_cm * px_per_cm) / 2 of center.
Mask circular_mask(Point center, double diameter_cm, double px_per_cm, int width, int height);

/// Bilinear sample with edge replication.
double sample_bilinear(const Raster& img, double x, double y, int c);

Raster crop(const Raster& img, const Box& box);
Raster resize_bilinear(const Raster& img, int width, int height);

/// Single-channel float plane convolved with a normalized separable Gaussian
/// (edge replication). radius <= 0 selects ceil(3 sigma).
std::vector<float> gaussian_blur(std::span<const float> plane, int width, int height, double sigma, int radius = 0);

/// Channel plane c of an image as floats.
std::vector<float> channel_plane(const Raster& img, int c);

}  // namespace ilr
