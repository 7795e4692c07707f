#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "ilr/imaging.hpp"
#include "ilr/physics.hpp"

namespace ilr {

/// Signed per-pixel RGB offsets of a reflected speckle pattern over a small
/// grid, zero outside the circular support.
struct TraceField {
  int width = 0;
  int height = 0;
  std::vector<double> offsets;  // width * height * 3, interleaved
  Mask support;
  double nominal_power_mw = 0.0;
  double nominal_diameter_cm = 0.0;
  RgbD base_color{};
  double scale = kDefaultPxPerCm;

  TraceField() = default;
  TraceField(int w, int h, double px_per_cm);

  double& at(int x, int y, int c) { return offsets[(std::size_t(y) * std::size_t(width) + std::size_t(x)) * 3 + std::size_t(c)]; }
  double at(int x, int y, int c) const {
    return offsets[(std::size_t(y) * std::size_t(width) + std::size_t(x)) * 3 + std::size_t(c)];
  }
  Point grid_center() const { return {(width - 1) * 0.5, (height - 1) * 0.5}; }
  /// Mean position of the support pixels.
  Point support_centroid() const;
  /// Checks the invariants; throws on violation.
  void validate() const;
};

/// Grid of traces indexed by (diameter level, power level).
struct TraceLibrary {
  std::vector<double> power_levels;
  std::vector<double> diameter_levels;
  std::vector<TraceField> entries;  // diameter-major: entries[d * P + p]

  const TraceField& entry(std::size_t diameter_index, std::size_t power_index) const {
    return entries[diameter_index * power_levels.size() + power_index];
  }
  double scale() const { return entries.front().scale; }
  RgbD base_color() const { return entries.front().base_color; }
  void validate() const;
};

/// Side length of the square grid holding a disk of the given diameter.
int trace_grid_side(double diameter_cm, double px_per_cm);

TraceField extract_trace(std::span<const Raster> benign_frames, std::span<const Raster> attack_frames, Point center,
                         double diameter_cm);

/// Re-targets a trace measured on one sign color to another:
/// new_offset_c = offset_c + k * (base_c - target_c), clamped to [-255, 255].
TraceField adjust_trace_color(const TraceField& t, const RgbD& target_base_color, double transfer_k);

/// Pixel-wise natural cubic spline across the power levels of one diameter column.
TraceField interpolate_power(const TraceLibrary& lib, std::size_t diameter_index, double power_mw);

/// Weighted blend between two traces after rescaling both disks to diameter_cm.
TraceField interpolate_diameter(const TraceField& lo, const TraceField& hi, double diameter_cm);

struct SpeckleOptions {
  double grain_px = 1.0;
  /// Grid side in pixels; 0 picks the smallest grid holding the disk.
  int grid_side = 0;
};

/// Exponential speckle intensity blurred over the grain, normalized to mean 1
/// on the support and zero elsewhere. Row-major over the mask grid.
std::vector<double> speckle_gain(const Mask& support, double grain_px, std::uint64_t rng_seed);

TraceField synthesize_speckle(const IntensityModel& m, double power_mw, double diameter_cm, double ambient_lux,
                              const RgbD& base_color, double px_per_cm, std::uint64_t rng_seed,
                              const SpeckleOptions& opts = {});

/// Speckle library on a regular (diameter, power) grid. The speckle pattern
/// is shared along a diameter column so only the intensity varies with power.
TraceLibrary synthesize_library(const IntensityModel& m, std::vector<double> power_levels,
                                std::vector<double> diameter_levels, double ambient_lux, const RgbD& base_color,
                                double px_per_cm, std::uint64_t seed, double grain_px = 1.0);

/// Integer translation that moves the support centroid onto center.
std::pair<int, int> trace_translation(const TraceField& t, Point center);

/// The trace support translated onto an image grid.
Mask placed_support(const TraceField& t, Point center, int width, int height);

Raster apply_trace(const Raster& base, const TraceField& t, Point center);

double saturation_fraction(const Raster& img, const Mask& support);

/// Scales each channel by target/source offset ratio of the physics model,
/// re-expressing a trace captured at one ambient level at another.
TraceField rescale_for_ambient(const TraceField& t, const IntensityModel& m, double from_lux, double to_lux);

/// Builds T(D, P): power spline within the two bracketing diameter columns,
/// then the diameter blend. Optional color re-targeting and ambient rescale.
class TraceBuilder {
 public:
  TraceBuilder(const TraceLibrary& lib, IntensityModel model, double library_lux, double color_transfer_k = 0.6);

  TraceField build(double diameter_cm, double power_mw) const;
  TraceField build(double diameter_cm, double power_mw, double ambient_lux, const RgbD& target_base) const;

  const TraceLibrary& library() const { return *lib_; }
  const IntensityModel& model() const { return model_; }
  double library_lux() const { return library_lux_; }

 private:
  const TraceLibrary* lib_;
  IntensityModel model_;
  double library_lux_;
  double color_k_;
};

void save_library(const TraceLibrary& lib, const std::filesystem::path& dir);
TraceLibrary load_library(const std::filesystem::path& dir);

void write_trace_file(const TraceField& t, const std::filesystem::path& path);
/// Reads offsets and support; nominal values and base color come from the manifest.
TraceField read_trace_file(const std::filesystem::path& path, double px_per_cm);

}  // namespace ilr
