#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include "ilr/common.hpp"

namespace ilr {

struct BeamGeometry {
  double power_mw = 0.0;
  double divergence_deg = 0.75;
  double distance_m = 3.0;
  double wavelength_nm = 780.0;

  void validate() const;
};

/// Optical power reaching the sign surface, P_a * tan^2(theta) / (4 pi).
/// The emitter distance cancels out of the expression.
double beam_power_at_sign(const BeamGeometry& g);

/// Maximum permissible exposure for a continuous beam, t > 10 s, in mW/cm^2.
/// Valid for 700..1050 nm; anything else throws.
double mpe(double wavelength_nm);

struct SafetyReport {
  double irradiance_mw_cm2 = 0.0;
  double mpe_mw_cm2 = 0.0;
  double mpe_ratio = 0.0;
  double min_safe_diameter_cm = 0.0;
  /// min_safe_diameter_cm / pattern diameter.
  double diameter_scale_factor = 0.0;
};

SafetyReport safety_check(double power_mw, double pattern_diameter_cm, double wavelength_nm);

/// Channel-wise 8-bit intensity offset produced by the reflected pattern:
///
///   offset_c = gain_c * ln(1 + P / knee)
///              - size_slope * (D - ref_diameter)
///              + ambient_rate * (ln L - ln ref_ambient)
///
/// floored at zero. The ambient rate is per natural-log lux.
/// Defaults: fit on the 100 lux rows of synthetic_calibration_set(
/// calibration_ground_truth(), 2.0, 0), ambient rate held at -40.1.
struct IntensityModel {
  std::array<double, 3> gain{27.6344, 25.6600, 61.3309};
  double power_knee_mw = 9.7416;
  double size_slope = 1.1181;
  double ref_diameter_cm = 3.5;
  double ambient_rate = -40.1;
  double ref_ambient_lux = 100.0;

  void validate() const;
};

std::array<double, 3> intensity_offset(const IntensityModel& m, double power_mw, double diameter_cm,
                                       double ambient_lux);

/// Smallest power whose strongest channel rounds to a nonzero 8-bit offset.
double min_visible_power(const IntensityModel& m, double diameter_cm, double ambient_lux);

struct CalibrationSample {
  double power_mw = 0.0;
  double diameter_cm = 0.0;
  double ambient_lux = 0.0;
  std::array<double, 3> offset{};
};

struct FitResult {
  IntensityModel model;
  double residual_rms = 0.0;
  std::size_t observations_used = 0;
};

/// Least-squares fit of gains, knee, size slope and ambient rate. The
/// reference diameter and reference ambient level are taken from `reference`.
/// Channel observations that sit on the zero floor are excluded. When the
/// samples hold a single ambient level the ambient rate is kept from
/// `reference`.
FitResult fit_intensity_model(const std::vector<CalibrationSample>& samples, const IntensityModel& reference = {});

/// Noisy samples drawn from `truth` on the standard power/diameter/ambient grid.
std::vector<CalibrationSample> synthetic_calibration_set(const IntensityModel& truth, double noise_sigma,
                                                         std::uint64_t seed);

/// Ground truth used to produce the shipped default calibration.
IntensityModel calibration_ground_truth();

std::vector<CalibrationSample> read_calibration_csv(const std::filesystem::path& path);
void write_calibration_csv(const std::vector<CalibrationSample>& samples, const std::filesystem::path& path);

}  // namespace ilr
