#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ilr/optimize.hpp"

namespace ilr {

struct DeploymentConfig {
  int trials = 10;
  double deploy_noise_sigma = 2.0;
  /// Per-trial brightness factor drawn from U(1 - j, 1 + j).
  double deploy_brightness_jitter = 0.1;
  double ambient_lux = 100.0;
  /// Camera pose relative to the generation view.
  AffinePhotometricTransform view;
  RoiNoise roi_noise;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrialRecord {
  std::string predicted;
  std::string simulated;
  bool success = false;
  double true_confidence = 0.0;
};

struct EvalReport {
  std::vector<TrialRecord> trials;
  int successes = 0;
  int consistent = 0;
  /// False when the view moves the sign out of frame; the report is then empty.
  bool available = true;

  double asr() const { return trials.empty() ? 0.0 : double(successes) / double(trials.size()); }
  double scr() const { return trials.empty() ? 0.0 : double(consistent) / double(trials.size()); }
};

/// ROI under a camera view: the transformed ROI corners' bounds, or nullopt
/// when any sign vertex leaves the frame.
std::optional<Box> view_roi(const AttackScene& scene, const AffinePhotometricTransform& view);

EvalReport deploy_and_classify(const AttackScene& scene, const AttackParams& params, const TraceBuilder& builder,
                               Oracle& oracle, const DeploymentConfig& dep);

/// Uniform draw from the sign polygon inset by `margin_px` (rejection sampling).
Point sample_inset_uniform(const Polygon& polygon, double margin_px, std::mt19937_64& rng);

inline constexpr double kBaselineDiameterCm = 15.0;
inline constexpr double kBaselinePowerMw = 51.0;

/// Independent uniform placements of the fixed D = 15 cm, P = 51 mW trace.
/// Deployment noise per trial follows `dep`; dep.trials is ignored.
EvalReport random_baseline(const AttackScene& scene, const TraceBuilder& builder, Oracle& oracle, int trials,
                           std::uint64_t seed, const DeploymentConfig& dep = {});

/// Seed of sweep cell `index`.
std::uint64_t cell_seed(std::uint64_t master, std::size_t index);

/// Cells run on up to `threads` workers (0 = hardware concurrency); results
/// do not depend on the thread count.
std::vector<EvalReport> sweep_ambient(const AttackScene& scene, const AttackParams& params, const TraceBuilder& builder,
                                      Oracle& oracle, const std::vector<double>& lux_levels,
                                      const DeploymentConfig& dep, unsigned threads = 0);

struct PositionCell {
  /// Longitudinal scale (1 = generation distance, < 1 farther away).
  double scale = 1.0;
  /// Lateral offset as a fraction of the image width.
  double lateral = 0.0;
};

/// Camera pose for a position cell: uniform scale, horizontal foreshortening
/// and shear with a matching lateral translation.
AffinePhotometricTransform position_view(const PositionCell& cell, int image_width);

std::vector<EvalReport> sweep_positions(const AttackScene& scene, const AttackParams& params,
                                        const TraceBuilder& builder, Oracle& oracle,
                                        const std::vector<PositionCell>& grid, const DeploymentConfig& dep,
                                        unsigned threads = 0);

std::vector<EvalReport> sweep_roi_noise(const AttackScene& scene, const AttackParams& params,
                                        const TraceBuilder& builder, Oracle& oracle, const std::vector<double>& deltas,
                                        const DeploymentConfig& dep, unsigned threads = 0);

/// Scripted approach: frames move from `far_scale` to `near_scale` while the
/// lateral offset drifts from `lateral_start` to `lateral_end`.
std::vector<PositionCell> drive_sequence(int frames, double far_scale, double near_scale, double lateral_start,
                                         double lateral_end);

/// Successful frames over all available frames.
double frame_asr(const std::vector<EvalReport>& frames);

// CSV output. Fractions are written with 6 decimals.
void write_summary_csv(const EvalReport& r, const std::filesystem::path& path);
void write_trials_csv(const EvalReport& r, const std::filesystem::path& path);
/// `key_name,trials,successes,consistent,asr,scr`; unavailable cells get N/A.
void write_sweep_csv(const std::string& key_name, const std::vector<std::string>& keys,
                     const std::vector<EvalReport>& reports, const std::filesystem::path& path);
void write_position_csv(const std::vector<PositionCell>& grid, const std::vector<EvalReport>& reports,
                        const std::filesystem::path& path);

}  // namespace ilr
