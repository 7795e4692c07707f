#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ilr/common.hpp"
#include "ilr/imaging.hpp"
#include "ilr/oracle.hpp"
#include "ilr/trace.hpp"

namespace ilr {

// ---------------------------------------------------------------------------
// Tree-structured Parzen estimator over a box

struct TpeConfig {
  int budget = 300;
  int startup = 10;
  double gamma = 0.25;
  int candidates_per_step = 24;
  /// Lower bound on the kernel bandwidth, as a fraction of each dimension's range.
  double bandwidth_floor = 0.08;
  std::uint64_t seed = 0;

  void validate() const;
};

using TpeBounds = std::vector<std::pair<double, double>>;

struct TpeTrial {
  std::vector<double> x;
  double loss = 0.0;
};

/// Next point to evaluate. A pure function of (history, cfg, bounds): the
/// random stream is keyed by cfg.seed and the history length.
std::vector<double> tpe_suggest(const std::vector<TpeTrial>& history, const TpeConfig& cfg, const TpeBounds& bounds);

struct TpeResult {
  TpeTrial best;
  std::vector<TpeTrial> trajectory;
};

TpeResult tpe_minimize(const std::function<double(const std::vector<double>&)>& objective, const TpeBounds& bounds,
                       const TpeConfig& cfg);

// ---------------------------------------------------------------------------
// Attack problem

struct AttackParams {
  double diameter_cm = 0.0;
  double power_mw = 0.0;
  Point center;  // sign-image pixels
  double emitter_distance_m = 3.0;

  friend bool operator==(const AttackParams&, const AttackParams&) = default;
};

/// One sign scene: the benign image, the sign outline, the annotated ROI and
/// the ground-truth label.
struct AttackScene {
  Raster base;
  Polygon polygon;
  Box roi;
  std::string true_label;
  /// Sign face color the trace is re-targeted to.
  RgbD sign_color{};
  /// Ambient level at which the attack is generated.
  double ambient_lux = 100.0;
};

struct EoTConfig {
  int samples_per_eval = 8;
  double noise_sigma = 2.0;
  std::pair<double, double> brightness_range{0.8, 1.2};
  std::pair<double, double> rotation_range_deg{-5.0, 5.0};
  std::pair<double, double> shear_range{-0.05, 0.05};
  std::uint64_t seed = 0;

  void validate() const;
  /// One sample, identity ranges, no noise.
  static EoTConfig collapsed();
};

/// The k-th EoT transform; the same k always yields the same transform.
AffinePhotometricTransform eot_transform(const EoTConfig& eot, int k);

/// Trace T(D, P) for the scene, placed at the attack center.
Raster attacked_image(const AttackScene& scene, const AttackParams& params, const TraceBuilder& builder);
Raster attacked_image(const AttackScene& scene, const AttackParams& params, const TraceBuilder& builder,
                      double ambient_lux);

/// Mean true-label confidence over the EoT variants of the attacked image.
double eot_loss(const AttackScene& scene, const AttackParams& params, const TraceBuilder& builder, Oracle& oracle,
                const EoTConfig& eot);

/// True-label confidence on the unattacked scene.
double benign_confidence(const AttackScene& scene, Oracle& oracle);

/// Feasible search region for one scene and library.
struct AttackSpace {
  double diameter_lo = 0.0, diameter_hi = 0.0;
  double power_lo = 0.0, power_hi = 0.0;
  Polygon polygon;
  double px_per_cm = kDefaultPxPerCm;
  /// When set, power is held at this value and not searched.
  std::optional<double> pinned_power;

  /// True when the disk of the given diameter lies fully on the sign.
  bool feasible(const AttackParams& p, double tol_px = 1e-6) const;
};

/// Diameter range clipped to what the sign can hold; throws infeasible when
/// the sign is smaller than the smallest library diameter.
AttackSpace make_attack_space(const Polygon& polygon, const TraceLibrary& lib);

struct AttackTrial {
  AttackParams params;
  double loss = 0.0;       // eot_loss
  double objective = 0.0;  // loss plus resource penalty, what the search minimises
};

/// TPE suggestion in (D, P, x, y), or (D, x, y) with pinned power. The center
/// is projected onto the sign polygon inset by the disk radius.
AttackParams tpe_suggest(const std::vector<AttackTrial>& history, const TpeConfig& cfg, const AttackSpace& space);

struct OptimizeOptions {
  TpeConfig tpe;
  EoTConfig eot;
  /// Weight of the normalised diameter + power penalty added to the loss.
  double resource_weight = 0.0;
};

struct OptimizeResult {
  AttackParams best;
  double best_loss = 0.0;
  double best_objective = 0.0;
  double benign_loss = 0.0;
  std::vector<AttackTrial> trajectory;
  /// Top label of the collapsed-EoT attacked image differs from the truth.
  bool success = false;
};

OptimizeResult optimize_attack(const AttackScene& scene, const TraceBuilder& builder, Oracle& oracle,
                               const OptimizeOptions& opts);

/// Power pinned at the library maximum; searches (D, x, y) only. Throws
/// infeasible unless the maximum power saturates more than half the trace
/// support on some feasible placement.
OptimizeResult optimize_saturated(const AttackScene& scene, const TraceBuilder& builder, Oracle& oracle,
                                  const OptimizeOptions& opts);

/// Largest saturation fraction reached at library max power over the
/// feasible library diameters, placed at the polygon centroid.
double max_saturation(const AttackScene& scene, const TraceBuilder& builder);

/// `step,diameter_cm,power_mw,x_px,y_px,loss`
void write_trajectory_csv(const std::vector<AttackTrial>& trajectory, const std::filesystem::path& path);
void write_params_json(const OptimizeResult& r, const std::filesystem::path& path);
AttackParams read_params_json(const std::filesystem::path& path);

}  // namespace ilr
