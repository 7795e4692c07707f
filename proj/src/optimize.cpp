#include "ilr/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

namespace ilr {

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
  if (hi <= lo) return lo;
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// 1-D Parzen estimator on [0, 1] with Gaussian kernels truncated to the unit
// interval. The first kernel is a broad prior centred on the interval.
struct Parzen {
  std::vector<double> mu;
  std::vector<double> sigma;

  static Parzen fit(const std::vector<double>& pts, double floor) {
    Parzen p;
    p.mu.push_back(0.5);
    p.sigma.push_back(1.0);
    if (pts.empty()) return p;
    const double n = static_cast<double>(pts.size());
    const double mean = std::accumulate(pts.begin(), pts.end(), 0.0) / n;
    double var = 0.0;
    for (double v : pts) var += (v - mean) * (v - mean);
    const double sd = pts.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
    const double h = std::clamp(1.06 * sd * std::pow(n, -0.2), floor, 1.0);
    for (double v : pts) {
      p.mu.push_back(v);
      p.sigma.push_back(h);
    }
    return p;
  }

  double log_pdf(double x) const {
    double s = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
      const double z = (x - mu[i]) / sigma[i];
      const double mass = normal_cdf((1.0 - mu[i]) / sigma[i]) - normal_cdf(-mu[i] / sigma[i]);
      s += std::exp(-0.5 * z * z) / (sigma[i] * std::sqrt(2.0 * M_PI) * std::max(mass, 1e-300));
    }
    return std::log(std::max(s / static_cast<double>(mu.size()), 1e-300));
  }

  double sample(std::mt19937_64& rng) const {
    const std::size_t k = std::uniform_int_distribution<std::size_t>(0, mu.size() - 1)(rng);
    std::normal_distribution<double> nd(mu[k], sigma[k]);
    for (int tries = 0; tries < 64; ++tries) {
      const double v = nd(rng);
      if (v >= 0.0 && v <= 1.0) return v;
    }
    return std::clamp(mu[k], 0.0, 1.0);
  }
};

}  // namespace

void TpeConfig::validate() const {
  if (budget < 1) throw invalid_argument("TPE budget must be positive");
  if (startup < 0 || startup >= budget) throw invalid_argument("TPE startup must be in [0, budget)");
  if (!(gamma > 0.0 && gamma < 0.5)) throw invalid_argument("TPE gamma must be in (0, 0.5)");
  if (candidates_per_step < 1) throw invalid_argument("TPE candidates_per_step must be positive");
  if (!(bandwidth_floor > 0.0 && bandwidth_floor <= 1.0)) throw invalid_argument("TPE bandwidth_floor must be in (0, 1]");
}

std::vector<double> tpe_suggest(const std::vector<TpeTrial>& history, const TpeConfig& cfg, const TpeBounds& bounds) {
  cfg.validate();
  if (bounds.empty()) throw invalid_argument("empty TPE bounds");
  for (const auto& [lo, hi] : bounds)
    if (!(lo <= hi) || !std::isfinite(lo) || !std::isfinite(hi)) throw invalid_argument("empty TPE bounds");
  const std::size_t dims = bounds.size();
  const std::size_t n = history.size();
  std::mt19937_64 rng(derive_seed(cfg.seed, n, 0x7e));

  std::vector<double> out(dims);
  if (n < static_cast<std::size_t>(std::max(cfg.startup, 1))) {
    for (std::size_t d = 0; d < dims; ++d) out[d] = uniform(rng, bounds[d].first, bounds[d].second);
    return out;
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return history[a].loss < history[b].loss; });
  std::size_t n_good = static_cast<std::size_t>(std::ceil(cfg.gamma * static_cast<double>(n)));
  n_good = std::clamp<std::size_t>(n_good, 1, std::max<std::size_t>(n - 1, 1));

  auto unit = [&](std::size_t i, std::size_t d) {
    const double range = bounds[d].second - bounds[d].first;
    return range > 0.0 ? std::clamp((history[i].x.at(d) - bounds[d].first) / range, 0.0, 1.0) : 0.5;
  };
  std::vector<Parzen> good(dims), bad(dims);
  for (std::size_t d = 0; d < dims; ++d) {
    std::vector<double> g, b;
    for (std::size_t r = 0; r < n; ++r) (r < n_good ? g : b).push_back(unit(order[r], d));
    good[d] = Parzen::fit(g, cfg.bandwidth_floor);
    bad[d] = Parzen::fit(b, cfg.bandwidth_floor);
  }

  std::vector<double> best(dims), cand(dims);
  double best_score = -std::numeric_limits<double>::infinity();
  for (int c = 0; c < cfg.candidates_per_step; ++c) {
    double score = 0.0;
    for (std::size_t d = 0; d < dims; ++d) {
      cand[d] = good[d].sample(rng);
      score += good[d].log_pdf(cand[d]) - bad[d].log_pdf(cand[d]);
    }
    if (score > best_score) {
      best_score = score;
      best = cand;
    }
  }
  for (std::size_t d = 0; d < dims; ++d) out[d] = bounds[d].first + best[d] * (bounds[d].second - bounds[d].first);
  return out;
}

TpeResult tpe_minimize(const std::function<double(const std::vector<double>&)>& objective, const TpeBounds& bounds,
                       const TpeConfig& cfg) {
  cfg.validate();
  TpeResult r;
  for (int step = 0; step < cfg.budget; ++step) {
    TpeTrial t;
    t.x = tpe_suggest(r.trajectory, cfg, bounds);
    t.loss = objective(t.x);
    if (r.trajectory.empty() || t.loss < r.best.loss) r.best = t;
    r.trajectory.push_back(std::move(t));
  }
  return r;
}

// ---------------------------------------------------------------------------
// EoT and loss

void EoTConfig::validate() const {
  if (samples_per_eval < 1) throw invalid_argument("EoT samples_per_eval must be >= 1");
  if (noise_sigma < 0.0) throw invalid_argument("EoT noise_sigma must be non-negative");
  if (brightness_range.first > brightness_range.second || rotation_range_deg.first > rotation_range_deg.second ||
      shear_range.first > shear_range.second)
    throw invalid_argument("EoT ranges must be ordered");
  if (brightness_range.first < 0.0) throw invalid_argument("EoT brightness must be non-negative");
}

EoTConfig EoTConfig::collapsed() {
  EoTConfig e;
  e.samples_per_eval = 1;
  e.noise_sigma = 0.0;
  e.brightness_range = {1.0, 1.0};
  e.rotation_range_deg = {0.0, 0.0};
  e.shear_range = {0.0, 0.0};
  return e;
}

AffinePhotometricTransform eot_transform(const EoTConfig& eot, int k) {
  std::mt19937_64 rng(derive_seed(eot.seed, static_cast<std::uint64_t>(k), 1));
  AffinePhotometricTransform t;
  t.rotation_deg = uniform(rng, eot.rotation_range_deg.first, eot.rotation_range_deg.second);
  t.shear = uniform(rng, eot.shear_range.first, eot.shear_range.second);
  t.brightness = uniform(rng, eot.brightness_range.first, eot.brightness_range.second);
  t.noise_sigma = eot.noise_sigma;
  return t;
}

Raster attacked_image(const AttackScene& scene, const AttackParams& params, const TraceBuilder& builder,
                      double ambient_lux) {
  const TraceField t = builder.build(params.diameter_cm, params.power_mw, ambient_lux, scene.sign_color);
  return apply_trace(scene.base, t, params.center);
}

Raster attacked_image(const AttackScene& scene, const AttackParams& params, const TraceBuilder& builder) {
  return attacked_image(scene, params, builder, scene.ambient_lux);
}

double eot_loss(const AttackScene& scene, const AttackParams& params, const TraceBuilder& builder, Oracle& oracle,
                const EoTConfig& eot) {
  eot.validate();
  const Raster atk = attacked_image(scene, params, builder);
  double sum = 0.0;
  for (int k = 0; k < eot.samples_per_eval; ++k) {
    // Only the ROI reaches the classifier, so only the ROI is transformed.
    const Raster v = apply_transform_resized(atk, eot_transform(eot, k), derive_seed(eot.seed, std::uint64_t(k), 2),
                                             scene.roi, kClassifierInput, kClassifierInput);
    sum += oracle.classify(v).score(scene.true_label);
  }
  return sum / eot.samples_per_eval;
}

double benign_confidence(const AttackScene& scene, Oracle& oracle) {
  return oracle.classify(crop_roi(scene.base, scene.roi, RoiNoise{}, 0)).score(scene.true_label);
}

// ---------------------------------------------------------------------------
// Search space

bool AttackSpace::feasible(const AttackParams& p, double tol_px) const {
  if (p.diameter_cm < diameter_lo - 1e-9 || p.diameter_cm > diameter_hi + 1e-9) return false;
  if (p.power_mw < power_lo - 1e-9 || p.power_mw > power_hi + 1e-9) return false;
  return inside_distance(polygon, p.center) >= p.diameter_cm * px_per_cm * 0.5 - tol_px;
}

namespace {

// Largest margin for which the inset is non-empty.
double inradius(const Polygon& poly) {
  double lo = 0.0, hi = 0.0;
  const Box bb = bounding_box(poly);
  hi = 0.5 * std::min(bb.w, bb.h) + 1.0;
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    (inset_convex(poly, mid).empty() ? hi : lo) = mid;
  }
  return lo;
}

}  // namespace

AttackSpace make_attack_space(const Polygon& polygon, const TraceLibrary& lib) {
  lib.validate();
  if (polygon.size() < 3) throw invalid_argument("sign polygon needs at least 3 vertices");
  AttackSpace s;
  s.polygon = polygon;
  s.px_per_cm = lib.scale();
  s.power_lo = lib.power_levels.front();
  s.power_hi = lib.power_levels.back();
  s.diameter_lo = lib.diameter_levels.front();
  // Leave a pixel of slack so the projected center is strictly feasible.
  const double max_d = 2.0 * (inradius(polygon) - 1.0) / s.px_per_cm;
  s.diameter_hi = std::min(lib.diameter_levels.back(), max_d);
  if (s.diameter_hi < s.diameter_lo)
    throw infeasible("sign is smaller than the minimum library diameter");
  return s;
}

AttackParams tpe_suggest(const std::vector<AttackTrial>& history, const TpeConfig& cfg, const AttackSpace& space) {
  const bool pinned = space.pinned_power.has_value();
  double x0 = space.polygon.front().x, x1 = x0, y0 = space.polygon.front().y, y1 = y0;
  for (const auto& p : space.polygon) {
    x0 = std::min(x0, p.x);
    x1 = std::max(x1, p.x);
    y0 = std::min(y0, p.y);
    y1 = std::max(y1, p.y);
  }
  TpeBounds bounds{{space.diameter_lo, space.diameter_hi}};
  if (!pinned) bounds.push_back({space.power_lo, space.power_hi});
  bounds.push_back({x0, x1});
  bounds.push_back({y0, y1});

  std::vector<TpeTrial> h;
  h.reserve(history.size());
  for (const auto& t : history) {
    TpeTrial tt;
    tt.x.push_back(t.params.diameter_cm);
    if (!pinned) tt.x.push_back(t.params.power_mw);
    tt.x.push_back(t.params.center.x);
    tt.x.push_back(t.params.center.y);
    tt.loss = t.objective;
    h.push_back(std::move(tt));
  }
  const auto s = tpe_suggest(h, cfg, bounds);

  AttackParams p;
  std::size_t i = 0;
  p.diameter_cm = std::clamp(s[i++], space.diameter_lo, space.diameter_hi);
  p.power_mw = pinned ? *space.pinned_power : std::clamp(s[i++], space.power_lo, space.power_hi);
  const Point raw{s[i], s[i + 1]};
  const Polygon inset = inset_convex(space.polygon, p.diameter_cm * space.px_per_cm * 0.5);
  p.center = inset.empty() ? polygon_centroid(space.polygon) : project_onto_convex(inset, raw);
  return p;
}

namespace {

double objective_of(const AttackSpace& space, const AttackParams& p, double loss, double w) {
  if (w == 0.0) return loss;
  double pen = 0.0;
  if (space.diameter_hi > space.diameter_lo)
    pen += (p.diameter_cm - space.diameter_lo) / (space.diameter_hi - space.diameter_lo);
  if (!space.pinned_power && space.power_hi > space.power_lo)
    pen += (p.power_mw - space.power_lo) / (space.power_hi - space.power_lo);
  return loss + w * pen;
}

OptimizeResult run_search(const AttackScene& scene, const TraceBuilder& builder, Oracle& oracle,
                          const OptimizeOptions& opts, const AttackSpace& space) {
  opts.tpe.validate();
  opts.eot.validate();
  OptimizeResult r;
  r.benign_loss = benign_confidence(scene, oracle);
  for (int step = 0; step < opts.tpe.budget; ++step) {
    AttackTrial t;
    t.params = tpe_suggest(r.trajectory, opts.tpe, space);
    t.loss = eot_loss(scene, t.params, builder, oracle, opts.eot);
    t.objective = objective_of(space, t.params, t.loss, opts.resource_weight);
    if (r.trajectory.empty() || t.objective < r.best_objective) {
      r.best = t.params;
      r.best_loss = t.loss;
      r.best_objective = t.objective;
    }
    r.trajectory.push_back(t);
  }
  const Raster atk = attacked_image(scene, r.best, builder);
  r.success = oracle.classify(crop_roi(atk, scene.roi, RoiNoise{}, 0)).top_label() != scene.true_label;
  return r;
}

}  // namespace

OptimizeResult optimize_attack(const AttackScene& scene, const TraceBuilder& builder, Oracle& oracle,
                               const OptimizeOptions& opts) {
  const AttackSpace space = make_attack_space(scene.polygon, builder.library());
  return run_search(scene, builder, oracle, opts, space);
}

double max_saturation(const AttackScene& scene, const TraceBuilder& builder) {
  const AttackSpace space = make_attack_space(scene.polygon, builder.library());
  const Point c = polygon_centroid(scene.polygon);
  double best = 0.0;
  for (double d : builder.library().diameter_levels) {
    if (d > space.diameter_hi) break;
    const TraceField t = builder.build(d, space.power_hi, scene.ambient_lux, scene.sign_color);
    const Raster img = apply_trace(scene.base, t, c);
    best = std::max(best, saturation_fraction(img, placed_support(t, c, img.width(), img.height())));
  }
  return best;
}

OptimizeResult optimize_saturated(const AttackScene& scene, const TraceBuilder& builder, Oracle& oracle,
                                  const OptimizeOptions& opts) {
  AttackSpace space = make_attack_space(scene.polygon, builder.library());
  if (max_saturation(scene, builder) <= 0.5)
    throw infeasible("saturation unreachable at the library's maximum power");
  space.pinned_power = space.power_hi;
  return run_search(scene, builder, oracle, opts, space);
}

// ---------------------------------------------------------------------------
// Persistence

void write_trajectory_csv(const std::vector<AttackTrial>& trajectory, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write " + path.string());
  out << "step,diameter_cm,power_mw,x_px,y_px,loss\n";
  char line[256];
  for (std::size_t i = 0; i < trajectory.size(); ++i) {
    const auto& t = trajectory[i];
    std::snprintf(line, sizeof line, "%zu,%.6f,%.6f,%.4f,%.4f,%.9f\n", i, t.params.diameter_cm, t.params.power_mw,
                  t.params.center.x, t.params.center.y, t.loss);
    out << line;
  }
  if (!out) throw io_error("write failed: " + path.string());
}

void write_params_json(const OptimizeResult& r, const std::filesystem::path& path) {
  nlohmann::json j;
  j["diameter_cm"] = r.best.diameter_cm;
  j["power_mw"] = r.best.power_mw;
  j["x_px"] = r.best.center.x;
  j["y_px"] = r.best.center.y;
  j["emitter_distance_m"] = r.best.emitter_distance_m;
  j["loss"] = r.best_loss;
  j["objective"] = r.best_objective;
  j["benign_loss"] = r.benign_loss;
  j["success"] = r.success;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

AttackParams read_params_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot read " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    AttackParams p;
    p.diameter_cm = j.at("diameter_cm").get<double>();
    p.power_mw = j.at("power_mw").get<double>();
    p.center = {j.at("x_px").get<double>(), j.at("y_px").get<double>()};
    p.emitter_distance_m = j.value("emitter_distance_m", 3.0);
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw invalid_argument("malformed attack params in " + path.string() + ": " + e.what());
  }
}

}  // namespace ilr
