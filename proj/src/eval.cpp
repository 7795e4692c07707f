#include "ilr/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <mutex>
#include <thread>

namespace ilr {

void DeploymentConfig::validate() const {
  if (trials < 1) throw invalid_argument("deployment trials must be >= 1");
  if (deploy_noise_sigma < 0.0) throw invalid_argument("deployment noise must be non-negative");
  if (deploy_brightness_jitter < 0.0 || deploy_brightness_jitter >= 1.0)
    throw invalid_argument("brightness jitter must be in [0, 1)");
  if (!(ambient_lux > 0.0)) throw invalid_argument("ambient lux must be positive");
  view.validate();
  roi_noise.validate();
}

std::optional<Box> view_roi(const AttackScene& scene, const AffinePhotometricTransform& view) {
  if (view.geometric_identity()) return scene.roi;
  const int w = scene.base.width(), h = scene.base.height();
  for (const auto& p : scene.polygon) {
    const Point q = transform_point(view, p, w, h);
    if (q.x < 0.0 || q.y < 0.0 || q.x > w - 1 || q.y > h - 1) return std::nullopt;
  }
  const Box& r = scene.roi;
  const Point corners[4] = {{double(r.x), double(r.y)},
                            {double(r.x + r.w - 1), double(r.y)},
                            {double(r.x), double(r.y + r.h - 1)},
                            {double(r.x + r.w - 1), double(r.y + r.h - 1)}};
  double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
  for (const auto& c : corners) {
    const Point q = transform_point(view, c, w, h);
    x0 = std::min(x0, q.x);
    y0 = std::min(y0, q.y);
    x1 = std::max(x1, q.x);
    y1 = std::max(y1, q.y);
  }
  const int bx0 = std::max(0, int(std::floor(x0))), by0 = std::max(0, int(std::floor(y0)));
  const int bx1 = std::min(w - 1, int(std::ceil(x1))), by1 = std::min(h - 1, int(std::ceil(y1)));
  if (bx1 < bx0 || by1 < by0) return std::nullopt;
  return Box{bx0, by0, bx1 - bx0 + 1, by1 - by0 + 1};
}

namespace {

struct Deployment {
  Raster attacked;
  Box roi;
  std::string simulated;
};

std::optional<Deployment> prepare(const AttackScene& scene, const AttackParams& params, const TraceBuilder& builder,
                                  Oracle& oracle, const DeploymentConfig& dep) {
  const auto roi = view_roi(scene, dep.view);
  if (!roi) return std::nullopt;
  Deployment d;
  d.attacked = attacked_image(scene, params, builder, dep.ambient_lux);
  d.roi = *roi;
  AffinePhotometricTransform sim = dep.view;
  sim.noise_sigma = 0.0;
  d.simulated =
      oracle.classify(apply_transform_resized(d.attacked, sim, 0, d.roi, kClassifierInput, kClassifierInput)).top_label();
  return d;
}

TrialRecord run_trial(const AttackScene& scene, const Deployment& d, Oracle& oracle, const DeploymentConfig& dep,
                      std::uint64_t trial_seed) {
  std::mt19937_64 rng(derive_seed(trial_seed, 1));
  AffinePhotometricTransform tf = dep.view;
  if (dep.deploy_brightness_jitter > 0.0)
    tf.brightness *= std::uniform_real_distribution<double>(1.0 - dep.deploy_brightness_jitter,
                                                            1.0 + dep.deploy_brightness_jitter)(rng);
  tf.noise_sigma = dep.deploy_noise_sigma;
  const auto [u, v] = roi_displacement(dep.roi_noise, derive_seed(trial_seed, 3));
  const Box roi = displaced_roi(d.roi, u, v, scene.base.width(), scene.base.height());
  const ScoreVector s = oracle.classify(
      apply_transform_resized(d.attacked, tf, derive_seed(trial_seed, 2), roi, kClassifierInput, kClassifierInput));
  TrialRecord t;
  t.predicted = s.top_label();
  t.simulated = d.simulated;
  t.success = t.predicted != scene.true_label;
  t.true_confidence = s.score(scene.true_label);
  return t;
}

void add(EvalReport& r, TrialRecord t) {
  r.successes += t.success ? 1 : 0;
  r.consistent += t.predicted == t.simulated ? 1 : 0;
  r.trials.push_back(std::move(t));
}

}  // namespace

EvalReport deploy_and_classify(const AttackScene& scene, const AttackParams& params, const TraceBuilder& builder,
                               Oracle& oracle, const DeploymentConfig& dep) {
  dep.validate();
  EvalReport r;
  const auto d = prepare(scene, params, builder, oracle, dep);
  if (!d) {
    r.available = false;
    return r;
  }
  for (int i = 0; i < dep.trials; ++i) add(r, run_trial(scene, *d, oracle, dep, derive_seed(dep.seed, std::uint64_t(i))));
  return r;
}

Point sample_inset_uniform(const Polygon& polygon, double margin_px, std::mt19937_64& rng) {
  const Polygon inset = inset_convex(polygon, margin_px);
  if (inset.empty()) throw infeasible("no feasible placement: sign inset is empty");
  double x0 = inset[0].x, x1 = x0, y0 = inset[0].y, y1 = y0;
  for (const auto& p : inset) {
    x0 = std::min(x0, p.x);
    x1 = std::max(x1, p.x);
    y0 = std::min(y0, p.y);
    y1 = std::max(y1, p.y);
  }
  std::uniform_real_distribution<double> ux(x0, x1), uy(y0, y1);
  for (;;) {
    const Point p{ux(rng), uy(rng)};
    if (inside_distance(inset, p) >= 0.0) return p;
  }
}

EvalReport random_baseline(const AttackScene& scene, const TraceBuilder& builder, Oracle& oracle, int trials,
                           std::uint64_t seed, const DeploymentConfig& dep) {
  if (trials < 1) throw invalid_argument("random baseline needs at least one trial");
  const TraceLibrary& lib = builder.library();
  if (kBaselinePowerMw < lib.power_levels.front() || kBaselinePowerMw > lib.power_levels.back())
    throw infeasible("baseline power 51 mW is outside the library range");
  if (kBaselineDiameterCm < lib.diameter_levels.front() || kBaselineDiameterCm > lib.diameter_levels.back())
    throw infeasible("baseline diameter 15 cm is outside the library range");
  DeploymentConfig d = dep;
  d.trials = 1;
  d.validate();
  const double margin = kBaselineDiameterCm * lib.scale() * 0.5;
  EvalReport r;
  for (int i = 0; i < trials; ++i) {
    std::mt19937_64 rng(derive_seed(seed, std::uint64_t(i), 7));
    const AttackParams p{kBaselineDiameterCm, kBaselinePowerMw, sample_inset_uniform(scene.polygon, margin, rng)};
    const auto prepared = prepare(scene, p, builder, oracle, d);
    if (!prepared) {
      r.available = false;
      return r;
    }
    add(r, run_trial(scene, *prepared, oracle, d, derive_seed(seed, std::uint64_t(i), 8)));
  }
  return r;
}

std::uint64_t cell_seed(std::uint64_t master, std::size_t index) { return derive_seed(master, index, 0xce11); }

namespace {

std::vector<EvalReport> run_cells(std::size_t n, unsigned threads, const std::function<EvalReport(std::size_t)>& cell) {
  std::vector<EvalReport> out(n);
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, unsigned(std::max<std::size_t>(n, 1)));
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        out[i] = cell(i);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!error) error = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
  return out;
}

}  // namespace

std::vector<EvalReport> sweep_ambient(const AttackScene& scene, const AttackParams& params, const TraceBuilder& builder,
                                      Oracle& oracle, const std::vector<double>& lux_levels,
                                      const DeploymentConfig& dep, unsigned threads) {
  for (double l : lux_levels)
    if (!(l > 0.0)) throw invalid_argument("ambient levels must be positive");
  return run_cells(lux_levels.size(), threads, [&](std::size_t i) {
    DeploymentConfig d = dep;
    d.ambient_lux = lux_levels[i];
    d.seed = cell_seed(dep.seed, i);
    return deploy_and_classify(scene, params, builder, oracle, d);
  });
}

AffinePhotometricTransform position_view(const PositionCell& cell, int image_width) {
  if (!(cell.scale > 0.0)) throw invalid_argument("longitudinal scale must be positive");
  AffinePhotometricTransform t;
  const double angle = std::atan(2.0 * cell.lateral);
  t.scale_x = cell.scale * std::cos(angle);
  t.scale_y = cell.scale;
  t.shear = 0.3 * cell.lateral;
  t.translate_x = -0.5 * cell.lateral * image_width;
  return t;
}

std::vector<EvalReport> sweep_positions(const AttackScene& scene, const AttackParams& params,
                                        const TraceBuilder& builder, Oracle& oracle,
                                        const std::vector<PositionCell>& grid, const DeploymentConfig& dep,
                                        unsigned threads) {
  return run_cells(grid.size(), threads, [&](std::size_t i) {
    DeploymentConfig d = dep;
    d.view = position_view(grid[i], scene.base.width());
    d.seed = cell_seed(dep.seed, i);
    return deploy_and_classify(scene, params, builder, oracle, d);
  });
}

std::vector<EvalReport> sweep_roi_noise(const AttackScene& scene, const AttackParams& params,
                                        const TraceBuilder& builder, Oracle& oracle, const std::vector<double>& deltas,
                                        const DeploymentConfig& dep, unsigned threads) {
  for (double v : deltas) RoiNoise{v}.validate();
  return run_cells(deltas.size(), threads, [&](std::size_t i) {
    DeploymentConfig d = dep;
    d.roi_noise = RoiNoise{deltas[i]};
    d.seed = cell_seed(dep.seed, i);
    return deploy_and_classify(scene, params, builder, oracle, d);
  });
}

std::vector<PositionCell> drive_sequence(int frames, double far_scale, double near_scale, double lateral_start,
                                         double lateral_end) {
  if (frames < 1) throw invalid_argument("drive sequence needs at least one frame");
  std::vector<PositionCell> out;
  for (int i = 0; i < frames; ++i) {
    const double t = frames == 1 ? 0.0 : double(i) / double(frames - 1);
    out.push_back({far_scale + t * (near_scale - far_scale), lateral_start + t * (lateral_end - lateral_start)});
  }
  return out;
}

double frame_asr(const std::vector<EvalReport>& frames) {
  long hits = 0, total = 0;
  for (const auto& f : frames) {
    if (!f.available) continue;
    hits += f.successes;
    total += long(f.trials.size());
  }
  return total ? double(hits) / double(total) : 0.0;
}

namespace {

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot write " + path.string());
  return out;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string summary_fields(const EvalReport& r) {
  if (!r.available) return std::to_string(r.trials.size()) + ",N/A,N/A,N/A,N/A";
  return std::to_string(r.trials.size()) + "," + std::to_string(r.successes) + "," + std::to_string(r.consistent) + "," +
         fmt("%.6f", r.asr()) + "," + fmt("%.6f", r.scr());
}

}  // namespace

void write_summary_csv(const EvalReport& r, const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "trials,successes,consistent,asr,scr\n" << summary_fields(r) << "\n";
}

void write_trials_csv(const EvalReport& r, const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "trial,predicted,simulated,success,true_confidence\n";
  for (std::size_t i = 0; i < r.trials.size(); ++i) {
    const auto& t = r.trials[i];
    out << i << "," << t.predicted << "," << t.simulated << "," << (t.success ? 1 : 0) << ","
        << fmt("%.6f", t.true_confidence) << "\n";
  }
}

void write_sweep_csv(const std::string& key_name, const std::vector<std::string>& keys,
                     const std::vector<EvalReport>& reports, const std::filesystem::path& path) {
  if (keys.size() != reports.size()) throw invalid_argument("sweep keys and reports differ in length");
  auto out = open_csv(path);
  out << key_name << ",trials,successes,consistent,asr,scr\n";
  for (std::size_t i = 0; i < keys.size(); ++i) out << keys[i] << "," << summary_fields(reports[i]) << "\n";
}

void write_position_csv(const std::vector<PositionCell>& grid, const std::vector<EvalReport>& reports,
                        const std::filesystem::path& path) {
  if (grid.size() != reports.size()) throw invalid_argument("grid and reports differ in length");
  auto out = open_csv(path);
  out << "scale,lateral,trials,successes,consistent,asr,scr\n";
  for (std::size_t i = 0; i < grid.size(); ++i)
    out << fmt("%.4f", grid[i].scale) << "," << fmt("%.4f", grid[i].lateral) << "," << summary_fields(reports[i]) << "\n";
}

}  // namespace ilr
