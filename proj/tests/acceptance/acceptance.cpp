// Acceptance run: one PASS/FAIL line per criterion.
//
//   ilr_acceptance [--artifacts DIR] [--only N]...

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "ilr/pipeline.hpp"
#include "spline_oracle.hpp"

using namespace ilr;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string format(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::filesystem::path g_artifacts = "acceptance_artifacts";
constexpr std::uint64_t kSeed = 20240601;

// ---------------------------------------------------------------------------
// Shared fixtures

struct World {
  RunConfig cfg;
  SeedPlan seeds{};
  std::unique_ptr<BuiltinOracle> oracle;
};

World& world() {
  static World w = [] {
    World w;
    w.cfg = parse_config("seed = " + std::to_string(kSeed) + "\n");
    w.seeds = seed_plan(kSeed);
    const TrainedCorpus t = render_and_train(w.cfg);
    std::printf("  trained built-in classifier: %zu classes, train accuracy %.3f\n", t.trained.params.labels.size(),
                t.trained.train_accuracy);
    w.oracle = std::make_unique<BuiltinOracle>(t.trained.params);
    return w;
  }();
  return w;
}

struct SignFixture {
  AttackScene scene;
  TraceLibrary lib;
  std::unique_ptr<TraceBuilder> builder;
};

SignFixture& fixture(const std::string& sign) {
  static std::map<std::string, SignFixture> cache;
  auto it = cache.find(sign);
  if (it != cache.end()) return it->second;
  const World& w = world();
  SignFixture& f = cache[sign];
  f.scene = sign_scene(sign, w.cfg.corpus.px_per_cm, w.cfg.attack.ambient_lux);
  f.lib = scene_library(w.cfg.library, f.scene, w.seeds.library);
  f.builder = std::make_unique<TraceBuilder>(f.lib, w.cfg.library.model, w.cfg.library.ambient_lux,
                                             w.cfg.library.color_transfer_k);
  return f;
}

OptimizeOptions attack_options() {
  const World& w = world();
  OptimizeOptions o = w.cfg.attack.optimize;
  o.tpe.seed = w.seeds.tpe;
  o.eot.seed = w.seeds.eot;
  return o;
}

DeploymentConfig deployment() {
  const World& w = world();
  DeploymentConfig d = w.cfg.eval.deploy;
  d.trials = 10;
  d.seed = w.seeds.deploy;
  return d;
}

// ---------------------------------------------------------------------------
// Criteria

Outcome physics_exactness() {
  const double m = mpe(780.0);
  const SafetyReport r = safety_check(45.0, 1.0, 780.0);
  const bool ok_mpe = std::abs(m - 0.33) <= 0.02;
  const bool ok_ratio = std::abs(r.mpe_ratio / 175.0 - 1.0) <= 0.05;
  const bool ok_scale = std::abs(r.diameter_scale_factor / 3.6 - 1.0) <= 0.05;
  return {ok_mpe && ok_ratio && ok_scale,
          format("mpe(780)=%.4f mW/cm2 (want 0.33+-0.02) %s; ratio %.2f (want 175+-5%%) %s; scale %.3f (want "
                 "3.6+-5%%) %s",
                 m, ok_mpe ? "ok" : "off", r.mpe_ratio, ok_ratio ? "ok" : "off", r.diameter_scale_factor,
                 ok_scale ? "ok" : "off")};
}

template <class F>
TraceLibrary function_library(const std::vector<double>& powers, double diameter, F f) {
  TraceLibrary lib;
  lib.power_levels = powers;
  lib.diameter_levels = {diameter};
  const int side = trace_grid_side(diameter, kDefaultPxPerCm);
  for (double p : powers) {
    TraceField t(side, side, kDefaultPxPerCm);
    t.nominal_diameter_cm = diameter;
    t.nominal_power_mw = p;
    t.support = circular_mask(t.grid_center(), diameter, kDefaultPxPerCm, side, side);
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x)
        if (t.support.test(x, y))
          for (int c = 0; c < 3; ++c) t.at(x, y, c) = f(x, y, c, p);
    lib.entries.push_back(std::move(t));
  }
  lib.validate();
  return lib;
}

Outcome spline_fidelity() {
  double knot_err = 0.0;
  {
    const SignFixture& f = fixture("stop");
    for (std::size_t d = 0; d < f.lib.diameter_levels.size(); ++d)
      for (std::size_t p = 0; p < f.lib.power_levels.size(); ++p) {
        const TraceField t = interpolate_power(f.lib, d, f.lib.power_levels[p]);
        const TraceField& ref = f.lib.entry(d, p);
        for (std::size_t i = 0; i < t.offsets.size(); ++i)
          knot_err = std::max(knot_err, std::abs(t.offsets[i] - ref.offsets[i]));
      }
  }
  const std::vector<double> P{2.5, 5, 10, 20, 40, 80, 160, 240};
  auto cubic = [](int x, int y, int c, double p) {
    const double a = 1e-6 * (1.0 + 0.01 * (x + y)), b = -2e-3 + 1e-4 * c, k = 0.5 + 0.002 * (x - y);
    return a * p * p * p + b * p * p + k * p + 3.0 * c - 5.0;
  };
  const TraceLibrary lib = function_library(P, 12.5, cubic);
  double mid_err = 0.0;
  for (std::size_t s = 0; s + 1 < P.size(); ++s) {
    const double mid = 0.5 * (P[s] + P[s + 1]);
    const TraceField t = interpolate_power(lib, 0, mid);
    for (int y = 0; y < t.height; ++y)
      for (int x = 0; x < t.width; ++x) {
        if (!t.support.test(x, y)) continue;
        for (int c = 0; c < 3; ++c) {
          std::vector<double> vals;
          for (double p : P) vals.push_back(cubic(x, y, c, p));
          mid_err = std::max(mid_err, std::abs(t.at(x, y, c) - test::DenseSpline(P, vals)(mid)));
        }
      }
  }
  return {knot_err <= 1e-9 && mid_err <= 1e-6,
          format("max knot error %.3g (want <= 1e-9); max mid-knot error vs dense spline %.3g (want <= 1e-6)", knot_err,
                 mid_err)};
}

struct AttackRun {
  OptimizeResult optimized;
  EvalReport deployed;
  EvalReport baseline;
};

AttackRun run_attack(const std::string& sign, const std::filesystem::path& dir) {
  World& w = world();
  SignFixture& f = fixture(sign);
  AttackRun r;
  r.optimized = optimize_attack(f.scene, *f.builder, *w.oracle, attack_options());
  const DeploymentConfig dep = deployment();
  r.deployed = deploy_and_classify(f.scene, r.optimized.best, *f.builder, *w.oracle, dep);
  r.baseline = random_baseline(f.scene, *f.builder, *w.oracle, 10, w.seeds.baseline, dep);
  std::filesystem::create_directories(dir);
  write_trajectory_csv(r.optimized.trajectory, dir / "trajectory.csv");
  write_summary_csv(r.deployed, dir / "summary.csv");
  write_trials_csv(r.deployed, dir / "trials.csv");
  write_summary_csv(r.baseline, dir / "baseline_summary.csv");
  write_trials_csv(r.baseline, dir / "baseline_trials.csv");
  return r;
}

const std::vector<std::string> kAttackSigns{"stop", "speedLimit25"};
std::map<std::string, AttackRun> g_attacks;

Outcome optimizer_beats_baseline() {
  bool pass = true;
  std::string detail;
  for (const auto& sign : kAttackSigns) {
    const AttackRun r = run_attack(sign, g_artifacts / "run1" / "attack" / sign);
    g_attacks[sign] = r;
    const bool ok = r.deployed.asr() >= 0.9 && r.baseline.asr() <= 0.4;
    pass = pass && ok;
    detail += format("%s: optimized ASR %.2f (want >= 0.9), baseline ASR %.2f (want <= 0.4), D %.2f cm P %.1f mW, "
                     "best loss %.4f vs benign %.4f; ",
                     sign.c_str(), r.deployed.asr(), r.baseline.asr(), r.optimized.best.diameter_cm,
                     r.optimized.best.power_mw, r.optimized.best_loss, r.optimized.benign_loss);
  }
  return {pass, detail};
}

Outcome run_saturated(const std::filesystem::path& dir, OptimizeResult& out) {
  World& w = world();
  SignFixture& f = fixture("stop");
  try {
    out = optimize_saturated(f.scene, *f.builder, *w.oracle, attack_options());
  } catch (const Error& e) {
    return {false, std::string("saturated search infeasible: ") + e.what()};
  }
  std::filesystem::create_directories(dir);
  write_trajectory_csv(out.trajectory, dir / "trajectory_saturated.csv");
  write_params_json(out, dir / "best_params_saturated.json");
  return {true, ""};
}

Outcome saturated_inequality() {
  if (!g_attacks.count("stop")) g_attacks["stop"] = run_attack("stop", g_artifacts / "run1" / "attack" / "stop");
  OptimizeResult sat;
  Outcome o = run_saturated(g_artifacts / "run1" / "attack" / "stop", sat);
  if (!o.pass) return o;
  const double d_opt = g_attacks["stop"].optimized.best.diameter_cm, d_sat = sat.best.diameter_cm;
  return {d_sat <= d_opt, format("saturated D %.3f cm at P %.1f mW, optimized D %.3f cm (want saturated <= optimized)",
                                 d_sat, sat.best.power_mw, d_opt)};
}

Outcome tpe_convergence() {
  int hits = 0;
  for (int k = 0; k < 100; ++k) {
    TpeConfig cfg;
    cfg.budget = 100;
    cfg.seed = derive_seed(kSeed, 0x7e, std::uint64_t(k));
    const auto r = tpe_minimize([](const std::vector<double>& x) { return (x[0] - 0.3) * (x[0] - 0.3); }, {{0.0, 1.0}},
                                cfg);
    hits += std::abs(r.best.x[0] - 0.3) <= 0.05;
  }
  return {hits >= 95, format("%d/100 runs within 0.05 of the optimum (want >= 95)", hits)};
}

struct DetectorRun {
  DetectorMetrics day, night;
};

DetectorRun run_detector(const std::filesystem::path& dir) {
  const World& w = world();
  const DetectorConfig& cfg = w.cfg.defense.detector;
  std::filesystem::create_directories(dir);
  DetectorRun out;
  for (LightMode mode : {LightMode::Day, LightMode::Night}) {
    const DetectorSuite s =
        make_detector_suite(mode, 75, derive_seed(w.seeds.detector, std::uint64_t(mode)), w.cfg.corpus.px_per_cm, cfg);
    std::vector<std::string> names;
    std::vector<Detection> results;
    std::size_t tp = 0, fp = 0;
    for (const auto* set : {&s.benign, &s.attacked})
      for (const auto& smp : *set) {
        names.push_back(smp.name);
        results.push_back(detect_speckle(smp.image, smp.roi, cfg, mode));
        (set == &s.benign ? fp : tp) += results.back().flagged;
      }
    write_detection_csv(names, results, dir / (std::string("detections_") + to_string(mode) + ".csv"));
    const DetectorMetrics m{double(tp) / double(s.attacked.size()), double(fp) / double(s.benign.size())};
    (mode == LightMode::Day ? out.day : out.night) = m;
  }
  return out;
}

Outcome detector_performance() {
  const DetectorRun r = run_detector(g_artifacts / "run1" / "defend");
  const bool ok = r.day.tpr >= 0.90 && r.day.fpr <= 0.10 && r.night.tpr >= 0.85 && r.night.fpr <= 0.10;
  return {ok, format("day TPR %.3f FPR %.3f (want >= 0.90, <= 0.10); night TPR %.3f FPR %.3f (want >= 0.85, <= 0.10)",
                     r.day.tpr, r.day.fpr, r.night.tpr, r.night.fpr)};
}

Outcome certifier_properties() {
  World& w = world();
  // Exhaustive covering.
  int uncovered = 0;
  for (int p : {9, 12}) {
    const MaskSet ms = build_mask_set(60, 60, p);
    for (int y = 0; y + p <= 60; ++y)
      for (int x = 0; x + p <= 60; ++x) {
        bool ok = false;
        for (const Box& m : ms.masks)
          ok = ok || (m.x <= x && m.y <= y && x + p <= m.x + m.w && y + p <= m.y + m.h);
        uncovered += !ok;
      }
  }

  const auto corpus = render_corpus(w.cfg.corpus.classes, w.cfg.corpus.per_class, w.seeds.corpus,
                                    w.cfg.corpus.px_per_cm);
  const CertSuite suite = make_cert_suite(corpus, *fixture("stop").builder, w.seeds.certify,
                                          w.cfg.defense.night_brightness);
  std::size_t certified = 0, unsound = 0, miscertified = 0, total = 0;
  std::map<std::string, CertMetrics> rows;
  for (int p : {9, 12}) {
    const MaskSet ms = build_mask_set(kClassifierInput, kClassifierInput, p);
    const std::pair<const char*, const std::vector<LabeledImage>*> sets[] = {
        {"benign_day", &suite.benign_day}, {"benign_night", &suite.benign_night}, {"attacked", &suite.attacked}};
    for (const auto& [name, set] : sets) {
      const auto records = certify_dataset(*set, *w.oracle, ms);
      rows[std::string(name) + "_patch" + std::to_string(p)] = certify_metrics(records);
      for (std::size_t i = 0; i < records.size(); ++i) {
        ++total;
        const CertRecord& r = records[i];
        if (!r.cert.certified) continue;
        ++certified;
        miscertified += r.cert.label != r.truth;
        bool unanimous = true;
        for (std::size_t a = 0; a < ms.masks.size() && unanimous; ++a)
          for (std::size_t b = a; b < ms.masks.size() && unanimous; ++b)
            unanimous = w.oracle->classify(apply_masks((*set)[i].image, {ms.masks[a], ms.masks[b]})).top_label() ==
                        r.cert.label;
        unsound += !unanimous;
      }
    }
  }
  std::filesystem::create_directories(g_artifacts / "run1" / "certify");
  write_cert_report_json(rows, g_artifacts / "run1" / "certify" / "report.json");
  return {uncovered == 0 && unsound == 0 && miscertified > 0,
          format("uncovered patch placements %d (want 0); %zu/%zu certified, %zu without unanimous two-mask agreement "
                 "(want 0); %zu mis-certified (want > 0)",
                 uncovered, certified, total, unsound, miscertified)};
}

bool same_bytes(const std::filesystem::path& a, const std::filesystem::path& b) {
  std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
  if (!fa || !fb) return false;
  const std::string sa((std::istreambuf_iterator<char>(fa)), {}), sb((std::istreambuf_iterator<char>(fb)), {});
  return sa == sb;
}

Outcome determinism() {
  const auto run1 = g_artifacts / "run1", run2 = g_artifacts / "run2";
  for (const auto& sign : kAttackSigns)
    if (!std::filesystem::exists(run1 / "attack" / sign / "summary.csv")) run_attack(sign, run1 / "attack" / sign);
  if (!std::filesystem::exists(run1 / "attack" / "stop" / "trajectory_saturated.csv")) {
    OptimizeResult r;
    run_saturated(run1 / "attack" / "stop", r);
  }
  if (!std::filesystem::exists(run1 / "defend" / "detections_day.csv")) run_detector(run1 / "defend");

  for (const auto& sign : kAttackSigns) run_attack(sign, run2 / "attack" / sign);
  OptimizeResult sat;
  run_saturated(run2 / "attack" / "stop", sat);
  run_detector(run2 / "defend");

  std::size_t compared = 0, differing = 0;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(run1)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension();
    if (ext != ".csv" && ext != ".json") continue;
    const auto rel = std::filesystem::relative(entry.path(), run1);
    if (rel.begin()->string() == "certify") continue;
    ++compared;
    if (!same_bytes(entry.path(), run2 / rel)) {
      ++differing;
      std::printf("  differs: %s\n", rel.string().c_str());
    }
  }
  return {compared >= 10 && differing == 0, format("%zu artifacts compared, %zu differ", compared, differing)};
}

Outcome physics_shape() {
  const IntensityModel m;
  std::mt19937_64 rng(derive_seed(kSeed, 0x9));
  std::uniform_real_distribution<double> P(0.5, 240.0), D(3.5, 30.0), L(20.0, 400.0), step(0.01, 1.0);
  int violations = 0;
  for (int i = 0; i < 10000; ++i) {
    const double p = P(rng), d = D(rng), l = L(rng);
    const auto base = intensity_offset(m, p, d, l);
    const auto more_p = intensity_offset(m, p + 5.0 * step(rng), d, l);
    const auto more_d = intensity_offset(m, p, d + step(rng), l);
    const auto more_l = intensity_offset(m, p, d, l + 20.0 * step(rng));
    for (int c = 0; c < 3; ++c)
      violations += more_p[c] < base[c] || more_d[c] > base[c] || more_l[c] > base[c];
  }
  double worst_gap = 1e300;
  for (double p = 20.01; p <= 240.0; p += 0.5) {
    const auto o = intensity_offset(m, p, kBaselineDiameterCm, m.ref_ambient_lux);
    worst_gap = std::min(worst_gap, o[2] - std::max(o[0], o[1]));
  }
  const double thr = min_visible_power(m, kBaselineDiameterCm, m.ref_ambient_lux);
  const bool ok = violations == 0 && worst_gap >= 30.0 && thr >= 1.0 && thr <= 5.0;
  return {ok, format("%d monotonicity violations over 1e4 triples (want 0); min blue gap above 20 mW %.2f (want >= "
                     "30); visibility threshold %.3f mW (want in [1, 5])",
                     violations, worst_gap, thr)};
}

struct Criterion {
  int id;
  const char* name;
  double limit_s;  // 0 = no stated limit
  Outcome (*run)();
};

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    if (!std::strcmp(argv[i], "--artifacts") && i + 1 < argc) {
      g_artifacts = argv[++i];
    } else if (!std::strcmp(argv[i], "--only") && i + 1 < argc) {
      only.insert(std::atoi(argv[++i]));
    } else {
      std::fprintf(stderr, "usage: ilr_acceptance [--artifacts DIR] [--only N]...\n");
      return 2;
    }
  }
  std::filesystem::remove_all(g_artifacts);
  std::filesystem::create_directories(g_artifacts);

  const Criterion criteria[] = {
      {1, "physics exactness", 1.0, physics_exactness},
      {2, "spline fidelity", 10.0, spline_fidelity},
      {3, "optimizer beats baseline", 300.0, optimizer_beats_baseline},
      {4, "saturated-attack inequality", 300.0, saturated_inequality},
      {5, "TPE convergence", 30.0, tpe_convergence},
      {6, "detector performance", 60.0, detector_performance},
      {7, "certifier properties", 300.0, certifier_properties},
      {8, "determinism", 0.0, determinism},
      {9, "physics-model shape", 0.0, physics_shape},
  };

  // Shared training is not charged to any one criterion.
  if (only.empty() || only.count(2) + only.count(3) + only.count(4) + only.count(6) + only.count(7) + only.count(8)) {
    const auto t0 = std::chrono::steady_clock::now();
    world();
    std::printf("  setup %.1f s\n",
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }

  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = c.limit_s <= 0.0 || secs < c.limit_s;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::string timing = format("%.2f s", secs);
    if (c.limit_s > 0.0) timing += format(" (limit %.0f s)", c.limit_s);
    std::printf("criterion %d %s: %s | %s | %s\n", c.id, c.name, pass ? "PASS" : "FAIL", o.detail.c_str(),
                timing.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
