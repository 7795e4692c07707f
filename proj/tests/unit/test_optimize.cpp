#include <fstream>
#include <random>

#include "doctest.h"
#include "ilr/optimize.hpp"
#include "ilr/pipeline.hpp"
#include "test_support.hpp"

using namespace ilr;
using namespace ilr::test;

namespace {

TraceLibrary zero_library(const AttackScene& scene) {
  IntensityModel m;
  m.gain = {0, 0, 0};
  m.size_slope = 0;
  m.ambient_rate = 0;
  return synthesize_library(m, {5, 20, 80}, {3.5, 7.5, 12.5}, 100.0, scene.sign_color, scene.base.scale(), 1);
}

TraceLibrary stop_library(const AttackScene& scene, std::vector<double> powers = {2.5, 5, 10, 20, 40, 80, 160, 240}) {
  return synthesize_library(IntensityModel{}, powers, {3.5, 7.5, 12.5, 17.5, 22.5, 30}, 100.0, scene.sign_color,
                            scene.base.scale(), 3);
}

OptimizeOptions small_opts(int budget) {
  OptimizeOptions o;
  o.tpe.budget = budget;
  o.tpe.startup = 5;
  o.tpe.seed = 11;
  o.eot.samples_per_eval = 2;
  o.eot.seed = 12;
  return o;
}

}  // namespace

TEST_CASE("TPE bootstrap draws are uniform, in bounds and reproducible") {
  TpeConfig cfg;
  cfg.seed = 4;
  const TpeBounds b{{-1, 1}, {10, 20}};
  std::vector<TpeTrial> h;
  for (int i = 0; i < cfg.startup; ++i) {
    const auto x = tpe_suggest(h, cfg, b);
    CHECK(x == tpe_suggest(h, cfg, b));
    CHECK(x[0] >= -1);
    CHECK(x[0] <= 1);
    CHECK(x[1] >= 10);
    CHECK(x[1] <= 20);
    h.push_back({x, 0.0});
  }
  cfg.seed = 5;
  CHECK(tpe_suggest({}, cfg, b) != tpe_suggest({}, TpeConfig{}, b));
}

TEST_CASE("TPE handles degenerate loss histories") {
  TpeConfig cfg;
  const TpeBounds b{{0, 1}, {0, 1}};
  std::vector<TpeTrial> h;
  for (int i = 0; i < 30; ++i) h.push_back({{0.5, 0.5}, 1.0});
  for (int k = 0; k < 5; ++k) {
    cfg.seed = std::uint64_t(k);
    const auto x = tpe_suggest(h, cfg, b);
    CHECK(x[0] >= 0);
    CHECK(x[0] <= 1);
    CHECK(x[1] >= 0);
    CHECK(x[1] <= 1);
  }
}

TEST_CASE("TPE finds the minimum of a 1-D quadratic") {
  TpeConfig cfg;
  cfg.budget = 100;
  int hits = 0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    cfg.seed = s;
    const auto r = tpe_minimize([](const std::vector<double>& x) { return (x[0] - 0.3) * (x[0] - 0.3); }, {{0, 1}}, cfg);
    CHECK(r.trajectory.size() == 100);
    hits += std::abs(r.best.x[0] - 0.3) <= 0.05;
    // Grid search at the same budget finds 0.3 to within 0.005; TPE should be close.
  }
  CHECK(hits >= 9);
}

TEST_CASE("TPE config validation") {
  TpeConfig c;
  c.gamma = 0.5;
  CHECK_THROWS(c.validate());
  c = {};
  c.startup = c.budget;
  CHECK_THROWS(c.validate());
}

TEST_CASE("attack suggestions always keep the disk on the sign") {
  const AttackScene scene = sign_scene("stop");
  const TraceLibrary lib = stop_library(scene, {5, 80});
  const AttackSpace space = make_attack_space(scene.polygon, lib);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  TpeConfig cfg;
  std::vector<AttackTrial> h;
  int checked = 0;
  for (int i = 0; i < 10000; ++i) {
    cfg.seed = std::uint64_t(i);
    const AttackParams p = tpe_suggest(h, cfg, space);
    CHECK(space.feasible(p));
    ++checked;
    if (h.size() < 40) h.push_back({p, u(rng), u(rng)});
  }
  CHECK(checked == 10000);
}

TEST_CASE("collapsed EoT loss equals the plain classifier confidence") {
  const AttackScene scene = sign_scene("stop");
  const TraceLibrary lib = stop_library(scene);
  const TraceBuilder builder(lib, IntensityModel{}, 100.0);
  BuiltinOracle oracle(small_classifier());
  const AttackParams p{12.0, 60.0, polygon_centroid(scene.polygon), 3.0};
  const Raster atk = attacked_image(scene, p, builder);
  const double direct = oracle.classify(crop_roi(atk, scene.roi, {}, 0)).score("stop");
  CHECK(eot_loss(scene, p, builder, oracle, EoTConfig::collapsed()) == direct);
}

TEST_CASE("zero-offset library is a null attack") {
  const AttackScene scene = sign_scene("stop");
  const TraceLibrary lib = zero_library(scene);
  const TraceBuilder builder(lib, IntensityModel{}, 100.0, 0.0);
  BuiltinOracle oracle(small_classifier());
  const double benign = benign_confidence(scene, oracle);
  const AttackParams p{5.0, 5.0, polygon_centroid(scene.polygon), 3.0};
  CHECK(eot_loss(scene, p, builder, oracle, EoTConfig::collapsed()) == benign);
  OptimizeOptions o = small_opts(8);
  o.eot = EoTConfig::collapsed();
  const OptimizeResult r = optimize_attack(scene, builder, oracle, o);
  CHECK(r.best_loss == benign);
  CHECK_FALSE(r.success);
}

TEST_CASE("saturating trace over the glyphs lowers confidence") {
  const AttackScene scene = sign_scene("stop");
  const TraceLibrary lib = stop_library(scene);
  const TraceBuilder builder(lib, IntensityModel{}, 100.0);
  BuiltinOracle oracle(small_classifier());
  const AttackParams p{30.0, 240.0, polygon_centroid(scene.polygon), 3.0};
  CHECK(eot_loss(scene, p, builder, oracle, EoTConfig::collapsed()) <= benign_confidence(scene, oracle));
}

TEST_CASE("optimize_attack is deterministic with monotone best") {
  const AttackScene scene = sign_scene("stop");
  const TraceLibrary lib = stop_library(scene);
  const TraceBuilder builder(lib, IntensityModel{}, 100.0);
  BuiltinOracle oracle(small_classifier());
  const OptimizeResult a = optimize_attack(scene, builder, oracle, small_opts(20));
  const OptimizeResult b = optimize_attack(scene, builder, oracle, small_opts(20));
  REQUIRE(a.trajectory.size() == 20);
  double best = 1e9;
  for (std::size_t i = 0; i < a.trajectory.size(); ++i) {
    CHECK(a.trajectory[i].params == b.trajectory[i].params);
    CHECK(a.trajectory[i].loss == b.trajectory[i].loss);
    best = std::min(best, a.trajectory[i].objective);
  }
  CHECK(a.best_objective == best);
  CHECK(a.best_loss <= a.benign_loss + 1e-12);

  const auto dir = tmp_dir("optimize_io");
  write_trajectory_csv(a.trajectory, dir / "t.csv");
  std::ifstream in(dir / "t.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "step,diameter_cm,power_mw,x_px,y_px,loss");
  write_params_json(a, dir / "p.json");
  const AttackParams back = read_params_json(dir / "p.json");
  CHECK(back.diameter_cm == doctest::Approx(a.best.diameter_cm).epsilon(1e-12));
  CHECK(back.center.x == doctest::Approx(a.best.center.x).epsilon(1e-12));
}

TEST_CASE("saturated search pins power at the library maximum") {
  const AttackScene scene = sign_scene("stop");
  const TraceLibrary lib = stop_library(scene);
  const TraceBuilder builder(lib, IntensityModel{}, 100.0);
  BuiltinOracle oracle(small_classifier());
  CHECK(max_saturation(scene, builder) > 0.5);
  const OptimizeResult r = optimize_saturated(scene, builder, oracle, small_opts(10));
  for (const auto& t : r.trajectory) CHECK(t.params.power_mw == 240.0);

  const TraceLibrary weak = stop_library(scene, {2.5, 5});
  const TraceBuilder wb(weak, IntensityModel{}, 100.0);
  CHECK_THROWS_AS(optimize_saturated(scene, wb, oracle, small_opts(10)), Error);
}

TEST_CASE("signs smaller than the minimum diameter are infeasible") {
  const AttackScene scene = sign_scene("stop");
  const TraceLibrary lib = stop_library(scene);
  const Polygon tiny{{0, 0}, {5, 0}, {5, 5}, {0, 5}};
  try {
    make_attack_space(tiny, lib);
    FAIL("expected infeasible");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Infeasible);
  }
}
