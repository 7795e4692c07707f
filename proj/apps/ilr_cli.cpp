#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ilr/pipeline.hpp"

extern char** environ;

using namespace ilr;
using Json = nlohmann::ordered_json;

namespace {

struct Globals {
  std::string config_path;
  std::vector<std::string> sets;
  std::optional<unsigned> threads;
  std::optional<std::uint64_t> seed;
  std::string output_dir;
};

constexpr const char* kDefaultConfig = "configs/default.toml";

RunConfig resolve_config(const Globals& g, bool allow_builtin) {
  auto overrides = env_overrides(environ);
  for (const auto& s : g.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw config_error("--set expects key=value, got " + s);
    overrides[s.substr(0, eq)] = s.substr(eq + 1);
  }
  if (g.seed) overrides["seed"] = std::to_string(*g.seed);
  if (g.threads) overrides["threads"] = std::to_string(*g.threads);
  if (!g.output_dir.empty()) overrides["paths.output_dir"] = Json(g.output_dir).dump();

  std::filesystem::path path = g.config_path.empty() ? kDefaultConfig : g.config_path;
  if (g.config_path.empty() && !std::filesystem::exists(path)) {
    if (!allow_builtin) throw config_error("no config given and " + path.string() + " not found");
    if (!overrides.count("seed")) overrides["seed"] = "0";
    return parse_config("", overrides);
  }
  return load_config(path, overrides);
}

std::filesystem::path command_dir(const RunConfig& cfg, const std::string& name) {
  const auto dir = cfg.output_dir / name;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw io_error("cannot create " + dir.string() + ": " + ec.message());
  return dir;
}

void write_json(const Json& j, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

void write_manifest(const std::filesystem::path& dir, const std::string& command, const RunConfig& cfg,
                    const std::vector<std::string>& argv, Json results) {
  Json m;
  m["command"] = command;
  m["argv"] = argv;
  m["config_hash"] = config_hash(cfg);
  m["seed"] = cfg.seed;
  m["seeds"] = seed_plan_json(seed_plan(cfg.seed));
  m["config"] = config_to_json(cfg);
  m["results"] = std::move(results);
  write_json(m, dir / "manifest.json");
}

unsigned thread_count(const RunConfig& cfg) { return cfg.threads; }

AttackScene configured_scene(const RunConfig& cfg, const std::string& sign) {
  return sign_scene(sign, cfg.corpus.px_per_cm, cfg.attack.ambient_lux);
}

TraceLibrary library_for(const RunConfig& cfg, const std::string& sign) {
  const auto dir = cfg.library_dir / sign;
  if (!std::filesystem::exists(dir / "library.json"))
    throw io_error("no trace library at " + dir.string() + " (run `ilr library --sign " + sign + "` first)");
  return load_library(dir);
}

OptimizeOptions optimize_options(const RunConfig& cfg) {
  OptimizeOptions o = cfg.attack.optimize;
  const SeedPlan s = seed_plan(cfg.seed);
  o.tpe.seed = s.tpe;
  o.eot.seed = s.eot;
  return o;
}

// ---------------------------------------------------------------------------

Json cmd_render(const RunConfig& cfg) {
  const SeedPlan seeds = seed_plan(cfg.seed);
  build_corpus(cfg.corpus.classes, cfg.corpus.per_class, seeds.corpus, cfg.corpus_dir, cfg.corpus.px_per_cm);
  const auto corpus = load_corpus(cfg.corpus_dir);
  const TrainResult tr = train_builtin_classifier(corpus, seeds.train, cfg.corpus.train);
  save_trained_classifier(tr.params, cfg.corpus_dir);
  std::printf("rendered %zu images to %s; train accuracy %.4f\n", corpus.size(), cfg.corpus_dir.string().c_str(),
              tr.train_accuracy);
  Json r{{"images", corpus.size()}, {"train_accuracy", tr.train_accuracy}, {"corpus_dir", cfg.corpus_dir.string()}};
  if (!tr.holdout_class_accuracy.empty()) r["holdout_class_accuracy"] = tr.holdout_class_accuracy;
  return r;
}

Json model_json(const IntensityModel& m) {
  return {{"gain", m.gain},
          {"power_knee_mw", m.power_knee_mw},
          {"size_slope", m.size_slope},
          {"ref_diameter_cm", m.ref_diameter_cm},
          {"ambient_rate", m.ambient_rate},
          {"ref_ambient_lux", m.ref_ambient_lux}};
}

Json cmd_calibrate(const RunConfig& cfg, const std::string& input, double noise_sigma) {
  const auto dir = command_dir(cfg, "calibrate");
  std::vector<CalibrationSample> samples;
  if (input.empty()) {
    samples = synthetic_calibration_set(calibration_ground_truth(), noise_sigma, cfg.seed);
    write_calibration_csv(samples, dir / "calibration.csv");
  } else {
    samples = read_calibration_csv(input);
  }
  const FitResult fit = fit_intensity_model(samples, cfg.library.model);
  const IntensityModel& m = fit.model;
  std::ofstream toml(dir / "model.toml", std::ios::binary | std::ios::trunc);
  if (!toml) throw io_error("cannot write " + (dir / "model.toml").string());
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "[library.model]\ngain = [%.4f, %.4f, %.4f]\npower_knee_mw = %.4f\nsize_slope = %.4f\n"
                "ref_diameter_cm = %.4f\nambient_rate = %.4f\nref_ambient_lux = %.4f\n",
                m.gain[0], m.gain[1], m.gain[2], m.power_knee_mw, m.size_slope, m.ref_diameter_cm, m.ambient_rate,
                m.ref_ambient_lux);
  toml << buf;
  Json r{{"model", model_json(m)},
         {"residual_rms", fit.residual_rms},
         {"observations_used", fit.observations_used},
         {"samples", samples.size()},
         {"input", input.empty() ? "synthetic" : input},
         {"min_visible_power_mw_at_15cm", min_visible_power(m, 15.0, m.ref_ambient_lux)}};
  write_json(r, dir / "model.json");
  std::printf("fit %zu observations, residual rms %.4f; model written to %s\n", fit.observations_used,
              fit.residual_rms, (dir / "model.toml").string().c_str());
  return r;
}

Json cmd_library(const RunConfig& cfg, const std::string& sign, const std::string& from) {
  const auto dir = cfg.library_dir / sign;
  TraceLibrary lib;
  if (from.empty()) {
    lib = scene_library(cfg.library, configured_scene(cfg, sign), seed_plan(cfg.seed).library);
  } else {
    lib = load_library(from);
    lib.validate();
  }
  std::filesystem::create_directories(dir);
  save_library(lib, dir);
  std::printf("library for %s: %zu diameters x %zu powers -> %s\n", sign.c_str(), lib.diameter_levels.size(),
              lib.power_levels.size(), dir.string().c_str());
  return {{"sign", sign},
          {"source", from.empty() ? "synthesized" : from},
          {"library_dir", dir.string()},
          {"power_levels", lib.power_levels},
          {"diameter_levels", lib.diameter_levels}};
}

Json params_json(const AttackParams& p) {
  return {{"diameter_cm", p.diameter_cm}, {"power_mw", p.power_mw}, {"x_px", p.center.x}, {"y_px", p.center.y}};
}

Json cmd_attack(const RunConfig& cfg, const std::string& sign, bool saturated) {
  const auto dir = command_dir(cfg, "attack/" + sign);
  const AttackScene scene = configured_scene(cfg, sign);
  const TraceLibrary lib = library_for(cfg, sign);
  const TraceBuilder builder(lib, cfg.library.model, cfg.library.ambient_lux, cfg.library.color_transfer_k);
  auto oracle = open_oracle(cfg);
  OptimizeOptions opts = optimize_options(cfg);
  OptimizeResult r =
      saturated ? optimize_saturated(scene, builder, *oracle, opts) : optimize_attack(scene, builder, *oracle, opts);
  r.best.emitter_distance_m = cfg.attack.emitter_distance_m;
  write_trajectory_csv(r.trajectory, dir / "trajectory.csv");
  write_params_json(r, dir / "best_params.json");
  save_image(scene.base, dir / "benign.png");
  save_image(attacked_image(scene, r.best, builder), dir / "attacked.png");
  std::printf("%s attack on %s: D %.3f cm, P %.3f mW, center (%.2f, %.2f); loss %.6f (benign %.6f); %s\n",
              saturated ? "saturated" : "optimized", sign.c_str(), r.best.diameter_cm, r.best.power_mw,
              r.best.center.x, r.best.center.y, r.best_loss, r.benign_loss,
              r.success ? "misclassified" : "still classified correctly");
  return {{"sign", sign},          {"saturated", saturated},   {"best", params_json(r.best)},
          {"loss", r.best_loss},   {"benign_loss", r.benign_loss}, {"objective", r.best_objective},
          {"success", r.success},  {"evaluations", r.trajectory.size()}};
}

std::string fmt_key(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

Json report_json(const EvalReport& r) {
  if (!r.available) return {{"available", false}};
  return {{"trials", r.trials.size()}, {"asr", r.asr()}, {"scr", r.scr()}};
}

Json cmd_eval(const RunConfig& cfg, const std::string& sign, const std::string& params_path,
              const std::vector<std::string>& only) {
  const auto dir = command_dir(cfg, "eval/" + sign);
  const AttackScene scene = configured_scene(cfg, sign);
  const TraceLibrary lib = library_for(cfg, sign);
  const TraceBuilder builder(lib, cfg.library.model, cfg.library.ambient_lux, cfg.library.color_transfer_k);
  auto oracle = open_oracle(cfg);
  const auto ppath = params_path.empty() ? cfg.output_dir / "attack" / sign / "best_params.json"
                                         : std::filesystem::path(params_path);
  const AttackParams params = read_params_json(ppath);
  const SeedPlan seeds = seed_plan(cfg.seed);
  DeploymentConfig dep = cfg.eval.deploy;
  dep.seed = seeds.deploy;
  auto want = [&](const char* name) { return only.empty() || std::find(only.begin(), only.end(), name) != only.end(); };
  const unsigned threads = thread_count(cfg);
  Json out{{"sign", sign}, {"params", params_json(params)}};

  if (want("deploy")) {
    const EvalReport r = deploy_and_classify(scene, params, builder, *oracle, dep);
    write_summary_csv(r, dir / "summary.csv");
    write_trials_csv(r, dir / "trials.csv");
    out["deploy"] = report_json(r);
    std::printf("deploy: ASR %.3f SCR %.3f over %zu trials\n", r.asr(), r.scr(), r.trials.size());
  }
  if (want("baseline")) {
    const EvalReport r = random_baseline(scene, builder, *oracle, cfg.eval.baseline_trials, seeds.baseline, dep);
    write_summary_csv(r, dir / "baseline_summary.csv");
    write_trials_csv(r, dir / "baseline_trials.csv");
    out["baseline"] = report_json(r);
    std::printf("random baseline: ASR %.3f over %zu trials\n", r.asr(), r.trials.size());
  }
  if (want("ambient")) {
    const auto reps = sweep_ambient(scene, params, builder, *oracle, cfg.eval.lux_levels, dep, threads);
    std::vector<std::string> keys;
    for (double l : cfg.eval.lux_levels) keys.push_back(fmt_key(l));
    write_sweep_csv("lux", keys, reps, dir / "ambient.csv");
    out["ambient"] = Json::array();
    for (const auto& r : reps) out["ambient"].push_back(report_json(r));
  }
  if (want("positions")) {
    std::vector<PositionCell> grid;
    for (double s : cfg.eval.position_scales)
      for (double l : cfg.eval.position_laterals) grid.push_back({s, l});
    const auto reps = sweep_positions(scene, params, builder, *oracle, grid, dep, threads);
    write_position_csv(grid, reps, dir / "positions.csv");
    out["positions"] = Json::array();
    for (const auto& r : reps) out["positions"].push_back(report_json(r));
  }
  if (want("roi")) {
    const auto reps = sweep_roi_noise(scene, params, builder, *oracle, cfg.eval.roi_deltas, dep, threads);
    std::vector<std::string> keys;
    for (double d : cfg.eval.roi_deltas) keys.push_back(fmt_key(d));
    write_sweep_csv("delta", keys, reps, dir / "roi_noise.csv");
    out["roi_noise"] = Json::array();
    for (const auto& r : reps) out["roi_noise"].push_back(report_json(r));
  }
  if (want("drive")) {
    const auto frames = drive_sequence(cfg.eval.drive_frames, cfg.eval.drive_far_scale, cfg.eval.drive_near_scale,
                                       cfg.eval.drive_lateral_start, cfg.eval.drive_lateral_end);
    DeploymentConfig per_frame = dep;
    per_frame.trials = 1;
    const auto reps = sweep_positions(scene, params, builder, *oracle, frames, per_frame, threads);
    write_position_csv(frames, reps, dir / "drive.csv");
    out["drive_frame_asr"] = frame_asr(reps);
    std::printf("drive: frame ASR %.3f over %zu frames\n", frame_asr(reps), frames.size());
  }
  return out;
}

Json metrics_json(const CertMetrics& m) {
  return {{"count", m.count},
          {"no_defense_acc", m.no_defense_acc},
          {"clean_acc", m.clean_acc},
          {"certified_acc", m.certified_acc},
          {"miscertified_fp", m.miscertified_fp}};
}

Json cmd_defend(const RunConfig& cfg, const std::string& mode_arg) {
  const auto dir = command_dir(cfg, "defend");
  std::vector<LightMode> modes;
  if (mode_arg == "both")
    modes = {LightMode::Day, LightMode::Night};
  else
    modes = {parse_light_mode(mode_arg)};
  const SeedPlan seeds = seed_plan(cfg.seed);
  Json out = Json::object();
  for (LightMode mode : modes) {
    const auto suite =
        make_detector_suite(mode, cfg.defense.suite_size, derive_seed(seeds.detector, std::uint64_t(mode)),
                            cfg.corpus.px_per_cm, cfg.defense.detector);
    std::vector<std::string> names;
    std::vector<Detection> results;
    std::size_t tp = 0, fp = 0;
    for (const auto* set : {&suite.benign, &suite.attacked})
      for (const auto& s : *set) {
        names.push_back(s.name);
        results.push_back(detect_speckle(s.image, s.roi, cfg.defense.detector, mode));
        (set == &suite.benign ? fp : tp) += results.back().flagged;
      }
    write_detection_csv(names, results, dir / (std::string("detections_") + to_string(mode) + ".csv"));
    const double tpr = double(tp) / double(suite.attacked.size()), fpr = double(fp) / double(suite.benign.size());
    out[to_string(mode)] = {{"tpr", tpr}, {"fpr", fpr}, {"benign", suite.benign.size()}, {"attacked", suite.attacked.size()}};
    std::printf("%s: TPR %.3f FPR %.3f\n", to_string(mode), tpr, fpr);
  }
  write_json(out, dir / "detector_metrics.json");
  return out;
}

Json cmd_certify(const RunConfig& cfg) {
  const auto dir = command_dir(cfg, "certify");
  const auto corpus = load_corpus(cfg.corpus_dir);
  auto oracle = open_oracle(cfg);
  const TraceLibrary lib = library_for(cfg, cfg.attack.sign);
  const TraceBuilder builder(lib, cfg.library.model, cfg.library.ambient_lux, cfg.library.color_transfer_k);
  const CertSuite suite = make_cert_suite(corpus, builder, seed_plan(cfg.seed).certify, cfg.defense.night_brightness);
  std::map<std::string, CertMetrics> rows;
  for (int patch : cfg.defense.patch_sizes) {
    const MaskSet ms = build_mask_set(kClassifierInput, kClassifierInput, patch);
    const std::pair<const char*, const std::vector<LabeledImage>*> sets[] = {
        {"benign_day", &suite.benign_day}, {"benign_night", &suite.benign_night}, {"attacked", &suite.attacked}};
    for (const auto& [name, set] : sets) {
      const auto records = certify_dataset(*set, *oracle, ms);
      const std::string row = std::string(name) + "_patch" + std::to_string(patch);
      rows[row] = certify_metrics(records);
      std::map<std::string, std::vector<CertRecord>> by_class;
      for (const auto& r : records) by_class[r.truth].push_back(r);
      for (const auto& [label, recs] : by_class) rows[row + "/" + label] = certify_metrics(recs);
      const auto& m = rows[row];
      std::printf("%-22s no-defense %.3f clean %.3f certified %.3f mis-certified %.3f\n", row.c_str(),
                  m.no_defense_acc, m.clean_acc, m.certified_acc, m.miscertified_fp);
    }
  }
  write_cert_report_json(rows, dir / "report.json");
  Json out = Json::object();
  for (const auto& [k, m] : rows)
    if (k.find('/') == std::string::npos) out[k] = metrics_json(m);
  return out;
}

Json cmd_physics(const RunConfig& cfg, double power, double wavelength, double diameter, double divergence,
                 double distance) {
  const SafetyReport s = safety_check(power, diameter, wavelength);
  BeamGeometry g{power, divergence, distance, wavelength};
  g.validate();
  Json out{{"power_mw", power},
           {"wavelength_nm", wavelength},
           {"pattern_diameter_cm", diameter},
           {"beam_power_at_sign_mw", beam_power_at_sign(g)},
           {"irradiance_mw_cm2", s.irradiance_mw_cm2},
           {"mpe_mw_cm2", s.mpe_mw_cm2},
           {"mpe_ratio", s.mpe_ratio},
           {"min_safe_diameter_cm", s.min_safe_diameter_cm},
           {"diameter_scale_factor", s.diameter_scale_factor},
           {"exceeds_mpe", s.mpe_ratio > 1.0}};
  const auto dir = command_dir(cfg, "physics");
  write_json(out, dir / "report.json");
  std::cout << out.dump(2) << "\n";
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv, argv + argc);
  CLI::App app{"Desk-scale infrared laser reflection attack simulator"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("-c,--config", g.config_path, "TOML config (default configs/default.toml)");
  app.add_option("--set", g.sets, "Config override key=value (repeatable)");
  app.add_option("--threads", g.threads, "Worker threads for sweeps (0 = all cores)");
  app.add_option("--seed", g.seed, "Master seed");
  app.add_option("-o,--output", g.output_dir, "Output directory");

  auto* render = app.add_subcommand("render", "Render the corpus and train the built-in classifier");

  auto* calibrate = app.add_subcommand("calibrate", "Fit the intensity-offset model");
  std::string calib_input;
  double calib_noise = 2.0;
  calibrate->add_option("--input", calib_input, "Calibration CSV (default: synthetic set)");
  calibrate->add_option("--noise", calib_noise, "Noise sigma of the synthetic set");

  auto* library = app.add_subcommand("library", "Synthesize or ingest a trace library");
  std::string lib_sign, lib_from;
  library->add_option("--sign", lib_sign, "Sign label (default attack.sign)");
  library->add_option("--from", lib_from, "Ingest an existing library directory");

  auto* attack = app.add_subcommand("attack", "Optimize attack parameters");
  std::string atk_sign;
  bool atk_saturated = false;
  attack->add_option("--sign", atk_sign, "Sign label (default attack.sign)");
  attack->add_flag("--saturated", atk_saturated, "Pin power at the library maximum");

  auto* eval = app.add_subcommand("eval", "Deployment, baseline and robustness sweeps");
  std::string ev_sign, ev_params;
  std::vector<std::string> ev_only;
  eval->add_option("--sign", ev_sign, "Sign label (default attack.sign)");
  eval->add_option("--params", ev_params, "Attack parameters JSON (default from the attack run)");
  eval->add_option("--only", ev_only, "Subset of deploy,baseline,ambient,positions,roi,drive")->delimiter(',');

  auto* defend = app.add_subcommand("defend", "Speckle detector metrics");
  std::string def_mode = "both";
  defend->add_option("--mode", def_mode, "day, night or both")->check(CLI::IsMember({"day", "night", "both"}));

  auto* certify = app.add_subcommand("certify", "Two-round masking certifier metrics");

  auto* physics = app.add_subcommand("physics", "Beam power and laser safety report");
  double ph_power = 45.0, ph_wavelength = 780.0, ph_diameter = 1.0, ph_divergence = 0.75, ph_distance = 3.0;
  physics->add_option("--power", ph_power, "Emitter power in mW");
  physics->add_option("--wavelength", ph_wavelength, "Wavelength in nm");
  physics->add_option("--diameter", ph_diameter, "Pattern diameter in cm");
  physics->add_option("--divergence", ph_divergence, "Beam divergence in degrees");
  physics->add_option("--distance", ph_distance, "Emitter to sign distance in m");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    const bool is_physics = physics->parsed();
    const RunConfig cfg = resolve_config(g, is_physics);
    std::string name;
    Json results;
    if (render->parsed()) {
      name = "render";
      results = cmd_render(cfg);
    } else if (calibrate->parsed()) {
      name = "calibrate";
      results = cmd_calibrate(cfg, calib_input, calib_noise);
    } else if (library->parsed()) {
      name = "library";
      results = cmd_library(cfg, lib_sign.empty() ? cfg.attack.sign : lib_sign, lib_from);
    } else if (attack->parsed()) {
      const std::string sign = atk_sign.empty() ? cfg.attack.sign : atk_sign;
      name = "attack/" + sign;
      results = cmd_attack(cfg, sign, atk_saturated || cfg.attack.saturated);
    } else if (eval->parsed()) {
      const std::string sign = ev_sign.empty() ? cfg.attack.sign : ev_sign;
      name = "eval/" + sign;
      results = cmd_eval(cfg, sign, ev_params, ev_only);
    } else if (defend->parsed()) {
      name = "defend";
      results = cmd_defend(cfg, def_mode);
    } else if (certify->parsed()) {
      name = "certify";
      results = cmd_certify(cfg);
    } else {
      name = "physics";
      results = cmd_physics(cfg, ph_power, ph_wavelength, ph_diameter, ph_divergence, ph_distance);
    }
    write_manifest(command_dir(cfg, name), name, cfg, args, std::move(results));
    return 0;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(ErrorKind::Io);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
