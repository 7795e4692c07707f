#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ilr/corpus.hpp"
#include "ilr/defense.hpp"
#include "ilr/eval.hpp"
#include "ilr/optimize.hpp"
#include "ilr/physics.hpp"

namespace ilr {

struct CorpusSection {
  std::vector<std::string> classes = default_class_list();
  int per_class = 40;
  double px_per_cm = kDefaultPxPerCm;
  TrainConfig train;
};

struct LibrarySection {
  std::vector<double> power_levels{2.5, 5, 10, 20, 40, 80, 160, 240};
  std::vector<double> diameter_levels{3.5, 7.5, 12.5, 17.5, 22.5, 30};
  double ambient_lux = 100.0;
  double grain_px = 1.0;
  double color_transfer_k = 0.6;
  IntensityModel model;
};

struct AttackSection {
  std::string sign = "stop";
  double emitter_distance_m = 3.0;
  double ambient_lux = 100.0;
  OptimizeOptions optimize;
  bool saturated = false;
};

struct EvalSection {
  DeploymentConfig deploy;
  int baseline_trials = 10;
  std::vector<double> lux_levels{50, 100, 150, 200, 250, 300};
  std::vector<double> position_scales{0.6, 0.8, 1.0};
  std::vector<double> position_laterals{-0.3, -0.15, 0.0, 0.15, 0.3};
  std::vector<double> roi_deltas{0.0, 0.04, 0.08, 0.12};
  int drive_frames = 20;
  double drive_far_scale = 0.6, drive_near_scale = 1.0;
  double drive_lateral_start = 0.3, drive_lateral_end = 0.0;
};

struct DefenseSection {
  DetectorConfig detector;
  int suite_size = 75;
  std::vector<int> patch_sizes{9, 12};
  double night_brightness = kNightBrightness;
};

struct OracleSection {
  /// Empty selects the built-in classifier from the corpus directory.
  std::string endpoint;
  double handshake_timeout_s = 10.0;
  double request_timeout_s = 30.0;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::filesystem::path corpus_dir = "out/corpus";
  std::filesystem::path library_dir = "out/library";
  std::filesystem::path output_dir = "out";
  /// 0 uses every logical core.
  unsigned threads = 0;
  CorpusSection corpus;
  LibrarySection library;
  AttackSection attack;
  EvalSection eval;
  DefenseSection defense;
  OracleSection oracle;

  void validate() const;
};

/// Parses TOML text. `seed` is mandatory; unknown keys are rejected.
/// Relative paths are kept as written.
RunConfig parse_config(const std::string& toml_text, const std::map<std::string, std::string>& overrides = {});

/// Reads the file and applies overrides on top. Override keys are dotted paths
/// ("attack.tpe.budget"); values are TOML literals, bare words become strings.
RunConfig load_config(const std::filesystem::path& path, const std::map<std::string, std::string>& overrides = {});

/// ILR_SEED -> "seed", ILR_ATTACK__TPE__BUDGET -> "attack.tpe.budget".
std::map<std::string, std::string> env_overrides(char** environ_ptr);

nlohmann::ordered_json config_to_json(const RunConfig& cfg);

/// FNV-1a 64 of the canonical JSON form, as 16 hex digits.
std::string config_hash(const RunConfig& cfg);

/// Every seed derived from the master seed, by purpose.
struct SeedPlan {
  std::uint64_t corpus, train, library, tpe, eot, deploy, baseline, detector, certify;
};

SeedPlan seed_plan(std::uint64_t master);
nlohmann::ordered_json seed_plan_json(const SeedPlan& s);

}  // namespace ilr
