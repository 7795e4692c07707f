#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "ilr/config.hpp"

namespace ilr {

/// Unjittered render of one catalogue sign as an attack scene.
AttackScene sign_scene(const std::string& label, double px_per_cm = kDefaultPxPerCm, double ambient_lux = 100.0);

/// Speckle library measured on the scene's sign color.
TraceLibrary scene_library(const LibrarySection& cfg, const AttackScene& scene, std::uint64_t seed);

/// Renders the configured corpus and trains the built-in classifier on it.
struct TrainedCorpus {
  std::vector<CorpusImage> corpus;
  TrainResult trained;
};
TrainedCorpus render_and_train(const RunConfig& cfg);

inline constexpr const char* kClassifierFile = "classifier.ilrc";
inline constexpr const char* kClassifierLabelsFile = "classifier_labels.json";

void save_trained_classifier(const ClassifierParams& p, const std::filesystem::path& dir);
ClassifierParams load_trained_classifier(const std::filesystem::path& dir);

/// External oracle when an endpoint is configured, else the built-in
/// classifier stored in the corpus directory.
std::unique_ptr<Oracle> open_oracle(const RunConfig& cfg);

}  // namespace ilr
