#include "ilr/pipeline.hpp"

#include <fstream>

namespace ilr {

AttackScene sign_scene(const std::string& label, double px_per_cm, double ambient_lux) {
  const SignSpec& spec = sign_spec(label);
  RenderedSign r = render_sign(spec, px_per_cm, kDefaultBackground, RenderJitter{});
  return {std::move(r.image), std::move(r.polygon), r.roi, label, to_rgbd(spec.base_color), ambient_lux};
}

TraceLibrary scene_library(const LibrarySection& cfg, const AttackScene& scene, std::uint64_t seed) {
  return synthesize_library(cfg.model, cfg.power_levels, cfg.diameter_levels, cfg.ambient_lux, scene.sign_color,
                            scene.base.scale(), seed, cfg.grain_px);
}

TrainedCorpus render_and_train(const RunConfig& cfg) {
  const SeedPlan seeds = seed_plan(cfg.seed);
  TrainedCorpus t;
  t.corpus = render_corpus(cfg.corpus.classes, cfg.corpus.per_class, seeds.corpus, cfg.corpus.px_per_cm);
  t.trained = train_builtin_classifier(t.corpus, seeds.train, cfg.corpus.train);
  return t;
}

void save_trained_classifier(const ClassifierParams& p, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_classifier(p, dir / kClassifierFile);
  std::ofstream out(dir / kClassifierLabelsFile, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot write " + (dir / kClassifierLabelsFile).string());
  out << nlohmann::json(p.labels).dump() << "\n";
}

ClassifierParams load_trained_classifier(const std::filesystem::path& dir) {
  std::ifstream in(dir / kClassifierLabelsFile);
  if (!in) throw io_error("no trained classifier in " + dir.string() + " (run `ilr render` first)");
  std::vector<std::string> labels;
  try {
    labels = nlohmann::json::parse(in).get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw io_error("malformed " + (dir / kClassifierLabelsFile).string() + ": " + e.what());
  }
  return load_classifier(dir / kClassifierFile, std::move(labels));
}

std::unique_ptr<Oracle> open_oracle(const RunConfig& cfg) {
  if (cfg.oracle.endpoint.empty()) return std::make_unique<BuiltinOracle>(load_trained_classifier(cfg.corpus_dir));
  ExternalOracleOptions o;
  o.handshake_timeout = std::chrono::milliseconds(std::int64_t(cfg.oracle.handshake_timeout_s * 1000.0));
  o.request_timeout = std::chrono::milliseconds(std::int64_t(cfg.oracle.request_timeout_s * 1000.0));
  return external_oracle_connect(cfg.oracle.endpoint, o);
}

}  // namespace ilr
