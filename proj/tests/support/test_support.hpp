#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "ilr/corpus.hpp"
#include "ilr/imaging.hpp"

namespace ilr::test {

inline std::filesystem::path tmp_dir(const std::string& name) {
  const auto dir = std::filesystem::path(ILR_TEST_TMP) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline Raster random_raster(int w, int h, std::uint64_t seed, double px_per_cm = kDefaultPxPerCm) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> d(0, 255);
  Raster r(w, h, px_per_cm);
  for (auto& b : r.bytes()) b = std::uint8_t(d(rng));
  return r;
}

inline Raster uniform_raster(int w, int h, Rgb8 c, double px_per_cm = kDefaultPxPerCm) { return Raster(w, h, px_per_cm, c); }

/// Built-in classifier trained on a small default-class corpus, shared by tests.
inline const ClassifierParams& small_classifier() {
  static const ClassifierParams p = [] {
    TrainConfig cfg;
    cfg.iterations = 300;
    return train_builtin_classifier(render_corpus(default_class_list(), 12, 5), 2, cfg).params;
  }();
  return p;
}

}  // namespace ilr::test
