#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ilr/imaging.hpp"

namespace ilr {

enum class SignShape { Octagon, Rectangle, Triangle, Circle };

struct GlyphRow {
  std::string text;
  double height_cm = 10.0;
};

struct SignSpec {
  std::string label;
  SignShape shape = SignShape::Rectangle;
  Rgb8 base_color;
  /// Border band and glyphs share this color.
  Rgb8 border_color;
  std::vector<GlyphRow> glyph_rows;
  double physical_width_cm = 75.0;
  /// Only used for rectangles; other shapes derive height from width.
  double physical_height_cm = 75.0;
  double border_fraction = 0.04;
};

/// Built-in sign catalogue: stop, yield, speedLimit25/35/55/85, doNotEnter, schoolZone.
const std::vector<SignSpec>& default_sign_specs();
const SignSpec& sign_spec(const std::string& label);
std::vector<std::string> default_class_list();

/// 5x7 bitmap for one character; rows top to bottom, bit 4 is the leftmost column.
/// Unknown characters render blank.
std::array<std::uint8_t, 7> glyph_bitmap(char ch);

struct RenderJitter {
  double rotation_deg = 0.0;
  double scale = 1.0;
  std::array<int, 3> background_shift{0, 0, 0};
};

/// Seeded jitter: rotation in [-3, 3] degrees, scale in [0.95, 1.05],
/// background shift in [-12, 12] per channel.
RenderJitter jitter_from_seed(std::uint64_t seed);

struct RenderedSign {
  Raster image;
  Polygon polygon;  // sign outline in image pixels
  Box roi;          // polygon bounds with a small margin
  /// Image position of the top-left corner of each glyph row's first cell,
  /// and the cell pitch in pixels (unjittered renders only).
  std::vector<Point> row_origins;
  std::vector<double> row_cell_px;
};

RenderedSign render_sign(const SignSpec& spec, double px_per_cm, Rgb8 background, const RenderJitter& jitter);
RenderedSign render_sign(const SignSpec& spec, double px_per_cm, Rgb8 background, std::uint64_t jitter_seed);

inline constexpr Rgb8 kDefaultBackground{96, 112, 104};

struct CorpusEntry {
  std::string path;  // relative to the corpus directory; empty for in-memory corpora
  std::string label;
  Polygon polygon;
  Box roi;
};

struct CorpusManifest {
  std::vector<CorpusEntry> entries;
  std::vector<std::string> class_list;
  std::uint64_t render_seed = 0;
  double px_per_cm = kDefaultPxPerCm;
};

struct CorpusImage {
  Raster image;
  CorpusEntry entry;
};

/// In-memory render of per_class jittered images per class.
std::vector<CorpusImage> render_corpus(const std::vector<std::string>& class_list, int per_class, std::uint64_t seed,
                                       double px_per_cm = kDefaultPxPerCm);

/// Renders to out_dir/images and writes out_dir/manifest.json.
CorpusManifest build_corpus(const std::vector<std::string>& class_list, int per_class, std::uint64_t seed,
                            const std::filesystem::path& out_dir, double px_per_cm = kDefaultPxPerCm);

void write_manifest(const CorpusManifest& m, const std::filesystem::path& path);
CorpusManifest read_manifest(const std::filesystem::path& path);
std::vector<CorpusImage> load_corpus(const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Built-in reference classifier: multinomial logistic regression over a
// 20x20 box-filtered RGB view of the 60x60 classifier input.

inline constexpr int kClassifierInput = 60;
inline constexpr int kFeatureGrid = 20;
inline constexpr int kFeatureCount = kFeatureGrid * kFeatureGrid * 3;

struct ClassifierParams {
  std::vector<std::string> labels;
  int feature_count = kFeatureCount;
  std::vector<double> weights;  // labels.size() x feature_count, row-major
  std::vector<double> bias;
};

std::vector<double> classifier_features(const Raster& input);

/// Class probabilities (softmax) for an arbitrary-size input image.
std::vector<double> classifier_probabilities(const ClassifierParams& p, const Raster& input);

struct TrainConfig {
  int iterations = 900;
  /// Step size, halved at each third of the iteration budget.
  double learning_rate = 0.4;
  double l2 = 1e-4;
  /// Fraction of each class held out for evaluation (0 trains on everything).
  double holdout_fraction = 0.0;
};

struct TrainResult {
  ClassifierParams params;
  double train_accuracy = 0.0;
  std::vector<double> holdout_class_accuracy;  // empty when holdout_fraction == 0
};

/// Trains on the 60x60 ROI crops of the corpus images.
TrainResult train_builtin_classifier(const std::vector<CorpusImage>& corpus, std::uint64_t seed,
                                     const TrainConfig& cfg = {});

/// ILRC1 binary: magic, u32 class count, u32 feature count, f64 weights, f64 bias.
void save_classifier(const ClassifierParams& p, const std::filesystem::path& path);
ClassifierParams load_classifier(const std::filesystem::path& path, std::vector<std::string> labels);

}  // namespace ilr
