#pragma once

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <map>
#include <string>
#include <vector>

#include "ilr/imaging.hpp"
#include "ilr/corpus.hpp"
#include "ilr/oracle.hpp"
#include "ilr/trace.hpp"

namespace ilr {

// ---------------------------------------------------------------------------
// Two-round masking certifier

inline constexpr int kMaskGrid = 6;
inline constexpr std::uint8_t kMaskFill = 128;

/// kMaskGrid x kMaskGrid occluding rectangles over a width x height input.
struct MaskSet {
  int width = 0;
  int height = 0;
  int rows = kMaskGrid;
  int cols = kMaskGrid;
  int mask_w = 0, mask_h = 0;
  int stride_x = 0, stride_y = 0;
  /// Row-major, clipped to the input.
  std::vector<Box> masks;
};

/// Per axis: stride = ceil((dim - p + 1) / 6), mask = p + stride - 1, so every
/// p x p patch lies inside some mask. Throws when the axis has fewer than six
/// distinct patch positions.
MaskSet build_mask_set(int width, int height, int est_patch_px);

/// Copy of img with the given boxes filled with kMaskFill.
Raster apply_masks(const Raster& img, std::initializer_list<Box> boxes);

struct CertResult {
  std::string label;
  bool certified = false;
};

CertResult two_round_certify(const Raster& img, Oracle& oracle, const MaskSet& ms);

struct LabeledImage {
  Raster image;  // classifier input
  std::string label;
};

struct CertRecord {
  std::string truth;
  std::string undefended;
  CertResult cert;
};

std::vector<CertRecord> certify_dataset(const std::vector<LabeledImage>& dataset, Oracle& oracle, const MaskSet& ms);

struct CertMetrics {
  std::size_t count = 0;
  double no_defense_acc = 0.0;
  double clean_acc = 0.0;
  double certified_acc = 0.0;
  double miscertified_fp = 0.0;
};

CertMetrics certify_metrics(const std::vector<CertRecord>& records);
CertMetrics certify_metrics(const std::vector<LabeledImage>& dataset, Oracle& oracle, const MaskSet& ms);

/// Classifier inputs built from a corpus: the ROI crops as rendered, the same
/// crops dimmed to night_brightness, and crops carrying a laser trace at a
/// seeded random diameter, power and placement.
struct CertSuite {
  std::vector<LabeledImage> benign_day;
  std::vector<LabeledImage> benign_night;
  std::vector<LabeledImage> attacked;
};

inline constexpr double kNightBrightness = 0.5;

CertSuite make_cert_suite(const std::vector<CorpusImage>& corpus, const TraceBuilder& builder, std::uint64_t seed,
                          double night_brightness = kNightBrightness);

/// {"<row>": {"no_defense_acc": .., "clean_acc": .., "certified_acc": .., "miscertified_fp": .., "count": ..}}
void write_cert_report_json(const std::map<std::string, CertMetrics>& rows, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Color-frequency speckle detector

enum class LightMode { Day, Night };

LightMode parse_light_mode(const std::string& s);
const char* to_string(LightMode m);

struct DetectorConfig {
  Rgb8 day_color_a{0xFF, 0xB2, 0x66};
  Rgb8 day_color_b{0xCC, 0x66, 0x00};
  Rgb8 night_color_a{0xCF, 0x9F, 0xFF};
  Rgb8 night_color_b{0xDA, 0x70, 0xD6};
  double channel_tolerance = 16.0;
  double blur_sigma = 2.0;
  /// Kernel radius in pixels (9 x 9 kernel at 4).
  int blur_radius = 4;
  double residual_threshold = 20.0;
  /// Fraction of the ROI that must be flagged.
  double area_threshold = 0.01;

  void validate() const;
};

struct ColorBox {
  RgbD lo{}, hi{};
  bool contains(Rgb8 c, double tolerance) const;
};

/// Axis-aligned box spanned by the two endpoint colors of the mode.
ColorBox color_box(const DetectorConfig& cfg, LightMode mode);

struct Detection {
  bool flagged = false;
  double flagged_fraction = 0.0;
  /// ROI-sized.
  Mask flagged_mask;
};

Detection detect_speckle(const Raster& img, const Box& roi, const DetectorConfig& cfg, LightMode mode);

struct DetectorSample {
  Raster image;
  Box roi;
  std::string name;
};

struct DetectorMetrics {
  double tpr = 0.0;
  double fpr = 0.0;
};

DetectorMetrics detector_metrics(const std::vector<DetectorSample>& benign, const std::vector<DetectorSample>& attacked,
                                 const DetectorConfig& cfg, LightMode mode);

struct DetectorSuite {
  std::vector<DetectorSample> benign;
  std::vector<DetectorSample> attacked;
};

/// Corpus renders with camera noise, and the same kind of renders overlaid
/// with a false-color speckle disk: alpha-blended toward a color drawn from the
/// mode's color box, weighted by a speckle gain field. Night scenes are dimmed.
DetectorSuite make_detector_suite(LightMode mode, int per_set, std::uint64_t seed, double px_per_cm = kDefaultPxPerCm,
                                  const DetectorConfig& cfg = {});

/// `path,flagged,fraction`
void write_detection_csv(const std::vector<std::string>& names, const std::vector<Detection>& results,
                         const std::filesystem::path& path);

}  // namespace ilr
