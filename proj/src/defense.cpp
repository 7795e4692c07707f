#include "ilr/defense.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "ilr/corpus.hpp"
#include "ilr/eval.hpp"
#include "ilr/trace.hpp"

namespace ilr {

namespace {

struct AxisLayout {
  int mask = 0;
  int stride = 0;
};

AxisLayout axis_layout(int dim, int patch) {
  const int positions = dim - patch + 1;
  if (positions < kMaskGrid)
    throw invalid_argument("patch of " + std::to_string(patch) + " px is too large to cover a " + std::to_string(dim) +
                           " px axis with a " + std::to_string(kMaskGrid) + "-mask grid");
  const int stride = (positions + kMaskGrid - 1) / kMaskGrid;
  return {patch + stride - 1, stride};
}

}  // namespace

MaskSet build_mask_set(int width, int height, int est_patch_px) {
  if (width <= 0 || height <= 0) throw invalid_argument("mask set input must be non-empty");
  if (est_patch_px < 1) throw invalid_argument("estimated patch size must be >= 1");
  const AxisLayout ax = axis_layout(width, est_patch_px), ay = axis_layout(height, est_patch_px);
  MaskSet ms;
  ms.width = width;
  ms.height = height;
  ms.mask_w = ax.mask;
  ms.mask_h = ay.mask;
  ms.stride_x = ax.stride;
  ms.stride_y = ay.stride;
  for (int r = 0; r < kMaskGrid; ++r)
    for (int c = 0; c < kMaskGrid; ++c) {
      const int x = c * ax.stride, y = r * ay.stride;
      ms.masks.push_back({x, y, std::min(ax.mask, width - x), std::min(ay.mask, height - y)});
    }
  return ms;
}

Raster apply_masks(const Raster& img, std::initializer_list<Box> boxes) {
  Raster out = img;
  for (const Box& b : boxes)
    for (int y = std::max(0, b.y); y < std::min(img.height(), b.y + b.h); ++y)
      for (int x = std::max(0, b.x); x < std::min(img.width(), b.x + b.w); ++x)
        out.set(x, y, {kMaskFill, kMaskFill, kMaskFill});
  return out;
}

CertResult two_round_certify(const Raster& img, Oracle& oracle, const MaskSet& ms) {
  if (img.width() != ms.width || img.height() != ms.height)
    throw invalid_argument("certifier input does not match the mask set geometry");
  const std::size_t n = ms.masks.size();
  std::vector<std::string> first(n);
  std::map<std::string, int> votes;
  for (std::size_t i = 0; i < n; ++i) {
    first[i] = oracle.classify(apply_masks(img, {ms.masks[i]})).top_label();
    ++votes[first[i]];
  }
  auto pair_label = [&](std::size_t i, std::size_t j) {
    return i == j ? first[i] : oracle.classify(apply_masks(img, {ms.masks[i], ms.masks[j]})).top_label();
  };

  if (votes.size() == 1) {
    CertResult r{first[0], true};
    for (std::size_t i = 0; i < n && r.certified; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (pair_label(i, j) != r.label) {
          r.certified = false;
          break;
        }
    return r;
  }

  // Map order makes the first maximum the lexicographically smallest label.
  std::string majority;
  int best = -1;
  for (const auto& [label, count] : votes)
    if (count > best) {
      best = count;
      majority = label;
    }
  for (std::size_t m = 0; m < n; ++m) {
    if (first[m] == majority) continue;
    bool agree = true;
    for (std::size_t j = 0; j < n && agree; ++j) agree = pair_label(m, j) == first[m];
    if (agree) return {first[m], false};
  }
  return {majority, false};
}

std::vector<CertRecord> certify_dataset(const std::vector<LabeledImage>& dataset, Oracle& oracle, const MaskSet& ms) {
  if (dataset.empty()) throw invalid_argument("certifier dataset is empty");
  std::vector<CertRecord> out;
  out.reserve(dataset.size());
  for (const auto& d : dataset)
    out.push_back({d.label, oracle.classify(d.image).top_label(), two_round_certify(d.image, oracle, ms)});
  return out;
}

CertMetrics certify_metrics(const std::vector<CertRecord>& records) {
  if (records.empty()) throw invalid_argument("certifier dataset is empty");
  std::size_t plain = 0, clean = 0, cert_ok = 0, cert_bad = 0;
  for (const auto& r : records) {
    plain += r.undefended == r.truth;
    const bool correct = r.cert.label == r.truth;
    clean += correct;
    if (r.cert.certified) (correct ? cert_ok : cert_bad)++;
  }
  const double n = double(records.size());
  return {records.size(), double(plain) / n, double(clean) / n, double(cert_ok) / n, double(cert_bad) / n};
}

CertMetrics certify_metrics(const std::vector<LabeledImage>& dataset, Oracle& oracle, const MaskSet& ms) {
  return certify_metrics(certify_dataset(dataset, oracle, ms));
}

CertSuite make_cert_suite(const std::vector<CorpusImage>& corpus, const TraceBuilder& builder, std::uint64_t seed,
                          double night_brightness) {
  if (!(night_brightness > 0.0)) throw invalid_argument("night brightness must be positive");
  const TraceLibrary& lib = builder.library();
  AffinePhotometricTransform night;
  night.brightness = night_brightness;
  CertSuite suite;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const CorpusImage& ci = corpus[i];
    const Box& roi = ci.entry.roi;
    suite.benign_day.push_back({resize_bilinear(crop(ci.image, roi), kClassifierInput, kClassifierInput), ci.entry.label});
    suite.benign_night.push_back(
        {apply_transform_resized(ci.image, night, 0, roi, kClassifierInput, kClassifierInput), ci.entry.label});

    const AttackScene scene{ci.image, ci.entry.polygon, roi, ci.entry.label, to_rgbd(sign_spec(ci.entry.label).base_color),
                            builder.library_lux()};
    const AttackSpace space = make_attack_space(scene.polygon, lib);
    std::mt19937_64 rng(derive_seed(seed, i, 0xa7));
    const double d = std::uniform_real_distribution<double>(space.diameter_lo, space.diameter_hi)(rng);
    const double p = std::uniform_real_distribution<double>(space.power_lo, space.power_hi)(rng);
    const Point c = sample_inset_uniform(scene.polygon, 0.5 * d * lib.scale(), rng);
    const Raster atk = attacked_image(scene, {d, p, c}, builder);
    suite.attacked.push_back({resize_bilinear(crop(atk, roi), kClassifierInput, kClassifierInput), ci.entry.label});
  }
  return suite;
}

void write_cert_report_json(const std::map<std::string, CertMetrics>& rows, const std::filesystem::path& path) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [name, m] : rows)
    j[name] = {{"count", m.count},
               {"no_defense_acc", m.no_defense_acc},
               {"clean_acc", m.clean_acc},
               {"certified_acc", m.certified_acc},
               {"miscertified_fp", m.miscertified_fp}};
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

LightMode parse_light_mode(const std::string& s) {
  if (s == "day") return LightMode::Day;
  if (s == "night") return LightMode::Night;
  throw invalid_argument("light mode must be day or night: " + s);
}

const char* to_string(LightMode m) { return m == LightMode::Day ? "day" : "night"; }

void DetectorConfig::validate() const {
  if (!(area_threshold > 0.0 && area_threshold < 1.0)) throw invalid_argument("area_threshold must be in (0, 1)");
  if (!(blur_sigma > 0.0)) throw invalid_argument("blur_sigma must be positive");
  if (blur_radius < 1) throw invalid_argument("blur_radius must be >= 1");
  if (channel_tolerance < 0.0) throw invalid_argument("channel_tolerance must be non-negative");
  if (residual_threshold < 0.0) throw invalid_argument("residual_threshold must be non-negative");
}

bool ColorBox::contains(Rgb8 c, double tolerance) const {
  const RgbD v = to_rgbd(c);
  for (int k = 0; k < 3; ++k)
    if (v[k] < lo[k] - tolerance || v[k] > hi[k] + tolerance) return false;
  return true;
}

ColorBox color_box(const DetectorConfig& cfg, LightMode mode) {
  const RgbD a = to_rgbd(mode == LightMode::Day ? cfg.day_color_a : cfg.night_color_a);
  const RgbD b = to_rgbd(mode == LightMode::Day ? cfg.day_color_b : cfg.night_color_b);
  ColorBox box;
  for (int k = 0; k < 3; ++k) {
    box.lo[k] = std::min(a[k], b[k]);
    box.hi[k] = std::max(a[k], b[k]);
  }
  return box;
}

Detection detect_speckle(const Raster& img, const Box& roi, const DetectorConfig& cfg, LightMode mode) {
  cfg.validate();
  if (roi.empty()) throw invalid_argument("detector roi is empty");
  if (roi.x < 0 || roi.y < 0 || roi.x + roi.w > img.width() || roi.y + roi.h > img.height())
    throw invalid_argument("detector roi lies outside the image");
  const Raster r = crop(img, roi);
  const int w = r.width(), h = r.height();
  std::array<std::vector<float>, 3> plane, blurred;
  for (int c = 0; c < 3; ++c) {
    plane[c] = channel_plane(r, c);
    blurred[c] = gaussian_blur(plane[c], w, h, cfg.blur_sigma, cfg.blur_radius);
  }
  const ColorBox box = color_box(cfg, mode);
  Detection d;
  d.flagged_mask = Mask(w, h);
  std::size_t hits = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!box.contains(r.at(x, y), cfg.channel_tolerance)) continue;
      const std::size_t i = std::size_t(y) * std::size_t(w) + std::size_t(x);
      double residual = 0.0;
      for (int c = 0; c < 3; ++c) residual = std::max(residual, double(std::abs(plane[c][i] - blurred[c][i])));
      if (residual > cfg.residual_threshold) {
        d.flagged_mask.put(x, y, true);
        ++hits;
      }
    }
  d.flagged_fraction = double(hits) / (double(w) * double(h));
  d.flagged = d.flagged_fraction > cfg.area_threshold;
  return d;
}

DetectorMetrics detector_metrics(const std::vector<DetectorSample>& benign, const std::vector<DetectorSample>& attacked,
                                 const DetectorConfig& cfg, LightMode mode) {
  if (benign.empty() || attacked.empty()) throw invalid_argument("detector sets must be non-empty");
  auto rate = [&](const std::vector<DetectorSample>& set) {
    std::size_t k = 0;
    for (const auto& s : set) k += detect_speckle(s.image, s.roi, cfg, mode).flagged;
    return double(k) / double(set.size());
  };
  return {rate(attacked), rate(benign)};
}

namespace {

constexpr double kNightDimming = 0.55;
constexpr double kSuiteNoiseSigma = 2.0;
constexpr double kSuiteGrainPx = 0.5;
constexpr double kSuiteDiameterLo = 15.0, kSuiteDiameterHi = 30.0;

void overlay_false_color(Raster& img, const Polygon& polygon, const ColorBox& box, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const double s = img.scale();
  double diameter = std::uniform_real_distribution<double>(kSuiteDiameterLo, kSuiteDiameterHi)(rng);
  while (diameter > 1.0 && inset_convex(polygon, 0.5 * diameter * s).empty()) diameter *= 0.9;
  const Point center = sample_inset_uniform(polygon, 0.5 * diameter * s, rng);
  const double strength = std::uniform_real_distribution<double>(0.8, 1.2)(rng);

  const int side = trace_grid_side(diameter, s);
  const Point gc{(side - 1) * 0.5, (side - 1) * 0.5};
  const Mask support = circular_mask(gc, diameter, s, side, side);
  const auto gain = speckle_gain(support, kSuiteGrainPx, derive_seed(seed, 1));
  const int ox = int(round_half_up(center.x - gc.x)), oy = int(round_half_up(center.y - gc.y));
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x) {
      if (!support.test(x, y) || !img.in_bounds(x + ox, y + oy)) continue;
      // Bright grains cover the sign with the false color, brightest at the
      // light end of the box; dark grains leave the sign visible.
      const double g = gain[std::size_t(y) * std::size_t(side) + std::size_t(x)];
      const double a = std::clamp(strength * g, 0.0, 1.0);
      const double t = std::clamp(0.5 * (g - 1.0), 0.0, 1.0);
      const RgbD base = to_rgbd(img.at(x + ox, y + oy));
      RgbD mixed;
      for (int k = 0; k < 3; ++k) mixed[k] = (1 - a) * base[k] + a * (box.lo[k] + t * (box.hi[k] - box.lo[k]));
      const Rgb8 out{to_u8(mixed[0]), to_u8(mixed[1]), to_u8(mixed[2])};
      img.set(x + ox, y + oy, out);
    }
}

}  // namespace

DetectorSuite make_detector_suite(LightMode mode, int per_set, std::uint64_t seed, double px_per_cm,
                                  const DetectorConfig& cfg) {
  if (per_set < 1) throw invalid_argument("detector suite needs at least one image per set");
  const auto classes = default_class_list();
  const ColorBox box = color_box(cfg, mode);
  AffinePhotometricTransform dim;
  dim.brightness = mode == LightMode::Day ? 1.0 : kNightDimming;
  AffinePhotometricTransform noise;
  noise.noise_sigma = kSuiteNoiseSigma;

  DetectorSuite suite;
  for (int attacked = 0; attacked < 2; ++attacked)
    for (int i = 0; i < per_set; ++i) {
      const std::string& label = classes[std::size_t(i) % classes.size()];
      const std::uint64_t s = derive_seed(seed, std::uint64_t(i), std::uint64_t(attacked));
      RenderedSign r = render_sign(sign_spec(label), px_per_cm, kDefaultBackground, derive_seed(s, 0));
      Raster img = apply_transform(r.image, dim, 0);
      if (attacked) overlay_false_color(img, r.polygon, box, derive_seed(s, 1));
      img = apply_transform(img, noise, derive_seed(s, 2));
      char name[64];
      std::snprintf(name, sizeof name, "%s_%s_%03d", attacked ? "attacked" : "benign", label.c_str(), i);
      (attacked ? suite.attacked : suite.benign).push_back({std::move(img), r.roi, name});
    }
  return suite;
}

void write_detection_csv(const std::vector<std::string>& names, const std::vector<Detection>& results,
                         const std::filesystem::path& path) {
  if (names.size() != results.size()) throw invalid_argument("detection names and results differ in length");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot write " + path.string());
  out << "path,flagged,fraction\n";
  char buf[32];
  for (std::size_t i = 0; i < names.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.6f", results[i].flagged_fraction);
    out << names[i] << "," << (results[i].flagged ? 1 : 0) << "," << buf << "\n";
  }
}

}  // namespace ilr
