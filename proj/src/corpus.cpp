#include "ilr/corpus.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <map>
#include <numbers>
#include <random>

#include <nlohmann/json.hpp>

namespace ilr {

namespace {

struct FontGlyph {
  char ch;
  std::array<std::uint8_t, 7> rows;
};

// Classic 5x7 dot-matrix font, uppercase letters, digits and a few symbols.
constexpr FontGlyph kFont[] = {
    {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}}, {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}}, {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
    {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}}, {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
    {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}}, {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}}, {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
    {'A', {0x0E, 0x11, 0x11, 0x11, 0x1F, 0x11, 0x11}}, {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
    {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}}, {'D', {0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C}},
    {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}}, {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
    {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}}, {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}}, {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
    {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}}, {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
    {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}}, {'N', {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11}},
    {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}}, {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
    {'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}}, {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
    {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}}, {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
    {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}}, {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
    {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A}}, {'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
    {'Y', {0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04}}, {'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
    {'#', {0x1F, 0x1F, 0x1F, 0x1F, 0x1F, 0x1F, 0x1F}}, {'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}}, {'/', {0x01, 0x01, 0x02, 0x04, 0x08, 0x10, 0x10}},
};

constexpr Rgb8 kRed{178, 34, 52};
constexpr Rgb8 kWhite{240, 240, 240};
constexpr Rgb8 kBlack{20, 20, 20};
constexpr Rgb8 kYellowGreen{154, 205, 50};

SignSpec speed_limit(const std::string& digits) {
  return {"speedLimit" + digits, SignShape::Rectangle, kWhite, kBlack,
          {{"SPEED", 7.0}, {"LIMIT", 7.0}, {digits, 24.0}}, 61.0, 76.0, 0.04};
}

// Sign outline in sign-centered centimeters, y pointing down.
Polygon outline_cm(const SignSpec& s) {
  Polygon p;
  const double w = s.physical_width_cm;
  switch (s.shape) {
    case SignShape::Octagon: {
      const double r = w / (2.0 * std::cos(std::numbers::pi / 8.0));
      for (int k = 0; k < 8; ++k) {
        const double a = std::numbers::pi / 8.0 + k * std::numbers::pi / 4.0;
        p.push_back({r * std::cos(a), r * std::sin(a)});
      }
      break;
    }
    case SignShape::Rectangle: {
      const double h = s.physical_height_cm;
      p = {{-w / 2, -h / 2}, {w / 2, -h / 2}, {w / 2, h / 2}, {-w / 2, h / 2}};
      break;
    }
    case SignShape::Triangle: {
      const double h = w * std::sqrt(3.0) / 2.0;
      p = {{-w / 2, -h / 2}, {w / 2, -h / 2}, {0.0, h / 2}};
      break;
    }
    case SignShape::Circle: {
      for (int k = 0; k < 48; ++k) {
        const double a = 2.0 * std::numbers::pi * k / 48.0;
        p.push_back({w / 2 * std::cos(a), w / 2 * std::sin(a)});
      }
      break;
    }
  }
  return p;
}

struct RowLayout {
  double top_cm, left_cm, cell_cm;
  std::string text;
};

std::vector<RowLayout> layout_rows(const SignSpec& s) {
  double total = 0.0;
  for (std::size_t i = 0; i < s.glyph_rows.size(); ++i)
    total += s.glyph_rows[i].height_cm + (i + 1 < s.glyph_rows.size() ? 0.3 * s.glyph_rows[i].height_cm : 0.0);
  // Triangles carry their text in the wider upper half.
  double y = -total / 2.0;
  if (s.shape == SignShape::Triangle) y -= s.physical_width_cm * std::sqrt(3.0) / 2.0 * 0.12;
  std::vector<RowLayout> out;
  for (const auto& r : s.glyph_rows) {
    const double cell = r.height_cm / 7.0;
    const double width = cell * (6.0 * double(r.text.size()) - 1.0);
    out.push_back({y, -width / 2.0, cell, r.text});
    y += r.height_cm * 1.3;
  }
  return out;
}

bool glyph_hit(const std::vector<RowLayout>& rows, double u, double v) {
  for (const auto& r : rows) {
    const double cy = (v - r.top_cm) / r.cell_cm;
    if (cy < 0.0 || cy >= 7.0) continue;
    const double cx = (u - r.left_cm) / r.cell_cm;
    if (cx < 0.0) continue;
    const int col = int(std::floor(cx));
    const std::size_t ch = std::size_t(col / 6);
    const int sub = col % 6;
    if (ch >= r.text.size()) continue;
    if (sub == 5) {
      // Block glyphs join into a solid bar.
      if (r.text[ch] == '#' && ch + 1 < r.text.size() && r.text[ch + 1] == '#') return true;
      continue;
    }
    const auto bm = glyph_bitmap(r.text[ch]);
    if (bm[std::size_t(int(std::floor(cy)))] & (0x10 >> sub)) return true;
  }
  return false;
}

Rgb8 shifted(Rgb8 c, const std::array<int, 3>& s) {
  return {std::uint8_t(std::clamp(int(c.r) + s[0], 0, 255)), std::uint8_t(std::clamp(int(c.g) + s[1], 0, 255)),
          std::uint8_t(std::clamp(int(c.b) + s[2], 0, 255))};
}

Raster roi_input(const Raster& img, const Box& roi) {
  return resize_bilinear(crop(img, roi), kClassifierInput, kClassifierInput);
}

}  // namespace

std::array<std::uint8_t, 7> glyph_bitmap(char ch) {
  const char up = char(std::toupper(static_cast<unsigned char>(ch)));
  for (const auto& g : kFont)
    if (g.ch == up) return g.rows;
  return {};
}

const std::vector<SignSpec>& default_sign_specs() {
  static const std::vector<SignSpec> specs = {
      {"stop", SignShape::Octagon, kRed, kWhite, {{"STOP", 18.0}}, 75.0, 75.0, 0.035},
      {"yield", SignShape::Triangle, kWhite, kRed, {{"YIELD", 8.0}}, 75.0, 75.0, 0.14},
      speed_limit("25"),
      speed_limit("35"),
      speed_limit("55"),
      speed_limit("85"),
      {"doNotEnter", SignShape::Circle, kRed, kWhite, {{"DO NOT", 7.0}, {"######", 10.0}, {"ENTER", 7.0}}, 75.0, 75.0, 0.03},
      {"schoolZone", SignShape::Rectangle, kYellowGreen, kBlack, {{"SCHOOL", 8.0}, {"ZONE", 8.0}}, 61.0, 76.0, 0.04},
  };
  return specs;
}

const SignSpec& sign_spec(const std::string& label) {
  for (const auto& s : default_sign_specs())
    if (s.label == label) return s;
  throw invalid_argument("unknown sign label: " + label);
}

std::vector<std::string> default_class_list() {
  std::vector<std::string> out;
  for (const auto& s : default_sign_specs()) out.push_back(s.label);
  return out;
}

RenderJitter jitter_from_seed(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_int_distribution<int> shift(-12, 12);
  RenderJitter j;
  j.rotation_deg = 3.0 * unit(rng);
  j.scale = 1.0 + 0.05 * unit(rng);
  for (auto& s : j.background_shift) s = shift(rng);
  return j;
}

RenderedSign render_sign(const SignSpec& spec, double px_per_cm, Rgb8 background, std::uint64_t jitter_seed) {
  return render_sign(spec, px_per_cm, background, jitter_from_seed(jitter_seed));
}

RenderedSign render_sign(const SignSpec& spec, double px_per_cm, Rgb8 background, const RenderJitter& jitter) {
  if (!(spec.physical_width_cm > 0.0)) throw invalid_argument("sign width must be positive");
  const Polygon outline = outline_cm(spec);
  double half_w = 0.0, half_h = 0.0;
  for (const auto& p : outline) {
    half_w = std::max(half_w, std::abs(p.x));
    half_h = std::max(half_h, std::abs(p.y));
  }
  // Canvas leaves a 15% margin on every side around the nominal sign.
  const int width = int(std::ceil(2.0 * half_w * px_per_cm * 1.3)) | 1;
  const int height = int(std::ceil(2.0 * half_h * px_per_cm * 1.3)) | 1;
  const Point c{(width - 1) * 0.5, (height - 1) * 0.5};

  const double th = jitter.rotation_deg * std::numbers::pi / 180.0;
  const double cs = std::cos(th), sn = std::sin(th);
  const double k = jitter.scale * px_per_cm;  // pixels per sign centimeter
  auto to_image = [&](Point q) { return Point{c.x + k * (cs * q.x - sn * q.y), c.y + k * (sn * q.x + cs * q.y)}; };

  RenderedSign out;
  out.image = Raster(width, height, px_per_cm, shifted(background, jitter.background_shift));
  for (const auto& q : outline) out.polygon.push_back(to_image(q));

  const auto rows = layout_rows(spec);
  const double border = spec.border_fraction * spec.physical_width_cm;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const double dx = (x - c.x) / k, dy = (y - c.y) / k;
      const Point q{cs * dx + sn * dy, -sn * dx + cs * dy};
      double depth;
      if (spec.shape == SignShape::Circle)
        depth = spec.physical_width_cm / 2.0 - std::hypot(q.x, q.y);
      else
        depth = inside_distance(outline, q);
      if (depth < 0.0) continue;
      const bool ink = depth < border || glyph_hit(rows, q.x, q.y);
      out.image.set(x, y, ink ? spec.border_color : spec.base_color);
    }

  const Box bb = bounding_box(out.polygon);
  const int mx = int(std::ceil(bb.w * 0.03)), my = int(std::ceil(bb.h * 0.03));
  Box roi{bb.x - mx, bb.y - my, bb.w + 2 * mx, bb.h + 2 * my};
  roi.x = std::max(0, roi.x);
  roi.y = std::max(0, roi.y);
  roi.w = std::min(width - roi.x, roi.w);
  roi.h = std::min(height - roi.y, roi.h);
  out.roi = roi;

  for (const auto& r : rows) {
    out.row_origins.push_back(to_image({r.left_cm, r.top_cm}));
    out.row_cell_px.push_back(r.cell_cm * k);
  }
  return out;
}

std::vector<CorpusImage> render_corpus(const std::vector<std::string>& class_list, int per_class, std::uint64_t seed,
                                       double px_per_cm) {
  if (per_class < 1) throw invalid_argument("per_class must be >= 1");
  std::vector<CorpusImage> out;
  for (std::size_t ci = 0; ci < class_list.size(); ++ci) {
    const SignSpec& spec = sign_spec(class_list[ci]);
    for (int i = 0; i < per_class; ++i) {
      const auto r = render_sign(spec, px_per_cm, kDefaultBackground, derive_seed(seed, ci, std::uint64_t(i)));
      out.push_back({r.image, {"", spec.label, r.polygon, r.roi}});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Manifest I/O

void write_manifest(const CorpusManifest& m, const std::filesystem::path& path) {
  nlohmann::json j;
  j["class_list"] = m.class_list;
  j["render_seed"] = m.render_seed;
  j["px_per_cm"] = m.px_per_cm;
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : m.entries) {
    nlohmann::json poly = nlohmann::json::array();
    for (const auto& p : e.polygon) poly.push_back({p.x, p.y});
    entries.push_back({{"path", e.path}, {"label", e.label}, {"polygon", poly}, {"roi", {e.roi.x, e.roi.y, e.roi.w, e.roi.h}}});
  }
  j["entries"] = entries;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw io_error("cannot write " + path.string());
  out << j.dump(2) << "\n";
  if (!out) throw io_error("write failed for " + path.string());
}

CorpusManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open manifest " + path.string());
  CorpusManifest m;
  try {
    const auto j = nlohmann::json::parse(in);
    m.class_list = j.at("class_list").get<std::vector<std::string>>();
    m.render_seed = j.at("render_seed").get<std::uint64_t>();
    m.px_per_cm = j.value("px_per_cm", kDefaultPxPerCm);
    for (const auto& e : j.at("entries")) {
      CorpusEntry ce;
      ce.path = e.at("path").get<std::string>();
      ce.label = e.at("label").get<std::string>();
      for (const auto& p : e.at("polygon")) ce.polygon.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
      const auto r = e.at("roi").get<std::vector<int>>();
      if (r.size() != 4) throw io_error("roi must have 4 entries");
      ce.roi = {r[0], r[1], r[2], r[3]};
      m.entries.push_back(std::move(ce));
    }
  } catch (const nlohmann::json::exception& e) {
    throw io_error("malformed manifest " + path.string() + ": " + e.what());
  }
  return m;
}

CorpusManifest build_corpus(const std::vector<std::string>& class_list, int per_class, std::uint64_t seed,
                            const std::filesystem::path& out_dir, double px_per_cm) {
  auto images = render_corpus(class_list, per_class, seed, px_per_cm);
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "images", ec);
  if (ec) throw io_error("cannot create " + (out_dir / "images").string());
  CorpusManifest m;
  m.class_list = class_list;
  m.render_seed = seed;
  m.px_per_cm = px_per_cm;
  std::map<std::string, int> counter;
  for (auto& ci : images) {
    char name[128];
    std::snprintf(name, sizeof name, "images/%s_%03d.png", ci.entry.label.c_str(), counter[ci.entry.label]++);
    ci.entry.path = name;
    save_image(ci.image, out_dir / name);
    m.entries.push_back(ci.entry);
  }
  write_manifest(m, out_dir / "manifest.json");
  return m;
}

std::vector<CorpusImage> load_corpus(const std::filesystem::path& dir) {
  const auto m = read_manifest(dir / "manifest.json");
  std::vector<CorpusImage> out;
  for (const auto& e : m.entries) out.push_back({load_image(dir / e.path), e});
  return out;
}

// ---------------------------------------------------------------------------
// Classifier

std::vector<double> classifier_features(const Raster& input) {
  const Raster x = resize_bilinear(input, kClassifierInput, kClassifierInput);
  constexpr int cell = kClassifierInput / kFeatureGrid;
  std::vector<double> f(kFeatureCount);
  for (int gy = 0; gy < kFeatureGrid; ++gy)
    for (int gx = 0; gx < kFeatureGrid; ++gx)
      for (int c = 0; c < 3; ++c) {
        int acc = 0;
        for (int dy = 0; dy < cell; ++dy)
          for (int dx = 0; dx < cell; ++dx) acc += x.channel(gx * cell + dx, gy * cell + dy, c);
        f[std::size_t((gy * kFeatureGrid + gx) * 3 + c)] = acc / (255.0 * cell * cell) - 0.5;
      }
  return f;
}

namespace {

void softmax_inplace(std::vector<double>& z) {
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (auto& v : z) {
    v = std::exp(v - m);
    s += v;
  }
  for (auto& v : z) v /= s;
}

std::vector<double> logits(const ClassifierParams& p, std::span<const double> f) {
  const std::size_t k = p.labels.size(), n = std::size_t(p.feature_count);
  std::vector<double> z(k);
  for (std::size_t i = 0; i < k; ++i) {
    double s = p.bias[i];
    const double* w = &p.weights[i * n];
    for (std::size_t j = 0; j < n; ++j) s += w[j] * f[j];
    z[i] = s;
  }
  return z;
}

std::size_t argmax(const std::vector<double>& v) {
  return std::size_t(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

std::vector<double> classifier_probabilities(const ClassifierParams& p, const Raster& input) {
  const auto f = classifier_features(input);
  auto z = logits(p, f);
  softmax_inplace(z);
  return z;
}

TrainResult train_builtin_classifier(const std::vector<CorpusImage>& corpus, std::uint64_t seed, const TrainConfig& cfg) {
  std::vector<std::string> labels;
  std::map<std::string, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& l = corpus[i].entry.label;
    if (!by_class.count(l)) labels.push_back(l);
    by_class[l].push_back(i);
  }
  if (labels.size() < 2) throw invalid_argument("degenerate corpus: need at least 2 classes");
  for (const auto& [l, idx] : by_class)
    if (idx.size() < 10) throw invalid_argument("degenerate corpus: class " + l + " has fewer than 10 images");

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> train_idx, hold_idx;
  std::vector<int> hold_class;
  for (std::size_t ci = 0; ci < labels.size(); ++ci) {
    auto idx = by_class[labels[ci]];
    std::shuffle(idx.begin(), idx.end(), rng);
    const std::size_t n_hold = std::size_t(std::floor(cfg.holdout_fraction * double(idx.size())));
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (i < n_hold) {
        hold_idx.push_back(idx[i]);
        hold_class.push_back(int(ci));
      } else {
        train_idx.push_back(idx[i]);
      }
    }
  }
  std::sort(train_idx.begin(), train_idx.end());

  const std::size_t k = labels.size(), n = kFeatureCount, m = train_idx.size();
  std::vector<std::vector<double>> x(m);
  std::vector<std::size_t> y(m);
  for (std::size_t i = 0; i < m; ++i) {
    const auto& ci = corpus[train_idx[i]];
    x[i] = classifier_features(roi_input(ci.image, ci.entry.roi));
    y[i] = std::size_t(std::find(labels.begin(), labels.end(), ci.entry.label) - labels.begin());
  }

  ClassifierParams p;
  p.labels = labels;
  p.weights.assign(k * n, 0.0);
  p.bias.assign(k, 0.0);
  std::normal_distribution<double> init(0.0, 0.01);
  for (auto& w : p.weights) w = init(rng);

  std::vector<double> gw(k * n), gb(k);
  for (int it = 0; it < cfg.iterations; ++it) {
    const double lr = cfg.learning_rate / double(1 << std::min(2, 3 * it / std::max(1, cfg.iterations)));
    std::fill(gw.begin(), gw.end(), 0.0);
    std::fill(gb.begin(), gb.end(), 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      auto z = logits(p, x[i]);
      softmax_inplace(z);
      z[y[i]] -= 1.0;
      for (std::size_t c = 0; c < k; ++c) {
        gb[c] += z[c];
        double* g = &gw[c * n];
        for (std::size_t j = 0; j < n; ++j) g[j] += z[c] * x[i][j];
      }
    }
    const double inv = 1.0 / double(m);
    for (std::size_t j = 0; j < k * n; ++j) p.weights[j] -= lr * (gw[j] * inv + cfg.l2 * p.weights[j]);
    for (std::size_t c = 0; c < k; ++c) p.bias[c] -= lr * gb[c] * inv;
  }

  TrainResult r;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < m; ++i)
    if (argmax(logits(p, x[i])) == y[i]) ++correct;
  r.train_accuracy = double(correct) / double(m);
  if (!hold_idx.empty()) {
    std::vector<std::size_t> hit(k, 0), tot(k, 0);
    for (std::size_t i = 0; i < hold_idx.size(); ++i) {
      const auto& ci = corpus[hold_idx[i]];
      const auto f = classifier_features(roi_input(ci.image, ci.entry.roi));
      ++tot[std::size_t(hold_class[i])];
      if (argmax(logits(p, f)) == std::size_t(hold_class[i])) ++hit[std::size_t(hold_class[i])];
    }
    for (std::size_t c = 0; c < k; ++c) r.holdout_class_accuracy.push_back(tot[c] ? double(hit[c]) / double(tot[c]) : 1.0);
  }
  r.params = std::move(p);
  return r;
}

namespace {
constexpr char kClassifierMagic[5] = {'I', 'L', 'R', 'C', '1'};
}

void save_classifier(const ClassifierParams& p, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot write " + path.string());
  out.write(kClassifierMagic, 5);
  auto put_u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.put(char((v >> (8 * i)) & 0xFF));
  };
  auto put_f64 = [&](double d) {
    const auto v = std::bit_cast<std::uint64_t>(d);
    for (int i = 0; i < 8; ++i) out.put(char((v >> (8 * i)) & 0xFF));
  };
  put_u32(std::uint32_t(p.labels.size()));
  put_u32(std::uint32_t(p.feature_count));
  for (double w : p.weights) put_f64(w);
  for (double b : p.bias) put_f64(b);
  if (!out) throw io_error("write failed for " + path.string());
}

ClassifierParams load_classifier(const std::filesystem::path& path, std::vector<std::string> labels) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path.string());
  char magic[5] = {};
  in.read(magic, 5);
  if (!in || std::memcmp(magic, kClassifierMagic, 5) != 0) throw io_error("bad classifier magic in " + path.string());
  auto get_u32 = [&] {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(static_cast<unsigned char>(in.get())) << (8 * i);
    return v;
  };
  auto get_f64 = [&] {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(static_cast<unsigned char>(in.get())) << (8 * i);
    return std::bit_cast<double>(v);
  };
  const std::uint32_t k = get_u32(), n = get_u32();
  if (!in) throw io_error("truncated classifier header in " + path.string());
  if (k != labels.size()) throw io_error("classifier class count does not match the label list");
  if (n != std::uint32_t(kFeatureCount)) throw io_error("classifier feature count is not " + std::to_string(kFeatureCount));
  ClassifierParams p;
  p.labels = std::move(labels);
  p.feature_count = int(n);
  p.weights.resize(std::size_t(k) * n);
  p.bias.resize(k);
  for (auto& w : p.weights) w = get_f64();
  for (auto& b : p.bias) b = get_f64();
  if (!in) throw io_error("truncated classifier file " + path.string());
  return p;
}

}  // namespace ilr
