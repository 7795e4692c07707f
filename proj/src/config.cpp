#include "ilr/config.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

namespace ilr {

namespace {

class Reader {
 public:
  explicit Reader(const toml::table& root) : root_(root) {}

  toml::node_view<const toml::node> node(const std::string& path) {
    seen_.insert(path);
    return root_.at_path(path);
  }

  template <typename T>
  void number(const std::string& path, T& out) {
    auto n = node(path);
    if (!n) return;
    if constexpr (std::is_floating_point_v<T>) {
      auto v = n.value<double>();
      if (!v) throw config_error(path + ": expected a number");
      out = T(*v);
    } else {
      auto v = n.value<std::int64_t>();
      if (!v || !n.is_integer()) throw config_error(path + ": expected an integer");
      if constexpr (std::is_unsigned_v<T>)
        if (*v < 0) throw config_error(path + ": must be non-negative");
      out = T(*v);
    }
  }

  void boolean(const std::string& path, bool& out) {
    auto n = node(path);
    if (!n) return;
    if (!n.is_boolean()) throw config_error(path + ": expected a boolean");
    out = *n.value<bool>();
  }

  void string(const std::string& path, std::string& out) {
    auto n = node(path);
    if (!n) return;
    if (!n.is_string()) throw config_error(path + ": expected a string");
    out = *n.value<std::string>();
  }

  void path(const std::string& key, std::filesystem::path& out) {
    std::string s;
    string(key, s);
    if (!s.empty()) out = s;
  }

  template <typename T>
  void list(const std::string& path, std::vector<T>& out) {
    auto n = node(path);
    if (!n) return;
    const toml::array* arr = n.as_array();
    if (!arr) throw config_error(path + ": expected an array");
    std::vector<T> v;
    for (const auto& e : *arr) {
      if constexpr (std::is_same_v<T, std::string>) {
        if (!e.is_string()) throw config_error(path + ": expected strings");
        v.push_back(*e.value<std::string>());
      } else if constexpr (std::is_floating_point_v<T>) {
        auto x = e.value<double>();
        if (!x) throw config_error(path + ": expected numbers");
        v.push_back(*x);
      } else {
        if (!e.is_integer()) throw config_error(path + ": expected integers");
        v.push_back(T(*e.value<std::int64_t>()));
      }
    }
    out = std::move(v);
  }

  void range(const std::string& path, std::pair<double, double>& out) {
    std::vector<double> v{out.first, out.second};
    list(path, v);
    if (v.size() != 2) throw config_error(path + ": expected [lo, hi]");
    out = {v[0], v[1]};
  }

  void triple(const std::string& path, std::array<double, 3>& out) {
    std::vector<double> v(out.begin(), out.end());
    list(path, v);
    if (v.size() != 3) throw config_error(path + ": expected three values");
    std::copy(v.begin(), v.end(), out.begin());
  }

  void color(const std::string& path, Rgb8& out) {
    auto n = node(path);
    if (!n) return;
    const auto s = n.value<std::string>();
    unsigned r, g, b;
    if (!s || s->size() != 7 || (*s)[0] != '#' || std::sscanf(s->c_str() + 1, "%2x%2x%2x", &r, &g, &b) != 3)
      throw config_error(path + ": expected a color \"#RRGGBB\"");
    out = {std::uint8_t(r), std::uint8_t(g), std::uint8_t(b)};
  }

  void reject_unknown() const { walk(root_, ""); }

 private:
  void walk(const toml::table& t, const std::string& prefix) const {
    for (const auto& [k, v] : t) {
      const std::string key = prefix.empty() ? std::string(k.str()) : prefix + "." + std::string(k.str());
      if (seen_.count(key)) continue;
      if (const auto* sub = v.as_table()) {
        walk(*sub, key);
        continue;
      }
      throw config_error("unknown config key: " + key);
    }
  }

  const toml::table& root_;
  std::set<std::string> seen_;
};

void apply_override(toml::table& root, const std::string& dotted, const std::string& value) {
  std::vector<std::string> parts;
  std::stringstream ss(dotted);
  for (std::string p; std::getline(ss, p, '.');) {
    if (p.empty()) throw config_error("malformed override key: " + dotted);
    parts.push_back(p);
  }
  if (parts.empty()) throw config_error("malformed override key: " + dotted);
  toml::table* t = &root;
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    auto* next = (*t)[parts[i]].as_table();
    if (!next) {
      t->insert_or_assign(parts[i], toml::table{});
      next = (*t)[parts[i]].as_table();
    }
    t = next;
  }
  toml::table parsed;
  try {
    parsed = toml::parse("v = " + value);
  } catch (const toml::parse_error&) {
    t->insert_or_assign(parts.back(), value);
    return;
  }
  t->insert_or_assign(parts.back(), *parsed.get("v"));
}

RunConfig read_config(const toml::table& root) {
  Reader r(root);
  RunConfig c;
  if (!r.node("seed")) throw config_error("config is missing the mandatory seed");
  r.number("seed", c.seed);
  r.path("paths.corpus_dir", c.corpus_dir);
  r.path("paths.library_dir", c.library_dir);
  r.path("paths.output_dir", c.output_dir);
  r.number("threads", c.threads);

  auto& co = c.corpus;
  r.list("corpus.classes", co.classes);
  r.number("corpus.per_class", co.per_class);
  r.number("corpus.px_per_cm", co.px_per_cm);
  r.number("corpus.train.iterations", co.train.iterations);
  r.number("corpus.train.learning_rate", co.train.learning_rate);
  r.number("corpus.train.l2", co.train.l2);
  r.number("corpus.train.holdout_fraction", co.train.holdout_fraction);

  auto& li = c.library;
  r.list("library.power_levels", li.power_levels);
  r.list("library.diameter_levels", li.diameter_levels);
  r.number("library.ambient_lux", li.ambient_lux);
  r.number("library.grain_px", li.grain_px);
  r.number("library.color_transfer_k", li.color_transfer_k);
  r.triple("library.model.gain", li.model.gain);
  r.number("library.model.power_knee_mw", li.model.power_knee_mw);
  r.number("library.model.size_slope", li.model.size_slope);
  r.number("library.model.ref_diameter_cm", li.model.ref_diameter_cm);
  r.number("library.model.ambient_rate", li.model.ambient_rate);
  r.number("library.model.ref_ambient_lux", li.model.ref_ambient_lux);

  auto& at = c.attack;
  r.string("attack.sign", at.sign);
  r.number("attack.emitter_distance_m", at.emitter_distance_m);
  r.number("attack.ambient_lux", at.ambient_lux);
  r.boolean("attack.saturated", at.saturated);
  r.number("attack.resource_weight", at.optimize.resource_weight);
  auto& tpe = at.optimize.tpe;
  r.number("attack.tpe.budget", tpe.budget);
  r.number("attack.tpe.startup", tpe.startup);
  r.number("attack.tpe.gamma", tpe.gamma);
  r.number("attack.tpe.candidates_per_step", tpe.candidates_per_step);
  r.number("attack.tpe.bandwidth_floor", tpe.bandwidth_floor);
  auto& eot = at.optimize.eot;
  r.number("attack.eot.samples_per_eval", eot.samples_per_eval);
  r.number("attack.eot.noise_sigma", eot.noise_sigma);
  r.range("attack.eot.brightness_range", eot.brightness_range);
  r.range("attack.eot.rotation_range_deg", eot.rotation_range_deg);
  r.range("attack.eot.shear_range", eot.shear_range);

  auto& ev = c.eval;
  auto& dep = ev.deploy;
  r.number("eval.trials", dep.trials);
  r.number("eval.deploy_noise_sigma", dep.deploy_noise_sigma);
  r.number("eval.deploy_brightness_jitter", dep.deploy_brightness_jitter);
  r.number("eval.ambient_lux", dep.ambient_lux);
  r.number("eval.roi_noise", dep.roi_noise.delta);
  r.number("eval.view.rotation_deg", dep.view.rotation_deg);
  r.number("eval.view.shear", dep.view.shear);
  r.number("eval.view.scale_x", dep.view.scale_x);
  r.number("eval.view.scale_y", dep.view.scale_y);
  r.number("eval.view.translate_x", dep.view.translate_x);
  r.number("eval.view.translate_y", dep.view.translate_y);
  r.number("eval.view.brightness", dep.view.brightness);
  r.number("eval.baseline_trials", ev.baseline_trials);
  r.list("eval.lux_levels", ev.lux_levels);
  r.list("eval.position_scales", ev.position_scales);
  r.list("eval.position_laterals", ev.position_laterals);
  r.list("eval.roi_deltas", ev.roi_deltas);
  r.number("eval.drive.frames", ev.drive_frames);
  r.number("eval.drive.far_scale", ev.drive_far_scale);
  r.number("eval.drive.near_scale", ev.drive_near_scale);
  r.number("eval.drive.lateral_start", ev.drive_lateral_start);
  r.number("eval.drive.lateral_end", ev.drive_lateral_end);

  auto& de = c.defense;
  auto& det = de.detector;
  r.color("defense.detector.day_color_a", det.day_color_a);
  r.color("defense.detector.day_color_b", det.day_color_b);
  r.color("defense.detector.night_color_a", det.night_color_a);
  r.color("defense.detector.night_color_b", det.night_color_b);
  r.number("defense.detector.channel_tolerance", det.channel_tolerance);
  r.number("defense.detector.blur_sigma", det.blur_sigma);
  r.number("defense.detector.blur_radius", det.blur_radius);
  r.number("defense.detector.residual_threshold", det.residual_threshold);
  r.number("defense.detector.area_threshold", det.area_threshold);
  r.number("defense.suite_size", de.suite_size);
  r.list("defense.patch_sizes", de.patch_sizes);
  r.number("defense.night_brightness", de.night_brightness);

  r.string("oracle.endpoint", c.oracle.endpoint);
  r.number("oracle.handshake_timeout_s", c.oracle.handshake_timeout_s);
  r.number("oracle.request_timeout_s", c.oracle.request_timeout_s);

  r.reject_unknown();
  c.validate();
  return c;
}

}  // namespace

void RunConfig::validate() const {
  try {
    if (corpus.classes.size() < 2) throw config_error("corpus.classes needs at least two labels");
    for (const auto& l : corpus.classes) sign_spec(l);
    if (corpus.per_class < 2) throw config_error("corpus.per_class must be >= 2");
    if (!(corpus.px_per_cm > 0.0)) throw config_error("corpus.px_per_cm must be positive");
    if (corpus.train.iterations < 1 || !(corpus.train.learning_rate > 0.0) || corpus.train.l2 < 0.0 ||
        corpus.train.holdout_fraction < 0.0 || corpus.train.holdout_fraction >= 1.0)
      throw config_error("corpus.train values out of range");
    if (library.power_levels.size() < 2 || library.diameter_levels.empty())
      throw config_error("library needs >= 2 power levels and >= 1 diameter level");
    if (!std::is_sorted(library.power_levels.begin(), library.power_levels.end()) ||
        !std::is_sorted(library.diameter_levels.begin(), library.diameter_levels.end()))
      throw config_error("library levels must be ascending");
    if (!(library.ambient_lux > 0.0) || !(library.grain_px > 0.0)) throw config_error("library values must be positive");
    library.model.validate();
    sign_spec(attack.sign);
    if (!(attack.emitter_distance_m > 0.0) || !(attack.ambient_lux > 0.0))
      throw config_error("attack distances and lux must be positive");
    if (attack.optimize.resource_weight < 0.0) throw config_error("attack.resource_weight must be non-negative");
    attack.optimize.tpe.validate();
    attack.optimize.eot.validate();
    eval.deploy.validate();
    if (eval.baseline_trials < 1) throw config_error("eval.baseline_trials must be >= 1");
    for (double l : eval.lux_levels)
      if (!(l > 0.0)) throw config_error("eval.lux_levels must be positive");
    for (double s : eval.position_scales)
      if (!(s > 0.0)) throw config_error("eval.position_scales must be positive");
    for (double d : eval.roi_deltas) RoiNoise{d}.validate();
    if (eval.drive_frames < 1) throw config_error("eval.drive.frames must be >= 1");
    defense.detector.validate();
    if (defense.suite_size < 1) throw config_error("defense.suite_size must be >= 1");
    if (defense.patch_sizes.empty()) throw config_error("defense.patch_sizes is empty");
    if (!(defense.night_brightness > 0.0)) throw config_error("defense.night_brightness must be positive");
    if (!(oracle.handshake_timeout_s > 0.0) || !(oracle.request_timeout_s > 0.0))
      throw config_error("oracle timeouts must be positive");
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Config) throw;
    throw config_error(e.what());
  }
}

RunConfig parse_config(const std::string& toml_text, const std::map<std::string, std::string>& overrides) {
  toml::table root;
  try {
    root = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << "config parse error: " << e.description() << " at line " << e.source().begin.line;
    throw config_error(os.str());
  }
  for (const auto& [k, v] : overrides) apply_override(root, k, v);
  return read_config(root);
}

RunConfig load_config(const std::filesystem::path& path, const std::map<std::string, std::string>& overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), overrides);
}

std::map<std::string, std::string> env_overrides(char** environ_ptr) {
  std::map<std::string, std::string> out;
  if (!environ_ptr) return out;
  for (char** e = environ_ptr; *e; ++e) {
    const std::string kv = *e;
    if (kv.rfind("ILR_", 0) != 0) continue;
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 4) continue;
    std::string key;
    const std::string raw = kv.substr(4, eq - 4);
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (raw.compare(i, 2, "__") == 0) {
        key += '.';
        ++i;
      } else {
        key += char(std::tolower(static_cast<unsigned char>(raw[i])));
      }
    }
    out[key] = kv.substr(eq + 1);
  }
  return out;
}

namespace {

std::string hex_color(Rgb8 c) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02X%02X%02X", c.r, c.g, c.b);
  return buf;
}

}  // namespace

nlohmann::ordered_json config_to_json(const RunConfig& c) {
  using J = nlohmann::ordered_json;
  const auto& t = c.attack.optimize.tpe;
  const auto& e = c.attack.optimize.eot;
  const auto& d = c.eval.deploy;
  const auto& det = c.defense.detector;
  const auto& m = c.library.model;
  return J{
      {"seed", c.seed},
      {"threads", c.threads},
      {"paths",
       {{"corpus_dir", c.corpus_dir.string()},
        {"library_dir", c.library_dir.string()},
        {"output_dir", c.output_dir.string()}}},
      {"corpus",
       {{"classes", c.corpus.classes},
        {"per_class", c.corpus.per_class},
        {"px_per_cm", c.corpus.px_per_cm},
        {"train",
         {{"iterations", c.corpus.train.iterations},
          {"learning_rate", c.corpus.train.learning_rate},
          {"l2", c.corpus.train.l2},
          {"holdout_fraction", c.corpus.train.holdout_fraction}}}}},
      {"library",
       {{"power_levels", c.library.power_levels},
        {"diameter_levels", c.library.diameter_levels},
        {"ambient_lux", c.library.ambient_lux},
        {"grain_px", c.library.grain_px},
        {"color_transfer_k", c.library.color_transfer_k},
        {"model",
         {{"gain", m.gain},
          {"power_knee_mw", m.power_knee_mw},
          {"size_slope", m.size_slope},
          {"ref_diameter_cm", m.ref_diameter_cm},
          {"ambient_rate", m.ambient_rate},
          {"ref_ambient_lux", m.ref_ambient_lux}}}}},
      {"attack",
       {{"sign", c.attack.sign},
        {"emitter_distance_m", c.attack.emitter_distance_m},
        {"ambient_lux", c.attack.ambient_lux},
        {"saturated", c.attack.saturated},
        {"resource_weight", c.attack.optimize.resource_weight},
        {"tpe",
         {{"budget", t.budget},
          {"startup", t.startup},
          {"gamma", t.gamma},
          {"candidates_per_step", t.candidates_per_step},
          {"bandwidth_floor", t.bandwidth_floor}}},
        {"eot",
         {{"samples_per_eval", e.samples_per_eval},
          {"noise_sigma", e.noise_sigma},
          {"brightness_range", {e.brightness_range.first, e.brightness_range.second}},
          {"rotation_range_deg", {e.rotation_range_deg.first, e.rotation_range_deg.second}},
          {"shear_range", {e.shear_range.first, e.shear_range.second}}}}}},
      {"eval",
       {{"trials", d.trials},
        {"deploy_noise_sigma", d.deploy_noise_sigma},
        {"deploy_brightness_jitter", d.deploy_brightness_jitter},
        {"ambient_lux", d.ambient_lux},
        {"roi_noise", d.roi_noise.delta},
        {"view",
         {{"rotation_deg", d.view.rotation_deg},
          {"shear", d.view.shear},
          {"scale_x", d.view.scale_x},
          {"scale_y", d.view.scale_y},
          {"translate_x", d.view.translate_x},
          {"translate_y", d.view.translate_y},
          {"brightness", d.view.brightness}}},
        {"baseline_trials", c.eval.baseline_trials},
        {"lux_levels", c.eval.lux_levels},
        {"position_scales", c.eval.position_scales},
        {"position_laterals", c.eval.position_laterals},
        {"roi_deltas", c.eval.roi_deltas},
        {"drive",
         {{"frames", c.eval.drive_frames},
          {"far_scale", c.eval.drive_far_scale},
          {"near_scale", c.eval.drive_near_scale},
          {"lateral_start", c.eval.drive_lateral_start},
          {"lateral_end", c.eval.drive_lateral_end}}}}},
      {"defense",
       {{"detector",
         {{"day_color_a", hex_color(det.day_color_a)},
          {"day_color_b", hex_color(det.day_color_b)},
          {"night_color_a", hex_color(det.night_color_a)},
          {"night_color_b", hex_color(det.night_color_b)},
          {"channel_tolerance", det.channel_tolerance},
          {"blur_sigma", det.blur_sigma},
          {"blur_radius", det.blur_radius},
          {"residual_threshold", det.residual_threshold},
          {"area_threshold", det.area_threshold}}},
        {"suite_size", c.defense.suite_size},
        {"patch_sizes", c.defense.patch_sizes},
        {"night_brightness", c.defense.night_brightness}}},
      {"oracle",
       {{"endpoint", c.oracle.endpoint},
        {"handshake_timeout_s", c.oracle.handshake_timeout_s},
        {"request_timeout_s", c.oracle.request_timeout_s}}},
  };
}

std::string config_hash(const RunConfig& cfg) {
  const std::string text = config_to_json(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

SeedPlan seed_plan(std::uint64_t m) {
  return {derive_seed(m, 1), derive_seed(m, 2), derive_seed(m, 3), derive_seed(m, 4), derive_seed(m, 5),
          derive_seed(m, 6), derive_seed(m, 7), derive_seed(m, 8), derive_seed(m, 9)};
}

nlohmann::ordered_json seed_plan_json(const SeedPlan& s) {
  return {{"corpus", s.corpus}, {"train", s.train},     {"library", s.library},   {"tpe", s.tpe},       {"eot", s.eot},
          {"deploy", s.deploy}, {"baseline", s.baseline}, {"detector", s.detector}, {"certify", s.certify}};
}

}  // namespace ilr
