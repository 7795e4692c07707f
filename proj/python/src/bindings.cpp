#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "ilr/config.hpp"
#include "ilr/defense.hpp"
#include "ilr/oracle.hpp"
#include "ilr/physics.hpp"
#include "ilr/pipeline.hpp"

namespace py = pybind11;
using namespace ilr;

namespace {

using ImageArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

Raster to_raster(const ImageArray& a, double px_per_cm) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw invalid_argument("expected an (H, W, 3) uint8 array");
  const auto h = int(a.shape(0)), w = int(a.shape(1));
  std::vector<std::uint8_t> bytes(a.data(), a.data() + a.size());
  return Raster(w, h, px_per_cm, std::move(bytes));
}

ImageArray to_array(const Raster& r) {
  ImageArray a({py::ssize_t(r.height()), py::ssize_t(r.width()), py::ssize_t(3)});
  std::copy(r.bytes().begin(), r.bytes().end(), a.mutable_data());
  return a;
}

py::tuple box_tuple(const Box& b) { return py::make_tuple(b.x, b.y, b.w, b.h); }

Box to_box(const py::sequence& s) {
  if (py::len(s) != 4) throw invalid_argument("box must be (x, y, w, h)");
  return {s[0].cast<int>(), s[1].cast<int>(), s[2].cast<int>(), s[3].cast<int>()};
}

py::list polygon_list(const Polygon& p) {
  py::list out;
  for (const auto& v : p) out.append(py::make_tuple(v.x, v.y));
  return out;
}

py::dict scores_dict(const ScoreVector& s) {
  py::dict d;
  for (const auto& [k, v] : s.scores()) d[py::str(k)] = v;
  return d;
}

py::object json_to_py(const nlohmann::ordered_json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

}  // namespace

PYBIND11_MODULE(_ilr, m) {
  m.doc() = "Infrared laser reflection attack simulator";

  auto& error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<OracleError>(m, "OracleError", error.ptr());

  m.attr("DEFAULT_PX_PER_CM") = kDefaultPxPerCm;
  m.attr("CLASSIFIER_INPUT") = kClassifierInput;

  // Physics
  m.def("mpe", &mpe, py::arg("wavelength_nm"));
  m.def(
      "beam_power_at_sign",
      [](double power_mw, double divergence_deg, double distance_m, double wavelength_nm) {
        return beam_power_at_sign({power_mw, divergence_deg, distance_m, wavelength_nm});
      },
      py::arg("power_mw"), py::arg("divergence_deg") = 0.75, py::arg("distance_m") = 3.0,
      py::arg("wavelength_nm") = 780.0);
  m.def(
      "safety_check",
      [](double power_mw, double diameter_cm, double wavelength_nm) {
        const SafetyReport r = safety_check(power_mw, diameter_cm, wavelength_nm);
        py::dict d;
        d["irradiance_mw_cm2"] = r.irradiance_mw_cm2;
        d["mpe_mw_cm2"] = r.mpe_mw_cm2;
        d["mpe_ratio"] = r.mpe_ratio;
        d["min_safe_diameter_cm"] = r.min_safe_diameter_cm;
        d["diameter_scale_factor"] = r.diameter_scale_factor;
        return d;
      },
      py::arg("power_mw"), py::arg("diameter_cm"), py::arg("wavelength_nm") = 780.0);
  m.def(
      "intensity_offset",
      [](double power_mw, double diameter_cm, double ambient_lux) {
        return intensity_offset(IntensityModel{}, power_mw, diameter_cm, ambient_lux);
      },
      py::arg("power_mw"), py::arg("diameter_cm"), py::arg("ambient_lux") = 100.0);
  m.def(
      "min_visible_power",
      [](double diameter_cm, double ambient_lux) { return min_visible_power(IntensityModel{}, diameter_cm, ambient_lux); },
      py::arg("diameter_cm"), py::arg("ambient_lux") = 100.0);

  // Corpus and scenes
  m.def("class_list", &default_class_list);
  m.def(
      "sign_scene",
      [](const std::string& label, double px_per_cm) {
        const AttackScene s = sign_scene(label, px_per_cm);
        py::dict d;
        d["image"] = to_array(s.base);
        d["polygon"] = polygon_list(s.polygon);
        d["roi"] = box_tuple(s.roi);
        d["label"] = s.true_label;
        return d;
      },
      py::arg("label"), py::arg("px_per_cm") = kDefaultPxPerCm);
  m.def(
      "crop_roi",
      [](const ImageArray& img, const py::sequence& roi, double delta, std::uint64_t seed) {
        return to_array(crop_roi(to_raster(img, kDefaultPxPerCm), to_box(roi), RoiNoise{delta}, seed));
      },
      py::arg("image"), py::arg("roi"), py::arg("delta") = 0.0, py::arg("seed") = 0);

  // Oracles
  py::class_<Oracle, std::shared_ptr<Oracle>>(m, "Oracle")
      .def("classify",
           [](Oracle& o, const ImageArray& img) {
             const Raster r = to_raster(img, kDefaultPxPerCm);
             ScoreVector s;
             {
               py::gil_scoped_release release;
               s = o.classify(r);
             }
             return scores_dict(s);
           },
           py::arg("image"))
      .def_property_readonly("labels", &Oracle::labels);

  py::class_<BuiltinOracle, Oracle, std::shared_ptr<BuiltinOracle>>(m, "BuiltinOracle")
      .def_static(
          "load",
          [](const std::filesystem::path& weights, std::vector<std::string> labels) {
            return std::make_shared<BuiltinOracle>(load_classifier(weights, std::move(labels)));
          },
          py::arg("weights"), py::arg("labels"))
      .def_static(
          "train",
          [](int per_class, std::uint64_t seed, int iterations) {
            RunConfig cfg = parse_config("seed = " + std::to_string(seed) + "\n");
            cfg.corpus.per_class = per_class;
            cfg.corpus.train.iterations = iterations;
            return std::make_shared<BuiltinOracle>(render_and_train(cfg).trained.params);
          },
          py::arg("per_class") = 12, py::arg("seed") = 1, py::arg("iterations") = 300)
      .def("save", [](const BuiltinOracle& o, const std::filesystem::path& p) { save_classifier(o.params(), p); },
           py::arg("path"))
      .def_property_readonly("feature_count", [](const BuiltinOracle& o) { return o.params().feature_count; })
      .def_property_readonly("weights", [](const BuiltinOracle& o) { return o.params().weights; })
      .def_property_readonly("bias", [](const BuiltinOracle& o) { return o.params().bias; });
  m.def(
      "classifier_features",
      [](const ImageArray& img) { return classifier_features(to_raster(img, kDefaultPxPerCm)); }, py::arg("image"));

  py::class_<ExternalOracle, Oracle, std::shared_ptr<ExternalOracle>>(m, "ExternalOracle")
      .def_static(
          "connect",
          [](const std::string& endpoint, double handshake_s, double request_s) {
            ExternalOracleOptions o;
            o.handshake_timeout = std::chrono::milliseconds(long(handshake_s * 1000));
            o.request_timeout = std::chrono::milliseconds(long(request_s * 1000));
            return std::shared_ptr<ExternalOracle>(external_oracle_connect(endpoint, o));
          },
          py::arg("endpoint"), py::arg("handshake_timeout_s") = 5.0, py::arg("request_timeout_s") = 30.0);

  m.def(
      "encode_classify_request",
      [](std::uint64_t id, const ImageArray& img) { return encode_classify_request(id, to_raster(img, kDefaultPxPerCm)); },
      py::arg("id"), py::arg("image"));

  // Optimizer
  m.def(
      "tpe_minimize",
      [](const std::function<double(const std::vector<double>&)>& f, const TpeBounds& bounds, int budget, int startup,
         std::uint64_t seed) {
        TpeConfig cfg;
        cfg.budget = budget;
        cfg.startup = startup;
        cfg.seed = seed;
        const TpeResult r = tpe_minimize(f, bounds, cfg);
        return py::make_tuple(r.best.x, r.best.loss);
      },
      py::arg("objective"), py::arg("bounds"), py::arg("budget") = 100, py::arg("startup") = 10, py::arg("seed") = 0);

  // Defenses
  m.def(
      "mask_set",
      [](int width, int height, int patch) {
        py::list out;
        for (const Box& b : build_mask_set(width, height, patch).masks) out.append(box_tuple(b));
        return out;
      },
      py::arg("width"), py::arg("height"), py::arg("patch_px"));
  m.def(
      "certify",
      [](const ImageArray& img, Oracle& oracle, int patch) {
        const Raster r = to_raster(img, kDefaultPxPerCm);
        const CertResult c = two_round_certify(r, oracle, build_mask_set(r.width(), r.height(), patch));
        return py::make_tuple(c.label, c.certified);
      },
      py::arg("image"), py::arg("oracle"), py::arg("patch_px"));
  m.def(
      "detect_speckle",
      [](const ImageArray& img, const py::sequence& roi, const std::string& mode) {
        const Detection d =
            detect_speckle(to_raster(img, kDefaultPxPerCm), to_box(roi), DetectorConfig{}, parse_light_mode(mode));
        return py::make_tuple(d.flagged, d.flagged_fraction);
      },
      py::arg("image"), py::arg("roi"), py::arg("mode") = "day");

  // Config
  m.def(
      "parse_config",
      [](const std::string& text, const std::map<std::string, std::string>& overrides) {
        return json_to_py(config_to_json(parse_config(text, overrides)));
      },
      py::arg("text"), py::arg("overrides") = std::map<std::string, std::string>{});
  m.def(
      "config_hash", [](const std::string& text) { return config_hash(parse_config(text)); }, py::arg("text"));
  m.def(
      "seed_plan", [](std::uint64_t seed) { return json_to_py(seed_plan_json(seed_plan(seed))); }, py::arg("seed"));
}
