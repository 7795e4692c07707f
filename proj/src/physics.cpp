#include "ilr/physics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

namespace ilr {

void BeamGeometry::validate() const {
  if (!(power_mw >= 0.0)) throw invalid_argument("beam power must be non-negative");
  if (!(divergence_deg > 0.0 && divergence_deg < 90.0)) throw invalid_argument("divergence must be in (0, 90) degrees");
  if (!(distance_m > 0.0)) throw invalid_argument("emitter distance must be positive");
  if (!(wavelength_nm >= 380.0 && wavelength_nm <= 1100.0)) throw invalid_argument("wavelength must be in [380, 1100] nm");
}

double beam_power_at_sign(const BeamGeometry& g) {
  g.validate();
  const double t = std::tan(g.divergence_deg * std::numbers::pi / 180.0);
  return g.power_mw * t * t / (4.0 * std::numbers::pi);
}

double mpe(double wavelength_nm) {
  if (!(wavelength_nm >= 700.0 && wavelength_nm <= 1050.0))
    throw invalid_argument("MPE formula is only valid for 700-1050 nm");
  const double w_um = wavelength_nm / 1000.0;
  // 10^{2(w - 0.7)} * 10^-3 W/cm^2, returned in mW/cm^2.
  return std::pow(10.0, 2.0 * (w_um - 0.7)) * 1e-3 * 1e3;
}

SafetyReport safety_check(double power_mw, double pattern_diameter_cm, double wavelength_nm) {
  if (!(power_mw >= 0.0)) throw invalid_argument("power must be non-negative");
  if (!(pattern_diameter_cm > 0.0)) throw invalid_argument("pattern diameter must be positive");
  SafetyReport r;
  r.mpe_mw_cm2 = mpe(wavelength_nm);
  const double area = std::numbers::pi * pattern_diameter_cm * pattern_diameter_cm / 4.0;
  r.irradiance_mw_cm2 = power_mw / area;
  r.mpe_ratio = r.irradiance_mw_cm2 / r.mpe_mw_cm2;
  r.min_safe_diameter_cm = std::sqrt(4.0 * power_mw / (std::numbers::pi * r.mpe_mw_cm2));
  r.diameter_scale_factor = r.min_safe_diameter_cm / pattern_diameter_cm;
  return r;
}

void IntensityModel::validate() const {
  if (gain[2] < gain[0] || gain[2] < gain[1]) throw invalid_argument("intensity model: blue gain must dominate");
  if (size_slope < 0.0) throw invalid_argument("intensity model: size slope must be non-negative");
  if (!(power_knee_mw > 0.0)) throw invalid_argument("intensity model: power knee must be positive");
  if (!(ref_diameter_cm > 0.0) || !(ref_ambient_lux > 0.0))
    throw invalid_argument("intensity model: reference levels must be positive");
}

std::array<double, 3> intensity_offset(const IntensityModel& m, double power_mw, double diameter_cm,
                                       double ambient_lux) {
  if (!(power_mw >= 0.0) || !(diameter_cm > 0.0) || !(ambient_lux > 0.0))
    throw invalid_argument("intensity_offset: power >= 0, diameter > 0, ambient > 0 required");
  std::array<double, 3> out{};
  if (power_mw == 0.0) return out;
  const double lp = std::log1p(power_mw / m.power_knee_mw);
  const double shared = -m.size_slope * (diameter_cm - m.ref_diameter_cm) +
                        m.ambient_rate * (std::log(ambient_lux) - std::log(m.ref_ambient_lux));
  for (int c = 0; c < 3; ++c) out[std::size_t(c)] = std::max(0.0, m.gain[std::size_t(c)] * lp + shared);
  return out;
}

double min_visible_power(const IntensityModel& m, double diameter_cm, double ambient_lux) {
  auto visible = [&](double p) {
    const auto o = intensity_offset(m, p, diameter_cm, ambient_lux);
    return round_half_up(*std::max_element(o.begin(), o.end())) > 0.0;
  };
  double lo = 0.0, hi = 1.0;
  while (!visible(hi)) {
    hi *= 2.0;
    if (hi > 1e7) return std::numeric_limits<double>::infinity();
  }
  for (int i = 0; i < 100; ++i) {
    const double mid = 0.5 * (lo + hi);
    (visible(mid) ? hi : lo) = mid;
  }
  return hi;
}

// ---------------------------------------------------------------------------
// Fitting

namespace {

struct Observation {
  double power, size_term, ambient_term, value;
  int channel;
};

// Parameter vector layout: gain r, g, b, knee, size slope, ambient rate.
using Params = Eigen::Matrix<double, 6, 1>;

double predict(const Params& p, const Observation& o) {
  return p[o.channel] * std::log1p(o.power / p[3]) - p[4] * o.size_term + p[5] * o.ambient_term;
}

// Linear solve for everything except the knee. Returns RSS.
double solve_linear(const std::vector<Observation>& obs, double knee, bool fit_ambient, double fixed_rate, Params& out,
                    Eigen::Index* rank = nullptr) {
  const Eigen::Index cols = fit_ambient ? 5 : 4;
  Eigen::MatrixXd a(Eigen::Index(obs.size()), cols);
  Eigen::VectorXd y(Eigen::Index(obs.size()));
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const auto& o = obs[i];
    const Eigen::Index r = Eigen::Index(i);
    a.row(r).setZero();
    a(r, o.channel) = std::log1p(o.power / knee);
    a(r, 3) = -o.size_term;
    y[r] = o.value;
    if (fit_ambient)
      a(r, 4) = o.ambient_term;
    else
      y[r] -= fixed_rate * o.ambient_term;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(1e-10);
  if (rank) *rank = qr.rank();
  const Eigen::VectorXd x = qr.solve(y);
  out << x[0], x[1], x[2], knee, x[3], fit_ambient ? x[4] : fixed_rate;
  return (a * x - y).squaredNorm();
}

}  // namespace

FitResult fit_intensity_model(const std::vector<CalibrationSample>& samples, const IntensityModel& reference) {
  std::set<double> powers, diameters;
  for (const auto& s : samples) {
    if (!(s.power_mw >= 0.0) || !(s.diameter_cm > 0.0) || !(s.ambient_lux > 0.0))
      throw invalid_argument("calibration sample out of domain");
    powers.insert(s.power_mw);
    diameters.insert(s.diameter_cm);
  }
  if (samples.size() < 6 || powers.size() < 2 || diameters.size() < 2)
    throw invalid_argument("degenerate calibration set: need >= 6 samples over >= 2 powers and >= 2 diameters");

  std::vector<Observation> obs;
  bool ambient_varies = false;
  for (const auto& s : samples) {
    const double at = std::log(s.ambient_lux) - std::log(reference.ref_ambient_lux);
    if (std::abs(at) > 1e-12) ambient_varies = true;
    for (int c = 0; c < 3; ++c)
      if (s.offset[std::size_t(c)] > 0.0 && s.power_mw > 0.0)
        obs.push_back({s.power_mw, s.diameter_cm - reference.ref_diameter_cm, at, s.offset[std::size_t(c)], c});
  }
  const Eigen::Index needed = ambient_varies ? 6 : 5;
  if (Eigen::Index(obs.size()) < needed) throw invalid_argument("degenerate calibration set: too few unfloored observations");

  // Variable projection: scan log(knee), refine by golden section, then polish
  // all parameters jointly with Gauss-Newton.
  auto rss_at = [&](double log_knee) {
    Params p;
    return solve_linear(obs, std::exp(log_knee), ambient_varies, reference.ambient_rate, p);
  };
  const double lo_bound = std::log(1e-2), hi_bound = std::log(1e4);
  constexpr int kScan = 120;
  int best_i = 0;
  double best_rss = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= kScan; ++i) {
    const double r = rss_at(lo_bound + (hi_bound - lo_bound) * i / kScan);
    if (r < best_rss) {
      best_rss = r;
      best_i = i;
    }
  }
  const double step = (hi_bound - lo_bound) / kScan;
  double a = lo_bound + step * std::max(0, best_i - 1), b = lo_bound + step * std::min(kScan, best_i + 1);
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - phi * (b - a), d = a + phi * (b - a);
  double fc = rss_at(c), fd = rss_at(d);
  for (int it = 0; it < 200 && b - a > 1e-13; ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = rss_at(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = rss_at(d);
    }
  }
  Params p;
  Eigen::Index rank = 0;
  double rss = solve_linear(obs, std::exp(0.5 * (a + b)), ambient_varies, reference.ambient_rate, p, &rank);
  if (rank < (ambient_varies ? 5 : 4)) throw invalid_argument("degenerate calibration set: rank-deficient fit");

  const int free_params = ambient_varies ? 6 : 5;
  for (int it = 0; it < 30; ++it) {
    Eigen::MatrixXd jac(Eigen::Index(obs.size()), free_params);
    Eigen::VectorXd res(Eigen::Index(obs.size()));
    for (std::size_t i = 0; i < obs.size(); ++i) {
      const auto& o = obs[i];
      const Eigen::Index r = Eigen::Index(i);
      jac.row(r).setZero();
      jac(r, o.channel) = std::log1p(o.power / p[3]);
      jac(r, 3) = -p[o.channel] * o.power / (p[3] * (p[3] + o.power));
      jac(r, 4) = -o.size_term;
      if (ambient_varies) jac(r, 5) = o.ambient_term;
      res[r] = o.value - predict(p, o);
    }
    const Eigen::VectorXd delta = jac.colPivHouseholderQr().solve(res);
    Params trial = p;
    for (int k = 0; k < free_params; ++k) trial[k] += delta[k];
    if (!(trial[3] > 0.0)) break;
    double trial_rss = 0.0;
    for (const auto& o : obs) trial_rss += std::pow(o.value - predict(trial, o), 2);
    if (!(trial_rss <= rss)) break;
    const bool converged = delta.norm() < 1e-14 * (1.0 + p.norm());
    p = trial;
    rss = trial_rss;
    if (converged) break;
  }

  FitResult result;
  result.model = reference;
  result.model.gain = {p[0], p[1], p[2]};
  result.model.power_knee_mw = p[3];
  result.model.size_slope = p[4];
  result.model.ambient_rate = p[5];
  result.residual_rms = std::sqrt(rss / double(obs.size()));
  result.observations_used = obs.size();
  return result;
}

IntensityModel calibration_ground_truth() {
  IntensityModel m;
  m.gain = {28.0, 26.0, 62.0};
  m.power_knee_mw = 10.0;
  m.size_slope = 1.12;
  m.ref_diameter_cm = 3.5;
  m.ambient_rate = -40.1;
  m.ref_ambient_lux = 100.0;
  return m;
}

std::vector<CalibrationSample> synthetic_calibration_set(const IntensityModel& truth, double noise_sigma,
                                                         std::uint64_t seed) {
  static constexpr double kPowers[] = {2.5, 5, 10, 20, 30, 40, 50, 60, 70, 80};
  static constexpr double kDiameters[] = {3.5, 7.5, 11.5, 15, 20, 25, 30};
  static constexpr double kAmbient[] = {50, 100, 200, 300};
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<CalibrationSample> out;
  for (double lux : kAmbient)
    for (double d : kDiameters)
      for (double p : kPowers) {
        CalibrationSample s{p, d, lux, {}};
        const auto clean = intensity_offset(truth, p, d, lux);
        for (int c = 0; c < 3; ++c) {
          const double v = clean[std::size_t(c)] > 0.0 ? clean[std::size_t(c)] + noise_sigma * noise(rng) : 0.0;
          s.offset[std::size_t(c)] = std::max(0.0, v);
        }
        out.push_back(s);
      }
  return out;
}

std::vector<CalibrationSample> read_calibration_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open calibration CSV " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw io_error("empty calibration CSV " + path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "power_mw,diameter_cm,ambient_lux,off_r,off_g,off_b")
    throw io_error("unexpected calibration CSV header in " + path.string());
  std::vector<CalibrationSample> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> v;
    while (std::getline(ss, cell, ',')) {
      try {
        v.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw io_error("bad number at line " + std::to_string(lineno) + " of " + path.string());
      }
    }
    if (v.size() != 6) throw io_error("expected 6 columns at line " + std::to_string(lineno) + " of " + path.string());
    out.push_back({v[0], v[1], v[2], {v[3], v[4], v[5]}});
  }
  return out;
}

void write_calibration_csv(const std::vector<CalibrationSample>& samples, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw io_error("cannot write " + path.string());
  out << "power_mw,diameter_cm,ambient_lux,off_r,off_g,off_b\n";
  out.precision(10);
  for (const auto& s : samples)
    out << s.power_mw << ',' << s.diameter_cm << ',' << s.ambient_lux << ',' << s.offset[0] << ',' << s.offset[1]
        << ',' << s.offset[2] << '\n';
  if (!out) throw io_error("write failed for " + path.string());
}

}  // namespace ilr
