#pragma once

// Problem configuration (JSON): material, incident plane wave, boundary data,
// CQ parameters, solver settings and probe points.

#include "bfe/material.hpp"
#include "bfe/quadrature.hpp"

#include <json.hpp>

#include <fstream>
#include <optional>

namespace bfe {

/// Causal scalar signal with an optional closed-form Laplace transform.
///   none            f = 0
///   unit            Laplace symbol 1 (no time samples; Laplace solves only)
///   gaussian_pulse  exp(-a (t - t0)^2) sin(omega0 t) [t > 0], t0 >= 5/sqrt(a)
///   ramp            C^4 polynomial rise from 0 to 1 over [0, rise], then 1
///   tabulated       piecewise linear through (t_k, f_k), zero before t_0
///                   (time samples only; CQ runs)
struct Wavelet {
  std::string type = "none";
  double a = 4.0, t0 = 2.5, omega0 = 2.0;
  double rise = 1.0;
  std::vector<double> tab_t, tab_f;

  static Wavelet gaussian_pulse(double a, double t0, double omega0) {
    Wavelet w;
    w.type = "gaussian_pulse";
    w.a = a;
    w.t0 = t0;
    w.omega0 = omega0;
    w.validate();
    return w;
  }
  static Wavelet ramp(double rise) {
    Wavelet w;
    w.type = "ramp";
    w.rise = rise;
    w.validate();
    return w;
  }

  void validate() const {
    if (type == "none" || type == "unit") return;
    if (type == "gaussian_pulse") {
      if (!(a > 0)) throw ConfigError("gaussian_pulse: a must be positive");
      if (!(t0 >= 5.0 / std::sqrt(a) - 1e-12))
        throw ConstraintError("gaussian_pulse: t0 = " + std::to_string(t0) + " must be >= 5/sqrt(a) = " +
                              std::to_string(5.0 / std::sqrt(a)) + " to keep the pulse causal");
      return;
    }
    if (type == "ramp") {
      if (!(rise > 0)) throw ConfigError("ramp: rise time must be positive");
      return;
    }
    if (type == "tabulated") {
      if (tab_t.size() < 2 || tab_t.size() != tab_f.size())
        throw ConfigError("tabulated wavelet needs matching t and f arrays with at least two samples");
      if (tab_t.front() < 0) throw ConfigError("tabulated wavelet must start at t >= 0");
      for (std::size_t k = 1; k < tab_t.size(); ++k)
        if (!(tab_t[k] > tab_t[k - 1])) throw ConfigError("tabulated wavelet times must increase");
      return;
    }
    throw ConfigError("unknown wavelet type '" + type + "'");
  }

  bool has_samples() const { return type != "unit"; }
  bool has_transform() const { return type != "tabulated"; }

  /// Earliest time at which the signal may be non-negligible.
  double onset() const {
    if (type == "gaussian_pulse") return std::max(0.0, t0 - 5.0 / std::sqrt(a));
    if (type == "tabulated") return tab_t.front();
    return 0.0;
  }

  double operator()(double t) const {
    if (type == "none" || t <= 0) return 0.0;
    if (type == "gaussian_pulse") return std::exp(-a * (t - t0) * (t - t0)) * std::sin(omega0 * t);
    if (type == "ramp") {
      if (t >= rise) return 1.0;
      return smoothstep(t / rise);
    }
    if (type == "tabulated") {
      if (t < tab_t.front() || t >= tab_t.back()) return t >= tab_t.back() ? tab_f.back() : 0.0;
      const auto it = std::upper_bound(tab_t.begin(), tab_t.end(), t);
      const std::size_t k = static_cast<std::size_t>(it - tab_t.begin());
      const double w = (t - tab_t[k - 1]) / (tab_t[k] - tab_t[k - 1]);
      return (1 - w) * tab_f[k - 1] + w * tab_f[k];
    }
    throw ConfigError("wavelet '" + type + "' has no time samples; use it only for Laplace-domain solves");
  }

  /// Laplace transform at s.
  Complex transform(Complex s) const {
    if (type == "none") return 0.0;
    if (type == "unit") return 1.0;
    if (type == "gaussian_pulse") {
      // lower limit extended to -infinity; the dropped tail is below exp(-a t0^2) <= exp(-25)
      auto g = [&](Complex b) { return std::exp(-b * t0 + b * b / (4 * a)); };
      const Complex w(0, omega0);
      return std::sqrt(kPi / a) * (g(s - w) - g(s + w)) / Complex(0, 2);
    }
    if (type == "ramp") return ramp_transform(s);
    throw ConfigError("wavelet '" + type +
                      "' has no closed-form Laplace transform; run it through the time-domain (CQ) driver");
  }

private:
  // 126 x^5 - 420 x^6 + 540 x^7 - 315 x^8 + 70 x^9: C^4 at both ends
  static constexpr double kRamp[10] = {0, 0, 0, 0, 0, 126, -420, 540, -315, 70};

  static double smoothstep(double x) {
    double v = 0;
    for (int k = 9; k >= 0; --k) v = v * x + kRamp[k];
    return v;
  }

  Complex ramp_transform(Complex s) const {
    const double T = rise;
    if (std::abs(s) * T > 2.0) {
      // integration by parts: int_0^T e^{-st} P = sum_k (P^(k)(0) - e^{-sT} P^(k)(T)) / s^{k+1}
      std::array<double, 10> c{};
      for (int k = 0; k < 10; ++k) c[k] = kRamp[k] / std::pow(T, k);
      Complex sum = 0, sp = s;
      for (int d = 0; d < 10; ++d) {
        double v = 0;
        for (int k = 9; k >= 0; --k) v = v * T + c[k];
        sum += (c[0] - std::exp(-s * T) * v) / sp;
        for (int k = 0; k < 9; ++k) c[k] = (k + 1) * c[k + 1];
        c[9] = 0;
        sp *= s;
      }
      return sum + std::exp(-s * T) / s;
    }
    const auto gl = quad::gauss_legendre(40);
    Complex sum = 0;
    for (std::size_t q = 0; q < gl.x.size(); ++q) {
      const double t = T * gl.x[q];
      sum += T * gl.w[q] * std::exp(-s * t) * smoothstep(t / T);
    }
    return sum + std::exp(-s * T) / s;
  }
};

struct IncidentWave {
  std::string type = "none";  // none | plane_wave
  Vec3 direction = Vec3(0, 0, 1);
  double offset = 1.0;  // p_inc(x, t) = amplitude f(t - (d.x + offset)/c)
  double amplitude = 1.0;
  Wavelet wavelet;
};

struct BoundaryDatum {
  double amplitude = 0.0;  // spatially constant on Gamma
  Wavelet wavelet;
};

struct CQSettings {
  std::string rule = "bdf2";
  double dt = 0.05;
  int steps = 200;
};

struct SolverSettings {
  double tol = 1e-8;
  std::string method = "lu";  // lu | gmres
};

struct Probe {
  std::string label;
  Vec3 x = Vec3::Zero();
};

struct ProblemConfig {
  MaterialParams material;
  IncidentWave incident;
  BoundaryDatum f_theta, f_D;
  CQSettings cq;
  SolverSettings solver;
  std::vector<Probe> probes;
  unsigned seed = 0;
  std::vector<std::string> warnings;

  void validate() {
    warnings = material.validate();
    if (incident.type != "none" && incident.type != "plane_wave")
      throw ConfigError("incident.type must be 'none' or 'plane_wave'");
    if (std::abs(incident.direction.norm() - 1.0) > 1e-12)
      throw ConfigError("incident.direction must have unit Euclidean norm (got " +
                        std::to_string(incident.direction.norm()) + ")");
    incident.wavelet.validate();
    f_theta.wavelet.validate();
    f_D.wavelet.validate();
    if (cq.rule != "bdf1" && cq.rule != "bdf2" && cq.rule != "trapezoidal")
      throw ConfigError("cq.rule must be bdf1, bdf2 or trapezoidal");
    if (!(cq.dt > 0)) throw ConfigError("cq.dt must be positive");
    if (cq.steps < 1) throw ConfigError("cq.steps must be >= 1");
    if (!(solver.tol > 0)) throw ConfigError("solver.tol must be positive");
    if (solver.method != "lu" && solver.method != "gmres") throw ConfigError("solver.method must be lu or gmres");
  }
};

namespace detail {

using nlohmann::ordered_json;

template <typename T>
T get_or(const ordered_json& j, const char* key, T def) {
  if (!j.contains(key)) return def;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("field '") + key + "' has the wrong type");
  }
}

inline Vec3 vec3_or(const ordered_json& j, const char* key, Vec3 def) {
  if (!j.contains(key)) return def;
  const auto v = get_or<std::vector<double>>(j, key, {});
  if (v.size() != 3) throw ConfigError(std::string("field '") + key + "' needs three numbers");
  return Vec3(v[0], v[1], v[2]);
}

inline void reject_unknown(const ordered_json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : keys) ok = ok || it.key() == k;
    if (!ok) throw ConfigError("unknown key '" + it.key() + "' in " + where);
  }
}

inline Wavelet wavelet_from(const ordered_json& j) {
  reject_unknown(j, {"type", "a", "t0", "omega0", "rise", "t", "f"}, "wavelet");
  Wavelet w;
  w.type = get_or<std::string>(j, "type", "none");
  w.a = get_or(j, "a", w.a);
  w.t0 = get_or(j, "t0", w.t0);
  w.omega0 = get_or(j, "omega0", w.omega0);
  w.rise = get_or(j, "rise", w.rise);
  w.tab_t = get_or<std::vector<double>>(j, "t", {});
  w.tab_f = get_or<std::vector<double>>(j, "f", {});
  return w;
}

inline ordered_json wavelet_to(const Wavelet& w) {
  ordered_json j;
  j["type"] = w.type;
  if (w.type == "gaussian_pulse") {
    j["a"] = w.a;
    j["t0"] = w.t0;
    j["omega0"] = w.omega0;
  } else if (w.type == "ramp") {
    j["rise"] = w.rise;
  } else if (w.type == "tabulated") {
    j["t"] = w.tab_t;
    j["f"] = w.tab_f;
  }
  return j;
}

inline BoundaryDatum datum_from(const ordered_json& j, const std::string& where) {
  reject_unknown(j, {"amplitude", "wavelet"}, where);
  BoundaryDatum d;
  d.amplitude = get_or(j, "amplitude", 0.0);
  if (j.contains("wavelet")) d.wavelet = wavelet_from(j.at("wavelet"));
  return d;
}

}  // namespace detail

inline ProblemConfig config_from_json(const nlohmann::ordered_json& root) {
  using detail::get_or;
  ProblemConfig c;
  detail::reject_unknown(root, {"material", "incident", "f_theta", "f_D", "cq", "solver", "probes", "seed"}, "config");
  if (root.contains("material")) {
    const auto& m = root.at("material");
    detail::reject_unknown(m,
                           {"rho_e", "lame_lambda", "lame_mu", "piezo_e", "zeta", "c_eps", "pyro_p", "dielectric_eps",
                            "T0", "rho_f", "sound_c"},
                           "material");
    auto& mp = c.material;
    mp.rho_e = get_or(m, "rho_e", mp.rho_e);
    mp.lame_lambda = get_or(m, "lame_lambda", mp.lame_lambda);
    mp.lame_mu = get_or(m, "lame_mu", mp.lame_mu);
    if (m.contains("piezo_e")) {
      const auto rows = get_or<std::vector<std::vector<double>>>(m, "piezo_e", {});
      if (rows.size() != 3) throw ConfigError("piezo_e needs 3 rows of 6 Voigt entries");
      PiezoTensor::Voigt v;
      for (int i = 0; i < 3; ++i) {
        if (rows[i].size() != 6) throw ConfigError("piezo_e needs 3 rows of 6 Voigt entries");
        for (int k = 0; k < 6; ++k) v(i, k) = rows[i][k];
      }
      mp.piezo_e = PiezoTensor(v);
    }
    mp.zeta = get_or(m, "zeta", mp.zeta);
    mp.c_eps = get_or(m, "c_eps", mp.c_eps);
    mp.pyro_p = detail::vec3_or(m, "pyro_p", mp.pyro_p);
    mp.dielectric_eps = get_or(m, "dielectric_eps", mp.dielectric_eps);
    mp.T0 = get_or(m, "T0", mp.T0);
    mp.rho_f = get_or(m, "rho_f", mp.rho_f);
    mp.sound_c = get_or(m, "sound_c", mp.sound_c);
  }
  if (root.contains("incident")) {
    const auto& j = root.at("incident");
    detail::reject_unknown(j, {"type", "direction", "offset", "amplitude", "wavelet"}, "incident");
    c.incident.type = get_or<std::string>(j, "type", "none");
    c.incident.direction = detail::vec3_or(j, "direction", c.incident.direction);
    c.incident.offset = get_or(j, "offset", c.incident.offset);
    c.incident.amplitude = get_or(j, "amplitude", c.incident.amplitude);
    if (j.contains("wavelet")) c.incident.wavelet = detail::wavelet_from(j.at("wavelet"));
  }
  if (root.contains("f_theta")) c.f_theta = detail::datum_from(root.at("f_theta"), "f_theta");
  if (root.contains("f_D")) c.f_D = detail::datum_from(root.at("f_D"), "f_D");
  if (root.contains("cq")) {
    const auto& j = root.at("cq");
    detail::reject_unknown(j, {"rule", "dt", "steps"}, "cq");
    c.cq.rule = get_or<std::string>(j, "rule", c.cq.rule);
    c.cq.dt = get_or(j, "dt", c.cq.dt);
    c.cq.steps = get_or(j, "steps", c.cq.steps);
  }
  if (root.contains("solver")) {
    const auto& j = root.at("solver");
    detail::reject_unknown(j, {"tol", "method"}, "solver");
    c.solver.tol = get_or(j, "tol", c.solver.tol);
    c.solver.method = get_or<std::string>(j, "method", c.solver.method);
  }
  if (root.contains("probes")) {
    if (!root.at("probes").is_array()) throw ConfigError("probes must be an array");
    int k = 0;
    for (const auto& p : root.at("probes")) {
      detail::reject_unknown(p, {"label", "x"}, "probe");
      c.probes.push_back({get_or<std::string>(p, "label", "p" + std::to_string(k)), detail::vec3_or(p, "x", Vec3::Zero())});
      ++k;
    }
  }
  c.seed = get_or(root, "seed", 0u);
  c.validate();
  return c;
}

inline nlohmann::ordered_json config_to_json(const ProblemConfig& c) {
  nlohmann::ordered_json j;
  const auto& m = c.material;
  auto v3 = [](const Vec3& v) { return std::vector<double>{v[0], v[1], v[2]}; };
  std::vector<std::vector<double>> pe(3, std::vector<double>(6));
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 6; ++k) pe[i][k] = m.piezo_e.voigt()(i, k);
  j["material"] = {{"rho_e", m.rho_e},     {"lame_lambda", m.lame_lambda},
                   {"lame_mu", m.lame_mu}, {"piezo_e", pe},
                   {"zeta", m.zeta},       {"c_eps", m.c_eps},
                   {"pyro_p", v3(m.pyro_p)}, {"dielectric_eps", m.dielectric_eps},
                   {"T0", m.T0},           {"rho_f", m.rho_f},
                   {"sound_c", m.sound_c}};
  j["incident"] = {{"type", c.incident.type},
                   {"direction", v3(c.incident.direction)},
                   {"offset", c.incident.offset},
                   {"amplitude", c.incident.amplitude},
                   {"wavelet", detail::wavelet_to(c.incident.wavelet)}};
  j["f_theta"] = {{"amplitude", c.f_theta.amplitude}, {"wavelet", detail::wavelet_to(c.f_theta.wavelet)}};
  j["f_D"] = {{"amplitude", c.f_D.amplitude}, {"wavelet", detail::wavelet_to(c.f_D.wavelet)}};
  j["cq"] = {{"rule", c.cq.rule}, {"dt", c.cq.dt}, {"steps", c.cq.steps}};
  j["solver"] = {{"tol", c.solver.tol}, {"method", c.solver.method}};
  j["probes"] = nlohmann::ordered_json::array();
  for (const auto& p : c.probes) j["probes"].push_back({{"label", p.label}, {"x", v3(p.x)}});
  j["seed"] = c.seed;
  return j;
}

inline ProblemConfig parse_config(const std::string& text) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(text, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  return config_from_json(j);
}

inline std::string serialize_config(const ProblemConfig& c) { return config_to_json(c).dump(2) + "\n"; }

inline ProblemConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const ConstraintError& e) {
    throw ConstraintError(path + ": " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

inline void save_config(const std::string& path, const ProblemConfig& c) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write config file '" + path + "'");
  out << serialize_config(c);
}

}  // namespace bfe
