#pragma once

// Convolution quadrature by diagonalisation over a circle of radius rho:
// the N+1 time samples, zero-padded to L = padding (N+1), are mapped to L
// Laplace parameters s_l = delta(rho e^{-2 pi i l/L}) / dt, every frequency
// is solved independently, and a scaled inverse DFT returns the causal time
// series. Padding pushes the cyclic wrap-around error from rho^{N+1} to
// rho^{2N+2}.

#include "bfe/coupled_solver.hpp"

#include <unsupported/Eigen/FFT>

#include <chrono>

namespace bfe {

enum class CQRule { BDF1, BDF2, Trapezoidal };

inline CQRule cq_rule_from(const std::string& name) {
  if (name == "bdf1") return CQRule::BDF1;
  if (name == "bdf2") return CQRule::BDF2;
  if (name == "trapezoidal") return CQRule::Trapezoidal;
  throw ConfigError("unknown CQ rule '" + name + "' (expected bdf1, bdf2 or trapezoidal)");
}

inline std::string cq_rule_name(CQRule r) {
  switch (r) {
    case CQRule::BDF1: return "bdf1";
    case CQRule::BDF2: return "bdf2";
    case CQRule::Trapezoidal: return "trapezoidal";
  }
  return "?";
}

inline int cq_rule_order(CQRule r) { return r == CQRule::BDF1 ? 1 : 2; }

/// Generating function of the linear multistep method.
inline Complex cq_delta(CQRule r, Complex z) {
  switch (r) {
    case CQRule::BDF1: return 1.0 - z;
    case CQRule::BDF2: return (1.0 - z) + 0.5 * (1.0 - z) * (1.0 - z);
    case CQRule::Trapezoidal: return 2.0 * (1.0 - z) / (1.0 + z);
  }
  return 0.0;
}

struct CQPlan {
  CQRule rule = CQRule::BDF2;
  double dt = 0.05;
  int n_steps = 0;
  double rho = 1.0;
  int padding = 2;
  std::vector<Complex> s;  // padding (N+1) frequencies

  int samples() const { return n_steps + 1; }
  int size() const { return padding * (n_steps + 1); }
  double time(int n) const { return n * dt; }
  /// Index of the conjugate partner: s[conj_index(l)] == conj(s[l]).
  int conj_index(int l) const { return l == 0 ? 0 : size() - l; }
  /// Frequencies that need a solve when the data are real.
  int independent() const { return size() / 2 + 1; }

  /// rho = eps_target^{1/(2N)}.
  static CQPlan make(CQRule rule, double dt, int n_steps, double eps_target = 1e-10, int padding = 2) {
    if (!(dt > 0) || !std::isfinite(dt)) throw ConfigError("CQ time step must be positive");
    if (n_steps < 1) throw ConfigError("CQ needs at least one time step");
    if (!(eps_target > 0 && eps_target < 1)) throw ConfigError("CQ eps_target must lie in (0, 1)");
    if (padding < 1) throw ConfigError("CQ padding factor must be >= 1");
    CQPlan p;
    p.padding = padding;
    p.rule = rule;
    p.dt = dt;
    p.n_steps = n_steps;
    p.rho = std::pow(eps_target, 1.0 / (2.0 * n_steps));
    const int L = p.size();
    p.s.resize(L);
    for (int l = 0; l < L; ++l) {
      const Complex z = p.rho * std::exp(Complex(0, -2.0 * kPi * l / L));
      p.s[l] = cq_delta(rule, z) / dt;
      if (!(p.s[l].real() > 0))
        throw SolverError("CQ frequency " + std::to_string(l) + " left the right half plane (Re s = " +
                          std::to_string(p.s[l].real()) + ")");
    }
    return p;
  }
  static CQPlan make(const CQSettings& c, double eps_target = 1e-10) {
    return make(cq_rule_from(c.rule), c.dt, c.steps, eps_target);
  }

  /// Largest mismatch |s[L-l] - conj(s[l])|, relative to max |s|.
  double conjugate_defect() const {
    double d = 0, m = 0;
    for (int l = 0; l < size(); ++l) {
      d = std::max(d, std::abs(s[conj_index(l)] - std::conj(s[l])));
      m = std::max(m, std::abs(s[l]));
    }
    return d / m;
  }
};

// ---------------------------------------------------------------------------
// Transforms. Samples are rows (time index), columns are components.

/// hat_l = sum_j rho^j g_j e^{-2 pi i j l / L}, samples j > N taken as zero.
inline MatrixXc cq_forward(const CQPlan& p, const MatrixXc& g) {
  const int L = p.size(), n = p.samples();
  if (g.rows() != n) throw DimensionError("CQ forward transform needs " + std::to_string(n) + " samples");
  Eigen::FFT<double> fft;
  MatrixXc out(L, g.cols());
  VectorXc col = VectorXc::Zero(L), hat(L);
  for (Eigen::Index c = 0; c < g.cols(); ++c) {
    double r = 1;
    for (int j = 0; j < n; ++j, r *= p.rho) col[j] = r * g(j, c);
    fft.fwd(hat, col);
    out.col(c) = hat;
  }
  return out;
}

/// y_n = rho^{-n} (1/L) sum_l hat_l e^{2 pi i n l / L}, n = 0..N.
inline MatrixXc cq_inverse(const CQPlan& p, const MatrixXc& hat) {
  const int L = p.size();
  if (hat.rows() != L) throw DimensionError("CQ inverse transform needs " + std::to_string(L) + " frequencies");
  Eigen::FFT<double> fft;
  MatrixXc out(p.samples(), hat.cols());
  VectorXc col(L), y(L);
  for (Eigen::Index c = 0; c < hat.cols(); ++c) {
    col = hat.col(c);
    fft.inv(y, col);
    double r = 1;
    for (int n = 0; n < p.samples(); ++n, r /= p.rho) out(n, c) = r * y[n];
  }
  return out;
}

/// Fills the rows l > L/2 from their conjugate partners (real time data).
inline void fill_conjugates(const CQPlan& p, MatrixXc& hat) {
  for (int l = p.independent(); l < p.size(); ++l) hat.row(l) = hat.row(p.conj_index(l)).conjugate();
}

// ---------------------------------------------------------------------------
// Scalar convolution

/// Convolution with a scalar transfer function K(s): symbol values are
/// fixed at plan time and applied to any causal sample sequence.
struct CQConvolution {
  CQPlan plan;
  VectorXc symbol;  // K(s_l)

  static CQConvolution make(const CQPlan& p, const std::function<Complex(Complex)>& K) {
    CQConvolution c;
    c.plan = p;
    c.symbol.resize(p.size());
    for (int l = 0; l < p.size(); ++l) {
      const Complex v = K(p.s[l]);
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
        throw SolverError("symbol is not finite at " + detail::s_string(LaplaceParameter(p.s[l])));
      c.symbol[l] = v;
    }
    return c;
  }

  VectorXc apply(const VectorXc& g) const {
    MatrixXc hat = cq_forward(plan, g);
    hat.col(0).array() *= symbol.array();
    return cq_inverse(plan, hat).col(0);
  }
  std::vector<double> apply(const std::vector<double>& g) const {
    VectorXc gc(static_cast<Eigen::Index>(g.size()));
    for (std::size_t j = 0; j < g.size(); ++j) gc[static_cast<Eigen::Index>(j)] = g[j];
    const VectorXc y = apply(gc);
    std::vector<double> out(g.size());
    for (std::size_t j = 0; j < g.size(); ++j) out[j] = y[static_cast<Eigen::Index>(j)].real();
    return out;
  }

  /// Quadrature weights w_0..w_N with (K * g)_n = sum_j w_{n-j} g_j.
  VectorXc weights() const {
    VectorXc e = VectorXc::Zero(plan.samples());
    e[0] = 1;
    return apply(e);
  }
};

/// Samples f(t_n), n = 0..N.
inline std::vector<double> sample(const CQPlan& p, const std::function<double(double)>& f) {
  std::vector<double> v(p.samples());
  for (int n = 0; n < p.samples(); ++n) v[n] = f(p.time(n));
  return v;
}

// ---------------------------------------------------------------------------
// Time-domain transmission problem

/// Load vectors sampled at t_n. The hypersingular-row data are split off in
/// B because they carry one time derivative of the incident field:
/// rhs_l = A_hat_l + s_l B_hat_l uses the discrete derivative of the rule.
struct TimeData {
  MatrixXc A, B;  // rows t_n, columns system dofs
};

namespace detail {
/// Load rows at time t with the wavelets evaluated through eval(w, t, k):
/// k = 0 for the boundary values, k = 1 for the normal-derivative datum.
inline std::pair<VectorXc, VectorXc> sampled_loads(const CoupledContext& ctx, const ProblemConfig& cfg, double t,
                                                   const std::function<double(const Wavelet&, double, int)>& eval) {
  const auto& mat = ctx.mat;
  const auto& inc = cfg.incident;
  const bool has_inc = inc.type == "plane_wave" && inc.amplitude != 0.0 && inc.wavelet.type != "none";
  const Vec3 dir = inc.direction.normalized();
  auto delay = [&](const Vec3& x) { return t - (dir.dot(x) + inc.offset) / mat.sound_c; };
  LoadData a, b;
  if (has_inc) {
    a.g_u = [&](const Vec3& x, const Vec3& nrm) {
      return CVec3(-inc.amplitude * eval(inc.wavelet, delay(x), 0) * nrm.cast<Complex>());
    };
    // d_n p_inc = -(n.d)/c f'(t - tau); the derivative is supplied by the caller (s in the Laplace domain)
    b.g_p = [&](const Vec3& x, const Vec3& nrm) {
      return Complex(-nrm.dot(dir) / (mat.sound_c * mat.rho_f) * inc.amplitude * eval(inc.wavelet, delay(x), 1));
    };
  }
  const double ft = cfg.f_theta.amplitude == 0.0 ? 0.0 : cfg.f_theta.amplitude * eval(cfg.f_theta.wavelet, t, 0);
  const double fd = cfg.f_D.amplitude == 0.0 ? 0.0 : cfg.f_D.amplitude * eval(cfg.f_D.wavelet, t, 0);
  if (ft != 0.0) a.g_theta = [&](const Vec3&, const Vec3&) { return Complex(ft / mat.T0); };
  if (fd != 0.0) a.g_phi = [&](const Vec3&, const Vec3&) { return Complex(-fd); };
  return {assemble_loads(ctx, a), b.g_p ? assemble_loads(ctx, b) : VectorXc::Zero(ctx.layout.size)};
}

inline void require_samples(const ProblemConfig& cfg) {
  auto need = [](const Wavelet& w, bool active, const char* name) {
    if (active && !w.has_samples())
      throw ConfigError(std::string(name) + " wavelet '" + w.type +
                        "' has no time samples; the time-domain driver needs a causal signal");
  };
  const auto& inc = cfg.incident;
  need(inc.wavelet, inc.type == "plane_wave" && inc.amplitude != 0.0, "incident");
  need(cfg.f_theta.wavelet, cfg.f_theta.amplitude != 0.0, "f_theta");
  need(cfg.f_D.wavelet, cfg.f_D.amplitude != 0.0, "f_D");
}
}  // namespace detail

inline TimeData time_data(const CoupledContext& ctx, const ProblemConfig& cfg, const CQPlan& plan) {
  detail::require_samples(cfg);
  const int L = plan.samples();
  TimeData td{MatrixXc::Zero(L, ctx.layout.size), MatrixXc::Zero(L, ctx.layout.size)};
  const auto eval = [](const Wavelet& w, double t, int) { return w(t); };
  for (int n = 0; n < L; ++n) {
    auto [a, b] = detail::sampled_loads(ctx, cfg, plan.time(n), eval);
    td.A.row(n) = a.transpose();
    td.B.row(n) = b.transpose();
  }
  return td;
}

/// Earliest time at which any datum can be non-zero on Gamma
/// (+infinity without data).
inline double data_onset(const CoupledContext& ctx, const ProblemConfig& cfg) {
  double t = std::numeric_limits<double>::infinity();
  const auto& inc = cfg.incident;
  if (inc.type == "plane_wave" && inc.amplitude != 0.0 && inc.wavelet.type != "none") {
    const Vec3 dir = inc.direction.normalized();
    double arrive = std::numeric_limits<double>::infinity();
    for (const auto& x : ctx.surf.vertices) arrive = std::min(arrive, (dir.dot(x) + inc.offset) / ctx.mat.sound_c);
    t = std::min(t, inc.wavelet.onset() + arrive);
  }
  for (const auto* d : {&cfg.f_theta, &cfg.f_D})
    if (d->amplitude != 0.0 && d->wavelet.type != "none") t = std::min(t, d->wavelet.onset());
  return t;
}

struct TimeDomainOptions {
  SolverSettings solver;
  std::vector<Vec3> points;             // exterior pressure probes
  const ExteriorLayer* layer = nullptr;  // when set, p is also returned on the layer vertices off Gamma
  bool exploit_symmetry = true;          // solve l <= L/2 only (real data)
};

struct TimeDomainResult {
  CQPlan plan;
  BlockLayout layout;
  MatrixXc hat;       // unknowns per frequency, row l
  Eigen::MatrixXd x;  // unknowns per time step, row n
  std::vector<Vec3> points;
  Eigen::MatrixXd p;      // scattered pressure at the probes, row n
  Eigen::MatrixXd layer;  // scattered pressure on the layer vertices off Gamma, row n
  double imag_residual = 0;  // max |Im| / max |Re| over the inverse transforms
  double solver_residual = 0;
  double onset = std::numeric_limits<double>::infinity();
  double seconds = 0;

  /// max |x(t_n)| over t_n < onset, relative to max |x| (0 without data).
  double causality_residual() const {
    const double peak = std::max(x.cwiseAbs().maxCoeff(), p.size() ? p.cwiseAbs().maxCoeff() : 0.0);
    if (!(peak > 0)) return 0;
    double early = 0;
    for (int n = 0; n < plan.samples() && plan.time(n) < onset; ++n) {
      early = std::max(early, x.row(n).cwiseAbs().maxCoeff());
      if (p.size()) early = std::max(early, p.row(n).cwiseAbs().maxCoeff());
    }
    return early / peak;
  }
  Eigen::VectorXd at(int n) const { return x.row(n).transpose(); }
};

using FrequencyRhs = std::function<VectorXc(int, const LaplaceParameter&)>;

namespace detail {
inline Eigen::MatrixXd real_part(const MatrixXc& z, double& imag_residual) {
  const double re = z.real().cwiseAbs().maxCoeff();
  const double im = z.imag().cwiseAbs().maxCoeff();
  imag_residual = std::max(imag_residual, re > 0 ? im / re : im);
  return z.real();
}
}  // namespace detail

/// Solves the coupled system at every CQ frequency for the given right-hand
/// sides and transforms back. With exploit_symmetry the right-hand sides must
/// come from real time data.
inline TimeDomainResult solve_frequencies(const CoupledContext& ctx, const CQPlan& plan, const FrequencyRhs& rhs,
                                          const TimeDomainOptions& opt = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  const int L = plan.size();
  const int nsolve = opt.exploit_symmetry ? plan.independent() : L;
  const int np = static_cast<int>(opt.points.size());
  std::vector<Vec3> layer_pts;
  if (opt.layer)
    layer_pts.assign(opt.layer->mesh.vertices().begin() + opt.layer->nd, opt.layer->mesh.vertices().end());
  const int nl = static_cast<int>(layer_pts.size());

  TimeDomainResult r;
  r.plan = plan;
  r.layout = ctx.layout;
  r.points = opt.points;
  r.hat = MatrixXc::Zero(L, ctx.layout.size);
  MatrixXc phat = MatrixXc::Zero(L, np), lhat = MatrixXc::Zero(L, nl);
  std::vector<double> residual(nsolve, 0.0);
  std::string failure;
#pragma omp parallel for schedule(dynamic)
  for (int l = 0; l < nsolve; ++l) {
    try {
      const LaplaceParameter s(plan.s[l]);
      const VectorXc b = rhs(l, s);
      if (b.norm() == 0.0) continue;
      const auto sys = assemble_system(ctx, s);
      const auto sol = solve(sys, b, opt.solver);
      residual[l] = sol.diag.residual;
      r.hat.row(l) = sol.x.transpose();
      if (np) phat.row(l) = evaluate_potentials(ctx.surf, sol.phi_gamma(), sol.lambda_gamma(), s,
                                                ctx.mat.sound_c, opt.points).value.transpose();
      if (nl) lhat.row(l) = evaluate_potentials(ctx.surf, sol.phi_gamma(), sol.lambda_gamma(), s,
                                                ctx.mat.sound_c, layer_pts).value.transpose();
    } catch (const std::exception& e) {
#pragma omp critical
      if (failure.empty()) failure = "CQ frequency " + std::to_string(l) + ": " + e.what();
    }
  }
  if (!failure.empty()) throw SolverError(failure);
  if (opt.exploit_symmetry) {
    fill_conjugates(plan, r.hat);
    fill_conjugates(plan, phat);
    fill_conjugates(plan, lhat);
  }
  r.solver_residual = *std::max_element(residual.begin(), residual.end());
  r.x = detail::real_part(cq_inverse(plan, r.hat), r.imag_residual);
  r.p = np ? detail::real_part(cq_inverse(plan, phat), r.imag_residual) : Eigen::MatrixXd(plan.samples(), 0);
  r.layer = nl ? detail::real_part(cq_inverse(plan, lhat), r.imag_residual) : Eigen::MatrixXd(plan.samples(), 0);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

/// Time-domain run of the physical problem described by cfg.
inline TimeDomainResult solve_time_domain(const CoupledContext& ctx, const ProblemConfig& cfg, const CQPlan& plan,
                                          TimeDomainOptions opt = {}) {
  opt.solver = cfg.solver;
  const TimeData td = time_data(ctx, cfg, plan);
  const MatrixXc A = cq_forward(plan, td.A), B = cq_forward(plan, td.B);
  auto r = solve_frequencies(
      ctx, plan, [&](int l, const LaplaceParameter& s) -> VectorXc { return (A.row(l) + s.s() * B.row(l)).transpose(); },
      opt);
  r.onset = data_onset(ctx, cfg);
  return r;
}

// ---------------------------------------------------------------------------
// Symbol index

struct SymbolLine {
  double sigma = 1;
  std::vector<Complex> s;
  std::vector<double> norm;
  LineFit fit;      // log norm (or its running maximum) against log |s|
  LineFit raw_fit;  // log norm against log |s|
};

struct SymbolSample {
  std::vector<SymbolLine> lines;
  double mu_hat = 0;  // largest slope over the sigma lines
  double m_hat = std::numeric_limits<double>::quiet_NaN();  // intercepts against log(1/sigma)
  double r2_min = 1;
  bool envelope = true;
  bool claimed() const { return r2_min > 0.95; }
};

struct SymbolSweep {
  std::vector<double> sigma_lines{1.0};
  double omega_min = 1, omega_max = 100;
  int samples = 10;      // per line, log-spaced in omega
  bool envelope = true;  // fit the running maximum of the norm along each line
};

/// Fits ||A(s)|| ~ C sigma^{-m} |s|^mu along vertical lines s = sigma + i omega.
inline SymbolSample estimate_symbol_index(const std::function<double(const LaplaceParameter&)>& norm,
                                          const SymbolSweep& sw) {
  if (sw.samples < 8) throw ConfigError("symbol fit needs at least 8 frequencies per line");
  if (!(sw.omega_min > 0 && sw.omega_max > sw.omega_min))
    throw ConfigError("symbol fit needs 0 < omega_min < omega_max");
  if (sw.sigma_lines.empty()) throw ConfigError("symbol fit needs at least one sigma line");
  SymbolSample out;
  out.envelope = sw.envelope;
  out.mu_hat = -std::numeric_limits<double>::infinity();
  std::vector<double> lx, ly;
  for (double sigma : sw.sigma_lines) {
    SymbolLine line;
    line.sigma = sigma;
    std::vector<double> x, y, env;
    for (int k = 0; k < sw.samples; ++k) {
      const double w = sw.omega_min * std::pow(sw.omega_max / sw.omega_min, k / (sw.samples - 1.0));
      const LaplaceParameter s(sigma, w);
      const double v = norm(s);
      if (!(v > 0) || !std::isfinite(v))
        throw SolverError("operator norm is not positive and finite at " + detail::s_string(s));
      line.s.push_back(s.s());
      line.norm.push_back(v);
      x.push_back(std::log(s.abs()));
      y.push_back(std::log(v));
      env.push_back(env.empty() ? y.back() : std::max(env.back(), y.back()));
    }
    line.raw_fit = fit_line(x, y);
    line.fit = sw.envelope ? fit_line(x, env) : line.raw_fit;
    out.mu_hat = std::max(out.mu_hat, line.fit.slope);
    out.r2_min = std::min(out.r2_min, line.fit.r2);
    lx.push_back(std::log(1.0 / sigma));
    ly.push_back(line.fit.intercept);
    out.lines.push_back(std::move(line));
  }
  if (*std::max_element(lx.begin(), lx.end()) > *std::min_element(lx.begin(), lx.end()))
    out.m_hat = fit_line(lx, ly).slope;
  return out;
}

// ---------------------------------------------------------------------------
// Data operators for the time-domain bounds

/// D + 2 D' + D'' along the rows (uniform step dt): centred differences
/// inside, second-order one-sided differences at the ends.
inline Eigen::MatrixXd p2_operator(const Eigen::MatrixXd& D, double dt) {
  const Eigen::Index n = D.rows();
  if (n < 3) throw DimensionError("p2 operator needs at least 3 samples, got " + std::to_string(n));
  if (!(dt > 0)) throw ConfigError("p2 operator needs a positive time step");
  Eigen::MatrixXd d1(D.rows(), D.cols()), d2(D.rows(), D.cols());
  for (Eigen::Index i = 1; i + 1 < n; ++i) {
    d1.row(i) = (D.row(i + 1) - D.row(i - 1)) / (2 * dt);
    d2.row(i) = (D.row(i + 1) - 2 * D.row(i) + D.row(i - 1)) / (dt * dt);
  }
  d1.row(0) = (-3 * D.row(0) + 4 * D.row(1) - D.row(2)) / (2 * dt);
  d1.row(n - 1) = (3 * D.row(n - 1) - 4 * D.row(n - 2) + D.row(n - 3)) / (2 * dt);
  if (n >= 4) {
    d2.row(0) = (2 * D.row(0) - 5 * D.row(1) + 4 * D.row(2) - D.row(3)) / (dt * dt);
    d2.row(n - 1) = (2 * D.row(n - 1) - 5 * D.row(n - 2) + 4 * D.row(n - 3) - D.row(n - 4)) / (dt * dt);
  } else {
    d2.row(0) = d2.row(1);
    d2.row(n - 1) = d2.row(1);
  }
  return D + 2 * d1 + d2;
}

inline std::vector<double> p2_operator(const std::vector<double>& D, double dt) {
  const Eigen::MatrixXd r =
      p2_operator(Eigen::Map<const Eigen::MatrixXd>(D.data(), static_cast<Eigen::Index>(D.size()), 1), dt);
  return {r.data(), r.data() + r.size()};
}

/// k-th derivative of the wavelet by a centred difference of step h.
inline double wavelet_derivative(const Wavelet& w, double t, int k, double h = 1e-2) {
  if (k == 0) return w(t);
  double sum = 0, binom = 1;
  for (int j = 0; j <= k; ++j) {
    sum += (j % 2 ? -binom : binom) * w(t + (0.5 * k - j) * h);
    binom = binom * (k - j) / (j + 1);
  }
  return sum / std::pow(h, k);
}

/// Data vectors of the k-th time derivative at t_n (rows).
inline MatrixXc data_derivative_series(const CoupledContext& ctx, const ProblemConfig& cfg, const CQPlan& plan, int k,
                                       double h = 1e-2) {
  detail::require_samples(cfg);
  MatrixXc D(plan.samples(), ctx.layout.size);
  const auto eval = [k, h](const Wavelet& w, double t, int extra) { return wavelet_derivative(w, t, k + extra, h); };
  for (int n = 0; n < plan.samples(); ++n) {
    auto [a, b] = detail::sampled_loads(ctx, cfg, plan.time(n), eval);
    D.row(n) = (a + b).transpose();
  }
  return D;
}

// ---------------------------------------------------------------------------
// Bound audit

/// t^2/(1+t) max{1, t^6}
inline double bound_shape_primary(double t) { return t * t / (1 + t) * std::max(1.0, std::pow(t, 6)); }
/// t^{3/2}/(1+t)^{1/2} max{1, t^{13/2}}
inline double bound_shape_secondary(double t) {
  return std::pow(t, 1.5) / std::sqrt(1 + t) * std::max(1.0, std::pow(t, 6.5));
}

struct BoundAuditRow {
  double t = 0, solution = 0, integral = 0;
  double bound_primary = 0, bound_secondary = 0;
  double ratio_primary = 0, ratio_secondary = 0;  // 0 where the bound is not resolved
};

struct BoundAudit {
  std::vector<BoundAuditRow> rows;
  double max_ratio_primary = 0, max_ratio_secondary = 0;
  double tail_slope_primary = 0, tail_slope_secondary = 0;  // d log ratio / d log t over the second half
  bool zero_data = false;
  /// Finite ratios that do not grow over the second half of the horizon.
  bool bounded() const {
    return std::isfinite(max_ratio_primary) && std::isfinite(max_ratio_secondary) && tail_slope_primary <= 0 &&
           tail_slope_secondary <= 0;
  }
};

/// Compares the solution norms with shape(t) * int_0^t integrand. Ratios are
/// reported where the solution exceeds 1e-6 of its peak (the causality
/// threshold); below that it is CQ roundoff and the ratio carries no
/// information.
inline BoundAudit bound_audit(const std::vector<double>& t, const std::vector<double>& solution,
                              const std::vector<double>& integrand) {
  const std::size_t n = t.size();
  if (solution.size() != n || integrand.size() != n) throw DimensionError("bound audit series lengths differ");
  BoundAudit a;
  a.rows.resize(n);
  double I = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) I += 0.5 * (t[i] - t[i - 1]) * (integrand[i] + integrand[i - 1]);
    auto& r = a.rows[i];
    r.t = t[i];
    r.solution = solution[i];
    r.integral = I;
    r.bound_primary = bound_shape_primary(t[i]) * I;
    r.bound_secondary = bound_shape_secondary(t[i]) * I;
  }
  a.zero_data = !(I > 0);
  const double peak = solution.empty() ? 0.0 : *std::max_element(solution.begin(), solution.end());
  std::vector<double> lt, lp, ls;
  for (auto& r : a.rows) {
    if (a.zero_data || r.t <= 0 || !(r.integral > 0) || r.solution < 1e-6 * peak) continue;
    r.ratio_primary = r.solution / r.bound_primary;
    r.ratio_secondary = r.solution / r.bound_secondary;
    a.max_ratio_primary = std::max(a.max_ratio_primary, r.ratio_primary);
    a.max_ratio_secondary = std::max(a.max_ratio_secondary, r.ratio_secondary);
    if (r.t >= 0.5 * t.back() && r.solution > 0) {
      lt.push_back(std::log(r.t));
      lp.push_back(std::log(r.ratio_primary));
      ls.push_back(std::log(r.ratio_secondary));
    }
  }
  if (lt.size() >= 2) {
    a.tail_slope_primary = fit_line(lt, lp).slope;
    a.tail_slope_secondary = fit_line(lt, ls).slope;
  }
  return a;
}

/// ||x(t_n)|| in the unit-weighted energy norms (phi in H^1, p on the layer).
/// Needs a run with opt.layer set to the same layer.
inline std::vector<double> solution_norm_series(const CoupledContext& ctx, const ExteriorLayer& ext,
                                                const TimeDomainResult& r) {
  const int nl = ext.mesh.num_vertices() - ext.nd;
  if (r.layer.cols() != nl) throw DimensionError("time-domain run carries no exterior layer values");
  std::vector<double> out(r.plan.samples());
  CoupledSolution sol;
  sol.layout = ctx.layout;
  for (int n = 0; n < r.plan.samples(); ++n) {
    sol.x = r.x.row(n).transpose().cast<Complex>();
    VectorXc p(ext.mesh.num_vertices());
    p.head(ext.nd) = sol.phi_gamma();
    p.tail(nl) = r.layer.row(n).transpose().cast<Complex>();
    SolutionNorms s;
    s.u = energy_norm_u(ctx.forms, ctx.mat, sol.u(), 1.0);
    s.theta = energy_norm_theta(ctx.forms, ctx.mat, sol.theta(), 1.0);
    const VectorXc ph = sol.phi();
    s.phi = std::sqrt(detail::form_value(ctx.forms.L, ph) + detail::form_value(ctx.forms.M, ph));
    s.p = energy_norm_p(ext, ctx.mat, p, 1.0);
    out[n] = s.total();
  }
  return out;
}

struct TimeDomainAudit {
  TimeDomainResult run;
  std::vector<double> solution_norm;  // ||x(t_n)||
  std::vector<double> data_norm;      // ||P2 D^(3)(t_n)||
  BoundAudit audit;
};

/// Time-domain run plus the bound audit: data derivatives by finite
/// differences of the wavelets, P2 by differences along the time grid.
inline TimeDomainAudit audit_time_domain(const CoupledContext& ctx, const ExteriorLayer& ext, const ProblemConfig& cfg,
                                         const CQPlan& plan, double fd_step = 1e-2) {
  TimeDomainAudit a;
  TimeDomainOptions opt;
  opt.layer = &ext;
  a.run = solve_time_domain(ctx, cfg, plan, opt);
  a.solution_norm = solution_norm_series(ctx, ext, a.run);
  const MatrixXc D3 = data_derivative_series(ctx, cfg, plan, 3, fd_step);
  const Eigen::MatrixXd P = p2_operator(Eigen::MatrixXd(D3.real()), plan.dt);
  std::vector<double> t(plan.samples());
  a.data_norm.resize(plan.samples());
  for (int n = 0; n < plan.samples(); ++n) {
    t[n] = plan.time(n);
    a.data_norm[n] = rhs_dual_surrogate(ctx, P.row(n).transpose().cast<Complex>());
  }
  a.audit = bound_audit(t, a.solution_norm, a.data_norm);
  return a;
}

}  // namespace bfe
