#pragma once

// Verification suites. Every check returns a Report whose entries carry the
// measured value, the bound and the slack; the acceptance binary and the
// `verify` subcommand run the same check functions.

#include "bfe/cq.hpp"
#include "bfe/field_eval.hpp"
#include "bfe/report.hpp"

#include <chrono>
#include <functional>
#include <map>
#include <optional>

namespace bfe::verify {

/// Piezo-thermo-electric test material used by the suites unless overridden.
inline MaterialParams desk_material() {
  MaterialParams m;
  m.rho_e = 1.0;
  m.lame_lambda = 1.5;
  m.lame_mu = 1.0;
  PiezoTensor::Voigt e;
  e << 0.1, 0.0, 0.05, 0.0, 0.2, 0.0,
       0.0, 0.1, 0.0, 0.2, 0.0, 0.05,
       0.3, 0.3, 0.4, 0.0, 0.0, 0.0;
  m.piezo_e = PiezoTensor(e);
  m.zeta = 0.5;
  m.c_eps = 1.5;
  m.pyro_p = Vec3(0.1, 0.1, 0.2);
  m.dielectric_eps = 1.2;
  m.rho_f = 1.3;
  m.sound_c = 1.2;
  return m;
}

struct VerifyOptions {
  std::uint64_t seed = 0;
  int level = 1;                        // ball/icosphere level; refinement studies use level and level + 1
  std::optional<CoupledMesh> mesh;      // replaces the desk ball in the interior, norms and coupled checks
  std::optional<MaterialParams> material;

  MaterialParams mat() const { return material ? *material : desk_material(); }
  CoupledMesh desk_mesh() const { return mesh ? *mesh : meshgen::ball(level, 1); }
};

/// Plane-wave Gaussian pulse arriving after t = offset / c.
inline ProblemConfig pulse_config(const MaterialParams& m, double offset = 2.0, double amplitude = 1.0) {
  ProblemConfig c;
  c.material = m;
  c.incident.type = "plane_wave";
  c.incident.direction = Vec3(0.3, -0.2, 1.0).normalized();
  c.incident.offset = offset;
  c.incident.amplitude = amplitude;
  c.incident.wavelet = Wavelet::gaussian_pulse(4.0, 2.5, 2.0);
  return c;
}

namespace detail {

inline VectorXc random_vec(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> N;
  VectorXc v(n);
  for (int i = 0; i < n; ++i) v[i] = Complex(N(rng), N(rng));
  return v;
}

/// Random s with sigma log-uniform in [0.1, 10] and omega uniform in [-20, 20].
inline LaplaceParameter random_s(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> lu(-1, 1), om(-20, 20);
  return LaplaceParameter(std::pow(10.0, lu(rng)), om(rng));
}

/// Records a finiteness check; the entry carries the value itself.
inline void finite(Report& r, const std::string& quantity, const std::string& tag, double value) {
  r.add(quantity, tag, value, value, std::isfinite(value) ? 0.0 : -1.0);
}

inline std::vector<LaplaceParameter> omega_grid(double sigma, double w0, double w1, int n) {
  std::vector<LaplaceParameter> g;
  for (int k = 0; k < n; ++k) g.emplace_back(sigma, w0 * std::pow(w1 / w0, k / double(n - 1)));
  return g;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// kernel

inline Report kernel_pde_order(const VerifyOptions&) {
  Report r{"kernel", {}};
  const std::vector<Vec3> pts{Vec3(1, 0, 0), Vec3(0, -1, 0), Vec3(0, 0.6, 0.8), Vec3(-0.48, 0.6, 0.64)};
  for (const auto& s : {LaplaceParameter(1, 1), LaplaceParameter(2, -3)}) {
    double prev = 0;
    for (double h : {0.04, 0.02, 0.01}) {
      const double res = kernel::verify_pde(pts, Vec3::Zero(), s, 1.0, h);
      if (prev > 0)
        r.near("pde residual order h=" + std::to_string(h).substr(0, 4) + " " + bfe::detail::s_string(s),
               "fundamental solution satisfies the resolvent equation", std::log2(prev / res), 2.0, 0.3);
      prev = res;
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// boundary

inline Report sphere_rayleigh(const VerifyOptions&) {
  Report r{"boundary", {}};
  const auto surf = meshgen::icosphere(2);
  const auto ops = assemble_operators(surf, LaplaceParameter(1, 0), 1.0);
  const VectorXc one = VectorXc::Ones(ops.V.rows());
  const Complex q = one.dot(ops.V * one) / surf.total_area();
  const double exact = (1.0 - std::exp(-2.0)) / 2.0;
  r.near("V Rayleigh quotient (constant, level 2)", "single layer on the sphere, degree-0 eigenvalue i0 k0", q.real(),
         exact, 0.03 * exact);
  r.at_most("V Rayleigh quotient imaginary part", "V(s) is real for real s", std::abs(q.imag()), 1e-12);
  return r;
}

inline Report calderon_decrease(const VerifyOptions& o) {
  Report r{"boundary", {}};
  AssemblyOptions opt;
  opt.calderon_blocks = true;
  double res[2];
  for (int k = 0; k < 2; ++k) {
    const auto surf = meshgen::icosphere(o.level + k);
    res[k] = calderon_residual(assemble_operators(surf, LaplaceParameter(1, 0), 1.0, opt), surf, o.seed);
  }
  r.at_least("Calderon residual decrease factor", "Calderon projector is idempotent", res[0] / res[1], 2.0);
  r.at_most("Calderon residual level " + std::to_string(o.level + 1), "Calderon projector is idempotent", res[1],
            res[0]);
  return r;
}

inline Report jump_orders(const VerifyOptions& o) {
  Report r{"boundary", {}};
  std::mt19937_64 rng(o.seed + 5);
  JumpTestResult j[2];
  for (int k = 0; k < 2; ++k) {
    const auto surf = meshgen::icosphere(o.level + k);
    std::mt19937_64 local(rng());
    const auto [phi, lam] = smooth_cauchy_data(surf, local);
    j[k] = jump_test(surf, phi, lam, LaplaceParameter(1, 0.5), 1.0);
  }
  r.at_least("trace jump order", "[gamma p] = phi across Gamma", std::log2(j[0].trace_error / j[1].trace_error), 0.5);
  r.at_least("flux jump order", "[d_n p] = lambda across Gamma", std::log2(j[0].flux_error / j[1].flux_error), 0.5);
  return r;
}

// ---------------------------------------------------------------------------
// interior

inline Report coupling_skew(const VerifyOptions& o) {
  Report r{"interior", {}};
  const auto mat = o.mat();
  const auto f = InteriorForms::assemble(o.desk_mesh(), mat);
  std::mt19937_64 rng(o.seed + 11);
  double worst = 0;
  for (int blk = 0; blk < 4; ++blk) {
    const auto b = assemble_interior(f, mat, detail::random_s(rng));
    for (int k = 0; k < 25; ++k) {
      const CouplingFields x{detail::random_vec(3 * f.nv, rng), detail::random_vec(f.nv, rng),
                             detail::random_vec(f.nv, rng), detail::random_vec(f.nd, rng)};
      worst = std::max(worst, coupling_skew_check(b, mat, x));
    }
  }
  r.at_most("max relative skew residual (100 tuples)", "Z(s)-weighted off-diagonal couplings cancel", worst, 1e-12);
  return r;
}

// ---------------------------------------------------------------------------
// norms

inline Report norm_equivalence(const VerifyOptions& o) {
  Report r{"norms", {}};
  const auto mat = o.mat();
  const auto mesh = o.desk_mesh();
  const auto f = InteriorForms::assemble(mesh, mat);
  const auto ext = ExteriorLayer::build(mesh);
  std::mt19937_64 rng(o.seed + 12);
  std::map<std::string, double> worst;
  for (int k = 0; k < 10; ++k) {
    const auto s = detail::random_s(rng);
    for (int j = 0; j < 20; ++j) {
      const NormFields x{detail::random_vec(3 * f.nv, rng), detail::random_vec(f.nv, rng),
                         detail::random_vec(f.nv, rng), detail::random_vec(ext.mesh.num_vertices(), rng)};
      for (const auto& q : check_norm_equivalences(f, ext, mat, x, s)) {
        const double scale = std::max(q.upper, 1e-300);
        const double slack = std::min(q.left_slack(), q.right_slack()) / scale;
        auto it = worst.find(q.field);
        if (it == worst.end()) worst[q.field] = slack;
        else it->second = std::min(it->second, slack);
      }
    }
  }
  for (const auto& [field, slack] : worst)
    r.at_least("min relative sandwich slack (" + field + ")", "|s|-weighted and unit norms are equivalent", slack,
               -1e-12);
  return r;
}

// ---------------------------------------------------------------------------
// coupled

inline Report coercivity(const VerifyOptions& o) {
  Report r{"coupled", {}};
  const auto ctx = CoupledContext::build(o.desk_mesh(), o.mat());
  const auto ext = ExteriorLayer::build(ctx.mesh);
  std::mt19937_64 rng(o.seed + 13);
  double worst = std::numeric_limits<double>::infinity();
  int samples = 0;
  for (int k = 0; k < 5; ++k) {
    const auto s = detail::random_s(rng);
    const auto p = coercivity_probe(ctx, ext, assemble_interior(ctx.forms, ctx.mat, s), s, 200, rng());
    worst = std::min(worst, p.min_ratio);
    samples += p.samples;
  }
  r.at_least("min coercivity ratio (" + std::to_string(samples) + " tuples, 5 s)",
             "Re of the Z(s)-weighted form bounds the energy norms from below", worst, 1 - 1e-10);
  return r;
}

inline Report uniqueness_stability(const VerifyOptions& o) {
  Report r{"coupled", {}};
  const auto ctx = CoupledContext::build(o.desk_mesh(), o.mat());
  const auto ext = ExteriorLayer::build(ctx.mesh);
  const auto grid = detail::omega_grid(1.0, 1.0, 100.0, 12);
  // unit wavelet: flat transform, so the data do not decay along the sweep
  ProblemConfig cfg = pulse_config(ctx.mat);
  cfg.incident.wavelet = Wavelet();
  cfg.incident.wavelet.type = "unit";
  const SolverSettings tight;

  const auto g = SurrogateNorms::build(ctx);
  double zero_norm = 0;
  std::vector<double> lx, ly;
  for (const auto& s : grid) {
    const auto sys = assemble_system(ctx, s);
    zero_norm = std::max(zero_norm, solve(sys, zero_rhs(sys), tight).x.norm());
    lx.push_back(std::log(s.abs()));
    ly.push_back(std::log(inverse_operator_norm(sys, g, o.seed + 1)));
  }
  r.at_most("max |x| for zero data", "zero data give the zero solution", zero_norm, tight.tol);

  const auto t = stability_sweep(ctx, ext, cfg, grid);
  double finite = 1;
  for (const auto& row : t.rows)
    if (!std::isfinite(row.ratio) || !(row.rhs_norm > 0)) finite = 0;
  r.at_least("stability rows finite with nonzero data", "stability sweep sigma = 1, omega in [1, 100]", finite, 1);
  std::vector<double> tx, ty;
  for (std::size_t k = t.rows.size() / 2; k < t.rows.size(); ++k) {
    tx.push_back(std::log(std::abs(t.rows[k].s)));
    ty.push_back(std::log(t.rows[k].ratio));
  }
  detail::finite(r, "stability ratio max", "|x| / (|s|^3 / (sigma sigma_^6) |d|) is finite", t.max_ratio);
  r.at_most("stability ratio tail slope", "ratio does not grow with |s|", fit_line(tx, ty).slope, 0.0);
  r.at_most("|A^-1| growth exponent (omega in [1, 100])", "inverse bounded by |s|^(7/2) up to constants",
            fit_line(lx, ly).slope, 4.0);
  return r;
}

inline Report interior_vanishing(const VerifyOptions& o) {
  Report r{"coupled", {}};
  const auto mat = o.mat();
  const LaplaceParameter s(1.0, 2.0);
  double ratio[2];
  for (int k = 0; k < 2; ++k) {
    const auto ctx = CoupledContext::build(meshgen::ball(o.level + k, 1), mat);
    const auto sol = solve(assemble_system(ctx, s), assemble_rhs(ctx, pulse_config(mat), s));
    ratio[k] = interior_vanishing_check(ctx, sol).ratio();
  }
  r.at_most("interior/exterior ratio level " + std::to_string(o.level), "representation formula vanishes inside",
            ratio[0], 0.1);
  r.at_most("interior/exterior ratio level " + std::to_string(o.level + 1), "ratio decreases under refinement",
            ratio[1], ratio[0]);
  return r;
}

// ---------------------------------------------------------------------------
// cq

inline double delay_error(CQRule rule, double dt) {
  const auto p = CQPlan::make(rule, dt, static_cast<int>(std::lround(2.0 / dt)));
  const auto c = CQConvolution::make(p, [](Complex s) { return std::exp(-s); });
  const auto y = c.apply(sample(p, [](double t) { return std::sin(t); }));
  return std::abs(y.back() - std::sin(1.0));
}

inline Report cq_correctness(const VerifyOptions& o) {
  Report r{"cq", {}};
  const double e1 = delay_error(CQRule::BDF2, 0.02), e2 = delay_error(CQRule::BDF2, 0.01);
  r.at_most("delay error at t = 2 (BDF2, dt = 0.01)", "CQ of exp(-s) applied to sin", e2, 1e-3);
  r.near("delay EOC (BDF2, dt 0.02 -> 0.01)", "BDF2 convolution quadrature is second order", std::log2(e1 / e2), 2.0,
         0.3);

  const auto ctx = CoupledContext::build(o.desk_mesh(), o.mat());
  const auto plan = CQPlan::make(CQRule::BDF2, 0.1, 60);
  const auto run = solve_time_domain(ctx, pulse_config(ctx.mat), plan);
  r.at_most("causality residual before onset", "coupled run is zero before the data arrive",
            run.causality_residual(), 1e-6);
  r.at_most("imaginary residue of the inverse transform", "conjugate-symmetric frequencies give real output",
            run.imag_residual, 1e-10);
  return r;
}

inline Report symbol_indices(const VerifyOptions& o) {
  Report r{"cq", {}};
  const auto ctx = CoupledContext::build(o.desk_mesh(), o.mat());
  const auto g = SurrogateNorms::build(ctx);
  const auto layer = offset_layer(ctx);
  SymbolSweep sw;
  sw.sigma_lines = {1.0, 0.5};
  sw.omega_min = 1;
  sw.omega_max = 8;  // resolved band of the desk mesh
  sw.samples = 8;
  std::map<std::pair<double, double>, LayerPotentialNorms> cache;
  auto norms = [&](const LaplaceParameter& s) -> const LayerPotentialNorms& {
    const auto key = std::make_pair(s.sigma(), s.s().imag());
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, layer_potential_norms(ctx, layer, g, s)).first;
    return it->second;
  };
  const auto S = estimate_symbol_index([&](const LaplaceParameter& s) { return norms(s).single_layer; }, sw);
  const auto D = estimate_symbol_index([&](const LaplaceParameter& s) { return norms(s).double_layer; }, sw);
  const auto A = estimate_symbol_index(
      [&](const LaplaceParameter& s) { return inverse_operator_norm(assemble_system(ctx, s), g, o.seed + 1); }, sw);
  r.at_most("mu_hat(S)", "single layer potential symbol index", S.mu_hat, 1.3);
  r.at_most("mu_hat(D)", "double layer potential symbol index", D.mu_hat, 1.8);
  r.at_most("mu_hat(A^-1)", "inverse of the coupled operator symbol index", A.mu_hat, 4.0);
  return r;
}

inline Report bound_audit_check(const VerifyOptions& o) {
  Report r{"cq", {}};
  const auto ctx = CoupledContext::build(o.desk_mesh(), o.mat());
  const auto ext = ExteriorLayer::build(ctx.mesh);
  const auto plan = CQPlan::make(CQRule::BDF2, 0.1, 100);  // T = 10
  const auto a = audit_time_domain(ctx, ext, pulse_config(ctx.mat), plan);
  const auto b = audit_time_domain(ctx, ext, pulse_config(ctx.mat, 2.0, 10.0), plan);
  r.at_least("audit has data", "nonzero data", a.audit.zero_data ? 0.0 : 1.0, 1.0);
  detail::finite(r, "max ratio (primary shape)", "|x(t)| / (t^2/(1+t) max(1,t^6) int |P2 D3|) is finite",
                 a.audit.max_ratio_primary);
  detail::finite(r, "max ratio (secondary shape)", "t^(3/2)/(1+t)^(1/2) max(1,t^(13/2)) shape is finite",
                 a.audit.max_ratio_secondary);
  r.at_most("ratio tail slope (primary shape)", "ratio does not grow over the second half of [0, 10]",
            a.audit.tail_slope_primary, 0.0);
  r.at_most("ratio tail slope (secondary shape)", "t^(3/2)/(1+t)^(1/2) max(1,t^(13/2)) shape",
            a.audit.tail_slope_secondary, 0.0);
  double drift = 0;
  for (std::size_t n = 0; n < a.audit.rows.size(); ++n) {
    const auto &x = a.audit.rows[n], &y = b.audit.rows[n];
    if (x.ratio_primary == 0) continue;
    drift = std::max({drift, std::abs(y.ratio_primary / x.ratio_primary - 1),
                      std::abs(y.ratio_secondary / x.ratio_secondary - 1)});
  }
  r.at_most("ratio drift under data x10", "bound audit is homogeneous in the data", drift, 1e-10);
  return r;
}

// ---------------------------------------------------------------------------
// Suites

struct Check {
  std::string id;
  std::string suite;
  int criterion = 0;      // acceptance criterion number
  double budget = 0;      // seconds
  std::string title;
  std::function<Report(const VerifyOptions&)> run;
};

inline const std::vector<Check>& checks() {
  static const std::vector<Check> all{
      {"kernel_pde", "kernel", 1, 10, "kernel PDE residual order", kernel_pde_order},
      {"sphere_rayleigh", "boundary", 2, 60, "sphere V Rayleigh quotient", sphere_rayleigh},
      {"calderon", "boundary", 3, 120, "Calderon idempotency under refinement", calderon_decrease},
      {"jump", "boundary", 4, 120, "jump relation orders", jump_orders},
      {"skew", "interior", 5, 5, "skew-coupling cancellation", coupling_skew},
      {"coercivity", "coupled", 6, 30, "coercivity on random tuples", coercivity},
      {"norm_equivalence", "norms", 7, 10, "norm equivalences", norm_equivalence},
      {"stability", "coupled", 8, 600, "uniqueness and stability sweep", uniqueness_stability},
      {"vanishing", "coupled", 9, 120, "interior vanishing", interior_vanishing},
      {"cq", "cq", 10, 300, "CQ delay benchmark and causality", cq_correctness},
      {"symbol", "cq", 11, 600, "symbol-index audits", symbol_indices},
      {"bound_audit", "cq", 12, 600, "time-domain bound audit", bound_audit_check},
  };
  return all;
}

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> n{"kernel", "boundary", "interior", "coupled", "cq", "norms", "all"};
  return n;
}

struct CheckOutcome {
  const Check* check = nullptr;
  Report report;
  double seconds = 0;
  std::string error;  // set when the check threw; the report then holds one failing entry
};

/// Runs every check of the suite in order. Unknown suite names throw
/// ConfigError. A check that throws is recorded as a failure, the rest still run.
inline Report run_suite(const std::string& name, const VerifyOptions& opt,
                        const std::function<void(const CheckOutcome&)>& on_check = {}) {
  if (std::find(suite_names().begin(), suite_names().end(), name) == suite_names().end())
    throw ConfigError("unknown suite '" + name + "' (kernel, boundary, interior, coupled, cq, norms, all)");
  Report total{name, {}};
  for (const auto& c : checks()) {
    if (name != "all" && c.suite != name) continue;
    CheckOutcome out;
    out.check = &c;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      out.report = c.run(opt);
    } catch (const std::exception& e) {
      out.error = e.what();
      out.report = Report{c.suite, {}};
      out.report.add(c.id + " raised", e.what(), 0, std::nan(""), std::nan(""));
    }
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    total.merge(out.report);
    if (on_check) on_check(out);
  }
  return total;
}

}  // namespace bfe::verify
