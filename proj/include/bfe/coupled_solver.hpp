#pragma once

// Coupled interior FEM / exterior boundary-integral system in the Laplace
// domain. Unknowns are ordered
//   u (3 per vertex), theta, phi, zero-mean multiplier, phi_Gamma (P1), lambda_Gamma (P0)
// and every block is copied from interior_fem / boundary_ops without change.

#include "bfe/boundary_ops.hpp"
#include "bfe/config.hpp"
#include "bfe/norms.hpp"

#include <Eigen/LU>
#include <unsupported/Eigen/IterativeSolvers>

#include <functional>
#include <iomanip>
#include <random>
#include <sstream>

namespace bfe {

struct BlockLayout {
  int nv = 0, nd = 0, nn = 0;
  int u = 0, theta = 0, phi = 0, mult = 0, g = 0, lam = 0, size = 0;

  static BlockLayout make(int nv, int nd, int nn) {
    BlockLayout l;
    l.nv = nv;
    l.nd = nd;
    l.nn = nn;
    l.theta = 3 * nv;
    l.phi = l.theta + nv;
    l.mult = l.phi + nv;
    l.g = l.mult + 1;
    l.lam = l.g + nd;
    l.size = l.lam + nn;
    return l;
  }
};

/// Frequency-independent data shared by all solves on one mesh.
struct CoupledContext {
  CoupledMesh mesh;
  MaterialParams mat;
  Surface surf;
  InteriorForms forms;
  AssemblyOptions opt;
  BlockLayout layout;
  TraceSpacePair spaces;

  static CoupledContext build(const CoupledMesh& mesh, const MaterialParams& mat, const AssemblyOptions& opt = {}) {
    CoupledContext c;
    c.mesh = mesh;
    c.mat = mat;
    c.surf = Surface::from_mesh(mesh);
    c.forms = InteriorForms::assemble(mesh, mat);
    c.opt = opt;
    c.layout = BlockLayout::make(mesh.num_vertices(), c.surf.num_vertices(), c.surf.num_faces());
    c.spaces = TraceSpacePair::build(c.surf);
    return c;
  }
};

struct BlockSystem {
  LaplaceParameter s{1.0, 0.0};
  BlockLayout layout;
  InteriorBlocks interior;
  BoundaryOperatorSet boundary;
  MatrixXc A;
};

namespace detail {
inline void put(MatrixXc& A, int r0, int c0, const SparseR& B, Complex w) {
  for (int k = 0; k < B.outerSize(); ++k)
    for (SparseR::InnerIterator it(B, k); it; ++it) A(r0 + it.row(), c0 + it.col()) += w * it.value();
}
inline void put(MatrixXc& A, int r0, int c0, const SparseC& B, Complex w) {
  for (int k = 0; k < B.outerSize(); ++k)
    for (SparseC::InnerIterator it(B, k); it; ++it) A(r0 + it.row(), c0 + it.col()) += w * it.value();
}
}  // namespace detail

inline BlockSystem assemble_system(const CoupledContext& ctx, const LaplaceParameter& s) {
  const auto& mat = ctx.mat;
  const auto& L = ctx.layout;
  BlockSystem sys;
  sys.s = s;
  sys.layout = L;
  sys.interior = assemble_interior(ctx.forms, mat, s);
  sys.boundary = assemble_operators(ctx.surf, s, mat.sound_c, ctx.opt);
  const auto& b = sys.interior;
  const auto& bo = sys.boundary;
  const Complex z = s.s();
  MatrixXc& A = sys.A;
  A.setZero(L.size, L.size);
  using detail::put;
  // elastic row
  put(A, L.u, L.u, b.A_s, 1.0);
  put(A, L.u, L.theta, b.G_div, -mat.zeta);
  put(A, L.u, L.phi, b.G_piezo, 1.0);
  put(A, L.u, L.g, b.T_trace_t, 1.0);
  // heat row
  put(A, L.theta, L.u, b.G_div_t, z * mat.zeta);
  put(A, L.theta, L.theta, b.B_s, 1.0 / mat.T0);
  put(A, L.theta, L.phi, b.G_pyro, -z);
  // potential row, mean fixed by a multiplier
  put(A, L.phi, L.u, b.G_piezo_t, -1.0);
  put(A, L.phi, L.theta, SparseR(b.G_pyro.transpose()), -1.0);
  put(A, L.phi, L.phi, b.C_s, mat.dielectric_eps);
  for (int i = 0; i < L.nv; ++i) {
    A(L.phi + i, L.mult) = b.mean[i];
    A(L.mult, L.phi + i) = b.mean[i];
  }
  // exterior: hypersingular row and single-layer row
  put(A, L.g, L.u, b.T_trace, -z * z);
  const MatrixXc M10 = bo.spaces.M10.cast<Complex>();
  A.block(L.g, L.g, L.nd, L.nd) = bo.W / mat.rho_f;
  A.block(L.g, L.lam, L.nd, L.nn) = -(0.5 * M10 - bo.Kp) / mat.rho_f;
  A.block(L.lam, L.g, L.nn, L.nd) = 0.5 * M10.transpose() - bo.K;
  A.block(L.lam, L.lam, L.nn, L.nn) = bo.V;
  return sys;
}

inline BlockSystem assemble_system(const CoupledMesh& mesh, const MaterialParams& mat, const LaplaceParameter& s,
                                   const AssemblyOptions& opt = {}) {
  return assemble_system(CoupledContext::build(mesh, mat, opt), s);
}

/// Test-side weights Z(s) = (conj(s), 1, s, conj(s)/|s|^2) on the elastic,
/// heat, potential and hypersingular rows; the single-layer row keeps weight 1.
struct ScalingWeights {
  Complex u, theta, phi, g, lam;
};

inline ScalingWeights scaling_weights(const LaplaceParameter& s) {
  const Complex z = s.s(), zb = std::conj(z);
  return {zb, 1.0, z, zb / std::norm(z), 1.0};
}

inline VectorXc row_weights(const BlockLayout& L, const LaplaceParameter& s) {
  const auto w = scaling_weights(s);
  VectorXc d(L.size);
  d.segment(L.u, 3 * L.nv).setConstant(w.u);
  d.segment(L.theta, L.nv).setConstant(w.theta);
  d.segment(L.phi, L.nv + 1).setConstant(w.phi);
  d.segment(L.g, L.nd).setConstant(w.g);
  d.segment(L.lam, L.nn).setConstant(w.lam);
  return d;
}

/// Z(s) A, row by row.
inline MatrixXc apply_scaling(const BlockSystem& sys) { return row_weights(sys.layout, sys.s).asDiagonal() * sys.A; }

// ---------------------------------------------------------------------------
// Right-hand sides

/// Data of a general load functional. Volume densities are integrated
/// against the interior test functions, boundary densities against their
/// traces (g_p against the P1 boundary space of the hypersingular row).
struct LoadData {
  std::function<CVec3(const Vec3&)> f_u;
  std::function<Complex(const Vec3&)> f_theta, f_phi;
  std::function<CVec3(const Vec3&, const Vec3&)> g_u;
  std::function<Complex(const Vec3&, const Vec3&)> g_theta, g_phi, g_p;
  Complex phi_mean = 0;  // prescribed integral of phi
  int order = 10;
};

inline VectorXc assemble_loads(const CoupledContext& ctx, const LoadData& d) {
  const auto& L = ctx.layout;
  const auto& mesh = ctx.mesh;
  VectorXc r = VectorXc::Zero(L.size);
  if (d.f_u || d.f_theta || d.f_phi) {
    const auto rule = quad::tet_rule_collapsed((d.order + 4) / 2);
    for (int t = 0; t < mesh.num_tets(); ++t) {
      const auto& c = mesh.tets()[t];
      const double vol = mesh.tet_volume(t);
      for (std::size_t q = 0; q < rule.weights.size(); ++q) {
        const auto& l = rule.points[q];
        Vec3 x = Vec3::Zero();
        for (int a = 0; a < 4; ++a) x += l[a] * mesh.vertices()[c[a]];
        const double w = rule.weights[q] * vol;
        const CVec3 fu = d.f_u ? d.f_u(x) : CVec3::Zero();
        const Complex ft = d.f_theta ? d.f_theta(x) : 0.0, fp = d.f_phi ? d.f_phi(x) : 0.0;
        for (int a = 0; a < 4; ++a) {
          r.segment<3>(L.u + 3 * c[a]) += (w * l[a]) * fu;
          r[L.theta + c[a]] += w * l[a] * ft;
          r[L.phi + c[a]] += w * l[a] * fp;
        }
      }
    }
  }
  if (d.g_u || d.g_theta || d.g_phi || d.g_p) {
    const auto rule = quad::triangle_rule(d.order);
    const auto& surf = ctx.surf;
    const auto& bv = mesh.boundary_vertices();
    for (int f = 0; f < surf.num_faces(); ++f) {
      const auto& t = surf.tris[f];
      const Vec3& n = surf.normals[f];
      for (std::size_t q = 0; q < rule.weights.size(); ++q) {
        const auto l = quad::barycentric(rule.points[q]);
        const Vec3 x = l[0] * surf.vertices[t[0]] + l[1] * surf.vertices[t[1]] + l[2] * surf.vertices[t[2]];
        const double w = 2.0 * surf.areas[f] * rule.weights[q];
        const CVec3 gu = d.g_u ? d.g_u(x, n) : CVec3::Zero();
        const Complex gt = d.g_theta ? d.g_theta(x, n) : 0.0, gf = d.g_phi ? d.g_phi(x, n) : 0.0,
                      gp = d.g_p ? d.g_p(x, n) : 0.0;
        for (int a = 0; a < 3; ++a) {
          const int v = bv[t[a]];
          r.segment<3>(L.u + 3 * v) += (w * l[a]) * gu;
          r[L.theta + v] += w * l[a] * gt;
          r[L.phi + v] += w * l[a] * gf;
          r[L.g + t[a]] += w * l[a] * gp;
        }
      }
    }
  }
  r[L.mult] = d.phi_mean;
  return r;
}

/// Laplace transform of a plane-wave incident field and its gradient.
struct IncidentTransform {
  IncidentWave wave;
  double c = 1;
  Complex fhat = 0, s = 0;

  IncidentTransform(const IncidentWave& w, double sound_c, const LaplaceParameter& sp) : wave(w), c(sound_c), s(sp.s()) {
    if (w.type == "plane_wave") {
      if (!w.wavelet.has_transform())
        throw ConfigError("incident wavelet '" + w.wavelet.type +
                          "' has no Laplace transform; use an analytic wavelet for frequency-domain solves");
      fhat = w.amplitude * w.wavelet.transform(s);
    }
  }
  Complex value(const Vec3& x) const {
    if (fhat == 0.0) return 0.0;
    const Vec3 d = wave.direction.normalized();
    return fhat * std::exp(-s * (d.dot(x) + wave.offset) / c);
  }
  Complex normal_derivative(const Vec3& x, const Vec3& n) const {
    return -(s / c) * n.dot(wave.direction.normalized()) * value(x);
  }
};

inline Complex datum_transform(const BoundaryDatum& d, const LaplaceParameter& s, const char* name) {
  if (d.amplitude == 0.0 || d.wavelet.type == "none") return 0.0;
  if (!d.wavelet.has_transform())
    throw ConfigError(std::string(name) + " wavelet '" + d.wavelet.type + "' has no Laplace transform");
  return d.amplitude * d.wavelet.transform(s.s());
}

/// Right-hand side of the physical problem: incident pressure on the elastic
/// and hypersingular rows, heat flux and surface charge on the heat and
/// potential rows, zero on the single-layer row.
inline VectorXc assemble_rhs(const CoupledContext& ctx, const ProblemConfig& cfg, const LaplaceParameter& s) {
  const auto& mat = ctx.mat;
  const IncidentTransform inc(cfg.incident, mat.sound_c, s);
  const Complex ft = datum_transform(cfg.f_theta, s, "f_theta"), fd = datum_transform(cfg.f_D, s, "f_D");
  LoadData d;
  if (inc.fhat != 0.0) {
    d.g_u = [&](const Vec3& x, const Vec3& n) { return CVec3(-inc.value(x) * n.cast<Complex>()); };
    d.g_p = [&](const Vec3& x, const Vec3& n) { return inc.normal_derivative(x, n) / mat.rho_f; };
  }
  if (ft != 0.0) d.g_theta = [&](const Vec3&, const Vec3&) { return ft / mat.T0; };
  if (fd != 0.0) d.g_phi = [&](const Vec3&, const Vec3&) { return -fd; };
  return assemble_loads(ctx, d);
}

// ---------------------------------------------------------------------------
// Solve

struct SolveDiagnostics {
  std::string method;
  double residual = 0;  // |A x - b| / |b|
  double rcond = 0;     // reciprocal condition estimate of the row-equilibrated matrix (LU only)
  int iterations = 0;
};

struct CoupledSolution {
  LaplaceParameter s{1.0, 0.0};
  BlockLayout layout;
  VectorXc x;
  SolveDiagnostics diag;

  VectorXc u() const { return x.segment(layout.u, 3 * layout.nv); }
  VectorXc theta() const { return x.segment(layout.theta, layout.nv); }
  VectorXc phi() const { return x.segment(layout.phi, layout.nv); }
  Complex multiplier() const { return x[layout.mult]; }
  VectorXc phi_gamma() const { return x.segment(layout.g, layout.nd); }
  VectorXc lambda_gamma() const { return x.segment(layout.lam, layout.nn); }
};

namespace detail {
inline std::string s_string(const LaplaceParameter& s) {
  std::ostringstream o;
  o << std::setprecision(6) << "s = " << s.sigma() << (s.s().imag() < 0 ? " - " : " + ") << std::abs(s.s().imag())
    << "i";
  return o.str();
}
}  // namespace detail

/// Dense LU with row equilibration, or restarted GMRES on the same
/// equilibrated system. Throws SolverError for a numerically singular matrix.
inline CoupledSolution solve(const BlockSystem& sys, const VectorXc& rhs, const SolverSettings& opt = {}) {
  const auto& L = sys.layout;
  if (rhs.size() != L.size)
    throw DimensionError("rhs has " + std::to_string(rhs.size()) + " entries, system has " + std::to_string(L.size));
  Eigen::VectorXd rs(L.size);
  for (int i = 0; i < L.size; ++i) {
    const double m = sys.A.row(i).cwiseAbs().maxCoeff();
    if (!(m > 0) || !std::isfinite(m))
      throw SolverError("row " + std::to_string(i) + " of the coupled matrix is zero or not finite at " +
                        detail::s_string(sys.s));
    rs[i] = 1.0 / m;
  }
  const MatrixXc As = rs.asDiagonal() * sys.A;
  const VectorXc bs = rs.asDiagonal() * rhs;
  CoupledSolution sol;
  sol.s = sys.s;
  sol.layout = L;
  sol.diag.method = opt.method;
  if (opt.method == "lu") {
    Eigen::PartialPivLU<MatrixXc> lu(As);
    sol.diag.rcond = lu.rcond();
    if (!(sol.diag.rcond > 1e-14))
      throw SolverError("coupled matrix is numerically singular at " + detail::s_string(sys.s) +
                        " (rcond estimate " + std::to_string(sol.diag.rcond) + ")");
    sol.x = lu.solve(bs);
  } else if (opt.method == "gmres") {
    Eigen::GMRES<MatrixXc, Eigen::IdentityPreconditioner> gm;
    gm.setTolerance(opt.tol);
    gm.set_restart(200);
    gm.setMaxIterations(20 * L.size);
    gm.compute(As);
    sol.x = gm.solve(bs);
    sol.diag.iterations = static_cast<int>(gm.iterations());
    if (gm.info() != Eigen::Success)
      throw SolverError("GMRES did not converge at " + detail::s_string(sys.s) + " after " +
                        std::to_string(gm.iterations()) + " iterations");
  } else {
    throw ConfigError("unknown solver method '" + opt.method + "' (expected lu or gmres)");
  }
  const double bn = rhs.norm();
  sol.diag.residual = bn > 0 ? (sys.A * sol.x - rhs).norm() / bn : (sys.A * sol.x).norm();
  if (!sol.x.allFinite()) throw SolverError("solution is not finite at " + detail::s_string(sys.s));
  return sol;
}


inline VectorXc zero_rhs(const BlockSystem& sys) { return VectorXc::Zero(sys.layout.size); }

// ---------------------------------------------------------------------------
// Exterior field and solution norms

/// D(s) phi - S(s) lambda at the vertices of the exterior layer. The first
/// nd vertices lie on Gamma and take the trace phi directly.
inline VectorXc exterior_layer_field(const CoupledContext& ctx, const ExteriorLayer& ext, const LaplaceParameter& s,
                                     const VectorXc& phi_g, const VectorXc& lam) {
  const int n = ext.mesh.num_vertices();
  const std::vector<Vec3> pts(ext.mesh.vertices().begin() + ext.nd, ext.mesh.vertices().end());
  const auto pv = evaluate_potentials(ctx.surf, phi_g, lam, s, ctx.mat.sound_c, pts);
  VectorXc p(n);
  p.head(ext.nd) = phi_g;
  p.tail(n - ext.nd) = pv.value;
  return p;
}

struct SolutionNorms {
  double u = 0, theta = 0, phi = 0, p = 0;
  double total() const { return std::sqrt(u * u + theta * theta + phi * phi + p * p); }
};

/// Unit-weighted energy norms; phi in the full H^1 norm, p on the exterior layer.
inline SolutionNorms solution_norms(const CoupledContext& ctx, const ExteriorLayer& ext, const CoupledSolution& sol) {
  const auto& f = ctx.forms;
  SolutionNorms n;
  n.u = energy_norm_u(f, ctx.mat, sol.u(), 1.0);
  n.theta = energy_norm_theta(f, ctx.mat, sol.theta(), 1.0);
  const VectorXc ph = sol.phi();
  n.phi = std::sqrt(detail::form_value(f.L, ph) + detail::form_value(f.M, ph));
  n.p = energy_norm_p(ext, ctx.mat, exterior_layer_field(ctx, ext, sol.s, sol.phi_gamma(), sol.lambda_gamma()), 1.0);
  return n;
}

/// Riesz surrogate of the data: boundary load vectors measured in the dual
/// of the P1 boundary mass. Only the boundary rows of the interior blocks
/// carry physical data.
inline double rhs_dual_surrogate(const CoupledContext& ctx, const VectorXc& rhs) {
  const auto& L = ctx.layout;
  const auto& bv = ctx.mesh.boundary_vertices();
  const Eigen::LLT<Eigen::MatrixXd> m(ctx.spaces.M11);
  double total = 0;
  auto add = [&](const VectorXc& r) { total += std::max(0.0, r.dot(m.solve(r)).real()); };
  VectorXc r(L.nd);
  for (int d = 0; d < 3; ++d) {
    for (int i = 0; i < L.nd; ++i) r[i] = rhs[L.u + 3 * bv[i] + d];
    add(r);
  }
  for (int off : {L.theta, L.phi}) {
    for (int i = 0; i < L.nd; ++i) r[i] = rhs[off + bv[i]];
    add(r);
  }
  add(rhs.segment(L.g, L.nd));
  total += (rhs.segment(L.lam, L.nn).array().abs2() / ctx.spaces.M00.array()).sum();
  return std::sqrt(total);
}

// ---------------------------------------------------------------------------
// Stability sweep

struct LineFit {
  double slope = 0, intercept = 0, r2 = 0;
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const int n = static_cast<int>(x.size());
  if (n < 2 || static_cast<int>(y.size()) != n) throw DimensionError("line fit needs at least two matching samples");
  double mx = 0, my = 0;
  for (int i = 0; i < n; ++i) {
    mx += x[i] / n;
    my += y[i] / n;
  }
  double sxx = 0, sxy = 0, syy = 0;
  for (int i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0)) throw DimensionError("line fit: abscissae are all equal");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy > 0 ? sxy * sxy / (sxx * syy) : 1.0;
  return f;
}

struct StabilityRow {
  Complex s;
  double solution_norm = 0, rhs_norm = 0, bound = 0, ratio = 0;
};

struct StabilityTable {
  std::vector<StabilityRow> rows;
  double max_ratio = 0;
  LineFit growth;  // log(|x| / |d|) against log|s|, when there are >= 2 rows
};

/// Solves the problem of `cfg` at every s of the grid and tabulates
/// |x| sigma sigma_^6 / (|s|^3 |d|).
inline StabilityTable stability_sweep(const CoupledContext& ctx, const ExteriorLayer& ext, const ProblemConfig& cfg,
                                      const std::vector<LaplaceParameter>& grid) {
  StabilityTable t;
  std::vector<double> lx, ly;
  for (const auto& s : grid) {
    const auto sys = assemble_system(ctx, s);
    const VectorXc rhs = assemble_rhs(ctx, cfg, s);
    const auto sol = solve(sys, rhs, cfg.solver);
    StabilityRow r;
    r.s = s.s();
    r.solution_norm = solution_norms(ctx, ext, sol).total();
    r.rhs_norm = rhs_dual_surrogate(ctx, rhs);
    r.bound = std::pow(s.abs(), 3) / (s.sigma() * std::pow(s.sigma_under(), 6));
    r.ratio = r.rhs_norm > 0 ? r.solution_norm / (r.bound * r.rhs_norm) : 0.0;
    t.max_ratio = std::max(t.max_ratio, r.ratio);
    if (r.rhs_norm > 0 && r.solution_norm > 0) {
      lx.push_back(std::log(s.abs()));
      ly.push_back(std::log(r.solution_norm / r.rhs_norm));
    }
    t.rows.push_back(r);
  }
  if (lx.size() >= 2) t.growth = fit_line(lx, ly);
  return t;
}

// ---------------------------------------------------------------------------
// Interior vanishing of the representation formula

struct VanishingResult {
  double interior_max = 0, exterior_max = 0;
  double ratio() const { return exterior_max > 0 ? interior_max / exterior_max : 0.0; }
};

struct VanishingProbes {
  std::vector<Vec3> interior, exterior;
};

/// Interior points at least one panel diameter from Gamma (vertices, cell
/// centroids and half-way points towards the centroid) and exterior points
/// one panel diameter outside every boundary vertex.
inline VanishingProbes vanishing_probes(const CoupledContext& ctx) {
  const double h = ctx.surf.max_diameter();
  const Vec3 c = ctx.mesh.centroid();
  const auto& X = ctx.mesh.vertices();
  std::vector<Vec3> cand(X.begin(), X.end());
  for (const auto& t : ctx.mesh.tets()) cand.push_back(0.25 * (X[t[0]] + X[t[1]] + X[t[2]] + X[t[3]]));
  for (const auto& x : X) cand.push_back(0.5 * (x + c));
  VanishingProbes p;
  for (const auto& x : cand)
    if (distance_to_surface(ctx.surf, x) >= h) p.interior.push_back(x);
  for (const auto& v : ctx.surf.vertices) p.exterior.push_back(v + h * (v - c).normalized());
  if (p.interior.empty()) throw SingularityError("no interior probe is one panel diameter away from the boundary");
  return p;
}

inline VanishingResult interior_vanishing_check(const CoupledContext& ctx, const LaplaceParameter& s,
                                                const VectorXc& phi_g, const VectorXc& lam,
                                                const VanishingProbes& probes) {
  const double h = ctx.surf.max_diameter();
  for (const auto& x : probes.interior)
    if (distance_to_surface(ctx.surf, x) < h * (1 - 1e-12))
      throw SingularityError("interior probe closer than one panel diameter to the boundary");
  VanishingResult r;
  const double c = ctx.mat.sound_c;
  r.interior_max = evaluate_potentials(ctx.surf, phi_g, lam, s, c, probes.interior).value.cwiseAbs().maxCoeff();
  r.exterior_max = evaluate_potentials(ctx.surf, phi_g, lam, s, c, probes.exterior).value.cwiseAbs().maxCoeff();
  return r;
}

inline VanishingResult interior_vanishing_check(const CoupledContext& ctx, const CoupledSolution& sol) {
  return interior_vanishing_check(ctx, sol.s, sol.phi_gamma(), sol.lambda_gamma(), vanishing_probes(ctx));
}

// ---------------------------------------------------------------------------
// Coercivity of the scaled four-field form

/// Random tuple of the four-field form; p lives on the exterior layer and
/// its first nd entries are the trace on Gamma.
struct FourFieldTuple {
  VectorXc u, theta, phi, p;
};

struct CoercivityTerms {
  double numerator = 0;    // Re(x^H Z A x)
  double denominator = 0;  // (sigma sigma_^2/|s|^2)(|||u|||^2 + c1 |||theta|||^2 + c2 |phi|^2 + |||p|||^2 / rho_f)
  double ratio() const { return numerator / denominator; }
};

/// The exterior block is the truncated-layer form rho_f^-1 ((grad p, grad q) + (s/c)^2 (p, q)).
/// phi is measured in L2 after removing its mean.
inline CoercivityTerms coercivity_terms(const CoupledContext& ctx, const ExteriorLayer& ext, const InteriorBlocks& b,
                                        const LaplaceParameter& sp, const FourFieldTuple& x) {
  const auto& mat = ctx.mat;
  const auto& f = ctx.forms;
  const Complex s = sp.s(), sb = std::conj(s);
  const int nd = ext.nd;
  if (x.u.size() != 3 * f.nv || x.theta.size() != f.nv || x.phi.size() != f.nv ||
      x.p.size() != ext.mesh.num_vertices())
    throw DimensionError("four-field tuple does not match the mesh and layer");
  auto C = [](const SparseR& m) { return SparseC(m.cast<Complex>()); };
  const VectorXc pg = x.p.head(nd);
  const Complex au = x.u.dot(b.A_s * x.u - mat.zeta * (C(b.G_div) * x.theta) + C(b.G_piezo) * x.phi +
                             C(b.T_trace_t) * pg);
  const Complex at = x.theta.dot(s * mat.zeta * (C(b.G_div_t) * x.u) + (b.B_s * x.theta) / mat.T0 -
                                 s * (C(b.G_pyro) * x.phi));
  const Complex ap = x.phi.dot(-(C(b.G_piezo_t) * x.u) - C(SparseR(b.G_pyro.transpose())) * x.theta +
                               mat.dielectric_eps * (C(b.C_s) * x.phi));
  const Complex k2 = s * s / (mat.sound_c * mat.sound_c);
  VectorXc ext_row = (C(ext.forms.L) * x.p + k2 * (C(ext.forms.M) * x.p)) / mat.rho_f;
  ext_row.head(nd) -= s * s * (C(b.T_trace) * x.u);
  const Complex aq = x.p.dot(ext_row);
  CoercivityTerms t;
  t.numerator = (sb * au + at + s * ap + sb / std::norm(s) * aq).real();
  const double sa = sp.abs(), lo = sp.sigma_under();
  const double nu = energy_norm_u(f, mat, x.u, sa), nt = energy_norm_theta(f, mat, x.theta, sa),
               np = energy_norm_p(ext, mat, x.p, sa);
  const double nphi2 = detail::form_value(f.M, x.phi);
  t.denominator = sp.sigma() * lo * lo / (sa * sa) *
                  (nu * nu + mat.coercivity_c1() * nt * nt + mat.coercivity_c2() * nphi2 + np * np / mat.rho_f);
  return t;
}

struct CoercivityProbe {
  double min_ratio = 0;
  double c1 = 0, c2 = 0;
  int samples = 0;
};

inline VectorXc remove_mean(const InteriorForms& f, const VectorXc& phi) {
  const Complex avg = f.mean.cast<Complex>().dot(phi) / f.mean.sum();
  return phi - VectorXc::Constant(phi.size(), avg);
}

/// Minimum ratio over random complex tuples (zero-mean phi).
inline CoercivityProbe coercivity_probe(const CoupledContext& ctx, const ExteriorLayer& ext, const InteriorBlocks& b,
                                        const LaplaceParameter& s, int n_samples, std::uint64_t seed) {
  CoercivityProbe r;
  r.c1 = ctx.mat.coercivity_c1();
  r.c2 = ctx.mat.coercivity_c2();
  if (!(r.c1 > 0) || !(r.c2 > 0))
    throw ConstraintError("coercivity constants must be positive (c1 = " + std::to_string(r.c1) +
                          ", c2 = " + std::to_string(r.c2) + ")");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N;
  auto rv = [&](int n) {
    VectorXc v(n);
    for (int i = 0; i < n; ++i) v[i] = Complex(N(rng), N(rng));
    return v;
  };
  const int nv = ctx.forms.nv;
  r.min_ratio = std::numeric_limits<double>::infinity();
  for (int k = 0; k < n_samples; ++k) {
    const FourFieldTuple x{rv(3 * nv), rv(nv), remove_mean(ctx.forms, rv(nv)), rv(ext.mesh.num_vertices())};
    r.min_ratio = std::min(r.min_ratio, coercivity_terms(ctx, ext, b, s, x).ratio());
    ++r.samples;
  }
  return r;
}

inline CoercivityProbe coercivity_probe(const BlockSystem& sys, const CoupledContext& ctx, const ExteriorLayer& ext,
                                        int n_samples, std::uint64_t seed) {
  return coercivity_probe(ctx, ext, sys.interior, sys.s, n_samples, seed);
}

// ---------------------------------------------------------------------------
// Radially symmetric scattering by an elastic ball (no thermal or electric coupling)

/// Displacement u = A grad i0(k_p r) and scattered pressure p = B k0(kappa r)
/// with k0(x) = exp(-x)/x. The incident field is either the regular wave
/// i0(kappa r) = sinh(kappa r)/(kappa r) or, for time-domain runs, the causal
/// field exp(-kappa r)/(4 pi r) of a point source at the centre. Exact for the
/// pure-acoustic material on a ball.
struct RadialSphereOracle {
  Complex s, kappa, kp, A, B;
  double R = 1, rho_f = 1;
  bool centre_source = false;

  static Complex i0(Complex x) { return std::sinh(x) / x; }
  static Complex di0(Complex x) { return (x * std::cosh(x) - std::sinh(x)) / (x * x); }
  static Complex k0(Complex x) { return std::exp(-x) / x; }
  static Complex dk0(Complex x) { return -std::exp(-x) * (x + 1.0) / (x * x); }

  Complex incident(double r) const {
    return centre_source ? kappa * k0(kappa * r) / (4 * kPi) : i0(kappa * r);
  }
  Complex incident_dr(double r) const {
    return centre_source ? kappa * kappa * dk0(kappa * r) / (4 * kPi) : kappa * di0(kappa * r);
  }
  Complex pressure(double r) const { return B * k0(kappa * r); }
  Complex radial_displacement(double r) const { return A * kp * di0(kp * r); }

  LoadData loads() const {
    LoadData d;
    d.g_u = [o = *this](const Vec3& x, const Vec3& n) { return CVec3(-o.incident(x.norm()) * n.cast<Complex>()); };
    d.g_p = [o = *this](const Vec3& x, const Vec3& n) {
      return o.incident_dr(x.norm()) * n.dot(x.normalized()) / o.rho_f;
    };
    return d;
  }
};

inline RadialSphereOracle radial_sphere_oracle(const MaterialParams& mat, const LaplaceParameter& sp, double R = 1.0,
                                               bool centre_source = false) {
  RadialSphereOracle o;
  o.centre_source = centre_source;
  o.s = sp.s();
  o.R = R;
  o.rho_f = mat.rho_f;
  o.kappa = o.s / mat.sound_c;
  o.kp = o.s * std::sqrt(mat.rho_e / (mat.lame_lambda + 2 * mat.lame_mu));
  const Complex x = o.kp * R, y = o.kappa * R;
  const Complex i0p = RadialSphereOracle::di0(x);
  const Complex i0pp = RadialSphereOracle::i0(x) - 2.0 / x * i0p;
  // sigma_rr(R) + p(R) = -p_inc(R);  rho_f^-1 d_r (p + p_inc)(R) = -s^2 U(R)
  Eigen::Matrix2cd M;
  Eigen::Vector2cd rhs;
  M << o.kp * o.kp * (mat.lame_lambda * RadialSphereOracle::i0(x) + 2 * mat.lame_mu * i0pp), RadialSphereOracle::k0(y),
      o.s * o.s * o.kp * i0p, o.kappa * RadialSphereOracle::dk0(y) / mat.rho_f;
  rhs << -o.incident(R), -o.incident_dr(R) / mat.rho_f;
  const Eigen::Vector2cd ab = M.partialPivLu().solve(rhs);
  o.A = ab[0];
  o.B = ab[1];
  return o;
}

// ---------------------------------------------------------------------------
// Surrogate norms and operator-norm estimates

/// Largest singular value of a linear map C by power iteration on C^H C.
template <class Apply, class ApplyAdjoint>
double power_norm(int n, Apply apply, ApplyAdjoint apply_adjoint, std::uint64_t seed = 1, int max_iter = 300,
                  double tol = 1e-9) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N;
  VectorXc x(n);
  for (int i = 0; i < n; ++i) x[i] = Complex(N(rng), N(rng));
  x.normalize();
  double est = 0;
  for (int it = 0; it < max_iter; ++it) {
    const VectorXc y = apply(x);
    const double next = y.norm();
    if (!std::isfinite(next)) throw SolverError("power iteration produced a non-finite value");
    VectorXc z = apply_adjoint(y);
    const double zn = z.norm();
    if (zn == 0) return 0.0;
    x = z / zn;
    if (std::abs(next - est) <= tol * next) return next;
    est = next;
  }
  return est;
}

/// Gram matrices of the diagnostic norms: the P1 trace space in the H^1/2
/// interpolation norm between the boundary mass and mass + stiffness, the P0
/// space through the single layer at s = 1, and the interior fields in their
/// unit-weighted energy norms (phi in H^1).
struct SurrogateNorms {
  Eigen::MatrixXd half;        // nd x nd
  Eigen::MatrixXd minus_half;  // nn x nn
  Eigen::MatrixXd solution;    // full block-diagonal Gram of the unknown vector

  static Eigen::MatrixXd interpolation_half(const Eigen::MatrixXd& M, const Eigen::MatrixXd& S) {
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(M + S, M);
    if (es.info() != Eigen::Success) throw SolverError("H^1/2 interpolation norm: eigensolve failed");
    const Eigen::MatrixXd Q = M * es.eigenvectors();
    return Q * es.eigenvalues().cwiseSqrt().asDiagonal() * Q.transpose();
  }

  static SurrogateNorms build(const CoupledContext& ctx) {
    SurrogateNorms g;
    g.half = interpolation_half(ctx.spaces.M11, ctx.spaces.S11);
    g.minus_half = assemble_operators(ctx.surf, LaplaceParameter(1.0, 0.0), 1.0, ctx.opt).V.real();
    const auto& f = ctx.forms;
    const auto& L = ctx.layout;
    g.solution = Eigen::MatrixXd::Zero(L.size, L.size);
    g.solution.block(L.u, L.u, 3 * L.nv, 3 * L.nv) = Eigen::MatrixXd(f.Ke) + ctx.mat.rho_e * Eigen::MatrixXd(f.Mu);
    g.solution.block(L.theta, L.theta, L.nv, L.nv) = Eigen::MatrixXd(f.L) + Eigen::MatrixXd(f.M) / ctx.mat.c_eps;
    g.solution.block(L.phi, L.phi, L.nv, L.nv) = Eigen::MatrixXd(f.L) + Eigen::MatrixXd(f.M);
    g.solution(L.mult, L.mult) = 1.0;
    g.solution.block(L.g, L.g, L.nd, L.nd) = g.half;
    g.solution.block(L.lam, L.lam, L.nn, L.nn) = g.minus_half;
    return g;
  }
};

/// sup |A^-1 b|_X / |b|_X' with X the surrogate solution norm.
inline double inverse_operator_norm(const BlockSystem& sys, const SurrogateNorms& g, std::uint64_t seed = 1) {
  const Eigen::LLT<Eigen::MatrixXd> llt(g.solution);
  if (llt.info() != Eigen::Success) throw SolverError("surrogate Gram matrix is not positive definite");
  const MatrixXc R = MatrixXc(llt.matrixU().toDenseMatrix().cast<Complex>());
  Eigen::PartialPivLU<MatrixXc> lu(sys.A);
  auto apply = [&](const VectorXc& y) { return VectorXc(R * lu.solve(R.adjoint() * y)); };
  // A^-H b = conj(A^-T conj(b))
  auto adj = [&](const VectorXc& y) {
    const VectorXc b = (R.adjoint() * y).conjugate();
    return VectorXc(R * VectorXc(lu.transpose().solve(b)).conjugate());
  };
  return power_norm(sys.layout.size, apply, adj, seed);
}

/// Exterior layer whose inner surface is Gamma dilated by `inner` about the
/// centroid, so that potentials can be evaluated at every vertex.
inline ExteriorLayer offset_layer(const CoupledContext& ctx, double inner = 1.1, double outer = 2.0, int layers = 3) {
  const Vec3 c = ctx.mesh.centroid();
  std::vector<Vec3> v;
  for (const auto& x : ctx.surf.vertices) v.push_back(c + inner * (x - c));
  const Surface s = Surface::from_triangles(v, ctx.surf.tris);
  ExteriorLayer e;
  e.mesh = meshgen::annulus(s, c, outer / inner, layers);
  e.forms = ScalarForms::assemble(e.mesh);
  e.nd = s.num_vertices();
  return e;
}

struct LayerPotentialNorms {
  double single_layer = 0;  // |S(s)|: H^-1/2 surrogate -> H^1 on the layer
  double double_layer = 0;  // |D(s)|: H^1/2 surrogate -> H^1 on the layer
};

/// Norms of the single- and double-layer potentials into the unit-weighted
/// energy norm of an exterior layer.
inline LayerPotentialNorms layer_potential_norms(const CoupledContext& ctx, const ExteriorLayer& layer,
                                                 const SurrogateNorms& g, const LaplaceParameter& s) {
  const int nd = ctx.layout.nd, nn = ctx.layout.nn, np = layer.mesh.num_vertices();
  const auto& pts = layer.mesh.vertices();
  MatrixXc ES(np, nn), ED(np, nd);
  const VectorXc zd = VectorXc::Zero(nd), zn = VectorXc::Zero(nn);
  for (int j = 0; j < nn; ++j) {
    VectorXc e = zn;
    e[j] = 1;
    ES.col(j) = -evaluate_potentials(ctx.surf, zd, e, s, ctx.mat.sound_c, pts).value;
  }
  for (int j = 0; j < nd; ++j) {
    VectorXc e = zd;
    e[j] = 1;
    ED.col(j) = evaluate_potentials(ctx.surf, e, zn, s, ctx.mat.sound_c, pts).value;
  }
  const double k = 1.0 / ctx.mat.sound_c;
  const Eigen::MatrixXd Gout = Eigen::MatrixXd(layer.forms.L) + k * k * Eigen::MatrixXd(layer.forms.M);
  const Eigen::LLT<Eigen::MatrixXd> lo(Gout), ls(g.minus_half), lh(g.half);
  const MatrixXc Ro = lo.matrixU().toDenseMatrix().cast<Complex>();
  auto norm_of = [&](const MatrixXc& E, const Eigen::LLT<Eigen::MatrixXd>& in) {
    const MatrixXc C = Ro * E * in.matrixU().solve(Eigen::MatrixXd::Identity(E.cols(), E.cols())).cast<Complex>();
    return power_norm(static_cast<int>(C.cols()), [&](const VectorXc& x) { return VectorXc(C * x); },
                      [&](const VectorXc& y) { return VectorXc(C.adjoint() * y); });
  };
  return {norm_of(ES, ls), norm_of(ED, lh)};
}

}  // namespace bfe
