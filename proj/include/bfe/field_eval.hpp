#pragma once

// Field evaluation at user probes: exterior pressure through the
// representation formula, interior fields by P1 interpolation, and the
// constitutive outputs (stress, entropy, electric displacement) per cell.

#include "bfe/constitutive.hpp"
#include "bfe/cq.hpp"
#include "bfe/report.hpp"

namespace bfe {

enum class ProbeTag { Interior, Exterior };

inline const char* probe_tag_name(ProbeTag t) { return t == ProbeTag::Interior ? "interior" : "exterior"; }

struct TaggedProbe {
  std::string label;
  Vec3 x = Vec3::Zero();
  ProbeTag tag = ProbeTag::Exterior;
  double distance = 0;  // to Gamma
  int tet = -1;         // containing cell (interior probes)
  std::array<double, 4> bary{};
};

namespace detail {
inline std::array<double, 4> barycentric(const CoupledMesh& m, int t, const Vec3& x) {
  const auto& c = m.tets()[t];
  const auto& X = m.vertices();
  const double v = signed_volume(X[c[0]], X[c[1]], X[c[2]], X[c[3]]);
  return {signed_volume(x, X[c[1]], X[c[2]], X[c[3]]) / v, signed_volume(X[c[0]], x, X[c[2]], X[c[3]]) / v,
          signed_volume(X[c[0]], X[c[1]], x, X[c[3]]) / v, signed_volume(X[c[0]], X[c[1]], X[c[2]], x) / v};
}
}  // namespace detail

/// Labelled probes tagged interior/exterior by point location in the mesh.
struct ProbeSet {
  std::vector<TaggedProbe> probes;

  /// Throws SingularityError for a probe closer than min_rel * diameter to Gamma.
  static ProbeSet build(const CoupledMesh& mesh, const Surface& surf, const std::vector<Probe>& in,
                        double min_rel = 1e-3) {
    ProbeSet set;
    const double tol = min_rel * mesh.diameter();
    for (const auto& p : in) {
      TaggedProbe t;
      t.label = p.label;
      t.x = p.x;
      t.distance = distance_to_surface(surf, p.x);
      if (!(t.distance > tol))
        throw SingularityError("probe '" + p.label + "' lies within " + std::to_string(tol) +
                               " of the boundary (distance " + std::to_string(t.distance) + ")");
      for (int c = 0; c < mesh.num_tets() && t.tet < 0; ++c) {
        const auto b = detail::barycentric(mesh, c, p.x);
        if (*std::min_element(b.begin(), b.end()) >= -1e-12) {
          t.tet = c;
          t.bary = b;
        }
      }
      t.tag = t.tet >= 0 ? ProbeTag::Interior : ProbeTag::Exterior;
      set.probes.push_back(t);
    }
    return set;
  }
  static ProbeSet build(const CoupledContext& ctx, const std::vector<Probe>& in, double min_rel = 1e-3) {
    return build(ctx.mesh, ctx.surf, in, min_rel);
  }

  std::vector<int> indices(ProbeTag tag) const {
    std::vector<int> out;
    for (int i = 0; i < static_cast<int>(probes.size()); ++i)
      if (probes[i].tag == tag) out.push_back(i);
    return out;
  }
  std::vector<Vec3> points(ProbeTag tag) const {
    std::vector<Vec3> out;
    for (int i : indices(tag)) out.push_back(probes[i].x);
    return out;
  }
};

/// p(x) = D(s) phi - S(s) lambda at the exterior probes (in probe order).
/// Interior probes are rejected unless allow_interior is set (vanishing check).
inline VectorXc reconstruct_pressure(const CoupledContext& ctx, const LaplaceParameter& s, const VectorXc& phi_g,
                                     const VectorXc& lam, const ProbeSet& probes, bool allow_interior = false) {
  std::vector<Vec3> pts;
  for (const auto& p : probes.probes) {
    if (p.tag == ProbeTag::Interior && !allow_interior)
      throw ConfigError("probe '" + p.label + "' is inside the solid; pressure is reconstructed outside only");
    pts.push_back(p.x);
  }
  if (pts.empty()) return VectorXc(0);
  return evaluate_potentials(ctx.surf, phi_g, lam, s, ctx.mat.sound_c, pts).value;
}

inline VectorXc reconstruct_pressure(const CoupledContext& ctx, const CoupledSolution& sol, const ProbeSet& probes,
                                     bool allow_interior = false) {
  return reconstruct_pressure(ctx, sol.s, sol.phi_gamma(), sol.lambda_gamma(), probes, allow_interior);
}

/// Time series of p at the exterior probes from the per-frequency densities
/// of a CQ run (rows t_n, columns exterior probes in probe order).
inline Eigen::MatrixXd reconstruct_pressure(const CoupledContext& ctx, const TimeDomainResult& r,
                                            const ProbeSet& probes) {
  const auto ext = probes.points(ProbeTag::Exterior);
  const int L = r.plan.size(), np = static_cast<int>(ext.size());
  if (np == 0) return Eigen::MatrixXd(r.plan.samples(), 0);
  if (r.hat.rows() != L) throw DimensionError("time-domain run carries no frequency data");
  const auto& lay = r.layout;
  MatrixXc hat = MatrixXc::Zero(L, np);
  for (int l = 0; l < L; ++l) {
    const VectorXc x = r.hat.row(l).transpose();
    if (x.norm() == 0.0) continue;
    hat.row(l) = evaluate_potentials(ctx.surf, x.segment(lay.g, lay.nd), x.segment(lay.lam, lay.nn),
                                     LaplaceParameter(r.plan.s[l]), ctx.mat.sound_c, ext)
                     .value.transpose();
  }
  double imag = 0;
  return detail::real_part(cq_inverse(r.plan, hat), imag);
}

/// u, theta, phi at an interior probe by P1 interpolation of the unknown vector.
struct InteriorValues {
  CVec3 u = CVec3::Zero();
  Complex theta = 0, phi = 0;
};

inline InteriorValues interpolate_interior(const CoupledContext& ctx, const VectorXc& x, const TaggedProbe& p) {
  if (p.tag != ProbeTag::Interior) throw ConfigError("probe '" + p.label + "' is not inside the solid");
  const auto& L = ctx.layout;
  const auto& c = ctx.mesh.tets()[p.tet];
  InteriorValues v;
  for (int a = 0; a < 4; ++a) {
    v.u += p.bary[a] * x.segment<3>(L.u + 3 * c[a]);
    v.theta += p.bary[a] * x[L.theta + c[a]];
    v.phi += p.bary[a] * x[L.phi + c[a]];
  }
  return v;
}

/// Probe table of a time-domain run: p at exterior probes, u, theta, phi at
/// interior probes.
inline TimeSeries probe_timeseries(const CoupledContext& ctx, const TimeDomainResult& r, const ProbeSet& probes) {
  TimeSeries out;
  const Eigen::MatrixXd p = reconstruct_pressure(ctx, r, probes);
  const auto ext = probes.indices(ProbeTag::Exterior);
  for (int n = 0; n < r.plan.samples(); ++n) {
    const double t = r.plan.time(n);
    for (std::size_t k = 0; k < ext.size(); ++k) out.push_back({t, probes.probes[ext[k]].label, "p", p(n, k)});
    const VectorXc x = r.x.row(n).transpose().cast<Complex>();
    for (int i : probes.indices(ProbeTag::Interior)) {
      const auto& pr = probes.probes[i];
      const auto v = interpolate_interior(ctx, x, pr);
      out.push_back({t, pr.label, "u_x", v.u[0]});
      out.push_back({t, pr.label, "u_y", v.u[1]});
      out.push_back({t, pr.label, "u_z", v.u[2]});
      out.push_back({t, pr.label, "theta", v.theta});
      out.push_back({t, pr.label, "phi", v.phi});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Constitutive outputs

struct DerivedField {
  Vec3 centroid = Vec3::Zero();
  CMat3 stress = CMat3::Zero();
  Complex entropy = 0;
  CVec3 displacement = CVec3::Zero();  // electric displacement D
};

/// Stress, entropy density and electric displacement at every cell centroid
/// (gradients are constant per cell, theta is the cell average).
inline std::vector<DerivedField> derived_fields(const CoupledContext& ctx, const VectorXc& x) {
  const auto& L = ctx.layout;
  if (x.size() != L.size) throw DimensionError("solution vector has the wrong size for this mesh");
  const auto& mesh = ctx.mesh;
  std::vector<DerivedField> out(mesh.num_tets());
  for (int t = 0; t < mesh.num_tets(); ++t) {
    const auto& c = mesh.tets()[t];
    const auto g = p1_gradients(mesh, t);
    CMat3 grad_u = CMat3::Zero();
    CVec3 grad_phi = CVec3::Zero();
    Complex theta = 0;
    Vec3 centroid = Vec3::Zero();
    for (int a = 0; a < 4; ++a) {
      grad_u += x.segment<3>(L.u + 3 * c[a]) * g[a].cast<Complex>().transpose();
      grad_phi += x[L.phi + c[a]] * g[a].cast<Complex>();
      theta += 0.25 * x[L.theta + c[a]];
      centroid += 0.25 * mesh.vertices()[c[a]];
    }
    const auto st = constitutive::StateAtPoint::from_gradients(grad_u, theta, grad_phi);
    out[t] = {centroid, constitutive::stress(st, ctx.mat), constitutive::entropy_density(st, ctx.mat),
              constitutive::electric_displacement(st, ctx.mat)};
  }
  return out;
}

inline std::vector<DerivedField> derived_fields(const CoupledContext& ctx, const CoupledSolution& sol) {
  return derived_fields(ctx, sol.x);
}

}  // namespace bfe
