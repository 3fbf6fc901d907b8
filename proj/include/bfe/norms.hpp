#pragma once

// Discrete energy norms of the four fields and the |s|-sandwich inequalities
// between the |s|-weighted and the unit-weighted norms.

#include "bfe/interior_fem.hpp"

#include <Eigen/Eigenvalues>

namespace bfe {

/// P1 stiffness and mass on a tetrahedral mesh (used for the truncated
/// exterior layer, where the other interior matrices are not needed).
struct ScalarForms {
  SparseR L, M;

  static ScalarForms assemble(const CoupledMesh& mesh) {
    std::vector<Eigen::Triplet<double>> ls, ms;
    for (int t = 0; t < mesh.num_tets(); ++t) {
      const auto& c = mesh.tets()[t];
      const double vol = mesh.tet_volume(t);
      const auto g = p1_gradients(mesh, t);
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) {
          ls.emplace_back(c[a], c[b], vol * g[a].dot(g[b]));
          ms.emplace_back(c[a], c[b], vol / 20.0 * (a == b ? 2.0 : 1.0));
        }
    }
    ScalarForms f;
    const int n = mesh.num_vertices();
    f.L.resize(n, n);
    f.M.resize(n, n);
    f.L.setFromTriplets(ls.begin(), ls.end());
    f.M.setFromTriplets(ms.begin(), ms.end());
    return f;
  }
};

/// Truncated exterior domain: the layer between Gamma and its dilation.
/// Annulus vertices [0, N_d) are the boundary dofs.
struct ExteriorLayer {
  CoupledMesh mesh;
  ScalarForms forms;
  int nd = 0;

  static ExteriorLayer build(const CoupledMesh& interior, double outer_factor = 2.0, int layers = 3) {
    const Surface surf = Surface::from_mesh(interior);
    ExteriorLayer e;
    e.mesh = meshgen::annulus(surf, interior.centroid(), outer_factor, layers);
    e.forms = ScalarForms::assemble(e.mesh);
    e.nd = surf.num_vertices();
    return e;
  }
};

namespace detail {
inline double form_value(const SparseR& A, const VectorXc& x) {
  if (A.cols() != x.size()) throw DimensionError("field has " + std::to_string(x.size()) + " dofs, expected " +
                                                 std::to_string(A.cols()));
  return std::max(0.0, x.dot(A.cast<Complex>() * x).real());
}
}  // namespace detail

/// sqrt((sigma_e(u), eps(u)) + rho_e |s|^2 |u|^2); `sabs` is |s|.
inline double energy_norm_u(const InteriorForms& f, const MaterialParams& mat, const VectorXc& u, double sabs) {
  return std::sqrt(detail::form_value(f.Ke, u) + mat.rho_e * sabs * sabs * detail::form_value(f.Mu, u));
}

/// sqrt(|grad theta|^2 + |s| |theta|^2 / c_eps)
inline double energy_norm_theta(const InteriorForms& f, const MaterialParams& mat, const VectorXc& theta,
                                double sabs) {
  return std::sqrt(detail::form_value(f.L, theta) + sabs / mat.c_eps * detail::form_value(f.M, theta));
}

/// |grad phi| after removing the mean of phi.
inline double energy_norm_phi(const InteriorForms& f, const VectorXc& phi) {
  if (phi.size() != f.nv) throw DimensionError("phi field size mismatch");
  const double vol = f.mean.sum();
  const Complex avg = f.mean.cast<Complex>().dot(phi) / vol;
  return std::sqrt(detail::form_value(f.L, phi - VectorXc::Constant(phi.size(), avg)));
}

/// sqrt(|grad p|^2 + |s|^2 |p|^2 / c^2) on the truncated exterior layer.
inline double energy_norm_p(const ExteriorLayer& ext, const MaterialParams& mat, const VectorXc& p, double sabs) {
  const double k = sabs / mat.sound_c;
  return std::sqrt(detail::form_value(ext.forms.L, p) + k * k * detail::form_value(ext.forms.M, p));
}

struct EnergyNormReport {
  double u_norm = 0, theta_norm = 0, phi_norm = 0, p_norm = 0;
};

struct NormFields {
  VectorXc u, theta, phi, p;  // p lives on the exterior layer
};

inline EnergyNormReport energy_norms(const InteriorForms& f, const ExteriorLayer& ext, const MaterialParams& mat,
                                     const NormFields& x, double sabs) {
  return {energy_norm_u(f, mat, x.u, sabs), energy_norm_theta(f, mat, x.theta, sabs), energy_norm_phi(f, x.phi),
          energy_norm_p(ext, mat, x.p, sabs)};
}

struct NormSandwich {
  std::string field;
  double lower = 0;   // lower factor times unit norm
  double middle = 0;  // |s|-weighted norm
  double upper = 0;   // upper factor times unit norm
  double left_slack() const { return middle - lower; }
  double right_slack() const { return upper - middle; }
  bool holds(double rel = 1e-12) const {
    const double scale = std::max(upper, 1e-300);
    return left_slack() >= -rel * scale && right_slack() >= -rel * scale;
  }
};

/// The three sandwiches
///   sigma_ |||u|||_1 <= |||u|||_|s| <= (|s|/sigma_) |||u|||_1
///   sqrt(sigma_) |||theta|||_1 <= |||theta|||_|s| <= sqrt(|s|/sigma_) |||theta|||_1
///   sigma_ |||p|||_1 <= |||p|||_|s| <= (|s|/sigma_) |||p|||_1
inline std::vector<NormSandwich> check_norm_equivalences(const InteriorForms& f, const ExteriorLayer& ext,
                                                         const MaterialParams& mat, const NormFields& x,
                                                         const LaplaceParameter& s) {
  const double a = s.abs(), lo = s.sigma_under();
  const double u1 = energy_norm_u(f, mat, x.u, 1.0), t1 = energy_norm_theta(f, mat, x.theta, 1.0),
               p1 = energy_norm_p(ext, mat, x.p, 1.0);
  return {{"u", lo * u1, energy_norm_u(f, mat, x.u, a), a / lo * u1},
          {"theta", std::sqrt(lo) * t1, energy_norm_theta(f, mat, x.theta, a), std::sqrt(a / lo) * t1},
          {"p", lo * p1, energy_norm_p(ext, mat, x.p, a), a / lo * p1}};
}

/// Extreme values of |||u|||_1 / |u|_{H^1} over the discrete space, where
/// |u|_{H^1}^2 = |grad u|^2 + |u|^2. Dense generalized eigenproblem, so only
/// for small meshes.
inline std::pair<double, double> korn_ratio_range(const InteriorForms& f, const MaterialParams& mat) {
  const int n = 3 * f.nv;
  if (n > 3000) throw DimensionError("korn_ratio_range: mesh too large for a dense eigensolve");
  Eigen::MatrixXd A = Eigen::MatrixXd(f.Ke) + mat.rho_e * Eigen::MatrixXd(f.Mu);
  Eigen::MatrixXd B = Eigen::MatrixXd(f.Mu);
  const Eigen::MatrixXd L(f.L);
  for (int a = 0; a < f.nv; ++a)
    for (int b = 0; b < f.nv; ++b)
      for (int d = 0; d < 3; ++d) B(3 * a + d, 3 * b + d) += L(a, b);
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(A, B);
  if (es.info() != Eigen::Success) throw SolverError("korn_ratio_range: eigensolve failed");
  const auto& ev = es.eigenvalues();
  return {std::sqrt(std::max(0.0, ev.minCoeff())), std::sqrt(ev.maxCoeff())};
}

}  // namespace bfe
