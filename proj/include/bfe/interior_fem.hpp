#pragma once

// P1 finite elements on the tetrahedral mesh for the displacement u (three
// components per vertex, dof 3 v + d), the temperature theta and the electric
// potential phi (one dof per vertex each).
//
// All matrices are stored with rows = test functions, columns = trial
// functions, so a sesquilinear form reads form(x, y) = y^H M x.

#include "bfe/material.hpp"
#include "bfe/mesh.hpp"
#include "bfe/quadrature.hpp"

#include <Eigen/Sparse>

namespace bfe {

using SparseR = Eigen::SparseMatrix<double>;
using SparseC = Eigen::SparseMatrix<Complex>;

/// Gradients of the four barycentric functions of tet t (constant per cell).
inline std::array<Vec3, 4> p1_gradients(const CoupledMesh& m, int t) {
  const auto& c = m.tets()[t];
  const auto& x = m.vertices();
  Mat3 J;
  J.col(0) = x[c[1]] - x[c[0]];
  J.col(1) = x[c[2]] - x[c[0]];
  J.col(2) = x[c[3]] - x[c[0]];
  const Mat3 Ji = J.inverse();
  std::array<Vec3, 4> g;
  for (int k = 1; k < 4; ++k) g[k] = Ji.row(k - 1).transpose();
  g[0] = -(g[1] + g[2] + g[3]);
  return g;
}

/// Frequency-independent interior matrices. Material constants are folded in
/// except where noted.
struct InteriorForms {
  int nv = 0;   // mesh vertices
  int nd = 0;   // boundary vertices
  SparseR Ke;   // elastic stiffness (sigma_e(u), eps(v)), 3nv x 3nv
  SparseR Mu;   // vector mass (u, v), 3nv x 3nv (no density)
  SparseR M;    // scalar mass, nv x nv
  SparseR L;    // scalar stiffness (grad a, grad b), nv x nv
  SparseR Div;  // (theta, div v): rows u-test, cols theta-trial, 3nv x nv
  SparseR Pz;   // (grad phi, e eps(v)): rows u-test, cols phi-trial, 3nv x nv
  SparseR Py;   // (p . grad phi, vartheta): rows theta-test, cols phi-trial, nv x nv
  SparseR T;    // <psi_i n, v^->_Gamma: rows boundary dofs, cols u dofs, nd x 3nv
  // Row-2/3 and row-1 counterparts of the couplings above, accumulated
  // separately so the skew cancellation is a genuine check.
  SparseR DivT;  // (div u, vartheta), nv x 3nv
  SparseR PzT;   // (e eps(u), grad psi), nv x 3nv
  SparseR Tt;    // <phi_Gamma n, v^->, 3nv x nd
  Eigen::VectorXd mean;  // integral of each scalar hat function

  static InteriorForms assemble(const CoupledMesh& mesh, const MaterialParams& mat) {
    InteriorForms f;
    f.nv = mesh.num_vertices();
    f.nd = mesh.num_boundary_vertices();
    const int nv = f.nv;
    std::vector<Eigen::Triplet<double>> ke, mu, ms, ls, dv, pz, py, tr, dvt, pzt, trt;
    f.mean = Eigen::VectorXd::Zero(nv);
    const double lam = mat.lame_lambda, mus = mat.lame_mu;
    const auto& e = mat.piezo_e;
    for (int t = 0; t < mesh.num_tets(); ++t) {
      const auto& c = mesh.tets()[t];
      const double vol = mesh.tet_volume(t);
      if (!(vol > 0)) throw SingularityError("degenerate cell " + std::to_string(t));
      const auto g = p1_gradients(mesh, t);
      for (int a = 0; a < 4; ++a) {
        f.mean[c[a]] += vol / 4.0;
        for (int b = 0; b < 4; ++b) {
          const double m = vol / 20.0 * (a == b ? 2.0 : 1.0);
          const double gg = g[a].dot(g[b]);
          ms.emplace_back(c[a], c[b], m);
          ls.emplace_back(c[a], c[b], vol * gg);
          py.emplace_back(c[a], c[b], vol / 4.0 * mat.pyro_p.dot(g[b]));
          for (int i = 0; i < 3; ++i) {
            mu.emplace_back(3 * c[a] + i, 3 * c[b] + i, m);
            // (theta_b, d_i psi_a)
            dv.emplace_back(3 * c[a] + i, c[b], vol / 4.0 * g[a][i]);
            dvt.emplace_back(c[b], 3 * c[a] + i, vol / 4.0 * g[a][i]);
            double pzv = 0;
            for (int k = 0; k < 3; ++k)
              for (int l = 0; l < 3; ++l) pzv += e(k, i, l) * g[a][l] * g[b][k];
            pz.emplace_back(3 * c[a] + i, c[b], vol * pzv);
            pzt.emplace_back(c[b], 3 * c[a] + i, vol * pzv);
            for (int j = 0; j < 3; ++j) {
              const double v = lam * g[a][i] * g[b][j] + mus * ((i == j ? gg : 0.0) + g[a][j] * g[b][i]);
              ke.emplace_back(3 * c[a] + i, 3 * c[b] + j, vol * v);
            }
          }
        }
      }
    }
    const auto& bidx = mesh.boundary_index();
    for (const auto& tri : mesh.boundary_tris()) {
      const Vec3& A = mesh.vertices()[tri[0]];
      const Vec3 nn = (mesh.vertices()[tri[1]] - A).cross(mesh.vertices()[tri[2]] - A);
      const double area = 0.5 * nn.norm();
      const Vec3 n = nn.normalized();
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
          const double m = area / 12.0 * (a == b ? 2.0 : 1.0);
          for (int d = 0; d < 3; ++d) {
            tr.emplace_back(bidx[tri[a]], 3 * tri[b] + d, m * n[d]);
            trt.emplace_back(3 * tri[b] + d, bidx[tri[a]], m * n[d]);
          }
        }
    }
    auto build = [](int r, int c, const std::vector<Eigen::Triplet<double>>& t) {
      SparseR S(r, c);
      S.setFromTriplets(t.begin(), t.end());
      return S;
    };
    f.Ke = build(3 * nv, 3 * nv, ke);
    f.Mu = build(3 * nv, 3 * nv, mu);
    f.M = build(nv, nv, ms);
    f.L = build(nv, nv, ls);
    f.Div = build(3 * nv, nv, dv);
    f.Pz = build(3 * nv, nv, pz);
    f.Py = build(nv, nv, py);
    f.T = build(f.nd, 3 * nv, tr);
    f.DivT = build(nv, 3 * nv, dvt);
    f.PzT = build(nv, 3 * nv, pzt);
    f.Tt = build(3 * nv, f.nd, trt);
    return f;
  }
};

/// Frequency-dependent interior blocks of the coupled operator.
struct InteriorBlocks {
  Complex s;
  SparseC A_s;      // Ke + s^2 rho_e Mu
  SparseC B_s;      // L + c_eps s M
  SparseR C_s;      // L (zero-mean constraint via `mean`)
  SparseR G_div;    // (theta, div v)
  SparseR G_piezo;  // (grad phi, e eps(v))
  SparseR G_pyro;   // (p . grad phi, vartheta)
  SparseR T_trace;  // <psi n, v^->, boundary-test rows
  SparseR G_div_t;    // (div u, vartheta), theta-test rows
  SparseR G_piezo_t;  // (e eps(u), grad psi), phi-test rows
  SparseR T_trace_t;  // <phi_Gamma n, v^->, u-test rows
  Eigen::VectorXd mean;
};

inline InteriorBlocks assemble_interior(const InteriorForms& f, const MaterialParams& mat, const LaplaceParameter& s) {
  InteriorBlocks b;
  b.s = s.s();
  const Complex s2 = s.s() * s.s();
  b.A_s = f.Ke.cast<Complex>() + (s2 * mat.rho_e) * f.Mu.cast<Complex>();
  b.B_s = f.L.cast<Complex>() + (mat.c_eps * s.s()) * f.M.cast<Complex>();
  b.C_s = f.L;
  b.G_div = f.Div;
  b.G_piezo = f.Pz;
  b.G_pyro = f.Py;
  b.T_trace = f.T;
  b.G_div_t = f.DivT;
  b.G_piezo_t = f.PzT;
  b.T_trace_t = f.Tt;
  b.mean = f.mean;
  return b;
}

inline InteriorBlocks assemble_interior(const CoupledMesh& mesh, const MaterialParams& mat, const LaplaceParameter& s) {
  return assemble_interior(InteriorForms::assemble(mesh, mat), mat, s);
}

/// Discrete fields of the four-field form: interior (u, theta, phi) and the
/// exterior trace g = gamma^+ p on the boundary dofs.
struct CouplingFields {
  VectorXc u, theta, phi, g;
};

/// Real part of the Z(s)-weighted off-diagonal couplings evaluated on the
/// diagonal (test = trial):
///   conj(s) [ -zeta (theta, div u) + (grad phi, e eps(u)) + <g n, u> ]
///   + s [ zeta (div u, theta) - (e eps(u), grad phi) ] - (conj(s)/|s|^2) s^2 <u . n, g>.
/// Returns |Re(total)| / scale, where scale is the sum of the magnitudes of
/// the individual terms (so the result is a relative residual).
inline double coupling_skew_check(const InteriorBlocks& b, const MaterialParams& mat, const CouplingFields& x) {
  const Complex s = b.s, sb = std::conj(s);
  auto C = [](const SparseR& m) { return SparseC(m.cast<Complex>()); };
  const Complex t_div_u = x.u.dot(C(b.G_div) * x.theta);          // (theta, div u)
  const Complex t_piezo_u = x.u.dot(C(b.G_piezo) * x.phi);        // (grad phi, e eps(u))
  const Complex t_trace_u = x.u.dot(C(b.T_trace_t) * x.g);        // <g n, u>
  const Complex t_div_theta = x.theta.dot(C(b.G_div_t) * x.u);    // (div u, theta)
  const Complex t_piezo_phi = x.phi.dot(C(b.G_piezo_t) * x.u);    // (e eps(u), grad phi)
  const Complex t_trace_g = x.g.dot(C(b.T_trace) * x.u);          // <u . n, g>
  const Complex terms[] = {sb * (-mat.zeta * t_div_u), sb * t_piezo_u, sb * t_trace_u, s * mat.zeta * t_div_theta,
                           -s * t_piezo_phi, -(sb / std::norm(s)) * s * s * t_trace_g};
  Complex total = 0;
  double scale = 0;
  for (const auto& t : terms) {
    total += t;
    scale += std::abs(t);
  }
  return scale > 0 ? std::abs(total.real()) / scale : 0.0;
}

}  // namespace bfe
