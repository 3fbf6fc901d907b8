#pragma once

// Galerkin boundary elements on the boundary triangulation: continuous P1
// Dirichlet traces (one dof per boundary vertex) and P0 Neumann traces (one
// dof per face).
//
// Conventions, with n the outward normal and p = D phi - S lambda:
//   gamma^+ p = ( 1/2 + K) phi - V lambda
//   gamma^- p = (-1/2 + K) phi - V lambda
//   d_n^+ p   = -W phi + (1/2 - K') lambda
//   [p] = phi,  [d_n p] = lambda   (outside minus inside)
//
// Matrix naming: the first digit is the test space, the second the trial
// space (0 = P0, 1 = P1). V = V00, K = K01, Kp = K'10, W = W11.

#include "bfe/bessel.hpp"
#include "bfe/kernel.hpp"
#include "bfe/mesh.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include <fstream>
#include <iomanip>
#include <random>

namespace bfe {

struct TraceSpacePair {
  int n_dirichlet = 0;
  int n_neumann = 0;
  Eigen::MatrixXd M11;  // P1 x P1 mass
  Eigen::MatrixXd M10;  // P1 test x P0 trial
  Eigen::VectorXd M00;  // P0 mass (face areas)
  Eigen::MatrixXd S11;  // P1 surface stiffness

  static TraceSpacePair build(const Surface& surf) {
    TraceSpacePair t;
    t.n_dirichlet = surf.num_vertices();
    t.n_neumann = surf.num_faces();
    t.M11 = Eigen::MatrixXd::Zero(t.n_dirichlet, t.n_dirichlet);
    t.M10 = Eigen::MatrixXd::Zero(t.n_dirichlet, t.n_neumann);
    t.M00 = Eigen::VectorXd::Zero(t.n_neumann);
    t.S11 = Eigen::MatrixXd::Zero(t.n_dirichlet, t.n_dirichlet);
    for (int f = 0; f < surf.num_faces(); ++f) {
      const auto& tri = surf.tris[f];
      const double A = surf.areas[f];
      std::array<Vec3, 3> g;
      for (int k = 0; k < 3; ++k)
        g[k] = surf.normals[f].cross(surf.vertices[tri[(k + 2) % 3]] - surf.vertices[tri[(k + 1) % 3]]) / (2 * A);
      t.M00[f] = A;
      for (int a = 0; a < 3; ++a) {
        t.M10(tri[a], f) += A / 3.0;
        for (int b = 0; b < 3; ++b) {
          t.M11(tri[a], tri[b]) += A / 12.0 * (a == b ? 2.0 : 1.0);
          t.S11(tri[a], tri[b]) += A * g[a].dot(g[b]);
        }
      }
    }
    return t;
  }
};

struct AssemblyOptions {
  int singular_order = 5;   // Gauss points per relative coordinate
  int regular_order = 4;    // polynomial degree of the regular triangle rule
  int far_order = 2;        // for panels more than four diameters apart
  bool calderon_blocks = false;  // also assemble K11 and V10
};

struct BoundaryOperatorSet {
  Complex s;
  double c = 1.0;
  MatrixXc V;    // N_n x N_n
  MatrixXc K;    // N_n x N_d, kernel d_{n_y} E
  MatrixXc Kp;   // N_d x N_n, kernel d_{n_x} E
  MatrixXc W;    // N_d x N_d
  MatrixXc K11;  // N_d x N_d (optional)
  MatrixXc V10;  // N_d x N_n (optional)
  TraceSpacePair spaces;

  int num_dirichlet() const { return spaces.n_dirichlet; }
  int num_neumann() const { return spaces.n_neumann; }
};

namespace detail {

struct PairSetup {
  quad::PairKind kind = quad::PairKind::Regular;
  std::array<int, 3> pi{0, 1, 2}, pj{0, 1, 2};
};

// Reorders local vertices so that common vertices come first, matching the
// conventions of quad::pair_rule.
inline PairSetup classify(const Tri& a, const Tri& b) {
  std::array<std::array<int, 2>, 3> common{};
  int nc = 0;
  for (int ia = 0; ia < 3; ++ia)
    for (int ib = 0; ib < 3; ++ib)
      if (a[ia] == b[ib]) common[nc++] = {ia, ib};
  PairSetup p;
  switch (nc) {
    case 3:
      p.kind = quad::PairKind::Coincident;
      for (int k = 0; k < 3; ++k) p.pj[k] = common[k][1];
      for (int k = 0; k < 3; ++k) p.pi[k] = common[k][0];
      break;
    case 2:
      p.kind = quad::PairKind::SharedEdge;
      p.pi = {common[0][0], common[1][0], 3 - common[0][0] - common[1][0]};
      p.pj = {common[0][1], common[1][1], 3 - common[0][1] - common[1][1]};
      break;
    case 1:
      p.kind = quad::PairKind::SharedVertex;
      p.pi = {common[0][0], (common[0][0] + 1) % 3, (common[0][0] + 2) % 3};
      p.pj = {common[0][1], (common[0][1] + 1) % 3, (common[0][1] + 2) % 3};
      break;
    default: break;
  }
  return p;
}

// Surface curls n x grad(lambda_k) of the three hat functions of face f.
inline std::array<Vec3, 3> surface_curls(const Surface& surf, int f) {
  const auto& t = surf.tris[f];
  std::array<Vec3, 3> c;
  for (int k = 0; k < 3; ++k)
    c[k] = (surf.vertices[t[(k + 1) % 3]] - surf.vertices[t[(k + 2) % 3]]) / (2 * surf.areas[f]);
  return c;
}

}  // namespace detail

inline BoundaryOperatorSet assemble_operators(const Surface& surf, const LaplaceParameter& s, double c,
                                              const AssemblyOptions& opt = {}) {
  if (!(c > 0)) throw DimensionError("sound speed must be positive");
  const int nf = surf.num_faces(), nd = surf.num_vertices();
  for (int f = 0; f < nf; ++f)
    if (!(surf.areas[f] > 1e-14 * surf.diameters[f] * surf.diameters[f]))
      throw SingularityError("degenerate boundary panel " + std::to_string(f));
  const Complex kappa = kernel::wavenumber(s.s(), c);
  const bool cal = opt.calderon_blocks;

  BoundaryOperatorSet ops;
  ops.s = s.s();
  ops.c = c;
  ops.spaces = TraceSpacePair::build(surf);
  ops.V = MatrixXc::Zero(nf, nf);
  ops.K = MatrixXc::Zero(nf, nd);
  ops.Kp = MatrixXc::Zero(nd, nf);
  ops.W = MatrixXc::Zero(nd, nd);
  if (cal) {
    ops.K11 = MatrixXc::Zero(nd, nd);
    ops.V10 = MatrixXc::Zero(nd, nf);
  }
  std::vector<std::array<Vec3, 3>> curls(nf);
  for (int f = 0; f < nf; ++f) curls[f] = detail::surface_curls(surf, f);
  const double inv4pi = 1.0 / (4.0 * kPi);

#pragma omp parallel
  {
    // rows indexed by P1 test dofs are shared between faces: accumulate privately
    MatrixXc Kp = MatrixXc::Zero(nd, nf), W = MatrixXc::Zero(nd, nd);
    MatrixXc K11, V10;
    if (cal) {
      K11 = MatrixXc::Zero(nd, nd);
      V10 = MatrixXc::Zero(nd, nf);
    }
#pragma omp for schedule(dynamic)
    for (int i = 0; i < nf; ++i) {
      const Tri& ti = surf.tris[i];
      const Vec3& ni = surf.normals[i];
      for (int j = 0; j < nf; ++j) {
        const Tri& tj = surf.tris[j];
        const Vec3& nj = surf.normals[j];
        const auto setup = detail::classify(ti, tj);
        const quad::PairRule* rule;
        if (setup.kind != quad::PairKind::Regular) {
          rule = &quad::pair_rule(setup.kind, opt.singular_order);
        } else {
          const double h = std::max(surf.diameters[i], surf.diameters[j]);
          const double dist = (surf.centroids[i] - surf.centroids[j]).norm();
          int order = opt.regular_order;
          if (dist - h < 0.5 * h) order += 3;
          else if (dist > 4 * h) order = std::min(order, opt.far_order);
          rule = &quad::pair_rule(quad::PairKind::Regular, order);
        }
        std::array<Vec3, 3> Pi, Pj;
        for (int k = 0; k < 3; ++k) {
          Pi[k] = surf.vertices[ti[setup.pi[k]]];
          Pj[k] = surf.vertices[tj[setup.pj[k]]];
        }
        Complex v = 0, kb[3] = {0, 0, 0}, kpa[3] = {0, 0, 0}, m[3][3] = {}, k11[3][3] = {}, v10[3] = {0, 0, 0};
        const std::size_t nq = rule->weights.size();
        for (std::size_t q = 0; q < nq; ++q) {
          const auto bx = quad::barycentric(rule->x[q]);
          const auto by = quad::barycentric(rule->y[q]);
          const Vec3 X = bx[0] * Pi[0] + bx[1] * Pi[1] + bx[2] * Pi[2];
          const Vec3 Y = by[0] * Pj[0] + by[1] * Pj[1] + by[2] * Pj[2];
          const Vec3 d = X - Y;
          const double r = d.norm();
          const Complex e = std::exp(-kappa * r) * inv4pi;
          const Complex G = e / r;
          const Complex f = (1.0 + kappa * r) * e / (r * r * r);
          const double w = rule->weights[q];
          const Complex wG = w * G;
          const Complex dny = w * f * nj.dot(d);
          const Complex dnx = -w * f * ni.dot(d);
          v += wG;
          for (int a = 0; a < 3; ++a) {
            kb[a] += dny * by[a];
            kpa[a] += dnx * bx[a];
            for (int b = 0; b < 3; ++b) m[a][b] += wG * bx[a] * by[b];
          }
          if (cal)
            for (int a = 0; a < 3; ++a) {
              v10[a] += wG * bx[a];
              for (int b = 0; b < 3; ++b) k11[a][b] += dny * bx[a] * by[b];
            }
        }
        const double J = 4.0 * surf.areas[i] * surf.areas[j];
        const Complex k2nn = kappa * kappa * ni.dot(nj);
        ops.V(i, j) += J * v;
        for (int a = 0; a < 3; ++a) {
          const int ga = ti[setup.pi[a]];
          const int gb = tj[setup.pj[a]];
          ops.K(i, gb) += J * kb[a];
          Kp(ga, j) += J * kpa[a];
          for (int b = 0; b < 3; ++b) {
            const int gbb = tj[setup.pj[b]];
            W(ga, gbb) += J * (curls[i][setup.pi[a]].dot(curls[j][setup.pj[b]]) * v + k2nn * m[a][b]);
            if (cal) K11(ga, gbb) += J * k11[a][b];
          }
          if (cal) V10(ga, j) += J * v10[a];
        }
      }
    }
#pragma omp critical
    {
      ops.Kp += Kp;
      ops.W += W;
      if (cal) {
        ops.K11 += K11;
        ops.V10 += V10;
      }
    }
  }
  // (i, j) and (j, i) use differently oriented rules; average the two
  // approximations so the symmetric kernels give exactly symmetric matrices.
  ops.V = (0.5 * (ops.V + ops.V.transpose())).eval();
  ops.W = (0.5 * (ops.W + ops.W.transpose())).eval();
  return ops;
}

inline BoundaryOperatorSet assemble_operators(const CoupledMesh& mesh, const LaplaceParameter& s, double c,
                                              const AssemblyOptions& opt = {}) {
  return assemble_operators(Surface::from_mesh(mesh), s, c, opt);
}

/// Dense matrix in MatrixMarket array format (complex, column-major).
inline void write_matrix_market(const std::string& path, const MatrixXc& A) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write matrix file '" + path + "'");
  out << "%%MatrixMarket matrix array complex general\n" << A.rows() << ' ' << A.cols() << "\n";
  out << std::setprecision(17);
  for (Eigen::Index j = 0; j < A.cols(); ++j)
    for (Eigen::Index i = 0; i < A.rows(); ++i) out << A(i, j).real() << ' ' << A(i, j).imag() << "\n";
  if (!out) throw IoError("write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// Unit-sphere spectrum

struct SphereEigenvalues {
  Complex V, K, Kp, W;
};

/// Eigenvalues of V, K, K', W on the unit sphere for spherical harmonics of
/// degree n at wavenumber kappa = s / c (derivation in docs/sphere_oracle.md).
inline SphereEigenvalues sphere_oracle(int n, Complex s, double c) {
  const Complex k = s / c;
  const auto b = bessel::scaled(n, k);
  SphereEigenvalues e;
  e.V = k * b.i * b.k;
  e.K = 0.5 * k * k * (b.di * b.k + b.dk * b.i);
  e.Kp = e.K;
  e.W = -k * k * k * b.di * b.dk;
  return e;
}

/// k_n(kappa r) / k_n(kappa): exterior field of degree-n Dirichlet data on the unit sphere.
inline Complex sphere_exterior_mode(int n, Complex kappa, double r) {
  const auto num = bessel::scaled_k_table(n, kappa * r);
  const auto den = bessel::scaled_k_table(n, kappa);
  return std::exp(-kappa * (r - 1.0)) * num[n] / den[n];
}

/// Radial derivative of sphere_exterior_mode at r = 1.
inline Complex sphere_exterior_mode_flux(int n, Complex kappa) {
  const auto b = bessel::scaled(n, kappa);
  return kappa * b.dk / b.k;
}

// ---------------------------------------------------------------------------
// Calderon projector

/// Random smooth Cauchy data: complex quadratic polynomials sampled at the
/// vertices (phi) and face centroids (lambda).
inline std::pair<VectorXc, VectorXc> smooth_cauchy_data(const Surface& surf, std::mt19937_64& rng) {
  std::normal_distribution<double> N(0, 1);
  auto poly = [&] {
    std::array<Complex, 10> a;
    for (auto& x : a) x = Complex(N(rng), N(rng));
    return [a](const Vec3& p) {
      return a[0] + a[1] * p.x() + a[2] * p.y() + a[3] * p.z() + a[4] * p.x() * p.x() + a[5] * p.y() * p.y() +
             a[6] * p.z() * p.z() + a[7] * p.x() * p.y() + a[8] * p.y() * p.z() + a[9] * p.x() * p.z();
    };
  };
  const auto fp = poly(), fl = poly();
  VectorXc phi(surf.num_vertices()), lam(surf.num_faces());
  for (int v = 0; v < surf.num_vertices(); ++v) phi[v] = fp(surf.vertices[v]);
  for (int f = 0; f < surf.num_faces(); ++f) lam[f] = fl(surf.centroids[f]);
  return {phi, lam};
}

class CalderonProjector {
public:
  explicit CalderonProjector(const BoundaryOperatorSet& ops) : ops_(ops), m11_(ops.spaces.M11) {
    if (ops.K11.size() == 0 || ops.V10.size() == 0)
      throw DimensionError("Calderon projector needs operators assembled with calderon_blocks = true");
  }

  std::pair<VectorXc, VectorXc> apply(const VectorXc& phi, const VectorXc& lam) const {
    const auto& sp = ops_.spaces;
    const Eigen::MatrixXd M10 = sp.M10;
    const VectorXc r1 = 0.5 * (sp.M11.cast<Complex>() * phi) + ops_.K11 * phi - ops_.V10 * lam;
    const VectorXc r2 = -(ops_.W * phi) + 0.5 * (M10.cast<Complex>() * lam) - ops_.Kp * lam;
    VectorXc phi2 = m11_.solve(r1);
    const VectorXc p1 = m11_.solve(r2);
    VectorXc lam2 = (M10.transpose().cast<Complex>() * p1).array() / sp.M00.array().cast<Complex>();
    return {phi2, lam2};
  }

  double norm(const VectorXc& phi, const VectorXc& lam) const {
    const auto& sp = ops_.spaces;
    const double a = (phi.adjoint() * sp.M11.cast<Complex>() * phi)(0).real();
    const double b = (lam.array().abs2() * sp.M00.array()).sum();
    return std::sqrt(std::max(0.0, a + b));
  }

private:
  const BoundaryOperatorSet& ops_;
  Eigen::LLT<Eigen::MatrixXd> m11_;
};

/// ||C^2 x - C x|| / ||x|| in the trace L2 norms for the given Cauchy data (0 for x = 0).
inline double calderon_residual(const BoundaryOperatorSet& ops, const VectorXc& phi, const VectorXc& lam) {
  const CalderonProjector C(ops);
  const double nx = C.norm(phi, lam);
  if (nx == 0.0) return 0.0;
  const auto [p1, l1] = C.apply(phi, lam);
  const auto [p2, l2] = C.apply(p1, l1);
  return C.norm(p2 - p1, l2 - l1) / nx;
}

/// Largest residual over `samples` random smooth Cauchy data.
inline double calderon_residual(const BoundaryOperatorSet& ops, const Surface& surf, std::uint64_t seed,
                                int samples = 4) {
  std::mt19937_64 rng(seed);
  double worst = 0;
  for (int k = 0; k < samples; ++k) {
    const auto [phi, lam] = smooth_cauchy_data(surf, rng);
    worst = std::max(worst, calderon_residual(ops, phi, lam));
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Layer potentials at points off the surface

inline double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  // closest point by Voronoi-region classification
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return ap.norm();
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return bp.norm();
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) return (p - (a + d1 / (d1 - d3) * ab)).norm();
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return cp.norm();
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) return (p - (a + d2 / (d2 - d6) * ac)).norm();
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0)
    return (p - (b + (d4 - d3) / ((d4 - d3) + (d5 - d6)) * (c - b))).norm();
  const double den = 1.0 / (va + vb + vc);
  return (p - (a + ab * (vb * den) + ac * (vc * den))).norm();
}

inline double distance_to_surface(const Surface& surf, const Vec3& p) {
  double d = std::numeric_limits<double>::infinity();
  for (const auto& t : surf.tris)
    d = std::min(d, point_triangle_distance(p, surf.vertices[t[0]], surf.vertices[t[1]], surf.vertices[t[2]]));
  return d;
}

struct PotentialValues {
  VectorXc value;               // (D phi - S lambda)(x)
  std::vector<CVec3> gradient;  // filled when requested
};

namespace detail {

struct PotentialAccumulator {
  Complex value = 0;
  CVec3 grad = CVec3::Zero();
};

// Integrates the Kirchhoff integrand of one face over a sub-triangle given by
// barycentric corners B (relative to the face), refining towards x.
inline void face_potential(const Vec3& x, const std::array<Vec3, 3>& P, const Vec3& n, double area,
                           const std::array<Complex, 3>& phi, Complex lam, Complex kappa,
                           const std::array<Vec3, 3>& B, double area_fraction, int depth, bool grad,
                           PotentialAccumulator& acc) {
  std::array<Vec3, 3> Q;
  for (int k = 0; k < 3; ++k) Q[k] = B[k][0] * P[0] + B[k][1] * P[1] + B[k][2] * P[2];
  const double diam = std::max({(Q[1] - Q[0]).norm(), (Q[2] - Q[1]).norm(), (Q[0] - Q[2]).norm()});
  const double dist = point_triangle_distance(x, Q[0], Q[1], Q[2]);
  int order = 0;
  if (dist > 4.0 * diam) order = 4;
  else if (dist > 1.5 * diam || depth >= 40) order = 8;
  if (order == 0) {
    std::array<Vec3, 3> M{0.5 * (B[0] + B[1]), 0.5 * (B[1] + B[2]), 0.5 * (B[2] + B[0])};
    const double af = 0.25 * area_fraction;
    face_potential(x, P, n, area, phi, lam, kappa, {B[0], M[0], M[2]}, af, depth + 1, grad, acc);
    face_potential(x, P, n, area, phi, lam, kappa, {M[0], B[1], M[1]}, af, depth + 1, grad, acc);
    face_potential(x, P, n, area, phi, lam, kappa, {M[2], M[1], B[2]}, af, depth + 1, grad, acc);
    face_potential(x, P, n, area, phi, lam, kappa, {M[0], M[1], M[2]}, af, depth + 1, grad, acc);
    return;
  }
  static const quad::TriangleRule r4 = quad::triangle_rule(4), r8 = quad::triangle_rule(8);
  const auto& rule = order == 4 ? r4 : r8;
  const double J = 2.0 * area * area_fraction;
  const double inv4pi = 1.0 / (4.0 * kPi);
  for (std::size_t q = 0; q < rule.weights.size(); ++q) {
    const auto bs = quad::barycentric(rule.points[q]);
    const Vec3 b = bs[0] * B[0] + bs[1] * B[1] + bs[2] * B[2];
    const Vec3 y = b[0] * P[0] + b[1] * P[1] + b[2] * P[2];
    const Complex ph = b[0] * phi[0] + b[1] * phi[1] + b[2] * phi[2];
    const Vec3 d = x - y;
    const double r = d.norm();
    const Complex e = std::exp(-kappa * r) * inv4pi;
    const Complex f = (1.0 + kappa * r) * e / (r * r * r);
    const double w = rule.weights[q] * J;
    const double nd = n.dot(d);
    acc.value += w * (f * nd * ph - e / r * lam);
    if (grad) {
      const Complex fp = -e * (3.0 + 3.0 * kappa * r + kappa * kappa * r * r) / (r * r * r * r);
      const CVec3 gD = f * n.cast<Complex>() + (nd * fp / r) * d.cast<Complex>();
      const CVec3 gS = -f * d.cast<Complex>();
      acc.grad += w * (gD * ph - gS * lam);
    }
  }
}

}  // namespace detail

/// Kirchhoff representation D(s) phi - S(s) lambda (and optionally its
/// gradient) at points off the surface. Panels close to a point are
/// subdivided adaptively so the result stays accurate down to tiny distances.
inline PotentialValues evaluate_potentials(const Surface& surf, const VectorXc& phi, const VectorXc& lam,
                                           const LaplaceParameter& s, double c, const std::vector<Vec3>& points,
                                           bool with_gradient = false) {
  if (phi.size() != surf.num_vertices() || lam.size() != surf.num_faces())
    throw DimensionError("density sizes do not match the surface (" + std::to_string(phi.size()) + ", " +
                         std::to_string(lam.size()) + ")");
  double diameter = 0;
  for (const auto& a : surf.vertices)
    for (const auto& b : surf.vertices) diameter = std::max(diameter, (a - b).norm());
  const Complex kappa = kernel::wavenumber(s.s(), c);
  PotentialValues out;
  out.value = VectorXc::Zero(static_cast<Eigen::Index>(points.size()));
  if (with_gradient) out.gradient.assign(points.size(), CVec3::Zero());
  const std::array<Vec3, 3> ref{Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
  const int np = static_cast<int>(points.size());
  std::string failure;
#pragma omp parallel for schedule(dynamic)
  for (int p = 0; p < np; ++p) {
    const Vec3& x = points[p];
    if (distance_to_surface(surf, x) <= 1e-6 * diameter) {
#pragma omp critical
      failure = "potential evaluation point " + std::to_string(p) + " lies on the surface";
      continue;
    }
    detail::PotentialAccumulator acc;
    for (int f = 0; f < surf.num_faces(); ++f) {
      const auto& t = surf.tris[f];
      const std::array<Vec3, 3> P{surf.vertices[t[0]], surf.vertices[t[1]], surf.vertices[t[2]]};
      detail::face_potential(x, P, surf.normals[f], surf.areas[f], {phi[t[0]], phi[t[1]], phi[t[2]]}, lam[f],
                             kappa, ref, 1.0, 0, with_gradient, acc);
    }
    out.value[p] = acc.value;
    if (with_gradient) out.gradient[p] = acc.grad;
  }
  if (!failure.empty()) throw SingularityError(failure);
  return out;
}

// ---------------------------------------------------------------------------
// Jump relations

struct JumpTestResult {
  double trace_error = 0;  // max |[p] - phi| / max |phi| over sampled faces
  double flux_error = 0;   // max |[d_n p] - lambda| / max |lambda|
  double delta = 0;        // largest normal offset used
};

/// Extrapolated jumps of (D phi - S lambda) across face centroids. Offsets are
/// delta, delta/2, delta/4 with delta = delta_ratio * h^2 / R (h the largest
/// panel diameter, R the circumscribing radius), so the offset shrinks faster
/// than the panels; quadratic Richardson extrapolation removes the O(delta)
/// and O(delta^2) terms.
inline JumpTestResult jump_test(const Surface& surf, const VectorXc& phi, const VectorXc& lam,
                                const LaplaceParameter& s, double c, int max_faces = 24, double delta_ratio = 0.5) {
  const double h = surf.max_diameter();
  Vec3 centre = Vec3::Zero();
  for (const auto& v : surf.vertices) centre += v;
  centre /= surf.num_vertices();
  double R = 0;
  for (const auto& v : surf.vertices) R = std::max(R, (v - centre).norm());
  const double delta = delta_ratio * h * h / R;
  const int nf = surf.num_faces();
  const int stride = std::max(1, nf / max_faces);
  std::vector<int> faces;
  for (int f = 0; f < nf && static_cast<int>(faces.size()) < max_faces; f += stride) faces.push_back(f);

  std::vector<Vec3> pts;
  for (int f : faces)
    for (double d : {delta, delta / 2, delta / 4})
      for (double side : {1.0, -1.0}) pts.push_back(surf.centroids[f] + side * d * surf.normals[f]);
  const auto pv = evaluate_potentials(surf, phi, lam, s, c, pts, true);

  JumpTestResult res;
  res.delta = delta;
  const double phimax = phi.cwiseAbs().maxCoeff(), lammax = lam.cwiseAbs().maxCoeff();
  auto extrapolate = [](Complex j1, Complex j2, Complex j4) { return (8.0 * j4 - 6.0 * j2 + j1) / 3.0; };
  for (std::size_t k = 0; k < faces.size(); ++k) {
    const int f = faces[k];
    const CVec3 n = surf.normals[f].cast<Complex>();
    std::array<Complex, 3> jp, jn;
    for (int l = 0; l < 3; ++l) {
      const std::size_t o = 6 * k + 2 * l;
      jp[l] = pv.value[o] - pv.value[o + 1];
      jn[l] = n.dot(pv.gradient[o]) - n.dot(pv.gradient[o + 1]);  // n is real: dot() conjugates nothing
    }
    const auto& t = surf.tris[f];
    const Complex phic = (phi[t[0]] + phi[t[1]] + phi[t[2]]) / 3.0;
    if (phimax > 0) res.trace_error = std::max(res.trace_error, std::abs(extrapolate(jp[0], jp[1], jp[2]) - phic) / phimax);
    if (lammax > 0) res.flux_error = std::max(res.flux_error, std::abs(extrapolate(jn[0], jn[1], jn[2]) - lam[f]) / lammax);
  }
  return res;
}

}  // namespace bfe
