#include "bfe/boundary_ops.hpp"

#include <gtest/gtest.h>

using namespace bfe;

namespace {

double rel_asym(const MatrixXc& A) { return (A - A.transpose()).norm() / A.norm(); }

// Closed forms for n = 0 and n = 1 with x = kappa.
Complex i0(Complex x) { return std::sinh(x) / x; }
Complex k0(Complex x) { return std::exp(-x) / x; }
Complex k1(Complex x) { return std::exp(-x) * (1.0 + x) / (x * x); }
Complex i1(Complex x) { return std::cosh(x) / x - std::sinh(x) / (x * x); }

}  // namespace

TEST(Bessel, ClosedFormsAndWronskian) {
  for (Complex x : {Complex(1, 0), Complex(0.3, 2.0), Complex(2.5, -7.0), Complex(0.05, 0.01)}) {
    const auto b0 = bessel::scaled(0, x);
    EXPECT_LT(std::abs(b0.i * std::exp(x) - i0(x)), 1e-12 * std::abs(i0(x)));
    EXPECT_LT(std::abs(b0.k * std::exp(-x) - k0(x)), 1e-12 * std::abs(k0(x)));
    const auto b1 = bessel::scaled(1, x);
    EXPECT_LT(std::abs(b1.i * std::exp(x) - i1(x)), 1e-10 * std::abs(i1(x)));
    EXPECT_LT(std::abs(b1.k * std::exp(-x) - k1(x)), 1e-12 * std::abs(k1(x)));
    for (int n : {0, 1, 3, 8, 20}) {
      const auto b = bessel::scaled(n, x);
      // i_n k_n' - i_n' k_n = -1 / x^2 (scalings cancel)
      EXPECT_LT(std::abs((b.i * b.dk - b.di * b.k) * x * x + 1.0), 1e-10) << n << " " << x;
    }
  }
}

TEST(Bessel, DerivativeMatchesFiniteDifference) {
  const Complex x(1.3, 0.7);
  const double h = 1e-6;
  for (int n : {0, 2, 5}) {
    auto I = [&](Complex z) { return bessel::scaled(n, z).i * std::exp(z); };
    auto K = [&](Complex z) { return bessel::scaled(n, z).k * std::exp(-z); };
    const auto b = bessel::scaled(n, x);
    EXPECT_LT(std::abs((I(x + h) - I(x - h)) / (2 * h) - b.di * std::exp(x)), 1e-7);
    EXPECT_LT(std::abs((K(x + h) - K(x - h)) / (2 * h) - b.dk * std::exp(-x)), 1e-7);
  }
}

TEST(SphereOracle, ModeZeroClosedForm) {
  const auto e = sphere_oracle(0, 1.0, 1.0);
  EXPECT_NEAR(e.V.real(), (1 - std::exp(-2.0)) / 2, 1e-14);
  EXPECT_NEAR(e.V.real(), 0.432332, 1e-6);
}

TEST(SphereOracle, StaticLimitMatchesLaplaceSpectrum) {
  // classical unit-sphere Laplace spectrum: V = 1/(2n+1), K = -1/(2(2n+1)), W = n(n+1)/(2n+1)
  for (int n = 0; n <= 6; ++n) {
    const auto e = sphere_oracle(n, 1e-6, 1.0);
    const double m = 2.0 * n + 1;
    EXPECT_NEAR(e.V.real(), 1 / m, 1e-6) << n;
    EXPECT_NEAR(e.K.real(), -1 / (2 * m), 1e-6) << n;
    EXPECT_NEAR(e.W.real(), n * (n + 1) / m, 1e-6) << n;
  }
}

TEST(SphereOracle, ModewiseCalderonIdentity) {
  for (Complex s : {Complex(1, 0), Complex(0.5, 3), Complex(2, -10), Complex(0.1, 40)})
    for (int n = 0; n <= 30; ++n) {
      const auto e = sphere_oracle(n, s, 1.0);
      EXPECT_LT(std::abs(e.V * e.W - (0.25 - e.K * e.K)), 1e-10 * std::max(1.0, std::abs(e.V * e.W))) << n << s;
    }
}

TEST(SphereOracle, LargeOrderStaysFinite) {
  const auto e = sphere_oracle(60, Complex(80, 200), 1.0);
  EXPECT_TRUE(std::isfinite(std::abs(e.V)) && std::isfinite(std::abs(e.W)));
}

class SphereOps : public ::testing::Test {
protected:
  static void SetUpTestSuite() {
    for (int level : {1, 2}) {
      surf[level - 1] = meshgen::icosphere(level);
      AssemblyOptions opt;
      opt.calderon_blocks = true;
      ops[level - 1] = assemble_operators(surf[level - 1], LaplaceParameter(1, 0), 1.0, opt);
    }
  }
  static inline Surface surf[2];
  static inline BoundaryOperatorSet ops[2];
};

TEST_F(SphereOps, RayleighQuotientOfConstantDensity) {
  const auto& V = ops[1].V;
  const VectorXc one = VectorXc::Ones(V.rows());
  const Complex q = one.dot(V * one) / surf[1].total_area();
  EXPECT_NEAR(q.real(), 0.432332, 0.03 * 0.432332);
  EXPECT_NEAR(q.imag(), 0.0, 1e-12);
}

TEST_F(SphereOps, ComplexSymmetry) {
  for (const auto& o : ops) {
    EXPECT_LT(rel_asym(o.V), 1e-10);
    EXPECT_LT(rel_asym(o.W), 1e-10);
  }
  // and at a genuinely complex frequency
  const auto o = assemble_operators(surf[0], LaplaceParameter(0.7, 2.3), 1.0);
  EXPECT_LT(rel_asym(o.V), 1e-10);
  EXPECT_LT(rel_asym(o.W), 1e-10);
}

TEST_F(SphereOps, DoubleLayerAdjointPairConverges) {
  double prev = 1e300;
  for (const auto& o : ops) {
    const double e = (o.K.transpose() - o.Kp).norm() / o.Kp.norm();
    EXPECT_LT(e, prev);
    prev = e;
  }
  EXPECT_LT(prev, 0.05);
}

TEST_F(SphereOps, ConstantDensityMatchesModeZero) {
  // K applied to constants: Galerkin eigenvalue against P0 tests
  for (int l = 0; l < 2; ++l) {
    const auto& o = ops[l];
    const auto e = sphere_oracle(0, 1.0, 1.0);
    const VectorXc one = VectorXc::Ones(o.num_dirichlet());
    const Complex kq = (VectorXc::Ones(o.num_neumann()).dot(o.K * one)) / surf[l].total_area();
    const Complex wq = one.dot(o.W * one) / surf[l].total_area();
    EXPECT_NEAR(kq.real(), e.K.real(), 0.05 * std::abs(e.K)) << l;
    EXPECT_NEAR(wq.real(), e.W.real(), 0.05 * std::abs(e.W)) << l;
  }
}

TEST_F(SphereOps, CalderonResidualDecreases) {
  const double r1 = calderon_residual(ops[0], surf[0], 0);
  const double r2 = calderon_residual(ops[1], surf[1], 0);
  EXPECT_LT(r1, 0.1);
  EXPECT_LT(2 * r2, r1) << r1 << " " << r2;
  EXPECT_EQ(calderon_residual(ops[0], VectorXc::Zero(ops[0].num_dirichlet()), VectorXc::Zero(ops[0].num_neumann())),
            0.0);
}

TEST_F(SphereOps, ModeOneCauchyDataIsNearlyInvariant) {
  // exterior Cauchy data of the degree-1 mode is a fixed point of the projector
  const auto& s = surf[1];
  const Complex flux = sphere_exterior_mode_flux(1, 1.0);
  VectorXc phi(s.num_vertices()), lam(s.num_faces());
  for (int v = 0; v < s.num_vertices(); ++v) phi[v] = s.vertices[v].z();
  for (int f = 0; f < s.num_faces(); ++f) lam[f] = flux * s.centroids[f].normalized().z();
  const CalderonProjector C(ops[1]);
  const auto [p1, l1] = C.apply(phi, lam);
  EXPECT_LT(C.norm(p1 - phi, l1 - lam) / C.norm(phi, lam), 0.05);
}

// Interior trace vanishes: V lambda = (K - 1/2) phi with P0 tests. The error
// is dominated by the inscribed-polyhedron geometry and decays like h^2.
TEST(SphereSeries, ExteriorDirichletModeSolution) {
  std::array<double, 3> err{};
  for (int level : {1, 2, 3}) {
    const auto s = meshgen::icosphere(level);
    const auto o = assemble_operators(s, LaplaceParameter(1, 0), 1.0);
    VectorXc phi(s.num_vertices());
    for (int v = 0; v < s.num_vertices(); ++v) phi[v] = s.vertices[v].z();
    const MatrixXc rhs_op = o.K - 0.5 * o.spaces.M10.transpose().cast<Complex>();
    const VectorXc lam = o.V.partialPivLu().solve(rhs_op * phi);
    const std::vector<Vec3> pts{Vec3(0, 0, 1.5), Vec3(0.3, -0.2, -1.4), Vec3(1.5, 0, 0.1)};
    const auto pv = evaluate_potentials(s, phi, lam, LaplaceParameter(1, 0), 1.0, pts);
    const double peak = std::abs(sphere_exterior_mode(1, 1.0, 1.5));
    for (std::size_t k = 0; k < pts.size(); ++k) {
      const double r = pts[k].norm();
      const Complex exact = sphere_exterior_mode(1, 1.0, r) * pts[k].z() / r;
      err[level - 1] = std::max(err[level - 1], std::abs(pv.value[k] - exact) / peak);
    }
  }
  EXPECT_LT(err[1], 0.05);
  EXPECT_LT(err[2], 0.02);
  EXPECT_GT(err[0] / err[1], 3.0);
  EXPECT_GT(err[1] / err[2], 3.0);
}

TEST_F(SphereOps, InteriorRepresentationOfExteriorDataVanishes) {
  const auto& s = surf[1];
  const Complex flux = sphere_exterior_mode_flux(1, 1.0);
  VectorXc phi(s.num_vertices()), lam(s.num_faces());
  for (int v = 0; v < s.num_vertices(); ++v) phi[v] = s.vertices[v].z();
  for (int f = 0; f < s.num_faces(); ++f) lam[f] = flux * s.centroids[f].normalized().z();
  const auto in = evaluate_potentials(s, phi, lam, LaplaceParameter(1, 0), 1.0, {Vec3(0, 0, 0.3), Vec3(0.2, 0.1, -0.4)});
  const auto out = evaluate_potentials(s, phi, lam, LaplaceParameter(1, 0), 1.0, {Vec3(0, 0, 1.6)});
  EXPECT_LT(in.value.cwiseAbs().maxCoeff() / std::abs(out.value[0]), 0.1);
}

TEST_F(SphereOps, JumpRelationsConverge) {
  std::mt19937_64 rng(5);
  std::array<JumpTestResult, 2> r;
  for (int l = 0; l < 2; ++l) {
    std::mt19937_64 local(rng());
    const auto [phi, lam] = smooth_cauchy_data(surf[l], local);
    r[l] = jump_test(surf[l], phi, lam, LaplaceParameter(1, 0.5), 1.0);
  }
  const double ot = std::log2(r[0].trace_error / r[1].trace_error);
  const double of = std::log2(r[0].flux_error / r[1].flux_error);
  EXPECT_GE(ot, 0.5) << r[0].trace_error << " " << r[1].trace_error;
  EXPECT_GE(of, 0.5) << r[0].flux_error << " " << r[1].flux_error;
}

TEST(Potentials, ZeroDensitiesGiveZero) {
  const auto s = meshgen::icosphere(0);
  const auto pv = evaluate_potentials(s, VectorXc::Zero(s.num_vertices()), VectorXc::Zero(s.num_faces()),
                                      LaplaceParameter(1, 1), 1.0, {Vec3(2, 0, 0), Vec3(0, 0.1, 0)}, true);
  EXPECT_EQ(pv.value.norm(), 0.0);
  EXPECT_EQ(pv.gradient[0].norm(), 0.0);
}

TEST(Potentials, PointOnSurfaceThrows) {
  const auto s = meshgen::icosphere(0);
  EXPECT_THROW(evaluate_potentials(s, VectorXc::Ones(s.num_vertices()), VectorXc::Zero(s.num_faces()),
                                   LaplaceParameter(1, 0), 1.0, {s.vertices[3]}),
               SingularityError);
}

TEST(Potentials, DoubleLayerOfConstantIsMinusOneInside) {
  // static limit: D 1 = -1 inside, 0 outside, for any closed surface
  const auto s = meshgen::icosphere(1);
  const auto pv = evaluate_potentials(s, VectorXc::Ones(s.num_vertices()), VectorXc::Zero(s.num_faces()),
                                      LaplaceParameter(1e-9, 0), 1.0,
                                      {Vec3(0, 0, 0), Vec3(0.5, 0.3, 0.1), Vec3(0, 0, 0.99 * s.vertices[0].norm()),
                                       Vec3(3, 0, 0)});
  EXPECT_NEAR(pv.value[0].real(), -1.0, 1e-8);
  EXPECT_NEAR(pv.value[1].real(), -1.0, 1e-8);
  EXPECT_NEAR(pv.value[2].real(), -1.0, 1e-6);
  EXPECT_NEAR(pv.value[3].real(), 0.0, 1e-8);
}

TEST(Potentials, GradientMatchesFiniteDifferences) {
  const auto s = meshgen::icosphere(1);
  std::mt19937_64 rng(8);
  const auto [phi, lam] = smooth_cauchy_data(s, rng);
  const LaplaceParameter sp(0.8, 1.7);
  const Vec3 x(0.2, 1.3, -0.4);
  const double h = 1e-5;
  std::vector<Vec3> pts{x};
  for (int d = 0; d < 3; ++d) {
    Vec3 e = Vec3::Zero();
    e[d] = h;
    pts.push_back(x + e);
    pts.push_back(x - e);
  }
  const auto pv = evaluate_potentials(s, phi, lam, sp, 1.0, pts, true);
  for (int d = 0; d < 3; ++d) {
    const Complex fd = (pv.value[1 + 2 * d] - pv.value[2 + 2 * d]) / (2 * h);
    EXPECT_LT(std::abs(fd - pv.gradient[0][d]), 1e-6 * pv.gradient[0].norm());
  }
}

TEST(BoundaryOps, TraceMassesHaveFullRank) {
  const auto s = meshgen::icosphere(1);
  const auto t = TraceSpacePair::build(s);
  EXPECT_NEAR(t.M11.sum(), s.total_area(), 1e-12);
  EXPECT_NEAR(t.M10.sum(), s.total_area(), 1e-12);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(t.M10);
  EXPECT_EQ(svd.rank(), std::min(t.n_dirichlet, t.n_neumann));
  // surface stiffness annihilates constants
  EXPECT_LT((t.S11 * Eigen::VectorXd::Ones(t.n_dirichlet)).norm(), 1e-12);
}

TEST(BoundaryOps, MatrixMarketDump) {
  MatrixXc A(2, 1);
  A << Complex(1, 2), Complex(3, -4);
  const std::string path = ::testing::TempDir() + "/bfe_dump.mtx";
  write_matrix_market(path, A);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "%%MatrixMarket matrix array complex general");
  int m, n;
  double re, im;
  in >> m >> n >> re >> im;
  EXPECT_EQ(m, 2);
  EXPECT_EQ(n, 1);
  EXPECT_EQ(re, 1.0);
  EXPECT_EQ(im, 2.0);
}
