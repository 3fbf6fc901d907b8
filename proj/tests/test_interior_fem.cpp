#include "bfe/constitutive.hpp"
#include "bfe/interior_fem.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace bfe;

namespace {

MaterialParams sample_material() {
  MaterialParams m;
  m.rho_e = 1.7;
  m.lame_lambda = 2.0;
  m.lame_mu = 1.5;
  PiezoTensor::Voigt e;
  e << 0.3, 0.1, 0.2, 0.05, 0.4, 0.15,
       0.2, 0.25, 0.1, 0.3, 0.05, 0.1,
       0.1, 0.2, 0.35, 0.1, 0.2, 0.05;
  m.piezo_e = PiezoTensor(e);
  m.zeta = 0.7;
  m.c_eps = 1.3;
  m.pyro_p = Vec3(0.1, 0.2, -0.1);
  m.dielectric_eps = 1.1;
  return m;
}

VectorXc random_vec(int n, std::mt19937& rng) {
  std::normal_distribution<double> N;
  VectorXc v(n);
  for (int i = 0; i < n; ++i) v[i] = Complex(N(rng), N(rng));
  return v;
}

CouplingFields random_fields(const InteriorForms& f, std::mt19937& rng) {
  return {random_vec(3 * f.nv, rng), random_vec(f.nv, rng), random_vec(f.nv, rng), random_vec(f.nd, rng)};
}

double quad_form(const SparseR& A, const VectorXc& x) { return x.dot(A.cast<Complex>() * x).real(); }

CoupledMesh perturbed_cube(int n, unsigned seed) {
  const auto c = meshgen::cube(n);
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> U(-0.15, 0.15);
  auto v = c.vertices();
  const double h = 1.0 / n;
  for (auto& x : v) {
    bool interior = true;
    for (int d = 0; d < 3; ++d) interior = interior && x[d] > 1e-12 && x[d] < 1 - 1e-12;
    if (interior) x += h * Vec3(U(rng), U(rng), U(rng));
  }
  return CoupledMesh::from_tets(v, c.tets());
}

}  // namespace

TEST(InteriorFem, GradientsOfBarycentrics) {
  const auto m = perturbed_cube(2, 1);
  for (int t = 0; t < m.num_tets(); ++t) {
    const auto g = p1_gradients(m, t);
    const auto& c = m.tets()[t];
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        EXPECT_NEAR(g[a].dot(m.vertices()[c[b]] - m.vertices()[c[0]]), (a == b) - (a == 0), 1e-12);
  }
}

// Element matrices against a quadrature route through the constitutive laws.
TEST(InteriorFem, SingleElementMatchesConstitutiveOracle) {
  const auto mat = sample_material();
  const auto mesh = CoupledMesh::from_tets(
      {Vec3(0.1, 0, 0), Vec3(1.2, 0.1, 0), Vec3(0.2, 0.9, 0.1), Vec3(0.3, 0.2, 1.1)}, {Tet{0, 1, 2, 3}});
  const auto f = InteriorForms::assemble(mesh, mat);
  const auto g = p1_gradients(mesh, 0);
  const double vol = mesh.tet_volume(0);
  const auto rule = quad::tet_rule_degree2();
  auto unit = [](int i) { return CVec3(CVec3::Unit(i)); };
  const SparseR& Ke = f.Ke;
  for (int a = 0; a < 4; ++a)
    for (int i = 0; i < 3; ++i)
      for (int b = 0; b < 4; ++b) {
        for (int j = 0; j < 3; ++j) {
          // trial u = psi_b e_j, test v = psi_a e_i
          const auto su = constitutive::StateAtPoint::from_gradients(unit(j) * g[b].cast<Complex>().transpose(), 0.0,
                                                                     CVec3::Zero());
          const CMat3 sig = constitutive::elastic_stress(su.strain, mat);
          const CMat3 gv = unit(i) * g[a].cast<Complex>().transpose();
          const Complex ref = vol * (sig.array() * (0.5 * (gv + gv.transpose())).array()).sum();
          EXPECT_NEAR(Ke.coeff(3 * a + i, 3 * b + j), ref.real(), 1e-12);
        }
        // (grad phi_b, e eps(v)) with v = psi_a e_i: electric displacement of the strain
        const auto sv = constitutive::StateAtPoint::from_gradients(unit(i) * g[a].cast<Complex>().transpose(), 0.0,
                                                                   CVec3::Zero());
        const Complex pz = vol * g[b].cast<Complex>().dot(constitutive::electric_displacement(sv, mat));
        EXPECT_NEAR(f.Pz.coeff(3 * a + i, b), pz.real(), 1e-12);
        EXPECT_NEAR(f.PzT.coeff(b, 3 * a + i), pz.real(), 1e-12);
        // (theta_b, div v) via quadrature of the barycentric
        double dv = 0, ms = 0, py = 0;
        for (std::size_t q = 0; q < rule.weights.size(); ++q) {
          const auto& l = rule.points[q];
          dv += rule.weights[q] * vol * l[b] * g[a][i];
          ms += rule.weights[q] * vol * l[a] * l[b];
          py += rule.weights[q] * vol * l[a] * mat.pyro_p.dot(g[b]);
        }
        EXPECT_NEAR(f.Div.coeff(3 * a + i, b), dv, 1e-12);
        EXPECT_NEAR(f.DivT.coeff(b, 3 * a + i), dv, 1e-12);
        if (i == 0) {
          EXPECT_NEAR(f.M.coeff(a, b), ms, 1e-12);
          EXPECT_NEAR(f.Py.coeff(a, b), py, 1e-12);
          EXPECT_NEAR(f.L.coeff(a, b), vol * g[a].dot(g[b]), 1e-12);
        }
      }
  EXPECT_NEAR(f.mean.sum(), vol, 1e-14);
}

TEST(InteriorFem, RigidMotionsSpanStiffnessKernel) {
  const auto mesh = perturbed_cube(2, 7);
  const auto f = InteriorForms::assemble(mesh, sample_material());
  const int nv = f.nv;
  Eigen::MatrixXd R(3 * nv, 6);
  for (int v = 0; v < nv; ++v) {
    const Vec3& x = mesh.vertices()[v];
    for (int d = 0; d < 3; ++d) {
      R.row(3 * v + d).setZero();
      R(3 * v + d, d) = 1;
    }
    // rotations e_k x x
    for (int k = 0; k < 3; ++k) {
      const Vec3 r = Vec3::Unit(k).cross(x);
      for (int d = 0; d < 3; ++d) R(3 * v + d, 3 + k) = r[d];
    }
  }
  EXPECT_LT((f.Ke * R).norm(), 1e-12 * R.norm() * Eigen::MatrixXd(f.Ke).norm());
  // and nothing else: the seventh smallest eigenvalue is well away from zero
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(f.Ke));
  const auto& ev = es.eigenvalues();
  EXPECT_LT(std::abs(ev[5]), 1e-10 * ev[ev.size() - 1]);
  EXPECT_GT(ev[6], 1e-4 * ev[ev.size() - 1]);
}

TEST(InteriorFem, ScalarMatricesBasicIdentities) {
  const auto mesh = perturbed_cube(3, 2);
  const auto f = InteriorForms::assemble(mesh, sample_material());
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(f.nv);
  EXPECT_LT((f.L * one).norm(), 1e-12);
  EXPECT_NEAR(one.dot(f.M * one), mesh.volume(), 1e-12);
  EXPECT_LT((f.M * one - f.mean).norm(), 1e-13);
  // Div applied to a constant theta gives the boundary flux <1, v.n>
  Eigen::VectorXd xs(3 * f.nv);
  for (int v = 0; v < f.nv; ++v) xs.segment<3>(3 * v) = mesh.vertices()[v];
  // (1, div x) = 3 |Omega|
  EXPECT_NEAR(xs.dot(f.Div * one), 3 * mesh.volume(), 1e-12);
  // divergence theorem: <x . n, 1>_Gamma = 3 |Omega|
  EXPECT_NEAR(Eigen::VectorXd::Ones(f.nd).dot(f.T * xs), 3 * mesh.volume(), 1e-12);
  EXPECT_LT((Eigen::MatrixXd(f.T).transpose() - Eigen::MatrixXd(f.Tt)).norm(), 1e-15);
}

TEST(InteriorFem, SkewCancellationOnRandomTuples) {
  const auto mat = sample_material();
  const auto mesh = meshgen::ball(1, 1);
  const auto f = InteriorForms::assemble(mesh, mat);
  const auto b = assemble_interior(f, mat, LaplaceParameter(1.0, 2.0));
  std::mt19937 rng(5);
  double worst = 0;
  for (int k = 0; k < 100; ++k) worst = std::max(worst, coupling_skew_check(b, mat, random_fields(f, rng)));
  EXPECT_LT(worst, 1e-12);
}

TEST(InteriorFem, SkewCheckDetectsCorruptedBlock) {
  const auto mat = sample_material();
  const auto mesh = meshgen::ball(1, 1);
  const auto f = InteriorForms::assemble(mesh, mat);
  auto b = assemble_interior(f, mat, LaplaceParameter(1.0, 2.0));
  for (int k = 0; k < b.G_div.outerSize(); ++k)
    for (SparseR::InnerIterator it(b.G_div, k); it; ++it) it.valueRef() *= 1 + 1e-6;
  std::mt19937 rng(5);
  double worst = 0;
  for (int k = 0; k < 20; ++k) worst = std::max(worst, coupling_skew_check(b, mat, random_fields(f, rng)));
  EXPECT_GT(worst, 1e-8);
}

TEST(InteriorFem, DiagonalBlocksRealParts) {
  const auto mat = sample_material();
  const auto mesh = perturbed_cube(2, 3);
  const auto f = InteriorForms::assemble(mesh, mat);
  const LaplaceParameter sp(0.7, -1.9);
  const Complex s = sp.s();
  const auto b = assemble_interior(f, mat, sp);
  std::mt19937 rng(9);
  for (int k = 0; k < 10; ++k) {
    const VectorXc u = random_vec(3 * f.nv, rng), th = random_vec(f.nv, rng), ph = random_vec(f.nv, rng);
    // Re(conj(s) u^H A_s u) = sigma (|u|_e^2 + |s|^2 rho |u|^2)
    const Complex au = std::conj(s) * u.dot(b.A_s * u);
    const double eu = sp.sigma() * (quad_form(f.Ke, u) + std::norm(s) * mat.rho_e * quad_form(f.Mu, u));
    EXPECT_NEAR(au.real(), eu, 1e-11 * std::abs(au));
    const Complex bt = th.dot(b.B_s * th);
    EXPECT_NEAR(bt.real(), quad_form(f.L, th) + mat.c_eps * sp.sigma() * quad_form(f.M, th), 1e-11 * std::abs(bt));
    // |(p . grad phi, theta)| <= |p| |theta| |grad phi|
    const Complex pyro = th.dot(b.G_pyro.cast<Complex>() * ph);
    const double bound = mat.pyro_norm() * std::sqrt(quad_form(f.M, th) * quad_form(f.L, ph));
    EXPECT_LE(std::abs(pyro), bound * (1 + 1e-12));
  }
}

TEST(InteriorFem, DegenerateCellThrows) {
  // a flat cell is rejected either at mesh construction or at assembly
  EXPECT_ANY_THROW({
    const auto m = CoupledMesh::from_tets({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(1, 1, 0)}, {Tet{0, 1, 2, 3}});
    InteriorForms::assemble(m, sample_material());
  });
}
