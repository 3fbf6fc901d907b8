#include "bfe/constitutive.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace bfe;
using namespace bfe::constitutive;

namespace {

MaterialParams random_material(std::mt19937& rng) {
  std::uniform_real_distribution<double> U(0.1, 2.0);
  MaterialParams m;
  m.lame_lambda = U(rng);
  m.lame_mu = U(rng);
  PiezoTensor::Voigt v;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 6; ++j) v(i, j) = U(rng);
  m.piezo_e = PiezoTensor(v);
  m.zeta = U(rng);
  m.c_eps = U(rng);
  m.T0 = U(rng);
  m.pyro_p = Vec3(U(rng), U(rng), U(rng)) * 0.01;
  m.dielectric_eps = U(rng);
  return m;
}

CMat3 random_sym(std::mt19937& rng) {
  std::normal_distribution<double> N;
  CMat3 a;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) a(i, j) = Complex(N(rng), N(rng));
  return 0.5 * (a + a.transpose());
}

CVec3 random_cvec(std::mt19937& rng) {
  std::normal_distribution<double> N;
  return CVec3(Complex(N(rng), N(rng)), Complex(N(rng), N(rng)), Complex(N(rng), N(rng)));
}

// Full 3-index tensor rebuilt from the Voigt table by the index map alone.
double full(const PiezoTensor& e, int k, int i, int j) {
  static const int map[3][3] = {{0, 5, 4}, {5, 1, 3}, {4, 3, 2}};
  return e.voigt()(k, map[i][j]);
}

}  // namespace

TEST(Constitutive, IsotropicStressOnIdentityStrain) {
  MaterialParams m;
  m.lame_lambda = 1;
  m.lame_mu = 1;
  StateAtPoint st;
  st.strain = CMat3::Identity();
  EXPECT_LT((stress(st, m) - 5.0 * CMat3::Identity()).norm(), 1e-15);
}

TEST(Constitutive, ThermalStress) {
  MaterialParams m;
  m.zeta = 2;
  StateAtPoint st;
  st.theta = 1.0;
  EXPECT_LT((stress(st, m) + 2.0 * CMat3::Identity()).norm(), 1e-15);
}

TEST(Constitutive, EntropyAndDisplacementTrivialStates) {
  std::mt19937 rng(1);
  auto m = random_material(rng);
  StateAtPoint zero;
  EXPECT_EQ(entropy_density(zero, m), Complex(0.0));
  EXPECT_EQ(electric_displacement(zero, m).norm(), 0.0);
  StateAtPoint th;
  th.theta = m.T0;
  EXPECT_NEAR(std::abs(entropy_density(th, m) - m.c_eps), 0.0, 1e-14);
  th.theta = 1.0;
  EXPECT_LT((electric_displacement(th, m) - m.pyro_p.cast<Complex>()).norm(), 1e-15);
}

TEST(Constitutive, AdjointPairing) {
  std::mt19937 rng(2);
  for (int k = 0; k < 1000; ++k) {
    const auto m = random_material(rng);
    const CMat3 M = random_sym(rng);
    const CVec3 d = random_cvec(rng);
    const Complex lhs = m.piezo_e.apply<Complex>(M).transpose() * d;
    const Complex rhs = (M.array() * m.piezo_e.apply_transpose<Complex>(d).array()).sum();
    EXPECT_LT(std::abs(lhs - rhs), 1e-14 * (1 + std::abs(lhs)));
  }
}

TEST(Constitutive, VoigtContractionMatchesFullTensor) {
  std::mt19937 rng(3);
  for (int n = 0; n < 200; ++n) {
    const auto m = random_material(rng);
    const CMat3 M = random_sym(rng);
    const CVec3 v = m.piezo_e.apply<Complex>(M);
    for (int k = 0; k < 3; ++k) {
      Complex ref = 0;
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) ref += full(m.piezo_e, k, i, j) * M(i, j);
      EXPECT_LT(std::abs(v[k] - ref), 1e-14 * (1 + std::abs(ref)));
    }
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) EXPECT_EQ(m.piezo_e(0, i, j), m.piezo_e(0, j, i));
  }
}

TEST(Constitutive, DuplicateFormulaOracle) {
  std::mt19937 rng(4);
  for (int n = 0; n < 100; ++n) {
    const auto m = random_material(rng);
    StateAtPoint st{random_sym(rng), Complex(0.3, -0.2), random_cvec(rng)};
    Complex P = m.zeta * (st.strain(0, 0) + st.strain(1, 1) + st.strain(2, 2)) + m.c_eps / m.T0 * st.theta;
    for (int k = 0; k < 3; ++k) P += m.pyro_p[k] * st.e_field[k];
    EXPECT_LT(std::abs(entropy_density(st, m) - P), 1e-13);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        Complex sij = 2 * m.lame_mu * st.strain(i, j) - (i == j ? m.zeta * st.theta : 0.0);
        if (i == j) sij += m.lame_lambda * st.strain.trace();
        for (int k = 0; k < 3; ++k) sij -= full(m.piezo_e, k, i, j) * st.e_field[k];
        EXPECT_LT(std::abs(stress(st, m)(i, j) - sij), 1e-13);
      }
    EXPECT_LT((stress(st, m) - stress(st, m).transpose()).norm(), 1e-14);
  }
}

TEST(Constitutive, JointLinearity) {
  std::mt19937 rng(5);
  const auto m = random_material(rng);
  const StateAtPoint a{random_sym(rng), Complex(1, 2), random_cvec(rng)};
  const StateAtPoint b{random_sym(rng), Complex(-0.5, 0.1), random_cvec(rng)};
  const Complex al(0.7, -1.1), be(-2.0, 0.4);
  const StateAtPoint c{al * a.strain + be * b.strain, al * a.theta + be * b.theta, al * a.e_field + be * b.e_field};
  EXPECT_LT((stress(c, m) - al * stress(a, m) - be * stress(b, m)).norm(), 1e-13);
  EXPECT_LT(std::abs(entropy_density(c, m) - al * entropy_density(a, m) - be * entropy_density(b, m)), 1e-13);
  EXPECT_LT((electric_displacement(c, m) - al * electric_displacement(a, m) - be * electric_displacement(b, m)).norm(),
            1e-13);
}

TEST(Material, ValidationRules) {
  MaterialParams m;
  m.dielectric_eps = 0.5;
  m.c_eps = 2.0;
  m.T0 = 1.0;
  m.pyro_p = Vec3(0.5, 0, 0);  // |p| = eps: boundary of the strict inequality
  EXPECT_THROW(m.validate(), ConstraintError);
  m.pyro_p = Vec3(0.3, 0.3, 0.0);
  EXPECT_NO_THROW(m.validate());
  m.lame_mu = -1;
  EXPECT_THROW(m.validate(), ConstraintError);
  m.lame_mu = 1;
  m.lame_lambda = -0.7;  // 3 lambda + 2 mu < 0
  EXPECT_THROW(m.validate(), ConstraintError);
}

TEST(Material, NonPositivePiezoIsOnlyAWarning) {
  MaterialParams m;
  const auto w = m.validate();  // default e = 0
  ASSERT_EQ(w.size(), 1u);
  std::mt19937 rng(6);
  EXPECT_TRUE(random_material(rng).validate().empty());
}

TEST(Material, CoercivityConstants) {
  MaterialParams m;
  m.c_eps = 2.0;
  m.T0 = 0.5;
  m.dielectric_eps = 1.5;
  m.pyro_p = Vec3(0, 0.6, 0.8);
  EXPECT_NEAR(m.pyro_limit(), 1.5, 1e-15);
  EXPECT_NEAR(m.coercivity_c1(), (4.0 - 1.0) / 2.0, 1e-15);
  EXPECT_NEAR(m.coercivity_c2(), 0.5, 1e-15);
}
