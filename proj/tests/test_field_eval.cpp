#include "bfe/field_eval.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace bfe;

namespace {

MaterialParams material() {
  MaterialParams m;
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

const CoupledContext& desk() {
  static const CoupledContext ctx = CoupledContext::build(meshgen::ball(1, 1), material());
  return ctx;
}

// Nodal vector of u = A x + b, theta = t(x), phi = f(x) on the mesh vertices.
template <class FU, class FT, class FP>
VectorXc nodal(const CoupledContext& ctx, FU fu, FT ft, FP fp) {
  const auto& L = ctx.layout;
  VectorXc x = VectorXc::Zero(L.size);
  for (int v = 0; v < ctx.mesh.num_vertices(); ++v) {
    const Vec3& X = ctx.mesh.vertices()[v];
    x.segment<3>(L.u + 3 * v) = fu(X).template cast<Complex>();
    x[L.theta + v] = ft(X);
    x[L.phi + v] = fp(X);
  }
  return x;
}

}  // namespace

TEST(ProbeSet, TagsInteriorAndExterior) {
  const auto& ctx = desk();
  const auto set = ProbeSet::build(ctx, {{"c", Vec3(0.05, 0.02, -0.03)}, {"far", Vec3(0, 0, 3)}, {"side", Vec3(1.6, 0, 0)}});
  ASSERT_EQ(set.probes.size(), 3u);
  EXPECT_EQ(set.probes[0].tag, ProbeTag::Interior);
  EXPECT_EQ(set.probes[1].tag, ProbeTag::Exterior);
  EXPECT_EQ(set.probes[2].tag, ProbeTag::Exterior);
  const auto& b = set.probes[0].bary;
  EXPECT_NEAR(b[0] + b[1] + b[2] + b[3], 1.0, 1e-12);
  EXPECT_NEAR(set.probes[1].distance, 2.0, 0.05);
  EXPECT_EQ(set.indices(ProbeTag::Exterior), (std::vector<int>{1, 2}));
}

TEST(ProbeSet, ProbeOnBoundaryIsRejected) {
  const auto& ctx = desk();
  const Vec3 on = ctx.surf.vertices[3];
  try {
    ProbeSet::build(ctx, {{"bad", on}});
    FAIL() << "expected SingularityError";
  } catch (const SingularityError& e) {
    EXPECT_NE(std::string(e.what()).find("'bad'"), std::string::npos);
  }
  const Vec3 near = on * (1.0 + 1e-5);
  EXPECT_THROW(ProbeSet::build(ctx, {{"near", near}}), SingularityError);
}

TEST(ProbeSet, InterpolationIsExactForAffineFields) {
  const auto& ctx = desk();
  const Mat3 A = (Mat3() << 1, 2, 0, -1, 0.5, 3, 0.2, 0, -2).finished();
  const Vec3 b(0.3, -0.1, 0.7);
  const auto x = nodal(ctx, [&](const Vec3& X) { Vec3 r = A * X + b; return r; },
                       [](const Vec3& X) { return Complex(2.0 * X[0] - X[2] + 1.0, 0.0); },
                       [](const Vec3& X) { return Complex(X[1], 0.5 * X[0]); });
  const auto set = ProbeSet::build(ctx, {{"a", Vec3(0.1, 0.2, -0.15)}, {"b", Vec3(-0.3, 0.1, 0.4)}});
  for (const auto& p : set.probes) {
    ASSERT_EQ(p.tag, ProbeTag::Interior);
    const auto v = interpolate_interior(ctx, x, p);
    EXPECT_LT((v.u - (A * p.x + b).cast<Complex>()).norm(), 1e-12);
    EXPECT_NEAR(std::abs(v.theta - Complex(2.0 * p.x[0] - p.x[2] + 1.0, 0)), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(v.phi - Complex(p.x[1], 0.5 * p.x[0])), 0.0, 1e-12);
  }
}

TEST(ProbeSet, InteriorPressureRequestIsRejected) {
  const auto& ctx = desk();
  const auto set = ProbeSet::build(ctx, {{"in", Vec3(0.1, 0, 0)}});
  const VectorXc phi = VectorXc::Zero(ctx.surf.num_vertices()), lam = VectorXc::Zero(ctx.surf.num_faces());
  EXPECT_THROW(reconstruct_pressure(ctx, LaplaceParameter(1.0, 0.0), phi, lam, set), ConfigError);
  EXPECT_NO_THROW(reconstruct_pressure(ctx, LaplaceParameter(1.0, 0.0), phi, lam, set, true));
  EXPECT_THROW(interpolate_interior(ctx, VectorXc::Zero(ctx.layout.size), ProbeSet::build(ctx, {{"o", Vec3(0, 0, 2)}}).probes[0]),
               ConfigError);
}

TEST(DerivedFields, ZeroStateGivesZeroOutputs) {
  const auto& ctx = desk();
  const auto f = derived_fields(ctx, VectorXc::Zero(ctx.layout.size));
  ASSERT_EQ(static_cast<int>(f.size()), ctx.mesh.num_tets());
  for (const auto& d : f) {
    EXPECT_EQ(d.stress.norm(), 0.0);
    EXPECT_EQ(std::abs(d.entropy), 0.0);
    EXPECT_EQ(d.displacement.norm(), 0.0);
  }
  EXPECT_THROW(derived_fields(ctx, VectorXc::Zero(3)), DimensionError);
}

TEST(DerivedFields, UniaxialStretchPatch) {
  // u = (x, 0, 0): strain e1 (x) e1, so sigma = lambda I + 2 mu e1 (x) e1 in the
  // decoupled material, at every cell.
  auto ctx = desk();
  ctx.mat.piezo_e = PiezoTensor();
  ctx.mat.zeta = 0.0;
  ctx.mat.pyro_p = Vec3::Zero();
  const auto x = nodal(ctx, [](const Vec3& X) { return Vec3(X[0], 0, 0); }, [](const Vec3&) { return Complex(0); },
                       [](const Vec3&) { return Complex(0); });
  CMat3 expect = ctx.mat.lame_lambda * CMat3::Identity();
  expect(0, 0) += 2.0 * ctx.mat.lame_mu;
  for (const auto& d : derived_fields(ctx, x)) {
    EXPECT_LT((d.stress - expect).norm(), 1e-11);
    EXPECT_LT(std::abs(d.entropy), 1e-14);
    EXPECT_LT(d.displacement.norm(), 1e-14);
  }
}

TEST(DerivedFields, AffineStateMatchesClosedForm) {
  // Coupled material, affine fields: every output is constant in each cell
  // and given by the constitutive laws written out componentwise here.
  const auto& ctx = desk();
  const auto& m = ctx.mat;
  const Mat3 G = (Mat3() << 0.2, 0.1, 0, -0.3, 0.05, 0.4, 0.1, 0, -0.2).finished();
  const Vec3 gphi(0.3, -0.7, 0.2);
  const double th = 0.6;
  const auto x = nodal(ctx, [&](const Vec3& X) { Vec3 r = G * X; return r; }, [&](const Vec3&) { return Complex(th); },
                       [&](const Vec3& X) { return Complex(gphi.dot(X)); });

  const Mat3 eps = 0.5 * (G + G.transpose());
  const Vec3 E = -gphi;
  const auto& ev = m.piezo_e.voigt();
  // Voigt strain (engineering shear) and e^T E as a symmetric tensor.
  Eigen::Matrix<double, 6, 1> ve;
  ve << eps(0, 0), eps(1, 1), eps(2, 2), 2 * eps(1, 2), 2 * eps(0, 2), 2 * eps(0, 1);
  const Eigen::Matrix<double, 6, 1> sv = ev.transpose() * E;
  Mat3 eTE;
  eTE << sv[0], sv[5], sv[4], sv[5], sv[1], sv[3], sv[4], sv[3], sv[2];
  const Mat3 sigma = m.lame_lambda * eps.trace() * Mat3::Identity() + 2 * m.lame_mu * eps -
                     m.zeta * th * Mat3::Identity() - eTE;
  const double P = m.zeta * eps.trace() + m.c_eps / m.T0 * th + m.pyro_p.dot(E);
  const Vec3 D = ev * ve + th * m.pyro_p + m.dielectric_eps * E;

  for (const auto& d : derived_fields(ctx, x)) {
    EXPECT_LT((d.stress.real() - sigma).norm(), 1e-11);
    EXPECT_LT(d.stress.imag().norm(), 1e-14);
    EXPECT_NEAR(d.entropy.real(), P, 1e-12);
    EXPECT_LT((d.displacement.real() - D).norm(), 1e-11);
  }
}

TEST(FieldEval, TimeDomainPressureMatchesFrequencyReconstruction) {
  // Pressure series from the stored densities equals CQ of the per-frequency
  // reconstruction, and the probe table lists every field.
  const auto& ctx = desk();
  ProblemConfig cfg;
  cfg.material = ctx.mat;
  cfg.incident.type = "plane_wave";
  cfg.incident.direction = Vec3(0, 0, 1);
  cfg.incident.offset = 1.5;
  cfg.incident.wavelet = Wavelet::gaussian_pulse(4.0, 2.5, 2.0);
  const auto plan = CQPlan::make(CQRule::BDF2, 0.2, 12);
  const auto set = ProbeSet::build(ctx, {{"out", Vec3(0, 0, 2.5)}, {"in", Vec3(0.1, 0.1, 0.1)}});
  const auto r = solve_time_domain(ctx, cfg, plan);
  const Eigen::MatrixXd p = reconstruct_pressure(ctx, r, set);
  ASSERT_EQ(p.rows(), plan.samples());
  ASSERT_EQ(p.cols(), 1);

  const auto& lay = r.layout;
  MatrixXc hat = MatrixXc::Zero(plan.size(), 1);
  const ProbeSet out_only = ProbeSet::build(ctx, {{"out", Vec3(0, 0, 2.5)}});
  for (int l = 0; l < plan.size(); ++l) {
    const VectorXc x = r.hat.row(l).transpose();
    hat(l, 0) = reconstruct_pressure(ctx, LaplaceParameter(plan.s[l]), x.segment(lay.g, lay.nd),
                                     x.segment(lay.lam, lay.nn), out_only)[0];
  }
  const MatrixXc ref = cq_inverse(plan, hat);
  EXPECT_LT((p - ref.real()).norm(), 1e-12 * (1.0 + ref.norm()));
  EXPECT_GT(p.norm(), 0.0);

  const auto ts = probe_timeseries(ctx, r, set);
  EXPECT_EQ(ts.size(), static_cast<std::size_t>(plan.samples() * 6));
  std::set<std::string> fields;
  for (const auto& row : ts) fields.insert(row.probe + ":" + row.field);
  EXPECT_EQ(fields.size(), 6u);
  EXPECT_TRUE(fields.count("out:p"));
  EXPECT_TRUE(fields.count("in:theta"));
}

TEST(FieldEval, InteriorProbesSeeVanishingPressure) {
  const auto& ctx = desk();
  ProblemConfig cfg;
  cfg.material = ctx.mat;
  cfg.incident.type = "plane_wave";
  cfg.incident.direction = Vec3(0, 0, 1);
  cfg.incident.offset = 1.5;
  cfg.incident.wavelet = Wavelet::gaussian_pulse(4.0, 2.5, 2.0);
  const LaplaceParameter s(1.0, 2.0);
  const auto sol = solve(assemble_system(ctx, s), assemble_rhs(ctx, cfg, s));
  const auto in = ProbeSet::build(ctx, {{"a", Vec3(0.1, 0.0, 0.0)}, {"b", Vec3(-0.2, 0.2, 0.1)}});
  const auto out = ProbeSet::build(ctx, {{"c", Vec3(0, 0, 1.5)}, {"d", Vec3(1.5, 0, 0)}});
  const VectorXc pin = reconstruct_pressure(ctx, sol, in, true);
  const VectorXc pout = reconstruct_pressure(ctx, sol, out);
  EXPECT_LT(pin.cwiseAbs().maxCoeff(), 0.1 * pout.cwiseAbs().maxCoeff());

  const VectorXc zero_g = VectorXc::Zero(ctx.layout.nd), zero_l = VectorXc::Zero(ctx.layout.nn);
  EXPECT_EQ(reconstruct_pressure(ctx, s, zero_g, zero_l, out).norm(), 0.0);
}
