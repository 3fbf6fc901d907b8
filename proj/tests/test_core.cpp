#include "bfe/core.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace bfe;

TEST(LaplaceParameter, DerivedQuantities) {
  const LaplaceParameter s(0.25, -3.0);
  EXPECT_EQ(s.sigma(), 0.25);
  EXPECT_EQ(s.sigma_under(), 0.25);
  EXPECT_DOUBLE_EQ(s.abs(), std::hypot(0.25, 3.0));
  EXPECT_EQ(LaplaceParameter(4.0, 1.0).sigma_under(), 1.0);
}

TEST(LaplaceParameter, RejectsClosedLeftHalfPlane) {
  EXPECT_THROW(LaplaceParameter(0.0, 1.0), DimensionError);
  EXPECT_THROW(LaplaceParameter(-1e-300, 0.0), DimensionError);
  EXPECT_THROW(LaplaceParameter(std::nan(""), 0.0), DimensionError);
  EXPECT_THROW(LaplaceParameter(1.0, INFINITY), DimensionError);
}

TEST(LaplaceParameter, SigmaUnderSandwich) {
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> lg(-4, 4), U(-50, 50);
  for (int k = 0; k < 10000; ++k) {
    const LaplaceParameter s(std::pow(10.0, lg(rng)), U(rng));
    const double a = s.abs(), lo = s.sigma_under();
    EXPECT_LE(lo, std::min(1.0, a) * (1 + 1e-15));
    EXPECT_LE(std::max(1.0, a) * lo, a * (1 + 1e-15));
    EXPECT_GT(lo, 0.0);
  }
}

TEST(Errors, HierarchyAndParseLocation) {
  const ParseError e("bad token", 7, 3);
  EXPECT_EQ(e.line(), 7);
  EXPECT_EQ(e.column(), 3);
  EXPECT_NE(std::string(e.what()).find("7"), std::string::npos);
  EXPECT_THROW(throw ConstraintError("x"), ConfigError);
  EXPECT_THROW(throw SolverError("x"), Error);
}
