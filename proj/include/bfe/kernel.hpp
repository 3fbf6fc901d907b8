#pragma once

// Fundamental solution of -Laplace(p) + (s/c)^2 p = 0:
//   E(x, y) = exp(-s r / c) / (4 pi r),  r = |x - y|.

#include "bfe/core.hpp"
#include "bfe/quadrature.hpp"

#include <vector>

namespace bfe::kernel {

struct KernelEval {
  Complex value;
  CVec3 grad_y;  // derivative with respect to the source point y
};

/// kappa = s / c
inline Complex wavenumber(Complex s, double c) { return s / c; }

inline Complex green(double r, Complex kappa) { return std::exp(-kappa * r) / (4.0 * kPi * r); }

/// f(r) = (1 + kappa r) exp(-kappa r) / (4 pi r^3), so that grad_x E = -(x - y) f(r).
inline Complex green_radial(double r, Complex kappa) {
  return (1.0 + kappa * r) * std::exp(-kappa * r) / (4.0 * kPi * r * r * r);
}

inline KernelEval eval_kernel(const Vec3& x, const Vec3& y, const LaplaceParameter& s, double c) {
  const Vec3 d = x - y;
  const double r = d.norm();
  if (!(r > 0.0)) throw SingularityError("kernel evaluated at coincident points");
  const Complex kappa = wavenumber(s.s(), c);
  const Complex e = std::exp(-kappa * r);
  KernelEval k;
  k.value = e / (4.0 * kPi * r);
  k.grad_y = ((1.0 + kappa * r) * e / (4.0 * kPi * r * r * r)) * d.cast<Complex>();
  return k;
}

/// Max over the grid of |-Delta_h E + kappa^2 E| with the 7-point Laplacian of step h.
inline double verify_pde(const std::vector<Vec3>& grid, const Vec3& y, const LaplaceParameter& s, double c,
                         double h) {
  const Complex kappa = wavenumber(s.s(), c);
  auto E = [&](const Vec3& x) { return green((x - y).norm(), kappa); };
  double worst = 0;
  for (const auto& x : grid) {
    if ((x - y).norm() <= 2 * h) throw SingularityError("PDE check point too close to the source");
    Complex lap = -6.0 * E(x);
    for (int d = 0; d < 3; ++d) {
      Vec3 e = Vec3::Zero();
      e[d] = h;
      lap += E(x + e) + E(x - e);
    }
    lap /= h * h;
    worst = std::max(worst, std::abs(-lap + kappa * kappa * E(x)));
  }
  return worst;
}

/// Quadrature for a pair of panels with the given adjacency (see quad::pair_rule).
inline const quad::PairRule& singular_rule(quad::PairKind kind, int order) { return quad::pair_rule(kind, order); }

}  // namespace bfe::kernel
