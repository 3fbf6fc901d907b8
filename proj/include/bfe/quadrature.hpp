#pragma once

// Quadrature on the reference triangle T = {(x1, x2) : 0 <= x2 <= x1 <= 1}
// and on pairs of reference triangles (Sauter-Schwab relative-coordinate
// rules for the weakly singular 1/r kernel).
//
// A physical triangle (P0, P1, P2) is parametrised as
//   chi(x) = P0 + x1 (P1 - P0) + x2 (P2 - P1),
// with barycentric weights (1 - x1, x1 - x2, x2) and Jacobian 2 * area.

#include "bfe/core.hpp"

#include <array>
#include <map>
#include <mutex>
#include <vector>

namespace bfe::quad {

struct GaussRule {
  std::vector<double> x;  // nodes on [0, 1]
  std::vector<double> w;
};

/// n-point Gauss-Legendre rule mapped to [0, 1].
inline GaussRule gauss_legendre(int n) {
  if (n < 1) throw DimensionError("Gauss-Legendre rule needs n >= 1");
  GaussRule r;
  r.x.resize(n);
  r.w.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1, p1 = 0;
      for (int k = 1; k <= n; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    r.x[i] = 0.5 * (1.0 - z);
    r.x[n - 1 - i] = 0.5 * (1.0 + z);
    r.w[i] = r.w[n - 1 - i] = 0.5 * w;
  }
  return r;
}

enum class PairKind { Regular, Coincident, SharedEdge, SharedVertex };

inline const char* to_string(PairKind k) {
  switch (k) {
    case PairKind::Regular: return "regular";
    case PairKind::Coincident: return "coincident";
    case PairKind::SharedEdge: return "shared-edge";
    case PairKind::SharedVertex: return "shared-vertex";
  }
  return "?";
}

/// Rule on the reference triangle; weights sum to 1/2.
struct TriangleRule {
  std::vector<std::array<double, 2>> points;
  std::vector<double> weights;
  int order = 0;
};

/// Rule on the product of two reference triangles; weights sum to 1/4.
struct PairRule {
  std::vector<std::array<double, 2>> x, y;
  std::vector<double> weights;
  PairKind kind = PairKind::Regular;
  int order = 0;
};

/// Collapsed Gauss rule exact for polynomials of total degree <= order.
inline TriangleRule triangle_rule(int order) {
  if (order < 1 || order > 40) throw DimensionError("unsupported triangle rule order " + std::to_string(order));
  const int m = (order + 3) / 2;  // exact to degree 2m - 2 >= order
  const GaussRule g = gauss_legendre(m);
  TriangleRule r;
  r.order = order;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      r.points.push_back({g.x[i], g.x[i] * g.x[j]});
      r.weights.push_back(g.w[i] * g.w[j] * g.x[i]);
    }
  return r;
}

namespace detail {

inline PairRule build_singular(PairKind kind, int order) {
  const GaussRule g = gauss_legendre(order);
  PairRule r;
  r.kind = kind;
  r.order = order;
  const int n = order;
  auto add = [&](std::array<double, 2> x, std::array<double, 2> y, double w) {
    r.x.push_back(x);
    r.y.push_back(y);
    r.weights.push_back(w);
  };
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c)
        for (int d = 0; d < n; ++d) {
          const double xi = g.x[a], e1 = g.x[b], e2 = g.x[c], e3 = g.x[d];
          const double w = g.w[a] * g.w[b] * g.w[c] * g.w[d];
          switch (kind) {
            case PairKind::Coincident: {
              const double j = w * xi * xi * xi * e1 * e1 * e2;
              add({xi, xi * (1 - e1 + e1 * e2)}, {xi * (1 - e1 * e2 * e3), xi * (1 - e1)}, j);
              add({xi * (1 - e1 * e2 * e3), xi * (1 - e1)}, {xi, xi * (1 - e1 + e1 * e2)}, j);
              add({xi, xi * e1 * (1 - e2 + e2 * e3)}, {xi * (1 - e1 * e2), xi * e1 * (1 - e2)}, j);
              add({xi * (1 - e1 * e2), xi * e1 * (1 - e2)}, {xi, xi * e1 * (1 - e2 + e2 * e3)}, j);
              add({xi * (1 - e1 * e2 * e3), xi * e1 * (1 - e2 * e3)}, {xi, xi * e1 * (1 - e2)}, j);
              add({xi, xi * e1 * (1 - e2)}, {xi * (1 - e1 * e2 * e3), xi * e1 * (1 - e2 * e3)}, j);
              break;
            }
            case PairKind::SharedEdge: {
              const double j1 = w * xi * xi * xi * e1 * e1;
              const double j = j1 * e2;
              add({xi, xi * e1 * e3}, {xi * (1 - e1 * e2), xi * e1 * (1 - e2)}, j1);
              add({xi, xi * e1}, {xi * (1 - e1 * e2 * e3), xi * e1 * e2 * (1 - e3)}, j);
              add({xi * (1 - e1 * e2), xi * e1 * (1 - e2)}, {xi, xi * e1 * e2 * e3}, j);
              add({xi * (1 - e1 * e2 * e3), xi * e1 * e2 * (1 - e3)}, {xi, xi * e1}, j);
              add({xi * (1 - e1 * e2 * e3), xi * e1 * (1 - e2 * e3)}, {xi, xi * e1 * e2}, j);
              break;
            }
            case PairKind::SharedVertex: {
              const double j = w * xi * xi * xi * e2;
              add({xi, xi * e1}, {xi * e2, xi * e2 * e3}, j);
              add({xi * e2, xi * e2 * e1}, {xi, xi * e3}, j);
              break;
            }
            case PairKind::Regular: break;
          }
        }
  return r;
}

inline PairRule build_regular(int order) {
  const TriangleRule t = triangle_rule(order);
  PairRule r;
  r.kind = PairKind::Regular;
  r.order = order;
  for (std::size_t i = 0; i < t.points.size(); ++i)
    for (std::size_t j = 0; j < t.points.size(); ++j) {
      r.x.push_back(t.points[i]);
      r.y.push_back(t.points[j]);
      r.weights.push_back(t.weights[i] * t.weights[j]);
    }
  return r;
}

}  // namespace detail

/// Pair rule for the given adjacency. For singular kinds `order` is the
/// number of Gauss points per relative coordinate; for the regular kind it is
/// the polynomial degree of the triangle rule. Rules are built once and cached.
///
/// Vertex conventions: coincident pairs share the whole parametrisation;
/// shared-edge pairs have P0, P1 common (the edge x2 = 0); shared-vertex pairs
/// have P0 common.
inline const PairRule& pair_rule(PairKind kind, int order) {
  if (order < 1 || order > 30) throw DimensionError("unsupported pair rule order " + std::to_string(order));
  static std::mutex mu;
  static std::map<std::pair<int, int>, PairRule> cache;
  std::lock_guard<std::mutex> lock(mu);
  const auto key = std::make_pair(static_cast<int>(kind), order);
  auto it = cache.find(key);
  if (it == cache.end())
    it = cache.emplace(key, kind == PairKind::Regular ? detail::build_regular(order)
                                                      : detail::build_singular(kind, order))
             .first;
  return it->second;
}

/// Barycentric weights (w0, w1, w2) of reference point x for vertices (P0, P1, P2).
inline std::array<double, 3> barycentric(const std::array<double, 2>& x) {
  return {1.0 - x[0], x[0] - x[1], x[1]};
}

/// Symmetric 4-point (degree 2) and 11-point (degree 4, Keast) tetrahedron rules
/// in barycentric form; weights sum to 1 (multiply by the volume).
struct TetRule {
  std::vector<std::array<double, 4>> points;
  std::vector<double> weights;
};

inline TetRule tet_rule_degree2() {
  const double a = 0.5854101966249685, b = 0.1381966011250105;
  TetRule r;
  r.points = {{a, b, b, b}, {b, a, b, b}, {b, b, a, b}, {b, b, b, a}};
  r.weights = {0.25, 0.25, 0.25, 0.25};
  return r;
}

/// Collapsed Gauss rule on the tetrahedron, exact to degree 2n - 3.
inline TetRule tet_rule_collapsed(int n) {
  const GaussRule g = gauss_legendre(n);
  TetRule r;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        // cube (u, v, w) -> tet: x = u, y = u v, z = u v w on {0 <= z <= y <= x <= 1}
        const double u = g.x[i], v = g.x[j], w = g.x[k];
        const double x = u, y = u * v, z = u * v * w;
        r.points.push_back({1.0 - x, x - y, y - z, z});
        r.weights.push_back(6.0 * g.w[i] * g.w[j] * g.w[k] * u * u * v);
      }
  return r;
}

}  // namespace bfe::quad
