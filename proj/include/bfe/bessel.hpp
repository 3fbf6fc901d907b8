#pragma once

// Modified spherical Bessel functions of complex argument, normalised so that
//   i_0(x) = sinh(x) / x,   k_0(x) = exp(-x) / x,
// with Wronskian i_n k_n' - i_n' k_n = -1 / x^2. Values are returned scaled:
//   it = exp(-x) i_n(x),  kt = exp(x) k_n(x),
// which keeps every product i_n * k_n free of overflow for Re x > 0.

#include "bfe/core.hpp"

#include <vector>

namespace bfe::bessel {

struct ScaledPair {
  Complex i, di;  // exp(-x) i_n(x), exp(-x) i_n'(x)
  Complex k, dk;  // exp(x) k_n(x),  exp(x) k_n'(x)
};

/// exp(x) k_m(x) for m = 0..n+1 by upward recurrence (stable for k_n).
inline std::vector<Complex> scaled_k_table(int n, Complex x) {
  std::vector<Complex> k(n + 2);
  k[0] = 1.0 / x;
  k[1] = (1.0 + x) / (x * x);
  for (int m = 1; m + 1 <= n + 1; ++m) k[m + 1] = k[m - 1] + (2.0 * m + 1.0) / x * k[m];
  return k;
}

/// Ratio i_{n+1}(x) / i_n(x) from the backward continued-fraction recurrence.
inline Complex i_ratio(int n, Complex x) {
  const int start = n + 40 + static_cast<int>(2.0 * std::abs(x));
  Complex r = 0.0;
  for (int k = start; k > n; --k) r = 1.0 / ((2.0 * k + 1.0) / x + r);
  return r;
}

inline ScaledPair scaled(int n, Complex x) {
  if (n < 0) throw DimensionError("Bessel order must be non-negative");
  if (std::abs(x) == 0.0) throw SingularityError("modified spherical Bessel k_n is singular at 0");
  const auto kt = scaled_k_table(n, x);
  const Complex r = i_ratio(n, x);
  ScaledPair p;
  p.k = kt[n];
  p.dk = static_cast<double>(n) / x * kt[n] - kt[n + 1];
  // Wronskian: i_n = 1 / (x^2 (k_{n+1} + r k_n))
  p.i = 1.0 / (x * x * (kt[n + 1] + r * kt[n]));
  p.di = p.i * (r + static_cast<double>(n) / x);
  return p;
}

}  // namespace bfe::bessel
