#pragma once

// Modified Bessel functions of the first kind, integer order, real argument.

#include <cmath>
#include <vector>

#include "qlaser/error.hpp"

namespace qlaser {

namespace detail {

inline constexpr double kSeriesMaxArg = 20.0;

// Power series; every term is positive, so there is no cancellation.
inline double bessel_i_series(int n, double z) {
  const double half = 0.5 * z;
  double term = 1.0;
  for (int k = 1; k <= n; ++k) term *= half / k;
  double sum = term;
  const double q = half * half;
  for (int k = 1; k < 500; ++k) {
    term *= q / (static_cast<double>(k) * (k + n));
    sum += term;
    if (term < sum * 1e-17) break;
  }
  return sum;
}

// Miller's backward recurrence I_{k-1} = (2k/z) I_k + I_{k+1}, normalised with
// e^z = I_0 + 2 sum_k I_k. Returns e^{-z} I_k(z) for k = 0..n_max.
inline std::vector<double> bessel_i_scaled_miller(int n_max, double z) {
  const int top = std::max(n_max, static_cast<int>(std::ceil(z))) + 30 +
                  static_cast<int>(std::ceil(8.0 * std::sqrt(z + n_max + 1.0)));
  std::vector<double> out(static_cast<std::size_t>(n_max) + 1, 0.0);
  double next = 0.0;  // J_{k+1}
  double cur = 1e-300;
  double norm = 0.0;
  const double two_over_z = 2.0 / z;
  for (int k = top; k >= 1; --k) {
    const double prev = k * two_over_z * cur + next;  // J_{k-1}
    next = cur;
    cur = prev;
    norm += 2.0 * next;  // next is now J_k
    if (k - 1 <= n_max) out[static_cast<std::size_t>(k - 1)] = cur;
    if (cur > 1e250) {
      const double s = 1e-250;
      cur *= s;
      next *= s;
      norm *= s;
      for (int j = k - 1; j <= n_max; ++j) out[static_cast<std::size_t>(j)] *= s;
    }
  }
  // cur holds J_0 and out[0] was set in the last iteration
  norm += cur;
  for (auto& v : out) v /= norm;
  return out;
}

}  // namespace detail

// e^{-z} I_n(z); finite for every z >= 0.
inline double bessel_i_scaled(int n, double z) {
  require(n >= 0, "bessel order must be non-negative");
  require(std::isfinite(z) && z >= 0.0, "bessel argument must be finite and non-negative");
  if (z == 0.0) return n == 0 ? 1.0 : 0.0;
  if (z <= detail::kSeriesMaxArg) return detail::bessel_i_series(n, z) * std::exp(-z);
  return detail::bessel_i_scaled_miller(n, z)[static_cast<std::size_t>(n)];
}

// I_n(z). Overflows to +inf beyond z ~ 709; use the scaled variant there.
inline double bessel_i(int n, double z) {
  require(n >= 0, "bessel order must be non-negative");
  require(std::isfinite(z) && z >= 0.0, "bessel argument must be finite and non-negative");
  if (z == 0.0) return n == 0 ? 1.0 : 0.0;
  if (z <= detail::kSeriesMaxArg) return detail::bessel_i_series(n, z);
  return bessel_i_scaled(n, z) * std::exp(z);
}

// r_n = I_n(z) / I_0(z) for n = 0..n_max, without overflow at large z.
inline std::vector<double> bessel_i_ratios(int n_max, double z) {
  require(n_max >= 0, "n_max must be non-negative");
  require(std::isfinite(z) && z >= 0.0, "bessel argument must be finite and non-negative");
  std::vector<double> r(static_cast<std::size_t>(n_max) + 1, 0.0);
  r[0] = 1.0;
  if (z == 0.0) return r;
  if (z <= detail::kSeriesMaxArg) {
    const double i0 = detail::bessel_i_series(0, z);
    for (int n = 1; n <= n_max; ++n) r[static_cast<std::size_t>(n)] = detail::bessel_i_series(n, z) / i0;
    return r;
  }
  auto s = detail::bessel_i_scaled_miller(n_max, z);
  for (int n = 1; n <= n_max; ++n) r[static_cast<std::size_t>(n)] = s[static_cast<std::size_t>(n)] / s[0];
  return r;
}

}  // namespace qlaser
