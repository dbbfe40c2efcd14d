#pragma once

// Closed-form layer: exact ring correlations of the ferromagnetic 1D XY chain,
// correlation length, the finite-size long-range condition, perturbative
// quadrature and Fisher-information predictions, and 2D spin-wave predictions.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "qlaser/bessel.hpp"
#include "qlaser/error.hpp"
#include "qlaser/model.hpp"

namespace qlaser {

// Ferromagnetic XY ring with weight exp(K sum_bonds cos(theta_i - theta_j)).
// n_max = 0 selects the automatic starting truncation.
struct ChainSpec {
  std::size_t N = 2;
  double K = 0.0;
  int n_max = 0;
};

inline constexpr double kTailTolerance = 1e-14;

namespace detail {

inline int default_bessel_cutoff(double K) {
  return static_cast<int>(std::ceil(K + 10.0 * std::sqrt(K) + 20.0));
}

// Bessel-ratio series over all integer orders, certified by tail size.
class RingSeries {
 public:
  explicit RingSeries(const ChainSpec& spec) : N_(spec.N), K_(spec.K) {
    require(spec.N >= 1, "ring needs at least one site");
    require(std::isfinite(spec.K) && spec.K >= 0.0, "K must be finite and non-negative");
    int m = spec.n_max > 0 ? spec.n_max : default_bessel_cutoff(spec.K);
    for (int attempt = 0; attempt < 8; ++attempt, m *= 2) {
      r_ = bessel_i_ratios(m + 1, spec.K);
      m_ = m;
      if (certified()) return;
    }
    throw NumericalFailure("Bessel series truncation could not be certified");
  }

  double r(int n) const { return r_[static_cast<std::size_t>(std::abs(n))]; }

  double partition() const {
    double z = 0.0;
    for (int n = -m_; n <= m_; ++n) z += std::pow(r(n), static_cast<double>(N_));
    return z;
  }

  // sum_n r_{n-1}^d r_n^{N-d}
  double numerator(std::size_t d) const {
    double s = 0.0;
    const double dd = static_cast<double>(d), rest = static_cast<double>(N_ - d);
    for (int n = -m_; n <= m_; ++n) s += std::pow(r(n - 1), dd) * std::pow(r(n), rest);
    return s;
  }

 private:
  bool certified() const {
    // Terms fall off monotonically in |n|; the outermost included term bounds the tail.
    const double last = std::pow(r(m_), static_cast<double>(N_));
    const double lead = std::pow(r(m_ - 1), static_cast<double>(N_)) + last;
    return last <= kTailTolerance * std::max(lead, 1.0) || (last == 0.0);
  }

  std::size_t N_;
  double K_;
  int m_ = 0;
  std::vector<double> r_;
};

}  // namespace detail

// <cos(theta_1 - theta_{1+d})> on the ring, 0 <= d <= N.
inline double correlation_exact(const ChainSpec& spec, std::size_t d) {
  require(d <= spec.N, "distance exceeds ring size");
  if (d == 0 || d == spec.N) return 1.0;
  detail::RingSeries series(spec);
  const double g = series.numerator(d) / series.partition();
  return std::clamp(g, -1.0, 1.0);
}

// All G(d), d = 0..N-1, sharing one series evaluation.
inline std::vector<double> correlation_profile_exact(const ChainSpec& spec) {
  detail::RingSeries series(spec);
  const double z = series.partition();
  std::vector<double> g(spec.N);
  g[0] = 1.0;
  for (std::size_t d = 1; d < spec.N; ++d) g[d] = std::clamp(series.numerator(d) / z, -1.0, 1.0);
  return g;
}

// sum_{d=0}^{N-1} G(d): the correlation sum seen from one site of the ring.
inline double correlation_sum(std::size_t N, double K) {
  double s = 0.0;
  for (double g : correlation_profile_exact({N, K, 0})) s += g;
  return s;
}

// xi = 1 / ln(I_0(K) / I_1(K)); zero at K = 0 by convention.
inline double correlation_length(double K) {
  require(std::isfinite(K) && K >= 0.0, "K must be finite and non-negative");
  if (K == 0.0) return 0.0;
  const double rho = bessel_i_ratios(1, K)[1];
  if (rho == 0.0) return 0.0;
  return -1.0 / std::log(rho);
}

struct FiniteSizeMetric {
  double value = 0.0;  // N / xi
  bool long_range = false;
};

inline constexpr double kLongRangeThreshold = 0.1;

inline FiniteSizeMetric finite_size_metric(std::size_t N, double K, double threshold = kLongRangeThreshold) {
  if (K <= 0.0) return {INFINITY, false};
  const double rho = bessel_i_ratios(1, K)[1];
  const double v = rho > 0.0 ? -static_cast<double>(N) * std::log(rho) : INFINITY;
  return {v, v <= threshold};
}

struct QuadraturePrediction {
  std::size_t N = 1;
  double sum_G = 1.0;  // ring correlation sum at K_bond (ferromagnetic)
  FiniteSizeMetric metric;
  // <P_sum>: general correlation-sum form, and the two long-range reductions
  double P_sum_general = 0.0;
  double P_sum_reduced_2 = 0.0;  // 2 n0 nu N^2
  double P_sum_reduced_4 = 0.0;  // 4 n0 nu N^2
  double X_sum_general = 0.0;    // delta_phi * 2 n0 nu N sum_G
  double X_sum_reduced_4 = 0.0;  // delta_phi * 4 n0 nu N^2
  // Fisher information: closed forms, and the error-propagation value
  double F_amplitude_leading = 0.0;
  double F_phase_leading = 0.0;
  double F_amplitude_errorprop = 0.0;
  double F_phase_errorprop = 0.0;
};

inline QuadraturePrediction predict_quadratures_and_qfi(const DerivedCoeffs& c, std::size_t N, double delta_phi) {
  require(N >= 1, "N must be positive");
  QuadraturePrediction p;
  p.N = N;
  const double n = static_cast<double>(N);
  p.sum_G = N == 1 ? 1.0 : correlation_sum(N, c.K_bond);
  p.metric = finite_size_metric(N, c.K_bond);

  const double cpk = c.C_p * c.kappa;
  const double eps = c.epsilon_abs;
  p.P_sum_general = 2.0 * c.n0 * eps / cpk * n * p.sum_G;
  p.P_sum_reduced_2 = 2.0 * c.n0 * c.nu * n * n;
  p.P_sum_reduced_4 = 4.0 * c.n0 * c.nu * n * n;
  p.X_sum_general = delta_phi * 2.0 * c.n0 * c.nu * n * p.sum_G;
  p.X_sum_reduced_4 = delta_phi * 4.0 * c.n0 * c.nu * n * n;

  p.F_amplitude_leading = 2.0 * c.n0 * n * n / cpk;
  p.F_phase_leading = p.F_amplitude_leading * eps * eps;
  // (d<P_sum>/d|eps|)^2 / Var(P_sum) with both evaluated on the steady-state law
  p.F_amplitude_errorprop = 2.0 * c.n0 * n * p.sum_G / (c.A * c.A);
  p.F_phase_errorprop = p.F_amplitude_errorprop * eps * eps;
  return p;
}

struct KtPrediction {
  double beta_eff_varsigma = 0.0;
  double n0_varsigma = 0.0;
  bool low_temperature = false;  // n0 varsigma > 2/pi
  bool at_critical_boundary = false;
  double eta = 0.0;               // 1 / (2 pi n0 varsigma)
  double size_metric = 0.0;       // N_linear^eta
  double eta_bond_spin_wave = 0.0;  // 1 / (2 pi K_bond), spin waves at the sampler's bond coupling
};

inline constexpr double kKtCritical = 2.0 / std::numbers::pi;

inline KtPrediction kt_predictions(const DerivedCoeffs& c, const LatticeSpec& lattice, std::size_t n_linear) {
  require(lattice.dim() == 2, "KT predictions need a 2D lattice");
  require(n_linear >= 1, "linear size must be positive");
  KtPrediction k;
  k.beta_eff_varsigma = c.beta_eff * c.varsigma;
  k.n0_varsigma = c.n0 * c.varsigma;
  k.at_critical_boundary = std::abs(k.n0_varsigma - kKtCritical) <= 1e-12 * kKtCritical;
  k.low_temperature = k.n0_varsigma > kKtCritical && !k.at_critical_boundary;
  k.eta = k.n0_varsigma > 0.0 ? 1.0 / (2.0 * std::numbers::pi * k.n0_varsigma) : INFINITY;
  k.size_metric = std::pow(static_cast<double>(n_linear), k.eta);
  k.eta_bond_spin_wave = c.K_bond > 0.0 ? 1.0 / (2.0 * std::numbers::pi * c.K_bond) : INFINITY;
  return k;
}

}  // namespace qlaser
