#pragma once

// Fisher information by error propagation, F = (d<O>/dp)^2 / Var(O), from
// sampler runs at neighbouring parameter values, plus the first-order
// relation between quadrature moments and the validity flag of the linear
// optimal-observable ansatz.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "qlaser/error.hpp"
#include "qlaser/model.hpp"
#include "qlaser/observables.hpp"
#include "qlaser/stats.hpp"

namespace qlaser {

struct QfiEstimate {
  double value = 0.0;
  double std_error = 0.0;
  Estimate derivative;
  Estimate variance;
  double delta = 0.0;  // finite-difference half-step that passed the linearity check
  std::size_t halvings = 0;
  double linearity_z = 0.0;
  double theory_paper = 0.0;
  double theory_errorprop = 0.0;
};

// F = d^2 / v with first-order error propagation.
inline QfiEstimate qfi_from(const Estimate& derivative, const Estimate& variance) {
  require(variance.mean > 0.0, "variance must be positive");
  QfiEstimate q;
  q.derivative = derivative;
  q.variance = variance;
  q.value = derivative.mean * derivative.mean / variance.mean;
  const double dd = 2.0 * derivative.mean * derivative.se / variance.mean;
  const double dv = q.value * variance.se / variance.mean;
  q.std_error = std::sqrt(dd * dd + dv * dv);
  return q;
}

struct FisherOptions {
  double delta_fraction = 0.2;  // amplitude step as a fraction of |eps|
  double delta_phi = 0.1;
  std::size_t max_halvings = 4;
  double linearity_z = 3.0;
  double linearity_rel = 1e-2;  // also accept a mismatch below this fraction of the response
};

// Runs the sampler with the scanned parameter set to the argument.
using SampleRunner = std::function<SampleStats(double)>;

// Summed quadrature 2 r0 sum_j cos(theta_j - phi_j + angle) in terms of the
// layout columns: angle = 0 gives X_sum, angle = pi/2 gives P_sum.
struct Quadrature {
  double r0 = 1.0;
  double angle = 0.0;

  double mean(std::span<const double> x) const {
    using L = MeasurementLayout;
    return 2.0 * r0 * (x[L::kCos] * std::cos(angle) - x[L::kSin] * std::sin(angle));
  }
  double variance(std::span<const double> x) const {
    using L = MeasurementLayout;
    const double co = std::cos(angle), so = std::sin(angle);
    const double m = x[L::kCos] * co - x[L::kSin] * so;
    const double m2 = x[L::kCos2] * co * co + x[L::kSin2] * so * so - 2.0 * x[L::kSinCos] * co * so;
    return 4.0 * r0 * r0 * (m2 - m * m);
  }
};

struct QuadratureMoments {
  Estimate mean;
  Estimate variance;
};

inline QuadratureMoments quadrature_moments(const SampleStats& st, const Quadrature& q) {
  return {st.acc.jackknife([&](std::span<const double> x) { return q.mean(x); }),
          st.acc.jackknife([&](std::span<const double> x) { return q.variance(x); })};
}

inline QuadratureMoments p_sum_moments(const SampleStats& st, double r0) {
  return quadrature_moments(st, {r0, 0.5 * std::numbers::pi});
}

// X_sum relative to a measurement phase rotated by `offset` from the drive.
inline QuadratureMoments x_sum_moments(const SampleStats& st, double r0, double offset) {
  return quadrature_moments(st, {r0, offset});
}

namespace detail {

// Central differences at half-steps delta and delta/2; halves delta until the
// response at delta is twice the response at delta/2 within `linearity_z` SE
// or within `linearity_rel` of the response.
// The four shifted runs are jackknifed jointly, batch by batch, so runs that
// share random numbers get the paired error of their differences.
inline QfiEstimate central_difference(const SampleRunner& run, const std::function<Quadrature(double)>& quad,
                                      double centre, double delta, const FisherOptions& opt) {
  auto up = run(centre + delta), dn = run(centre - delta);
  for (std::size_t h = 0;; ++h) {
    auto up2 = run(centre + 0.5 * delta), dn2 = run(centre - 0.5 * delta);
    const BatchAccumulator* parts[] = {&up.acc, &dn.acc, &up2.acc, &dn2.acc};
    const auto joint = BatchAccumulator::concat(parts);
    const std::size_t w = up.acc.width();
    const Quadrature qu = quad(centre + delta), qd = quad(centre - delta);
    const Quadrature qu2 = quad(centre + 0.5 * delta), qd2 = quad(centre - 0.5 * delta);
    auto r1 = [&](std::span<const double> x) { return qu.mean(x.subspan(0, w)) - qd.mean(x.subspan(w, w)); };
    auto r2 = [&](std::span<const double> x) {
      return qu2.mean(x.subspan(2 * w, w)) - qd2.mean(x.subspan(3 * w, w));
    };
    const auto mis = joint.jackknife([&](std::span<const double> x) { return r1(x) - 2.0 * r2(x); });
    const auto resp = joint.jackknife(r1);
    const double se = std::max(mis.se, 1e-12 * std::abs(resp.mean));
    const double z = se > 0.0 ? std::abs(mis.mean) / se : (mis.mean == 0.0 ? 0.0 : INFINITY);
    if (z <= opt.linearity_z || std::abs(mis.mean) <= opt.linearity_rel * std::abs(resp.mean)) {
      const Estimate d{resp.mean / (2.0 * delta), resp.se / (2.0 * delta)};
      const auto mid = quadrature_moments(run(centre), quad(centre));
      QfiEstimate q = qfi_from(d, mid.variance);
      q.delta = delta;
      q.halvings = h;
      q.linearity_z = z;
      return q;
    }
    if (h >= opt.max_halvings)
      throw NumericalFailure("linearity check failed: response at delta and delta/2 differ by " + std::to_string(z) +
                             " SE from a factor 2");
    delta *= 0.5;
    up = std::move(up2);
    dn = std::move(dn2);
  }
}

}  // namespace detail

// F[|eps|] from <P_sum> runs at eps +- delta, eps +- delta/2 and the variance at eps.
inline QfiEstimate estimate_qfi_amplitude(const SampleRunner& run_at_eps, double eps, double r0,
                                          const FisherOptions& opt = {}) {
  require(eps > 0.0, "amplitude estimation needs |eps| > 0");
  require(opt.delta_fraction > 0.0 && opt.delta_fraction < 1.0, "delta_fraction must lie in (0, 1)");
  const Quadrature p{r0, 0.5 * std::numbers::pi};
  return detail::central_difference(run_at_eps, [p](double) { return p; }, eps, opt.delta_fraction * eps, opt);
}

// F[phi] from <X_sum> measured at a fixed estimate phi_bar while the drive phase
// is phi_bar + offset; `run_at_offset(offset)` runs the sampler at that drive phase.
inline QfiEstimate estimate_qfi_phase(const SampleRunner& run_at_offset, double r0, const FisherOptions& opt = {}) {
  require(opt.delta_phi > 0.0 && opt.delta_phi < 1.0, "delta_phi must be small and positive");
  return detail::central_difference(
      run_at_offset, [r0](double off) { return Quadrature{r0, off}; }, 0.0, opt.delta_phi, opt);
}

struct ElegantReport {
  Estimate p_mean_over_nu;  // nu^{-1} <sum_j P_j>
  Estimate p_pair_sum;      // sum_ij <P_i P_j>
  Estimate x_pair_sum;      // sum_ij <X_i X_j>
  double z_p_mean_p_pair = 0.0;
  double z_p_mean_x_pair = 0.0;
  double z_p_pair_x_pair = 0.0;
  double max_z() const { return std::max({z_p_mean_p_pair, z_p_mean_x_pair, z_p_pair_x_pair}); }
};

inline ElegantReport check_elegant_relation(const SampleStats& st, double r0, double nu) {
  require(nu > 0.0, "nu must be positive");
  const auto o = estimate_observables(st, r0);
  ElegantReport r;
  r.p_mean_over_nu = {o.P_sum.mean / nu, o.P_sum.se / nu};
  r.p_pair_sum = o.P_pair_sum;
  r.x_pair_sum = o.X_pair_sum;
  r.z_p_mean_p_pair = z_score(r.p_mean_over_nu, r.p_pair_sum);
  r.z_p_mean_x_pair = z_score(r.p_mean_over_nu, r.x_pair_sum);
  r.z_p_pair_x_pair = z_score(r.p_pair_sum, r.x_pair_sum);
  return r;
}

inline constexpr double kSldThreshold = 0.1;

struct SldReport {
  double varsigma = 0.0;
  double threshold = kSldThreshold;
  bool optimal_regime = false;  // varsigma <= threshold
};

inline SldReport check_sld_smallness(const DerivedCoeffs& c, double threshold = kSldThreshold) {
  return {c.varsigma, threshold, c.varsigma <= threshold};
}

}  // namespace qlaser
