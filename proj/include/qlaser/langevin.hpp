#pragma once

// Euler-Maruyama integration of the semiclassical field dynamics (complex
// amplitude per site) and of the reduced angular dynamics at fixed radius.
//
// Full field, per cartesian component, Ito convention:
//   d alpha_j = [(A - C - B|alpha_j|^2) alpha_j - 2 s D sum_nn alpha_k - i eps_j] dt + sqrt(A) (dW1 + i dW2)
// Angular:
//   d theta_j = [-2 s D sum_nn sin(theta_k - theta_j) - (|eps|/sqrt(n0)) cos(theta_j - phi_j)] dt + sqrt(A/n0) dW_j
// with s = +1 antiferromagnetic, -1 ferromagnetic. The angular drift equals
// -(A / 2n0) dE/dtheta_j for the sampler's exponent E.

#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <vector>

#include "qlaser/error.hpp"
#include "qlaser/model.hpp"
#include "qlaser/observables.hpp"
#include "qlaser/rng.hpp"
#include "qlaser/stats.hpp"
#include "qlaser/xy_target.hpp"

namespace qlaser {

using cplx = std::complex<double>;

struct FieldConfig {
  std::vector<cplx> alpha;
};

struct LangevinParams {
  double dt = 1e-3;
  std::size_t n_steps = 100000;
  std::size_t burn_in_steps = 10000;
  std::uint64_t seed = 1;
  std::size_t measure_every = 1;
  std::size_t n_batches = 50;
  std::optional<double> radial_width_sigma;

  void validate() const {
    require(std::isfinite(dt) && dt > 0.0, "dt must be positive");
    require(burn_in_steps < n_steps, "burn-in must be shorter than the run");
    require(measure_every >= 1, "measure_every must be positive");
  }
};

class LangevinModel {
 public:
  LangevinModel(const ModelParams& p, const DerivedCoeffs& c)
      : lattice_(p.lattice), phases_(p.site_phases()), A_(c.A), B_(c.B), C_(c.C), D_(c.D),
        eps_(c.epsilon_abs), n0_(c.n0), n_mf_(c.n_mf),
        s_(p.coupling_sign == CouplingSign::ferro ? -1.0 : 1.0) {
    eps_site_.resize(phases_.size());
    for (std::size_t j = 0; j < phases_.size(); ++j) eps_site_[j] = std::polar(eps_, phases_[j]);
  }

  const LatticeSpec& lattice() const { return lattice_; }
  const std::vector<double>& phases() const { return phases_; }
  double A() const { return A_; }
  double n0() const { return n0_; }

  XYTarget angular_target() const {
    XYTarget t;
    t.lattice = lattice_;
    t.K_bond = 4.0 * D_ * n0_ / A_;
    t.h_field = 2.0 * eps_ / A_ * std::sqrt(n0_);
    t.sign = s_ < 0.0 ? CouplingSign::ferro : CouplingSign::antiferro;
    t.phases = phases_;
    return t;
  }

  std::vector<double> angular_drift(std::span<const double> theta) const {
    require(n0_ > 0.0, "angular dynamics needs n0 > 0");
    std::vector<double> f(theta.size());
    const double drive = eps_ / std::sqrt(n0_);
    for (std::size_t j = 0; j < theta.size(); ++j) {
      double acc = 0.0;
      for (auto k : lattice_.neighbors(j)) acc += std::sin(theta[k] - theta[j]);
      f[j] = -2.0 * s_ * D_ * acc - drive * std::cos(theta[j] - phases_[j]);
    }
    return f;
  }

  void step_angular(AngularConfig& st, double dt, Engine& rng) const {
    dw_.resize(lattice_.size());
    std::normal_distribution<double> n01;
    const double sq = std::sqrt(dt);
    for (auto& w : dw_) w = sq * n01(rng);
    step_angular(st, dt, dw_);
  }

  // Same step with caller-supplied Wiener increments (variance dt each), so
  // runs at different dt can share one Brownian path.
  void step_angular(AngularConfig& st, double dt, std::span<const double> dW) const {
    require(st.theta.size() == lattice_.size(), "angle count must match the lattice");
    require(dW.size() == st.theta.size(), "one Wiener increment per site");
    const auto f = angular_drift(st.theta);
    const double amp = std::sqrt(A_ / n0_);
    for (std::size_t j = 0; j < f.size(); ++j) st.theta[j] = wrap_angle(st.theta[j] + f[j] * dt + amp * dW[j]);
  }

  void step_full(FieldConfig& st, double dt, Engine& rng) const {
    require(st.alpha.size() == lattice_.size(), "field count must match the lattice");
    const std::size_t n = st.alpha.size();
    drift_.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      const cplx a = st.alpha[j];
      cplx nn = 0.0;
      for (auto k : lattice_.neighbors(j)) nn += st.alpha[k];
      drift_[j] = (A_ - C_ - B_ * std::norm(a)) * a - 2.0 * s_ * D_ * nn - cplx(0.0, 1.0) * eps_site_[j];
    }
    const double amp = std::sqrt(A_ * dt);
    const double limit = 1e6 * std::sqrt(n_mf_);
    std::normal_distribution<double> n01;
    for (std::size_t j = 0; j < n; ++j) {
      const double x = n01(rng), y = n01(rng);
      st.alpha[j] += drift_[j] * dt + amp * cplx(x, y);
      if (!std::isfinite(st.alpha[j].real()) || !std::isfinite(st.alpha[j].imag()) || std::abs(st.alpha[j]) > limit)
        throw NumericalFailure("field diverged at site " + std::to_string(j));
    }
  }

 private:
  LatticeSpec lattice_;
  std::vector<double> phases_;
  std::vector<cplx> eps_site_;
  double A_, B_, C_, D_, eps_, n0_, n_mf_, s_;
  mutable std::vector<cplx> drift_;
  mutable std::vector<double> dw_;
};

inline void step_angular(AngularConfig& st, const LangevinModel& m, double dt, Engine& rng) { m.step_angular(st, dt, rng); }
inline void step_full(FieldConfig& st, const LangevinModel& m, double dt, Engine& rng) { m.step_full(st, dt, rng); }

namespace detail {

template <class State, class Step, class Measure>
SampleStats run_stationary_impl(State st, const LangevinParams& lp, XYMeasurer& meas, Step step, Measure measure) {
  lp.validate();
  const std::size_t n_meas = (lp.n_steps - lp.burn_in_steps) / lp.measure_every;
  if (n_meas == 0) throw InvalidArgument("no samples after burn-in");
  Engine rng = make_engine(lp.seed, 0);
  for (std::size_t s = 0; s < lp.burn_in_steps; ++s) step(st, rng);
  SampleStats out{meas.layout(), BatchAccumulator(meas.layout().width(), lp.n_batches, n_meas), 1.0, 0.0, {}};
  for (std::size_t s = lp.burn_in_steps; s < lp.n_steps; ++s) {
    step(st, rng);
    if ((s - lp.burn_in_steps + 1) % lp.measure_every == 0) out.acc.add(measure(st));
  }
  return out;
}

}  // namespace detail

inline SampleStats run_stationary(AngularConfig initial, const LangevinModel& m, const LangevinParams& lp) {
  XYMeasurer meas(m.lattice(), m.phases(), false);
  auto out = detail::run_stationary_impl(
      std::move(initial), lp, meas, [&](AngularConfig& s, Engine& r) { m.step_angular(s, lp.dt, r); },
      [&](const AngularConfig& s) { return meas.measure(std::span<const double>(s.theta)); });
  return out;
}

inline SampleStats run_stationary(FieldConfig initial, const LangevinModel& m, const LangevinParams& lp) {
  XYMeasurer meas(m.lattice(), m.phases(), true);
  return detail::run_stationary_impl(
      std::move(initial), lp, meas, [&](FieldConfig& s, Engine& r) { m.step_full(s, lp.dt, r); },
      [&](const FieldConfig& s) { return meas.measure(std::span<const cplx>(s.alpha)); });
}

struct RefinementPair {
  SampleStats coarse;  // step lp.dt
  SampleStats fine;    // step lp.dt / 2, same Brownian path
};

// Angular runs at dt and dt/2 driven by one Brownian path: every coarse
// increment is the sum of two fine ones. Step counts in `lp` refer to dt.
inline RefinementPair run_refinement_pair(const AngularConfig& initial, const LangevinModel& m,
                                          const LangevinParams& lp) {
  lp.validate();
  const std::size_t n_meas = (lp.n_steps - lp.burn_in_steps) / lp.measure_every;
  if (n_meas == 0) throw InvalidArgument("no samples after burn-in");
  XYMeasurer meas(m.lattice(), m.phases(), false);
  auto fresh = [&] {
    return SampleStats{meas.layout(), BatchAccumulator(meas.layout().width(), lp.n_batches, n_meas), 1.0, 0.0, {}};
  };
  RefinementPair out{fresh(), fresh()};
  AngularConfig coarse = initial, fine = initial;
  const std::size_t n = initial.theta.size();
  std::vector<double> w1(n), w2(n), w(n);
  Engine rng = make_engine(lp.seed, 0);
  std::normal_distribution<double> n01;
  const double h = 0.5 * lp.dt, sq = std::sqrt(h);
  for (std::size_t s = 0; s < lp.n_steps; ++s) {
    for (std::size_t j = 0; j < n; ++j) {
      w1[j] = sq * n01(rng);
      w2[j] = sq * n01(rng);
      w[j] = w1[j] + w2[j];
    }
    m.step_angular(fine, h, w1);
    m.step_angular(fine, h, w2);
    m.step_angular(coarse, lp.dt, w);
    if (s >= lp.burn_in_steps && (s - lp.burn_in_steps + 1) % lp.measure_every == 0) {
      out.coarse.acc.add(meas.measure(std::span<const double>(coarse.theta)));
      out.fine.acc.add(meas.measure(std::span<const double>(fine.theta)));
    }
  }
  return out;
}

// Snapshot rows: time,site,theta
inline void write_snapshot(std::ostream& os, double time, const AngularConfig& st) {
  for (std::size_t j = 0; j < st.theta.size(); ++j) os << time << ',' << j << ',' << st.theta[j] << '\n';
}

// Snapshot rows: time,site,re,im
inline void write_snapshot(std::ostream& os, double time, const FieldConfig& st) {
  for (std::size_t j = 0; j < st.alpha.size(); ++j)
    os << time << ',' << j << ',' << st.alpha[j].real() << ',' << st.alpha[j].imag() << '\n';
}

}  // namespace qlaser
