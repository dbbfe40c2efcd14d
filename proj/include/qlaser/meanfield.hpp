#pragma once

// Mean-field Maxwell-Bloch lattice:
//   dA_j/dt = g S_j - C A_j - s D (A_{j-1} + A_{j+1}) - i eps_j
//   dS_j/dt = g D_j A_j - gamma S_j
//   dD_j/dt = -2g (S_j^* A_j + S_j A_j^*) - 2 gamma (D_j - 1)
// integrated with classical RK4. s = +1 antiferromagnetic, -1 ferromagnetic;
// on each periodic axis both the previous and the next site contribute.

#include <algorithm>
#include <cmath>
#include <complex>
#include <ostream>
#include <vector>

#include "qlaser/error.hpp"
#include "qlaser/model.hpp"

namespace qlaser {

struct MeanFieldState {
  std::vector<std::complex<double>> A;
  std::vector<std::complex<double>> S;
  std::vector<double> D;

  std::size_t size() const { return A.size(); }

  bool finite() const {
    for (std::size_t j = 0; j < A.size(); ++j) {
      if (!std::isfinite(A[j].real()) || !std::isfinite(A[j].imag()) || !std::isfinite(S[j].real()) ||
          !std::isfinite(S[j].imag()) || !std::isfinite(D[j]))
        return false;
    }
    return true;
  }

  double mean_intensity() const {
    double s = 0.0;
    for (const auto& a : A) s += std::norm(a);
    return s / static_cast<double>(A.size());
  }
};

struct MeanFieldTrajectory {
  std::vector<double> times;
  std::vector<MeanFieldState> states;
  const MeanFieldState& final_state() const { return states.back(); }
};

inline constexpr double kMeanFieldStabilityGuard = 0.1;
inline constexpr double kMeanFieldDivergence = 1e6;

// Tiny homogeneous seed with full inversion.
inline MeanFieldState lasing_seed(const ModelParams& p, double fraction = 1e-3) {
  const std::size_t n = p.lattice.size();
  const double nmf = 2.0 * p.gamma * p.gamma / (p.g * p.g);
  MeanFieldState s;
  s.A.assign(n, {fraction * std::sqrt(nmf), 0.0});
  s.S.assign(n, {0.0, 0.0});
  s.D.assign(n, 1.0);
  return s;
}

namespace detail {

class MaxwellBloch {
 public:
  explicit MaxwellBloch(const ModelParams& p) : p_(p) {
    require(p.lattice.periodic(), "mean-field lattice must be periodic");
    const std::size_t n = p.lattice.size();
    D_ = p.t_hop * p.t_hop / p.kappa_tilde;
    C_ = p.kappa + D_;
    s_ = p.coupling_sign == CouplingSign::ferro ? -1.0 : 1.0;
    for (std::size_t j = 0; j < n; ++j) {
      eps_.push_back(std::polar(p.epsilon_abs, p.site_phase(j)));
      std::vector<std::size_t> nb;
      for (std::size_t ax = 0; ax < p.lattice.dim(); ++ax) {
        const std::size_t l = p.lattice.lengths()[ax];
        if (l < 2) continue;
        nb.push_back(p.lattice.shifted(j, ax, l - 1));
        nb.push_back(p.lattice.shifted(j, ax, 1));
      }
      nbr_.push_back(std::move(nb));
    }
  }

  void rhs(const MeanFieldState& x, MeanFieldState& dx) const {
    const std::size_t n = x.size();
    const double g = p_.g, gam = p_.gamma;
    const std::complex<double> I(0.0, 1.0);
    for (std::size_t j = 0; j < n; ++j) {
      std::complex<double> nn = 0.0;
      for (auto k : nbr_[j]) nn += x.A[k];
      dx.A[j] = g * x.S[j] - C_ * x.A[j] - s_ * D_ * nn - I * eps_[j];
      dx.S[j] = g * x.D[j] * x.A[j] - gam * x.S[j];
      dx.D[j] = -2.0 * g * 2.0 * (std::conj(x.S[j]) * x.A[j]).real() - 2.0 * gam * (x.D[j] - 1.0);
    }
  }

  void rk4(MeanFieldState& x, double dt) {
    k1_ = k2_ = k3_ = k4_ = tmp_ = x;
    rhs(x, k1_);
    axpy(x, k1_, 0.5 * dt, tmp_);
    rhs(tmp_, k2_);
    axpy(x, k2_, 0.5 * dt, tmp_);
    rhs(tmp_, k3_);
    axpy(x, k3_, dt, tmp_);
    rhs(tmp_, k4_);
    const double w = dt / 6.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      x.A[j] += w * (k1_.A[j] + 2.0 * k2_.A[j] + 2.0 * k3_.A[j] + k4_.A[j]);
      x.S[j] += w * (k1_.S[j] + 2.0 * k2_.S[j] + 2.0 * k3_.S[j] + k4_.S[j]);
      x.D[j] += w * (k1_.D[j] + 2.0 * k2_.D[j] + 2.0 * k3_.D[j] + k4_.D[j]);
    }
  }

 private:
  static void axpy(const MeanFieldState& x, const MeanFieldState& k, double h, MeanFieldState& out) {
    for (std::size_t j = 0; j < x.size(); ++j) {
      out.A[j] = x.A[j] + h * k.A[j];
      out.S[j] = x.S[j] + h * k.S[j];
      out.D[j] = x.D[j] + h * k.D[j];
    }
  }

  const ModelParams& p_;
  double C_ = 0, D_ = 0, s_ = 1;
  std::vector<std::complex<double>> eps_;
  std::vector<std::vector<std::size_t>> nbr_;
  MeanFieldState k1_, k2_, k3_, k4_, tmp_;
};

}  // namespace detail

inline double fastest_rate(const ModelParams& p) {
  return std::max({p.gamma, p.kappa, p.g, p.t_hop * p.t_hop / p.kappa_tilde});
}

// Records every `stride`-th step (and always the initial and final state); stride 0 keeps only the final state.
inline MeanFieldTrajectory integrate_maxwell_bloch(const ModelParams& p, MeanFieldState init, double dt, double t_end,
                                                   std::size_t stride = 0) {
  p.validate();
  require(std::isfinite(dt) && dt > 0.0, "dt must be positive");
  require(dt * fastest_rate(p) <= kMeanFieldStabilityGuard, "dt too large: dt*max(gamma, kappa, g, t^2/kappa_tilde) > 0.1");
  require(std::isfinite(t_end) && t_end >= 0.0, "t_end must be non-negative");
  const std::size_t n = p.lattice.size();
  require(init.A.size() == n && init.S.size() == n && init.D.size() == n, "state size must match the lattice");

  detail::MaxwellBloch mb(p);
  const double limit = kMeanFieldDivergence * std::sqrt(2.0 * p.gamma * p.gamma / (p.g * p.g));
  const auto steps = static_cast<std::size_t>(std::llround(t_end / dt));
  MeanFieldTrajectory tr;
  if (stride > 0) {
    tr.times.push_back(0.0);
    tr.states.push_back(init);
  }
  for (std::size_t k = 1; k <= steps; ++k) {
    mb.rk4(init, dt);
    for (std::size_t j = 0; j < n; ++j) {
      if (!std::isfinite(std::abs(init.A[j])) || std::abs(init.A[j]) > limit)
        throw NumericalFailure("mean-field amplitude diverged at site " + std::to_string(j) + ", t = " +
                               std::to_string(static_cast<double>(k) * dt));
    }
    if (!init.finite()) throw NumericalFailure("mean-field state became non-finite");
    if (stride > 0 && (k % stride == 0) && k != steps) {
      tr.times.push_back(static_cast<double>(k) * dt);
      tr.states.push_back(init);
    }
  }
  tr.times.push_back(static_cast<double>(steps) * dt);
  tr.states.push_back(std::move(init));
  return tr;
}

// Per-site n_mf (C~_p - 1), clamped at zero.
inline double steady_boson_number(const ModelParams& p) {
  p.validate();
  const double cp = p.g * p.g / (p.kappa * p.gamma);
  const double tk = p.t_hop / p.kappa;
  const double cpt = cp / (1.0 + 3.0 * tk * tk);
  const double nmf = 2.0 * p.gamma * p.gamma / (p.g * p.g);
  return std::max(0.0, nmf * (cpt - 1.0));
}

enum class SweepRate { g, kappa, gamma, t_hop, kappa_tilde };

inline double& rate_ref(ModelParams& p, SweepRate r) {
  switch (r) {
    case SweepRate::g: return p.g;
    case SweepRate::kappa: return p.kappa;
    case SweepRate::gamma: return p.gamma;
    case SweepRate::t_hop: return p.t_hop;
    case SweepRate::kappa_tilde: return p.kappa_tilde;
  }
  throw InvalidArgument("unknown sweep rate");
}

struct ThresholdOptions {
  double seed_fraction = 1e-6;
  double window = 200.0;     // integration time per probe
  double rel_tol = 1e-8;
  std::size_t max_iter = 80;
};

// Linear growth rate of a tiny homogeneous seed, from the log-amplitude change
// over the second half of the window.
inline double seed_growth_rate(const ModelParams& p, const ThresholdOptions& opt = {}) {
  const double dt = kMeanFieldStabilityGuard / fastest_rate(p) / 2.0;
  auto half = integrate_maxwell_bloch(p, lasing_seed(p, opt.seed_fraction), dt, 0.5 * opt.window).final_state();
  const double a1 = std::sqrt(half.mean_intensity());
  const double t_half = std::llround(0.5 * opt.window / dt) * dt;
  auto full = integrate_maxwell_bloch(p, half, dt, 0.5 * opt.window).final_state();
  const double a2 = std::sqrt(full.mean_intensity());
  return std::log(a2 / a1) / t_half;
}

// Bisection on the sign of the seed growth rate over [lo, hi] of one rate.
inline double detect_threshold(const ModelParams& base, SweepRate rate, double lo, double hi,
                               const ThresholdOptions& opt = {}) {
  require(lo > 0.0 && hi > lo, "sweep interval must satisfy 0 < lo < hi");
  require(base.epsilon_abs == 0.0, "threshold detection needs an undriven system");
  auto lasing = [&](double v) {
    ModelParams p = base;
    rate_ref(p, rate) = v;
    return seed_growth_rate(p, opt) > 0.0;
  };
  const bool l_lo = lasing(lo), l_hi = lasing(hi);
  if (l_lo == l_hi) throw InvalidArgument("sweep does not bracket the lasing threshold");
  double a = lo, b = hi;
  for (std::size_t it = 0; it < opt.max_iter && (b - a) > opt.rel_tol * b; ++it) {
    const double m = 0.5 * (a + b);
    (lasing(m) == l_lo ? a : b) = m;
  }
  return 0.5 * (a + b);
}

// CSV rows: time,site,re_A,im_A,re_S,im_S,D
inline void write_trajectory_csv(std::ostream& os, const MeanFieldTrajectory& tr) {
  os << "time,site,re_A,im_A,re_S,im_S,D\n";
  for (std::size_t k = 0; k < tr.states.size(); ++k) {
    const auto& s = tr.states[k];
    for (std::size_t j = 0; j < s.size(); ++j)
      os << tr.times[k] << ',' << j << ',' << s.A[j].real() << ',' << s.A[j].imag() << ',' << s.S[j].real() << ','
         << s.S[j].imag() << ',' << s.D[j] << '\n';
  }
}

}  // namespace qlaser
