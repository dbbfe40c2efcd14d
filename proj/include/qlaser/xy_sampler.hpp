#pragma once

// Single-site Metropolis sampling of the steady-state angular law, with an
// optional global-rotation move, and a tensor-product quadrature oracle for
// rings of at most four sites.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <span>
#include <thread>
#include <vector>

#include "qlaser/error.hpp"
#include "qlaser/model.hpp"
#include "qlaser/observables.hpp"
#include "qlaser/rng.hpp"
#include "qlaser/stats.hpp"
#include "qlaser/xy_target.hpp"

namespace qlaser {

enum class StartState { cold, hot };

struct SamplerConfig {
  double K_bond = 0.0;
  double h_field = 0.0;
  double phi = 0.0;
  CouplingSign sign = CouplingSign::ferro;
  DrivePattern pattern = DrivePattern::uniform;
  double proposal_width = 1.0;
  std::size_t sweeps = 10000;
  std::size_t burn_in_sweeps = 1000;
  std::uint64_t seed = 1;
  std::size_t measure_every = 1;
  std::size_t n_batches = 50;
  bool tune_width = true;
  bool global_rotation = false;
  StartState start = StartState::cold;

  void validate() const {
    require(std::isfinite(K_bond) && K_bond >= 0.0, "K_bond must be finite and non-negative");
    require(std::isfinite(h_field), "h_field must be finite");
    require(std::isfinite(phi), "phi must be finite");
    require(proposal_width > 0.0 && proposal_width <= std::numbers::pi, "proposal_width must lie in (0, pi]");
    require(measure_every >= 1, "measure_every must be positive");
    require(sweeps / measure_every >= n_batches, "too few measured sweeps for the batch count");
  }

  XYTarget target(const LatticeSpec& lattice) const {
    XYTarget t;
    t.lattice = lattice;
    t.K_bond = K_bond;
    t.h_field = h_field;
    t.sign = sign;
    t.phases = uniform_phases(lattice, phi, pattern);
    t.validate();
    return t;
  }
};

inline SamplerConfig sampler_config_from(const ModelParams& p, const DerivedCoeffs& c) {
  SamplerConfig cfg;
  cfg.K_bond = c.K_bond;
  cfg.h_field = c.h_field();
  cfg.phi = p.phi;
  cfg.sign = p.coupling_sign;
  cfg.pattern = p.drive_pattern;
  return cfg;
}

// Metropolis state with cached cos/sin of every angle.
class MetropolisChain {
 public:
  MetropolisChain(XYTarget target, std::vector<double> theta, Engine rng)
      : t_(std::move(target)), theta_(std::move(theta)), rng_(std::move(rng)) {
    require(theta_.size() == t_.lattice.size(), "angle count must match the lattice");
    const std::size_t n = theta_.size();
    c_.resize(n);
    s_.resize(n);
    cphi_.resize(n);
    sphi_.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      theta_[j] = wrap_angle(theta_[j]);
      c_[j] = std::cos(theta_[j]);
      s_[j] = std::sin(theta_[j]);
      cphi_[j] = std::cos(t_.phases[j]);
      sphi_[j] = std::sin(t_.phases[j]);
    }
    sk_ = t_.bond_sign() * t_.K_bond;
  }

  const std::vector<double>& angles() const { return theta_; }
  const XYTarget& target() const { return t_; }
  const Engine& engine() const { return rng_; }

  // N single-site proposals in sequence; returns the number accepted.
  std::size_t sweep(double width) {
    std::uniform_real_distribution<double> step(-width, width);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::size_t accepted = 0;
    const std::size_t n = theta_.size();
    for (std::size_t j = 0; j < n; ++j) {
      const double trial = wrap_angle(theta_[j] + step(rng_));
      const double ct = std::cos(trial), st = std::sin(trial);
      double sc = 0.0, ss = 0.0;
      for (auto k : t_.lattice.neighbors(j)) {
        sc += c_[k];
        ss += s_[k];
      }
      // cos(a - b) = ca cb + sa sb; sin(a - phi) = sa cphi - ca sphi
      const double bond = sk_ * ((ct - c_[j]) * sc + (st - s_[j]) * ss);
      const double field = t_.h_field * ((st - s_[j]) * cphi_[j] - (ct - c_[j]) * sphi_[j]);
      const double dE = bond + field;
      if (dE <= 0.0 || u01(rng_) < std::exp(-dE)) {
        theta_[j] = trial;
        c_[j] = ct;
        s_[j] = st;
        ++accepted;
      }
    }
    return accepted;
  }

  // Rigid rotation of every angle; only the field term changes.
  bool global_rotation(double width) {
    std::uniform_real_distribution<double> step(-width, width);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const double d = step(rng_);
    const double cd = std::cos(d), sd = std::sin(d);
    double dE = 0.0;
    const std::size_t n = theta_.size();
    for (std::size_t j = 0; j < n; ++j) {
      const double cn = c_[j] * cd - s_[j] * sd;
      const double sn = s_[j] * cd + c_[j] * sd;
      dE += (sn - s_[j]) * cphi_[j] - (cn - c_[j]) * sphi_[j];
    }
    dE *= t_.h_field;
    if (dE <= 0.0 || u01(rng_) < std::exp(-dE)) {
      for (std::size_t j = 0; j < n; ++j) {
        theta_[j] = wrap_angle(theta_[j] + d);
        c_[j] = std::cos(theta_[j]);
        s_[j] = std::sin(theta_[j]);
      }
      return true;
    }
    return false;
  }

 private:
  XYTarget t_;
  std::vector<double> theta_;
  Engine rng_;
  std::vector<double> c_, s_, cphi_, sphi_;
  double sk_ = 0.0;
};

// One sweep of single-site updates at fixed width.
inline std::size_t metropolis_sweep(AngularConfig& state, const XYTarget& target, double width, Engine& rng) {
  MetropolisChain chain(target, state.theta, rng);
  const auto acc = chain.sweep(width);
  state.theta = chain.angles();
  rng = chain.engine();
  return acc;
}

inline std::vector<double> initial_angles(const XYTarget& t, StartState start, Engine& rng) {
  std::vector<double> th(t.lattice.size());
  if (start == StartState::hot) {
    std::uniform_real_distribution<double> u(0.0, 2.0 * std::numbers::pi);
    for (auto& v : th) v = u(rng);
    return th;
  }
  // Field minimum of site 0, sublattice-flipped for the antiferromagnetic sign.
  const double base = t.phases[0] - 0.5 * std::numbers::pi;
  for (std::size_t j = 0; j < th.size(); ++j) {
    const bool flip = t.sign == CouplingSign::antiferro && t.lattice.parity(j) == 1;
    th[j] = wrap_angle(base + (flip ? std::numbers::pi : 0.0));
  }
  return th;
}

inline constexpr double kAcceptLow = 0.4;
inline constexpr double kAcceptHigh = 0.6;

// Burn-in (with width tuning), then measurement every `measure_every` sweeps.
inline SampleStats run_chain(const LatticeSpec& lattice, const SamplerConfig& cfg, std::uint64_t stream = 0) {
  cfg.validate();
  const XYTarget target = cfg.target(lattice);
  Engine rng = make_engine(cfg.seed, stream);
  auto theta = initial_angles(target, cfg.start, rng);
  MetropolisChain chain(target, std::move(theta), std::move(rng));

  double width = cfg.proposal_width;
  double gwidth = std::numbers::pi;
  const std::size_t n = lattice.size();
  const std::size_t block = 50;
  std::size_t acc_block = 0, tried_block = 0, gacc = 0, gtried = 0;
  for (std::size_t s = 0; s < cfg.burn_in_sweeps; ++s) {
    acc_block += chain.sweep(width);
    tried_block += n;
    if (cfg.global_rotation) {
      gacc += chain.global_rotation(gwidth) ? 1 : 0;
      ++gtried;
    }
    if (cfg.tune_width && (s + 1) % block == 0) {
      const double r = static_cast<double>(acc_block) / static_cast<double>(tried_block);
      if (r > kAcceptHigh) width = std::min(width * 1.15, std::numbers::pi);
      if (r < kAcceptLow) width *= 0.85;
      acc_block = tried_block = 0;
      if (cfg.global_rotation) {
        const double g = static_cast<double>(gacc) / static_cast<double>(gtried);
        if (g > kAcceptHigh) gwidth = std::min(gwidth * 1.15, std::numbers::pi);
        if (g < kAcceptLow) gwidth *= 0.85;
        gacc = gtried = 0;
      }
    }
  }

  XYMeasurer meas(lattice, target.phases, false);
  const std::size_t n_meas = cfg.sweeps / cfg.measure_every;
  SampleStats out{meas.layout(), BatchAccumulator(meas.layout().width(), cfg.n_batches, n_meas), 0.0, width, {}};
  std::size_t accepted = 0;
  for (std::size_t s = 0; s < cfg.sweeps; ++s) {
    accepted += chain.sweep(width);
    if (cfg.global_rotation) chain.global_rotation(gwidth);
    if ((s + 1) % cfg.measure_every == 0) out.acc.add(meas.measure(chain.angles()));
  }
  out.acceptance = cfg.sweeps ? static_cast<double>(accepted) / static_cast<double>(cfg.sweeps * n) : 0.0;
  out.final_angles = chain.angles();
  return out;
}

// Independent chains on streams 0..n_chains-1, run on up to `threads` workers and
// merged in stream order.
inline SampleStats run_chains(const LatticeSpec& lattice, const SamplerConfig& cfg, std::size_t n_chains,
                              std::size_t threads = 1) {
  require(n_chains >= 1, "need at least one chain");
  std::vector<SampleStats> results(n_chains);
  threads = std::clamp<std::size_t>(threads, 1, n_chains);
  if (threads == 1) {
    for (std::size_t c = 0; c < n_chains; ++c) results[c] = run_chain(lattice, cfg, c);
  } else {
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t c = w; c < n_chains; c += threads) results[c] = run_chain(lattice, cfg, c);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    pool.clear();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  SampleStats merged = std::move(results[0]);
  double acc = merged.acceptance;
  for (std::size_t c = 1; c < n_chains; ++c) {
    merged.acc.merge(results[c].acc);
    acc += results[c].acceptance;
  }
  merged.acceptance = acc / static_cast<double>(n_chains);
  return merged;
}

inline constexpr std::size_t kMaxQuadratureSites = 4;

// <O> = int O e^{-E} / int e^{-E} by the periodic trapezoid rule with M points per angle.
inline double brute_force_expectation(const XYTarget& target,
                                      const std::function<double(std::span<const double>)>& observable,
                                      std::size_t M = 48) {
  target.validate();
  const std::size_t n = target.lattice.size();
  if (n > kMaxQuadratureSites) throw InvalidArgument("quadrature oracle supports at most 4 sites");
  require(M >= 4, "need at least 4 quadrature points per angle");
  const double e_shift = -(target.K_bond * static_cast<double>(target.lattice.bonds().size()) +
                           std::abs(target.h_field) * static_cast<double>(n));
  std::vector<double> grid(M);
  for (std::size_t m = 0; m < M; ++m) grid[m] = 2.0 * std::numbers::pi * static_cast<double>(m) / static_cast<double>(M);

  std::vector<std::size_t> idx(n, 0);
  std::vector<double> th(n, 0.0);
  double num = 0.0, den = 0.0;
  while (true) {
    for (std::size_t j = 0; j < n; ++j) th[j] = grid[idx[j]];
    const double w = std::exp(-(target.energy(th) - e_shift));
    num += w * observable(th);
    den += w;
    std::size_t j = 0;
    while (j < n && ++idx[j] == M) idx[j++] = 0;
    if (j == n) break;
  }
  return num / den;
}

}  // namespace qlaser
