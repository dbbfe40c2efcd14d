#pragma once

// The steady-state angular law shared by the Metropolis sampler and the angular
// Langevin dynamics:
//
//   P(theta) ~ exp(-E),  E = s K sum_bonds cos(theta_i - theta_j) + h sum_j sin(theta_j - phi_j)
//
// with s = +1 for the native antiferromagnetic coupling and s = -1 for the
// ferromagnetic variant. Bonds are counted once each.

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "qlaser/error.hpp"
#include "qlaser/model.hpp"

namespace qlaser {

struct AngularConfig {
  std::vector<double> theta;
};

struct XYTarget {
  LatticeSpec lattice;
  double K_bond = 0.0;
  double h_field = 0.0;
  CouplingSign sign = CouplingSign::ferro;
  std::vector<double> phases;  // drive phase per site

  double bond_sign() const { return sign == CouplingSign::ferro ? -1.0 : 1.0; }

  void validate() const {
    require(std::isfinite(K_bond) && K_bond >= 0.0, "K_bond must be finite and non-negative");
    require(std::isfinite(h_field), "h_field must be finite");
    require(phases.size() == lattice.size(), "one drive phase per site required");
  }

  double energy(std::span<const double> theta) const {
    double e = 0.0;
    for (const auto& b : lattice.bonds()) e += std::cos(theta[b[0]] - theta[b[1]]);
    e *= bond_sign() * K_bond;
    for (std::size_t j = 0; j < theta.size(); ++j) e += h_field * std::sin(theta[j] - phases[j]);
    return e;
  }

  // dE/dtheta_j
  std::vector<double> gradient(std::span<const double> theta) const {
    std::vector<double> g(theta.size(), 0.0);
    const double sk = bond_sign() * K_bond;
    for (std::size_t j = 0; j < theta.size(); ++j) {
      double acc = 0.0;
      for (auto k : lattice.neighbors(j)) acc -= std::sin(theta[j] - theta[k]);
      g[j] = sk * acc + h_field * std::cos(theta[j] - phases[j]);
    }
    return g;
  }
};

inline std::vector<double> uniform_phases(const LatticeSpec& lattice, double phi, DrivePattern pattern) {
  std::vector<double> p(lattice.size());
  for (std::size_t j = 0; j < p.size(); ++j) {
    double v = phi;
    if (pattern == DrivePattern::staggered && lattice.parity(j) == 1) v += std::numbers::pi;
    p[j] = wrap_angle(v);
  }
  return p;
}

// Target law of the physical model: K = 4 varsigma n0, h = 2 nu sqrt(n0).
inline XYTarget xy_target_from(const ModelParams& p, const DerivedCoeffs& c) {
  XYTarget t;
  t.lattice = p.lattice;
  t.K_bond = c.K_bond;
  t.h_field = c.h_field();
  t.sign = p.coupling_sign;
  t.phases = p.site_phases();
  return t;
}

}  // namespace qlaser
