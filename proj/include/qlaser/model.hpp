#pragma once

// Physical parameters of the coupled single-qubit-laser lattice, the effective
// coefficients obtained after eliminating the auxiliary modes and the pumped
// qubits, and the lattice topology shared by every other module.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "qlaser/error.hpp"

namespace qlaser {

enum class CouplingSign { antiferro, ferro };
enum class DrivePattern { uniform, staggered };

inline std::string to_string(CouplingSign s) { return s == CouplingSign::ferro ? "ferro" : "antiferro"; }
inline std::string to_string(DrivePattern p) { return p == DrivePattern::staggered ? "staggered" : "uniform"; }

// Wrap an angle into [0, 2pi).
inline double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double w = std::fmod(a, two_pi);
  if (w < 0.0) w += two_pi;
  // fmod of a tiny negative number can round back up to exactly 2pi
  return w >= two_pi ? 0.0 : w;
}

// Hypercubic lattice in 1, 2 or 3 dimensions. Sites are stored row-major with
// axis 0 varying fastest.
class LatticeSpec {
 public:
  LatticeSpec() : LatticeSpec(std::vector<std::size_t>{2}) {}

  explicit LatticeSpec(std::vector<std::size_t> lengths, bool periodic = true)
      : lengths_(std::move(lengths)), periodic_(periodic) {
    require(!lengths_.empty() && lengths_.size() <= 3, "lattice dimension must be 1, 2 or 3");
    n_sites_ = 1;
    for (auto l : lengths_) {
      require(l >= 1, "lattice lengths must be positive");
      n_sites_ *= l;
    }
    require(n_sites_ >= 2, "lattice needs at least two sites");
    build_neighbors();
  }

  static LatticeSpec chain(std::size_t n, bool periodic = true) { return LatticeSpec({n}, periodic); }
  static LatticeSpec square(std::size_t l, bool periodic = true) { return LatticeSpec({l, l}, periodic); }
  static LatticeSpec cubic(std::size_t l, bool periodic = true) { return LatticeSpec({l, l, l}, periodic); }

  std::size_t dim() const { return lengths_.size(); }
  const std::vector<std::size_t>& lengths() const { return lengths_; }
  bool periodic() const { return periodic_; }
  std::size_t size() const { return n_sites_; }

  // First neighbours of a site; deduplicated, so a periodic axis of length 2
  // contributes a single neighbour.
  const std::vector<std::size_t>& neighbors(std::size_t site) const {
    if (site >= n_sites_) throw InvalidArgument("site index " + std::to_string(site) + " out of range");
    return adjacency_[site];
  }

  // Each undirected bond once, as (i, j) with i < j.
  const std::vector<std::array<std::size_t, 2>>& bonds() const { return bonds_; }

  std::array<std::size_t, 3> coords(std::size_t site) const {
    std::array<std::size_t, 3> c{0, 0, 0};
    for (std::size_t ax = 0; ax < lengths_.size(); ++ax) {
      c[ax] = site % lengths_[ax];
      site /= lengths_[ax];
    }
    return c;
  }

  std::size_t index(const std::array<std::size_t, 3>& c) const {
    std::size_t idx = 0;
    for (std::size_t ax = lengths_.size(); ax-- > 0;) idx = idx * lengths_[ax] + c[ax];
    return idx;
  }

  // Site reached from `site` by moving `d` steps along `axis`, wrapping around.
  std::size_t shifted(std::size_t site, std::size_t axis, std::size_t d) const {
    auto c = coords(site);
    c[axis] = (c[axis] + d) % lengths_[axis];
    return index(c);
  }

  // Sum of coordinates modulo 2; drives the staggered pattern and the
  // sublattice gauge transform.
  int parity(std::size_t site) const {
    auto c = coords(site);
    return static_cast<int>((c[0] + c[1] + c[2]) % 2);
  }

 private:
  void build_neighbors() {
    adjacency_.assign(n_sites_, {});
    bonds_.clear();
    for (std::size_t s = 0; s < n_sites_; ++s) {
      auto c = coords(s);
      for (std::size_t ax = 0; ax < lengths_.size(); ++ax) {
        const std::size_t l = lengths_[ax];
        if (l < 2) continue;
        for (int step : {-1, +1}) {
          if (!periodic_ && ((step < 0 && c[ax] == 0) || (step > 0 && c[ax] + 1 == l))) continue;
          auto n = c;
          n[ax] = step < 0 ? (c[ax] + l - 1) % l : (c[ax] + 1) % l;
          const std::size_t t = index(n);
          if (t == s) continue;
          auto& adj = adjacency_[s];
          if (std::find(adj.begin(), adj.end(), t) == adj.end()) adj.push_back(t);
        }
      }
      std::sort(adjacency_[s].begin(), adjacency_[s].end());
      for (auto t : adjacency_[s])
        if (s < t) bonds_.push_back({s, t});
    }
  }

  std::vector<std::size_t> lengths_;
  bool periodic_ = true;
  std::size_t n_sites_ = 0;
  std::vector<std::vector<std::size_t>> adjacency_;
  std::vector<std::array<std::size_t, 2>> bonds_;
};

inline std::vector<std::size_t> neighbors(const LatticeSpec& lattice, std::size_t site) {
  return lattice.neighbors(site);
}

struct ModelParams {
  double g = 1.0;            // qubit-field coupling
  double kappa = 0.1;        // mode loss
  double gamma = 10.0;       // incoherent qubit pump
  double t_hop = 0.0;        // tunnelling to the auxiliary modes
  double kappa_tilde = 1.0;  // auxiliary-mode decay
  double epsilon_abs = 0.0;  // drive amplitude
  double phi = 0.0;          // drive phase
  LatticeSpec lattice = LatticeSpec::chain(2);
  CouplingSign coupling_sign = CouplingSign::antiferro;
  DrivePattern drive_pattern = DrivePattern::uniform;

  void validate() const {
    auto finite_pos = [](double x) { return std::isfinite(x) && x > 0.0; };
    require(finite_pos(g), "g must be positive");
    require(finite_pos(kappa), "kappa must be positive");
    require(finite_pos(gamma), "gamma must be positive");
    require(finite_pos(kappa_tilde), "kappa_tilde must be positive");
    require(std::isfinite(t_hop) && t_hop >= 0.0, "t_hop must be non-negative");
    require(std::isfinite(epsilon_abs) && epsilon_abs >= 0.0, "epsilon_abs must be non-negative");
    require(std::isfinite(phi), "phi must be finite");
  }

  // Drive phase seen by a site: phi, or phi + pi on odd sublattice sites.
  double site_phase(std::size_t site) const {
    double p = phi;
    if (drive_pattern == DrivePattern::staggered && lattice.parity(site) == 1) p += std::numbers::pi;
    return wrap_angle(p);
  }

  std::vector<double> site_phases() const {
    std::vector<double> out(lattice.size());
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = site_phase(j);
    return out;
  }
};

struct DerivedCoeffs {
  double A = 0, B = 0, C = 0, D = 0;
  double lambda = 0, mu = 0, nu = 0, varsigma = 0;
  double C_p = 0, C_p_tilde = 0;
  double n_mf = 0;
  double n0 = 0;
  double beta_eff = 0;
  double K_bond = 0;
  bool n0_overridden = false;
  double kappa = 0;        // copied from the params for the closed-form predictions
  double epsilon_abs = 0;
  std::vector<std::string> warnings;

  // Dimensionless field weight 2 nu sqrt(n0) of the steady-state exponent.
  double h_field() const { return 2.0 * nu * std::sqrt(n0); }
};

// Below this ratio gamma / max(g, kappa, |eps|) the qubit elimination is doubtful.
inline constexpr double kAdiabaticRatio = 10.0;

inline DerivedCoeffs derive_coeffs(const ModelParams& p, std::optional<double> n0_override = std::nullopt) {
  p.validate();
  if (n0_override) require(std::isfinite(*n0_override) && *n0_override > 0.0, "n0_override must be positive");

  DerivedCoeffs c;
  const double g2 = p.g * p.g;
  c.A = g2 / p.gamma;
  c.B = 2.0 * g2 * g2 / (p.gamma * p.gamma * p.gamma);
  c.D = p.t_hop * p.t_hop / p.kappa_tilde;
  c.C = p.kappa + c.D;

  c.lambda = c.B / (2.0 * c.A);
  c.mu = (c.A - c.C) / c.A;
  c.nu = p.epsilon_abs / c.A;
  c.varsigma = c.D / c.A;

  c.C_p = g2 / (p.kappa * p.gamma);
  const double tk = p.t_hop / p.kappa;
  c.C_p_tilde = c.C_p / (1.0 + 3.0 * tk * tk);

  c.kappa = p.kappa;
  c.epsilon_abs = p.epsilon_abs;

  c.n_mf = 2.0 * p.gamma * p.gamma / g2;
  if (n0_override) {
    c.n0 = *n0_override;
    c.n0_overridden = true;
  } else {
    c.n0 = c.C_p_tilde > 1.0 ? c.n_mf * (c.C_p_tilde - 1.0) : 0.0;
  }
  c.beta_eff = c.n0 / (c.C_p * p.kappa);
  c.K_bond = 4.0 * c.varsigma * c.n0;

  const double fastest_other = std::max({p.g, p.kappa, p.epsilon_abs});
  if (p.gamma / fastest_other < kAdiabaticRatio) {
    c.warnings.push_back("gamma/max(g, kappa, |eps|) = " + std::to_string(p.gamma / fastest_other) +
                         " < 10: qubit adiabatic elimination is questionable");
  }
  return c;
}

}  // namespace qlaser
