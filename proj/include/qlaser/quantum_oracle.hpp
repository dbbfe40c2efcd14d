#pragma once

// Truncated-Fock Lindblad integrator for one or two single-qubit-laser sites:
//
//   drho/dt = -i[H, rho] + sum_j (L_{sigma+_j, gamma} + L_{a_j, kappa})(rho) + L_{a_1 +- a_2, t^2/kappa~}(rho)
//   H = sum_j g (sigma+_j a_j + a_j^dag sigma-_j) + eps_j^* a_j + eps_j a_j^dag
//   L_{O,G}(rho) = G (2 O rho O^dag - O^dag O rho - rho O^dag O)
//
// The generator is applied matrix-free on a dense rho; a sparse superoperator
// is assembled only for the direct steady-state solve at small dimension.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <unsupported/Eigen/KroneckerProduct>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "qlaser/error.hpp"
#include "qlaser/model.hpp"

namespace qlaser {

using Matc = Eigen::MatrixXcd;
using SpMatc = Eigen::SparseMatrix<std::complex<double>>;

inline constexpr std::size_t kHilbertBudget = 4096;
inline constexpr std::size_t kDirectSolveMaxDim = 64;
inline constexpr double kCutoffTail = 1e-6;

struct QuantumParams {
  double g = 1.0;
  double kappa = 0.1;
  double gamma = 5.0;
  double t_hop = 0.0;
  double kappa_tilde = 1.0;
  double epsilon_abs = 0.0;
  double phi = 0.0;
  std::size_t n_sites = 1;
  CouplingSign sign = CouplingSign::antiferro;
  DrivePattern pattern = DrivePattern::uniform;

  void validate() const {
    auto nonneg = [](double x) { return std::isfinite(x) && x >= 0.0; };
    require(nonneg(g) && nonneg(kappa) && nonneg(gamma) && nonneg(t_hop) && nonneg(epsilon_abs),
            "quantum rates must be finite and non-negative");
    require(std::isfinite(phi), "phi must be finite");
    require(n_sites == 1 || n_sites == 2, "quantum oracle supports 1 or 2 sites");
    if (t_hop > 0.0) require(std::isfinite(kappa_tilde) && kappa_tilde > 0.0, "kappa_tilde must be positive");
  }

  double site_phase(std::size_t j) const {
    return wrap_angle(phi + (pattern == DrivePattern::staggered && j % 2 == 1 ? std::numbers::pi : 0.0));
  }

  static QuantumParams from(const ModelParams& p) {
    require(p.lattice.size() <= 2, "quantum oracle supports 1 or 2 sites");
    QuantumParams q;
    q.g = p.g;
    q.kappa = p.kappa;
    q.gamma = p.gamma;
    q.t_hop = p.t_hop;
    q.kappa_tilde = p.kappa_tilde;
    q.epsilon_abs = p.epsilon_abs;
    q.phi = p.phi;
    q.n_sites = p.lattice.size();
    q.sign = p.coupling_sign;
    q.pattern = p.drive_pattern;
    return q;
  }
};

// Per site: qubit (g = 0, e = 1) tensor Fock 0..n_max, index q (n_max+1) + n.
struct TruncatedHilbert {
  std::size_t n_sites = 1;
  std::size_t n_max = 10;

  std::size_t local_dim() const { return 2 * (n_max + 1); }
  std::size_t dims() const { return n_sites == 1 ? local_dim() : local_dim() * local_dim(); }

  void validate(std::size_t budget = kHilbertBudget) const {
    require(n_sites == 1 || n_sites == 2, "quantum oracle supports 1 or 2 sites");
    require(n_max >= 1, "Fock cutoff must be at least 1");
    if (dims() > budget) throw InvalidArgument("Hilbert dimension " + std::to_string(dims()) + " exceeds budget");
  }
};

namespace detail {

inline SpMatc sparse_identity(std::size_t n) {
  SpMatc m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  m.setIdentity();
  return m;
}

inline SpMatc annihilation(std::size_t n_max) {
  const auto d = static_cast<Eigen::Index>(n_max + 1);
  SpMatc a(d, d);
  std::vector<Eigen::Triplet<std::complex<double>>> t;
  for (Eigen::Index n = 1; n < d; ++n) t.emplace_back(n - 1, n, std::sqrt(static_cast<double>(n)));
  a.setFromTriplets(t.begin(), t.end());
  return a;
}

inline SpMatc raising() {
  SpMatc s(2, 2);
  s.insert(1, 0) = 1.0;
  return s;
}

inline SpMatc sigma_z() {
  SpMatc s(2, 2);
  s.insert(0, 0) = -1.0;
  s.insert(1, 1) = 1.0;
  return s;
}

}  // namespace detail

// Single-site operators embedded into the full space.
struct SiteOperators {
  SpMatc a, sp, sz, n;
};

inline std::vector<SiteOperators> site_operators(const TruncatedHilbert& h) {
  const SpMatc a_loc = Eigen::kroneckerProduct(detail::sparse_identity(2), detail::annihilation(h.n_max)).eval();
  const SpMatc sp_loc = Eigen::kroneckerProduct(detail::raising(), detail::sparse_identity(h.n_max + 1)).eval();
  const SpMatc sz_loc = Eigen::kroneckerProduct(detail::sigma_z(), detail::sparse_identity(h.n_max + 1)).eval();
  auto embed = [&](const SpMatc& op, std::size_t site) -> SpMatc {
    if (h.n_sites == 1) return op;
    const SpMatc id = detail::sparse_identity(h.local_dim());
    return site == 0 ? SpMatc(Eigen::kroneckerProduct(op, id).eval()) : SpMatc(Eigen::kroneckerProduct(id, op).eval());
  };
  std::vector<SiteOperators> ops(h.n_sites);
  for (std::size_t j = 0; j < h.n_sites; ++j) {
    ops[j].a = embed(a_loc, j);
    ops[j].sp = embed(sp_loc, j);
    ops[j].sz = embed(sz_loc, j);
    ops[j].n = SpMatc(ops[j].a.adjoint()) * ops[j].a;
  }
  return ops;
}

struct Jump {
  SpMatc op;
  double rate = 0.0;  // Gamma in L_{O, Gamma}
};

class LindbladGenerator {
 public:
  LindbladGenerator(const QuantumParams& p, const TruncatedHilbert& h) : p_(p), h_(h) {
    p.validate();
    h.validate();
    require(p.n_sites == h.n_sites, "site count mismatch between params and Hilbert space");
    ops_ = site_operators(h);
    const auto d = static_cast<Eigen::Index>(h.dims());
    SpMatc H(d, d);
    const std::complex<double> I(0.0, 1.0);
    for (std::size_t j = 0; j < h.n_sites; ++j) {
      const auto& o = ops_[j];
      const SpMatc adag = o.a.adjoint();
      const SpMatc sm = o.sp.adjoint();
      const std::complex<double> eps = std::polar(p.epsilon_abs, p.site_phase(j));
      H += SpMatc(p.g * (o.sp * o.a + adag * sm));
      H += SpMatc(std::conj(eps) * o.a + eps * adag);
      if (p.gamma > 0.0) jumps_.push_back({o.sp, p.gamma});
      if (p.kappa > 0.0) jumps_.push_back({o.a, p.kappa});
    }
    if (h.n_sites == 2 && p.t_hop > 0.0) {
      const double s = p.sign == CouplingSign::ferro ? -1.0 : 1.0;
      jumps_.push_back({SpMatc(ops_[0].a + s * ops_[1].a), p.t_hop * p.t_hop / p.kappa_tilde});
    }
    H_ = H;
    SpMatc heff = H;
    for (const auto& j : jumps_) heff -= SpMatc(I * j.rate * SpMatc(j.op.adjoint() * j.op));
    heff.makeCompressed();
    Heff_ = heff;
  }

  const TruncatedHilbert& hilbert() const { return h_; }
  const QuantumParams& params() const { return p_; }
  const std::vector<SiteOperators>& ops() const { return ops_; }
  const std::vector<Jump>& jumps() const { return jumps_; }
  const SpMatc& hamiltonian() const { return H_; }

  // L(rho) for Hermitian rho: X + X^dag + sum 2G O rho O^dag with X = -i H_eff rho.
  Matc apply(const Matc& rho) const {
    const std::complex<double> mi(0.0, -1.0);
    Matc x = mi * (Heff_ * rho);
    Matc out = x + x.adjoint();
    for (const auto& j : jumps_) {
      Matc y = j.op * rho;
      Matc yd = y.adjoint();
      out.noalias() += (2.0 * j.rate) * (j.op * yd);
    }
    return out;
  }

  // Column-major vec superoperator: vec(A X B) = (B^T kron A) vec(X).
  SpMatc superoperator() const {
    const SpMatc id = detail::sparse_identity(h_.dims());
    const std::complex<double> I(0.0, 1.0);
    SpMatc heff_conj = Heff_.conjugate();
    SpMatc L = Eigen::kroneckerProduct(id, SpMatc(-I * Heff_)).eval();
    L += SpMatc(Eigen::kroneckerProduct(SpMatc(I * heff_conj), id).eval());
    for (const auto& j : jumps_) {
      SpMatc oc = j.op.conjugate();
      L += SpMatc((2.0 * j.rate) * SpMatc(Eigen::kroneckerProduct(oc, j.op).eval()));
    }
    L.makeCompressed();
    return L;
  }

 private:
  QuantumParams p_;
  TruncatedHilbert h_;
  std::vector<SiteOperators> ops_;
  std::vector<Jump> jumps_;
  SpMatc H_, Heff_;
};

inline LindbladGenerator build_generator(const QuantumParams& p, const TruncatedHilbert& h) { return {p, h}; }

// Entrywise L1 norm.
inline double l1_norm(const Matc& m) { return m.cwiseAbs().sum(); }

inline void hermitize_normalize(Matc& rho) {
  rho = 0.5 * (rho + rho.adjoint()).eval();
  const std::complex<double> tr = rho.trace();
  rho /= tr.real();
}

// Product of coherent states |alpha_j> (truncated, renormalised) and qubit states.
inline Matc product_state(const TruncatedHilbert& h, const std::vector<std::complex<double>>& alpha,
                          const std::vector<bool>& excited) {
  require(alpha.size() == h.n_sites && excited.size() == h.n_sites, "one amplitude and qubit state per site");
  std::vector<Eigen::VectorXcd> locals;
  for (std::size_t j = 0; j < h.n_sites; ++j) {
    Eigen::VectorXcd mode(static_cast<Eigen::Index>(h.n_max + 1));
    std::complex<double> c = 1.0;
    for (std::size_t n = 0; n <= h.n_max; ++n) {
      if (n > 0) c *= alpha[j] / std::sqrt(static_cast<double>(n));
      mode[static_cast<Eigen::Index>(n)] = c;
    }
    mode.normalize();
    Eigen::VectorXcd q = Eigen::VectorXcd::Zero(2);
    q[excited[j] ? 1 : 0] = 1.0;
    locals.push_back(Eigen::kroneckerProduct(q, mode).eval());
  }
  Eigen::VectorXcd psi = locals[0];
  if (h.n_sites == 2) psi = Eigen::kroneckerProduct(locals[0], locals[1]).eval();
  return psi * psi.adjoint();
}

inline Matc vacuum_state(const TruncatedHilbert& h, bool excited = false) {
  return product_state(h, std::vector<std::complex<double>>(h.n_sites, 0.0), std::vector<bool>(h.n_sites, excited));
}

struct StateDiagnostics {
  double hermiticity = 0.0;   // max |rho - rho^dag|
  double trace_error = 0.0;   // |tr rho - 1|
  double min_eigenvalue = 0.0;
};

inline StateDiagnostics diagnose(const Matc& rho) {
  StateDiagnostics d;
  d.hermiticity = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
  d.trace_error = std::abs(rho.trace() - std::complex<double>(1.0, 0.0));
  Matc herm = 0.5 * (rho + rho.adjoint());
  Eigen::SelfAdjointEigenSolver<Matc> es(herm, Eigen::EigenvaluesOnly);
  d.min_eigenvalue = es.eigenvalues().minCoeff();
  return d;
}

inline bool valid_density_matrix(const StateDiagnostics& d) {
  return d.hermiticity <= 1e-10 && d.trace_error <= 1e-8 && d.min_eigenvalue >= -1e-8;
}

// Population with any mode in its top Fock level.
inline double tail_population(const Matc& rho, const TruncatedHilbert& h) {
  double tail = 0.0;
  const std::size_t ld = h.local_dim(), top = h.n_max;
  for (std::size_t i = 0; i < h.dims(); ++i) {
    bool at_top = false;
    if (h.n_sites == 1) {
      at_top = i % (h.n_max + 1) == top;
    } else {
      at_top = (i / ld) % (h.n_max + 1) == top || (i % ld) % (h.n_max + 1) == top;
    }
    if (at_top) tail += rho(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)).real();
  }
  return tail;
}

inline Matc rk4_step(const LindbladGenerator& L, const Matc& rho, double dt) {
  const Matc k1 = L.apply(rho);
  const Matc k2 = L.apply(rho + 0.5 * dt * k1);
  const Matc k3 = L.apply(rho + 0.5 * dt * k2);
  const Matc k4 = L.apply(rho + dt * k3);
  Matc next = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  hermitize_normalize(next);
  return next;
}

// Fixed-step evolution; `observe(t, rho)` is called after every `stride` steps.
template <class Observer>
Matc evolve(const LindbladGenerator& L, Matc rho, double dt, double t_end, std::size_t stride, Observer&& observe) {
  require(dt > 0.0 && t_end >= 0.0, "dt must be positive and t_end non-negative");
  const auto steps = static_cast<std::size_t>(std::llround(t_end / dt));
  for (std::size_t k = 1; k <= steps; ++k) {
    rho = rk4_step(L, rho, dt);
    if (stride > 0 && k % stride == 0) observe(static_cast<double>(k) * dt, rho);
  }
  return rho;
}

struct SteadyResult {
  Matc rho;
  double time = 0.0;
  double residual = 0.0;  // ||L(rho)||_1
};

inline SteadyResult evolve_to_steady(const LindbladGenerator& L, Matc rho, double dt, double tolerance, double t_max) {
  require(dt > 0.0 && tolerance > 0.0 && t_max > 0.0, "dt, tolerance and t_max must be positive");
  hermitize_normalize(rho);
  double t = 0.0;
  const std::size_t check_every = 10;
  for (std::size_t k = 0;; ++k) {
    if (k % check_every == 0) {
      const double r = l1_norm(L.apply(rho));
      if (!std::isfinite(r)) throw NumericalFailure("Lindblad evolution produced non-finite entries");
      if (r < tolerance) return {std::move(rho), t, r};
      if (t >= t_max)
        throw NumericalFailure("steady state not reached by t = " + std::to_string(t_max) + " (residual " +
                               std::to_string(r) + ")");
    }
    rho = rk4_step(L, rho, dt);
    t += dt;
  }
}

// Null vector of the superoperator with the trace constraint replacing one row.
inline SteadyResult steady_state_direct(const LindbladGenerator& L, std::size_t max_dim = kDirectSolveMaxDim) {
  const std::size_t d = L.hilbert().dims();
  if (d > max_dim) throw InvalidArgument("direct steady-state solve limited to dimension " + std::to_string(max_dim));
  SpMatc S = L.superoperator();
  const auto D2 = static_cast<Eigen::Index>(d * d);
  std::vector<Eigen::Triplet<std::complex<double>>> trip;
  for (Eigen::Index col = 0; col < S.outerSize(); ++col)
    for (SpMatc::InnerIterator it(S, col); it; ++it)
      if (it.row() != 0) trip.emplace_back(it.row(), it.col(), it.value());
  for (std::size_t k = 0; k < d; ++k) trip.emplace_back(0, static_cast<Eigen::Index>(k * (d + 1)), 1.0);
  SpMatc M(D2, D2);
  M.setFromTriplets(trip.begin(), trip.end());
  M.makeCompressed();
  Eigen::SparseLU<SpMatc> lu;
  lu.compute(M);
  if (lu.info() != Eigen::Success) throw NumericalFailure("steady-state factorisation failed");
  Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(D2);
  rhs[0] = 1.0;
  Eigen::VectorXcd v = lu.solve(rhs);
  if (lu.info() != Eigen::Success) throw NumericalFailure("steady-state solve failed");
  Matc rho = Eigen::Map<Matc>(v.data(), static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  hermitize_normalize(rho);
  return {rho, 0.0, l1_norm(L.apply(rho))};
}

struct SiteExpectations {
  double n = 0.0;
  double P = 0.0;  // i(a e^{-i phi} - a^dag e^{i phi})
  double X = 0.0;  // a e^{-i phi} + a^dag e^{i phi}
  double sz = 0.0;
  std::complex<double> a = 0.0;
};

struct ExpectationRecord {
  std::vector<SiteExpectations> sites;
  double max_imag_residue = 0.0;
};

inline ExpectationRecord expectations(const Matc& rho, const LindbladGenerator& L) {
  ExpectationRecord r;
  auto tr = [&](const SpMatc& op) { return (op * rho).trace(); };
  const std::complex<double> I(0.0, 1.0);
  for (std::size_t j = 0; j < L.ops().size(); ++j) {
    const auto& o = L.ops()[j];
    const double ph = L.params().site_phase(j);
    const std::complex<double> e = std::polar(1.0, -ph);
    const std::complex<double> a = tr(o.a), ad = tr(SpMatc(o.a.adjoint()));
    const std::complex<double> n = tr(o.n), sz = tr(o.sz);
    const std::complex<double> P = I * (a * e - ad * std::conj(e));
    const std::complex<double> X = a * e + ad * std::conj(e);
    SiteExpectations s{n.real(), P.real(), X.real(), sz.real(), a};
    r.max_imag_residue = std::max({r.max_imag_residue, std::abs(n.imag()), std::abs(sz.imag()), std::abs(P.imag()),
                                   std::abs(X.imag())});
    r.sites.push_back(s);
  }
  return r;
}

}  // namespace qlaser
