#include <gtest/gtest.h>

#include <cmath>
#include <complex>

#include "qlaser/quantum_oracle.hpp"

using namespace qlaser;

namespace {

using cd = std::complex<double>;

QuantumParams single(double g, double kappa, double gamma, double eps = 0.0, double phi = 0.0) {
  QuantumParams q;
  q.g = g;
  q.kappa = kappa;
  q.gamma = gamma;
  q.epsilon_abs = eps;
  q.phi = phi;
  return q;
}

Matc random_hermitian(std::size_t d, unsigned seed) {
  std::srand(seed);
  Matc m = Matc::Random(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  Matc h = m + m.adjoint();
  return h / h.trace().real();
}

SiteExpectations steady_site(const QuantumParams& q, std::size_t n_max, std::size_t site = 0) {
  const TruncatedHilbert h{q.n_sites, n_max};
  const auto L = build_generator(q, h);
  return expectations(steady_state_direct(L).rho, L).sites[site];
}

}  // namespace

TEST(Generator, PureDriveDisplacesLinearly) {
  const auto q = single(0.0, 0.0, 0.0, 0.1, 0.7);
  const TruncatedHilbert h{1, 12};
  const auto L = build_generator(q, h);
  const Matc rho = evolve(L, vacuum_state(h), 0.01, 2.0, 0, [](double, const Matc&) {});
  const auto e = expectations(rho, L);
  const cd expect = cd(0.0, -1.0) * std::polar(0.1, 0.7) * 2.0;
  EXPECT_NEAR(std::abs(e.sites[0].a - expect), 0.0, 1e-9);
}

TEST(Generator, DampedCoherentAmplitude) {
  const auto q = single(0.0, 0.5, 0.0);
  const TruncatedHilbert h{1, 14};
  const auto L = build_generator(q, h);
  const Matc rho = evolve(L, product_state(h, {cd(1.0, 0.5)}, {false}), 0.01, 2.0, 0, [](double, const Matc&) {});
  EXPECT_NEAR(std::abs(expectations(rho, L).sites[0].a - cd(1.0, 0.5) * std::exp(-1.0)), 0.0, 1e-6);
}

TEST(Generator, PreservesTraceAndHermiticity) {
  auto q = single(1.0, 0.3, 2.0, 0.2, 0.4);
  q.n_sites = 2;
  q.t_hop = 0.5;
  const TruncatedHilbert h{2, 3};
  const auto L = build_generator(q, h);
  const Matc r = random_hermitian(h.dims(), 3);
  const Matc out = L.apply(r);
  EXPECT_LT(std::abs(out.trace()), 1e-12);
  EXPECT_LT((out - out.adjoint()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Generator, SuperoperatorMatchesApply) {
  auto q = single(0.8, 0.2, 1.5, 0.3, 1.1);
  q.n_sites = 2;
  q.t_hop = 0.4;
  q.sign = CouplingSign::ferro;
  const TruncatedHilbert h{2, 2};
  const auto L = build_generator(q, h);
  const Matc r = random_hermitian(h.dims(), 5);
  Eigen::VectorXcd v = Eigen::Map<const Eigen::VectorXcd>(r.data(), r.size());
  Eigen::VectorXcd w = L.superoperator() * v;
  const Matc out = Eigen::Map<Matc>(w.data(), r.rows(), r.cols());
  EXPECT_LT((out - L.apply(r)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Steady, UncoupledPumpGivesExcitedVacuum) {
  const auto s = steady_site(single(0.0, 0.2, 1.0), 5);
  EXPECT_NEAR(s.n, 0.0, 1e-12);
  EXPECT_NEAR(s.sz, 1.0, 1e-12);
}

TEST(Steady, CoherentStateQuadratures) {
  const TruncatedHilbert h{1, 20};
  const double phi = 0.9, r = 1.3;
  auto q = single(1.0, 0.1, 1.0, 0.1, phi);
  const auto L = build_generator(q, h);
  const auto e = expectations(product_state(h, {cd(0.0, -r) * std::polar(1.0, phi)}, {false}), L);
  EXPECT_NEAR(e.sites[0].P, 2.0 * r, 1e-9);
  EXPECT_NEAR(e.sites[0].X, 0.0, 1e-9);
  EXPECT_NEAR(e.sites[0].n, r * r, 1e-8);
  EXPECT_LT(e.max_imag_residue, 1e-12);
}

TEST(Steady, DirectSolveMatchesEvolution) {
  const auto q = single(1.0, 0.25, 2.0, 0.05, 0.3);
  const TruncatedHilbert h{1, 16};
  const auto L = build_generator(q, h);
  const auto d = steady_state_direct(L);
  const auto t = evolve_to_steady(L, vacuum_state(h), 0.01, 1e-9, 2000.0);
  EXPECT_LT(d.residual, 1e-10);
  EXPECT_LT(l1_norm(d.rho - t.rho), 1e-7);
  EXPECT_TRUE(valid_density_matrix(diagnose(d.rho)));
}

TEST(Steady, CutoffConverged) {
  const auto q = single(1.0, 0.25, 2.0, 0.01);
  const double n20 = steady_site(q, 20).n, n28 = steady_site(q, 28).n;
  EXPECT_LT(std::abs(n28 - n20) / n28, 1e-3);
}

TEST(Steady, WeakDriveLinearResponse) {
  const double p1 = steady_site(single(1.0, 0.25, 2.0, 0.01), 20).P;
  const double p2 = steady_site(single(1.0, 0.25, 2.0, 0.005), 20).P;
  EXPECT_NEAR(p1 / p2, 2.0, 0.05 * 2.0);
}

TEST(Steady, QuadraturesCovariantUnderDrivePhase) {
  const auto a = steady_site(single(1.0, 0.25, 2.0, 0.05, 0.2), 16);
  const auto b = steady_site(single(1.0, 0.25, 2.0, 0.05, 2.9), 16);
  EXPECT_NEAR(a.P, b.P, 1e-9);
  EXPECT_NEAR(a.X, b.X, 1e-9);
  EXPECT_NEAR(std::arg(b.a) - std::arg(a.a), 2.7, 1e-6);
}

TEST(Steady, TwoSitesSymmetricUnderSwap) {
  auto q = single(1.0, 0.3, 2.0, 0.05, 0.4);
  q.n_sites = 2;
  q.t_hop = 0.3;
  const TruncatedHilbert h{2, 3};
  const auto L = build_generator(q, h);
  const auto e = expectations(steady_state_direct(L).rho, L);
  EXPECT_NEAR(e.sites[0].n, e.sites[1].n, 1e-10);
  EXPECT_NEAR(e.sites[0].P, e.sites[1].P, 1e-10);
}

TEST(Steady, NearSemiclassicalIntensity) {
  // above threshold <n> approaches (gamma^2 / 2 g^2)(C_p - 1), with a spontaneous-emission excess
  const auto q = single(1.0, 0.25, 2.0);
  const double ode = q.gamma * q.gamma / 2.0 * (1.0 / (q.kappa * q.gamma) - 1.0);
  const double n = steady_site(q, 24).n;
  EXPECT_GT(n, ode);
  EXPECT_LT(n / ode - 1.0, 0.25);
}

TEST(Evolution, InvariantsAlongTrajectory) {
  auto q = single(1.0, 0.25, 2.0, 0.1, 0.5);
  q.n_sites = 2;
  q.t_hop = 0.3;
  const TruncatedHilbert h{2, 4};
  const auto L = build_generator(q, h);
  std::size_t checked = 0;
  evolve(L, vacuum_state(h), 0.01, 5.0, 50, [&](double, const Matc& rho) {
    EXPECT_TRUE(valid_density_matrix(diagnose(rho)));
    ++checked;
  });
  EXPECT_EQ(checked, 10u);
}

TEST(Hilbert, BudgetAndDirectLimits) {
  EXPECT_THROW((TruncatedHilbert{2, 40}.validate()), InvalidArgument);
  EXPECT_THROW((TruncatedHilbert{3, 2}.validate()), InvalidArgument);
  const auto L = build_generator(single(1.0, 0.25, 2.0), {1, 40});
  EXPECT_THROW(steady_state_direct(L), InvalidArgument);
}

TEST(Hilbert, TailPopulationOfCoherentState) {
  const TruncatedHilbert h{1, 6};
  EXPECT_LT(tail_population(vacuum_state(h), h), 1e-15);
  EXPECT_GT(tail_population(product_state(h, {cd(2.0, 0.0)}, {false}), h), 1e-3);
}
