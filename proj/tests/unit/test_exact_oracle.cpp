#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "qlaser/exact_oracle.hpp"
#include "qlaser/xy_sampler.hpp"

using namespace qlaser;

namespace {

double brute_ring(std::size_t n, double K, std::size_t d, std::size_t M = 48) {
  XYTarget t;
  t.lattice = LatticeSpec::chain(n);
  t.K_bond = K;
  t.h_field = 0.0;
  t.sign = CouplingSign::ferro;
  t.phases.assign(n, 0.0);
  return brute_force_expectation(t, [d](std::span<const double> th) { return std::cos(th[0] - th[d]); }, M);
}

}  // namespace

TEST(RingCorrelation, ZeroDistanceIsOne) {
  for (double K : {0.0, 0.5, 3.0, 50.0}) EXPECT_NEAR(correlation_exact({8, K, 0}, 0), 1.0, 1e-12);
}

TEST(RingCorrelation, UncoupledVanishes) {
  for (std::size_t d = 1; d < 6; ++d) EXPECT_NEAR(correlation_exact({6, 0.0, 0}, d), 0.0, 1e-15);
}

TEST(RingCorrelation, MatchesQuadratureOracle) {
  EXPECT_NEAR(correlation_exact({3, 1.0, 0}, 1), brute_ring(3, 1.0, 1), 1e-6);
  EXPECT_NEAR(correlation_exact({4, 2.0, 0}, 2), brute_ring(4, 2.0, 2, 32), 1e-6);
}

TEST(RingCorrelation, RingSymmetryAndMonotone) {
  const ChainSpec s{12, 2.5, 0};
  for (std::size_t d = 0; d <= 12; ++d) EXPECT_NEAR(correlation_exact(s, d), correlation_exact(s, 12 - d), 1e-12);
  for (std::size_t d = 1; d < 6; ++d) EXPECT_GT(correlation_exact(s, d), correlation_exact(s, d + 1));
}

TEST(RingCorrelation, InfiniteRingLimit) {
  const double K = 2.0;
  const double rho = bessel_i(1, K) / bessel_i(0, K);
  for (std::size_t d : {1, 2, 3}) EXPECT_NEAR(correlation_exact({400, K, 0}, d), std::pow(rho, d), 1e-12);
}

TEST(RingCorrelation, LargeCouplingStaysFinite) {
  const double g = correlation_exact({32, 640.0, 0}, 16);
  EXPECT_GT(g, 0.98);
  EXPECT_LE(g, 1.0);
}

TEST(RingCorrelation, ExplicitTruncationIsRefined) {
  // A deliberately tiny start is doubled until the tail bound passes.
  EXPECT_NEAR(correlation_exact({6, 4.0, 1}, 2), correlation_exact({6, 4.0, 0}, 2), 1e-13);
}

TEST(RingCorrelation, DistanceOutOfRange) { EXPECT_THROW(correlation_exact({4, 1.0, 0}, 5), InvalidArgument); }

TEST(CorrelationLength, Limits) {
  EXPECT_EQ(correlation_length(0.0), 0.0);
  EXPECT_LT(correlation_length(1e-3), 0.2);
  const double K = 2.0;
  EXPECT_NEAR(correlation_length(K), 1.0 / std::log(bessel_i(0, K) / bessel_i(1, K)), 1e-12);
  EXPECT_NEAR(correlation_length(100.0) / 200.0, 1.0, 0.02);
  double prev = 0.0;
  for (double k : {0.1, 0.5, 1.0, 2.0, 5.0, 20.0}) {
    EXPECT_GT(correlation_length(k), prev);
    prev = correlation_length(k);
  }
}

TEST(FiniteSize, MetricAndFlag) {
  auto m = finite_size_metric(32, 640.0);
  EXPECT_NEAR(m.value, 0.025, 0.001);
  EXPECT_TRUE(m.long_range);
  auto z = finite_size_metric(8, 0.0);
  EXPECT_TRUE(std::isinf(z.value));
  EXPECT_FALSE(z.long_range);
  EXPECT_NEAR(finite_size_metric(20, 3.0).value, 2.0 * finite_size_metric(10, 3.0).value, 1e-12);
}

TEST(CorrelationSum, BoundsAndRegimes) {
  for (double K : {0.1, 1.0, 10.0}) {
    const double s = correlation_sum(16, K);
    EXPECT_GE(s, 1.0);
    EXPECT_LE(s, 16.0);
  }
  // long-range: metric <= 0.1 implies sum >= 0.95 N
  double K = 200.0;
  ASSERT_TRUE(finite_size_metric(16, K).long_range);
  EXPECT_GE(correlation_sum(16, K), 0.95 * 16);
  // short range: 1 + 2 xi-ish
  const double rho = bessel_i(1, 0.5) / bessel_i(0, 0.5);
  EXPECT_NEAR(correlation_sum(64, 0.5), (1 + rho) / (1 - rho), 1e-9);
}

TEST(Predictions, ClosedForms) {
  DerivedCoeffs c;
  c.n0 = 100.0;
  c.C_p = 1.0;
  c.kappa = 1.0;
  c.A = 1.0;
  c.epsilon_abs = 0.0;
  c.K_bond = 1e4;
  auto p = predict_quadratures_and_qfi(c, 4, 0.0);
  EXPECT_NEAR(p.F_amplitude_leading, 3200.0, 1e-9);
  EXPECT_EQ(p.F_phase_leading, 0.0);
  auto one = predict_quadratures_and_qfi(c, 1, 0.0);
  EXPECT_NEAR(one.F_amplitude_leading, 2.0 * 100.0, 1e-12);
}

TEST(Predictions, ReducedFormsAndErrorPropagation) {
  ModelParams mp;
  mp.g = 1.0;
  mp.gamma = 10.0;
  mp.kappa = 0.05;
  mp.t_hop = 0.1;
  mp.kappa_tilde = 10.0;
  mp.epsilon_abs = 1e-4;
  auto c = derive_coeffs(mp, 1000.0);
  auto p = predict_quadratures_and_qfi(c, 8, 0.01);
  EXPECT_NEAR(p.P_sum_reduced_4, 2.0 * p.P_sum_reduced_2, 1e-15);
  EXPECT_NEAR(p.X_sum_reduced_4, 0.01 * p.P_sum_reduced_4, 1e-15);
  EXPECT_NEAR(p.P_sum_general, 2.0 * c.n0 * c.nu * 8 * p.sum_G, 1e-12 * p.P_sum_general);
  EXPECT_DOUBLE_EQ(p.F_phase_errorprop, p.F_amplitude_errorprop * 1e-8);
}

TEST(KtPredictions, SpinWaveExponent) {
  DerivedCoeffs c;
  c.n0 = 100.0;
  c.varsigma = 0.1;
  c.beta_eff = 100.0;
  c.K_bond = 40.0;
  auto k = kt_predictions(c, LatticeSpec::square(8), 8);
  EXPECT_NEAR(k.eta, 1.0 / (20.0 * std::numbers::pi), 1e-15);
  EXPECT_NEAR(k.eta, 0.0159, 1e-4);
  EXPECT_TRUE(k.low_temperature);
  EXPECT_NEAR(k.size_metric, std::pow(8.0, k.eta), 1e-15);
  c.varsigma = kKtCritical / c.n0;
  k = kt_predictions(c, LatticeSpec::square(8), 8);
  EXPECT_TRUE(k.at_critical_boundary);
  EXPECT_FALSE(k.low_temperature);
  c.varsigma = 1e3;
  EXPECT_NEAR(kt_predictions(c, LatticeSpec::square(8), 8).size_metric, 1.0, 1e-4);
  EXPECT_THROW(kt_predictions(c, LatticeSpec::chain(8), 8), InvalidArgument);
}
