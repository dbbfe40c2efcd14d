#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "qlaser/fit.hpp"

using namespace qlaser;

TEST(LineFit, ExactLine) {
  const std::vector<double> x{0, 1, 2, 3}, y{1, 3, 5, 7};
  const auto f = fit_line(x, y);
  EXPECT_NEAR(f.slope, 2.0, 1e-14);
  EXPECT_NEAR(f.intercept, 1.0, 1e-14);
  EXPECT_NEAR(f.chi2, 0.0, 1e-24);
}

TEST(LineFit, WeightedErrorsUseKnownSigma) {
  const std::vector<double> x{0, 1, 2}, y{0, 1, 2}, s{0.1, 0.1, 0.1};
  const auto f = fit_line(x, y, s);
  // slope variance = sw / det with w = 100: 300 / (300 * 500 - 300^2) = 1/200
  EXPECT_NEAR(f.slope_se, std::sqrt(1.0 / 200.0), 1e-12);
}

TEST(LineFit, BadInput) {
  const std::vector<double> x{1, 1, 1}, y{1, 2, 3};
  EXPECT_THROW(fit_line(x, y), InvalidArgument);
  EXPECT_THROW(fit_line(std::vector<double>{1}, std::vector<double>{1}), InvalidArgument);
  EXPECT_THROW(fit_line(std::vector<double>{1, 2}, std::vector<double>{1, 2}, std::vector<double>{1, 0}), InvalidArgument);
}

TEST(LogLog, QuadraticGivesTwo) {
  const std::vector<double> N{4, 8, 16, 32};
  std::vector<double> v;
  for (double n : N) v.push_back(3.0 * n * n);
  const auto f = fit_loglog_slope(N, v);
  EXPECT_NEAR(f.slope, 2.0, 1e-12);
  EXPECT_FALSE(f.weighted);
}

TEST(LogLog, LinearGivesOne) {
  const std::vector<double> N{8, 16, 32, 64}, v{8, 16, 32, 64}, se{0.1, 0.2, 0.3, 0.4};
  const auto f = fit_loglog_slope(N, v, se);
  EXPECT_NEAR(f.slope, 1.0, 1e-12);
  EXPECT_TRUE(f.weighted);
  EXPECT_TRUE(f.ci_contains(1.0));
}

TEST(LogLog, NoisyDataCoverage) {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> n01;
  const std::vector<double> N{4, 8, 16};
  int covered = 0;
  const int trials = 400;
  for (int t = 0; t < trials; ++t) {
    std::vector<double> v, se;
    for (double n : N) {
      const double truth = 0.5 * n * n;
      v.push_back(truth * (1.0 + 0.05 * n01(rng)));
      se.push_back(0.05 * truth);
    }
    if (fit_loglog_slope(N, v, se).ci_contains(2.0)) ++covered;
  }
  EXPECT_NEAR(covered / double(trials), 0.95, 0.04);
}

TEST(LogLog, BadInput) {
  EXPECT_THROW(fit_loglog_slope(std::vector<double>{1, 2}, std::vector<double>{1, 2}), InvalidArgument);
  EXPECT_THROW(fit_loglog_slope(std::vector<double>{1, 2, 3}, std::vector<double>{1, -2, 3}), InvalidArgument);
  EXPECT_THROW(fit_loglog_slope(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3}, std::vector<double>{1, 0, 1}),
               InvalidArgument);
}

TEST(Aic, PenalisesParameters) { EXPECT_DOUBLE_EQ(aic(3.0, 2), 7.0); }
