#pragma once

// Weighted straight-line fits, log-log scaling exponents and model comparison.

#include <cmath>
#include <span>
#include <vector>

#include "qlaser/error.hpp"

namespace qlaser {

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
  double intercept_se = 0.0;
  double chi2 = 0.0;  // weighted residual sum of squares
  std::size_t n = 0;
};

// y = a + b x. With sigma given (all > 0) the weights are 1/sigma^2 and the
// covariance is the known-error one; otherwise ordinary least squares with the
// residual variance estimate.
inline LineFit fit_line(std::span<const double> x, std::span<const double> y, std::span<const double> sigma = {}) {
  require(x.size() == y.size() && x.size() >= 2, "line fit needs matching x, y with at least 2 points");
  const bool weighted = !sigma.empty();
  if (weighted) require(sigma.size() == x.size(), "sigma size mismatch");
  double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double w = 1.0;
    if (weighted) {
      require(sigma[i] > 0.0 && std::isfinite(sigma[i]), "sigma must be positive");
      w = 1.0 / (sigma[i] * sigma[i]);
    }
    sw += w;
    sx += w * x[i];
    sy += w * y[i];
    sxx += w * x[i] * x[i];
    sxy += w * x[i] * y[i];
  }
  const double det = sw * sxx - sx * sx;
  require(det > 0.0, "degenerate x values in line fit");
  LineFit f;
  f.n = x.size();
  f.slope = (sw * sxy - sx * sy) / det;
  f.intercept = (sxx * sy - sx * sxy) / det;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - f.intercept - f.slope * x[i];
    const double w = weighted ? 1.0 / (sigma[i] * sigma[i]) : 1.0;
    f.chi2 += w * r * r;
  }
  double scale = 1.0;
  if (!weighted) scale = f.n > 2 ? f.chi2 / static_cast<double>(f.n - 2) : 0.0;
  f.slope_se = std::sqrt(scale * sw / det);
  f.intercept_se = std::sqrt(scale * sxx / det);
  return f;
}

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double chi2 = 0.0;
  bool weighted = false;
  double ci_half_width() const { return 0.5 * (ci_high - ci_low); }
  bool ci_contains(double v) const { return ci_low <= v && v <= ci_high; }
};

inline constexpr double kZ95 = 1.959963984540054;

// ln value = intercept + slope ln N, weighted by sigma_ln = se / value.
// All-zero standard errors fall back to ordinary least squares.
inline SlopeFit fit_loglog_slope(std::span<const double> N, std::span<const double> value,
                                 std::span<const double> se = {}) {
  require(N.size() == value.size(), "N and value sizes differ");
  require(N.size() >= 3, "log-log fit needs at least 3 points");
  if (!se.empty()) require(se.size() == N.size(), "se size mismatch");
  std::vector<double> lx(N.size()), ly(N.size()), ls;
  bool any_se = false;
  for (std::size_t i = 0; i < N.size(); ++i) {
    require(N[i] > 0.0, "N must be positive");
    if (!(value[i] > 0.0) || !std::isfinite(value[i])) throw InvalidArgument("log-log fit needs positive values");
    lx[i] = std::log(N[i]);
    ly[i] = std::log(value[i]);
    if (!se.empty() && se[i] > 0.0) any_se = true;
  }
  LineFit lf;
  if (any_se) {
    ls.resize(N.size());
    for (std::size_t i = 0; i < N.size(); ++i) {
      require(se[i] > 0.0, "mixed zero and non-zero standard errors");
      ls[i] = se[i] / value[i];
    }
    lf = fit_line(lx, ly, ls);
  } else {
    lf = fit_line(lx, ly);
  }
  SlopeFit f;
  f.slope = lf.slope;
  f.intercept = lf.intercept;
  f.slope_se = lf.slope_se;
  f.ci_low = lf.slope - kZ95 * lf.slope_se;
  f.ci_high = lf.slope + kZ95 * lf.slope_se;
  f.chi2 = lf.chi2;
  f.weighted = any_se;
  return f;
}

// Akaike criterion for a weighted least-squares fit with k parameters.
inline double aic(double chi2, std::size_t k) { return chi2 + 2.0 * static_cast<double>(k); }

}  // namespace qlaser
