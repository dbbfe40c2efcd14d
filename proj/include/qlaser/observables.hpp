#pragma once

// Per-sample measurement of the quadrature sums and distance-resolved angular
// correlations, accumulated in batches, and their conversion to physical
// quadrature estimates.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "qlaser/error.hpp"
#include "qlaser/model.hpp"
#include "qlaser/stats.hpp"

namespace qlaser {

// Column layout of one measurement row.
struct MeasurementLayout {
  std::size_t n_sites = 0;
  std::size_t max_distance = 0;  // G(d) stored for d = 0..max_distance
  bool radial = false;

  static constexpr std::size_t kSin = 0;      // sum_j sin(theta_j - phi_j)
  static constexpr std::size_t kCos = 1;      // sum_j cos(theta_j - phi_j)
  static constexpr std::size_t kSin2 = 2;
  static constexpr std::size_t kCos2 = 3;
  static constexpr std::size_t kSinCos = 4;
  static constexpr std::size_t kG0 = 5;

  std::size_t g(std::size_t d) const { return kG0 + d; }
  std::size_t radial_base() const { return kG0 + max_distance + 1; }
  // radial block: mean r, mean r^2, P_full, X_full, P_full^2, X_full^2
  std::size_t r_mean() const { return radial_base(); }
  std::size_t r2_mean() const { return radial_base() + 1; }
  std::size_t p_full() const { return radial_base() + 2; }
  std::size_t x_full() const { return radial_base() + 3; }
  std::size_t p_full2() const { return radial_base() + 4; }
  std::size_t x_full2() const { return radial_base() + 5; }
  std::size_t width() const { return radial_base() + (radial ? 6 : 0); }
};

class XYMeasurer {
 public:
  XYMeasurer(const LatticeSpec& lattice, std::vector<double> phases, bool radial)
      : lattice_(lattice), phases_(std::move(phases)) {
    require(phases_.size() == lattice.size(), "one drive phase per site required");
    layout_.n_sites = lattice.size();
    std::size_t max_len = 0;
    for (auto l : lattice.lengths()) max_len = std::max(max_len, l);
    layout_.max_distance = max_len - 1;
    layout_.radial = radial;
    // shift tables: partner[axis][d][site]
    partner_.resize(lattice.dim());
    for (std::size_t ax = 0; ax < lattice.dim(); ++ax) {
      partner_[ax].resize(lattice.lengths()[ax]);
      for (std::size_t d = 0; d < lattice.lengths()[ax]; ++d) {
        partner_[ax][d].resize(lattice.size());
        for (std::size_t s = 0; s < lattice.size(); ++s) partner_[ax][d][s] = lattice.shifted(s, ax, d);
      }
    }
    cos_.resize(lattice.size());
    sin_.resize(lattice.size());
    cphi_.resize(lattice.size());
    sphi_.resize(lattice.size());
    for (std::size_t j = 0; j < lattice.size(); ++j) {
      cphi_[j] = std::cos(phases_[j]);
      sphi_[j] = std::sin(phases_[j]);
    }
    row_.assign(layout_.width(), 0.0);
  }

  const MeasurementLayout& layout() const { return layout_; }

  std::span<const double> measure(std::span<const double> theta) {
    for (std::size_t j = 0; j < theta.size(); ++j) {
      cos_[j] = std::cos(theta[j]);
      sin_[j] = std::sin(theta[j]);
    }
    fill_angular();
    return row_;
  }

  std::span<const double> measure(std::span<const std::complex<double>> alpha) {
    double rs = 0, r2s = 0, pf = 0, xf = 0;
    for (std::size_t j = 0; j < alpha.size(); ++j) {
      const double r = std::abs(alpha[j]);
      if (r > 0.0) {
        cos_[j] = alpha[j].real() / r;
        sin_[j] = alpha[j].imag() / r;
      } else {
        cos_[j] = 1.0;
        sin_[j] = 0.0;
      }
      rs += r;
      r2s += r * r;
      // alpha e^{-i phi_j}
      const double re = alpha[j].real() * cphi_[j] + alpha[j].imag() * sphi_[j];
      const double im = alpha[j].imag() * cphi_[j] - alpha[j].real() * sphi_[j];
      pf += -2.0 * im;
      xf += 2.0 * re;
    }
    fill_angular();
    const double n = static_cast<double>(alpha.size());
    row_[layout_.r_mean()] = rs / n;
    row_[layout_.r2_mean()] = r2s / n;
    row_[layout_.p_full()] = pf;
    row_[layout_.x_full()] = xf;
    row_[layout_.p_full2()] = pf * pf;
    row_[layout_.x_full2()] = xf * xf;
    return row_;
  }

 private:
  void fill_angular() {
    double s = 0.0, c = 0.0;
    const std::size_t n = cos_.size();
    for (std::size_t j = 0; j < n; ++j) {
      // sin(theta - phi), cos(theta - phi)
      s += sin_[j] * cphi_[j] - cos_[j] * sphi_[j];
      c += cos_[j] * cphi_[j] + sin_[j] * sphi_[j];
    }
    row_[MeasurementLayout::kSin] = s;
    row_[MeasurementLayout::kCos] = c;
    row_[MeasurementLayout::kSin2] = s * s;
    row_[MeasurementLayout::kCos2] = c * c;
    row_[MeasurementLayout::kSinCos] = s * c;
    for (std::size_t d = 0; d <= layout_.max_distance; ++d) {
      double acc = 0.0;
      std::size_t terms = 0;
      for (std::size_t ax = 0; ax < partner_.size(); ++ax) {
        if (d >= partner_[ax].size()) continue;
        const auto& p = partner_[ax][d];
        for (std::size_t j = 0; j < n; ++j) acc += cos_[j] * cos_[p[j]] + sin_[j] * sin_[p[j]];
        terms += n;
      }
      row_[layout_.g(d)] = acc / static_cast<double>(terms);
    }
  }

  LatticeSpec lattice_;
  std::vector<double> phases_;
  MeasurementLayout layout_;
  std::vector<std::vector<std::vector<std::size_t>>> partner_;
  std::vector<double> cos_, sin_, cphi_, sphi_;
  std::vector<double> row_;
};

// Output of a sampling run: batched measurement rows plus bookkeeping.
struct SampleStats {
  MeasurementLayout layout;
  BatchAccumulator acc;
  double acceptance = 1.0;       // Metropolis acceptance after burn-in (1 for Langevin)
  double proposal_width = 0.0;   // final Metropolis proposal width
  std::vector<double> final_angles;
};

struct CorrelationProfile {
  std::vector<Estimate> G;  // index = distance
  double xi_fit = 0.0;
};

struct ObservableSummary {
  Estimate P_sum;        // <sum_j P_j> = -2 r0 <sum_j sin(theta_j - phi_j)>
  Estimate X_sum;        // <sum_j X_j> = 2 r0 <sum_j cos(theta_j - phi_j)>
  Estimate P_pair_sum;   // sum_ij <P_i P_j>
  Estimate X_pair_sum;   // sum_ij <X_i X_j>
  Estimate P_variance;   // Var(P_sum)
  Estimate X_variance;
  Estimate sin_mean;     // per-site <sin(theta_j - phi_j)>
  Estimate cos_mean;
  CorrelationProfile correlations;
};

// Exponential fit ln G(d) = a - d / xi over 1 <= d <= L/2 where G is significantly positive.
inline double fit_correlation_length(const std::vector<Estimate>& G, std::size_t d_max) {
  double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t used = 0;
  for (std::size_t d = 1; d <= d_max && d < G.size(); ++d) {
    const auto& e = G[d];
    if (!(e.mean > 0.0) || e.mean <= 2.0 * e.se) break;
    const double y = std::log(e.mean);
    const double sy_rel = e.se > 0.0 ? e.se / e.mean : 1e-12;
    const double w = 1.0 / (sy_rel * sy_rel);
    const double x = static_cast<double>(d);
    sw += w;
    sx += w * x;
    sy += w * y;
    sxx += w * x * x;
    sxy += w * x * y;
    ++used;
  }
  if (used < 2) return 0.0;
  const double slope = (sw * sxy - sx * sy) / (sw * sxx - sx * sx);
  return slope < 0.0 ? -1.0 / slope : INFINITY;
}

inline ObservableSummary estimate_observables(const SampleStats& stats, double r0) {
  using L = MeasurementLayout;
  const auto& acc = stats.acc;
  if (acc.samples() == 0) throw InvalidArgument("no samples after burn-in");
  ObservableSummary o;
  const double n = static_cast<double>(stats.layout.n_sites);
  const double r02 = r0 * r0;
  auto scaled = [](Estimate e, double f) { return Estimate{e.mean * f, e.se * std::abs(f)}; };

  o.P_sum = scaled(acc.estimate(L::kSin), -2.0 * r0);
  o.X_sum = scaled(acc.estimate(L::kCos), 2.0 * r0);
  o.P_pair_sum = scaled(acc.estimate(L::kSin2), 4.0 * r02);
  o.X_pair_sum = scaled(acc.estimate(L::kCos2), 4.0 * r02);
  o.P_variance = acc.jackknife([r02](std::span<const double> m) {
    return 4.0 * r02 * (m[L::kSin2] - m[L::kSin] * m[L::kSin]);
  });
  o.X_variance = acc.jackknife([r02](std::span<const double> m) {
    return 4.0 * r02 * (m[L::kCos2] - m[L::kCos] * m[L::kCos]);
  });
  o.sin_mean = scaled(acc.estimate(L::kSin), 1.0 / n);
  o.cos_mean = scaled(acc.estimate(L::kCos), 1.0 / n);

  auto& G = o.correlations.G;
  G.resize(stats.layout.max_distance + 1);
  for (std::size_t d = 0; d <= stats.layout.max_distance; ++d) G[d] = acc.estimate(stats.layout.g(d));
  G[0] = {1.0, 0.0};
  std::size_t half = (stats.layout.max_distance + 1) / 2;
  o.correlations.xi_fit = fit_correlation_length(G, std::max<std::size_t>(half, 1));
  return o;
}

}  // namespace qlaser
