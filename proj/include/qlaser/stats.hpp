#pragma once

// Batch-means accumulation of correlated Monte Carlo / Langevin time series.

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "qlaser/error.hpp"

namespace qlaser {

struct Estimate {
  double mean = 0.0;
  double se = 0.0;
};

inline double z_score(const Estimate& a, const Estimate& b) {
  const double s = std::sqrt(a.se * a.se + b.se * b.se);
  const double d = std::abs(a.mean - b.mean);
  if (s == 0.0) return d == 0.0 ? 0.0 : INFINITY;
  return d / s;
}

inline constexpr std::size_t kMinBatches = 10;

// Accumulates `width` observables per sample into `n_batches` consecutive batches.
// The expected sample count is fixed up front so batch boundaries are known.
class BatchAccumulator {
 public:
  BatchAccumulator() = default;
  BatchAccumulator(std::size_t width, std::size_t n_batches, std::size_t expected_samples)
      : width_(width), n_batches_(n_batches) {
    require(n_batches >= kMinBatches, "need at least 10 batches");
    require(expected_samples >= n_batches, "fewer samples than batches");
    batch_size_ = expected_samples / n_batches;
    sums_.assign(n_batches * width, 0.0);
    counts_.assign(n_batches, 0);
  }

  std::size_t width() const { return width_; }
  std::size_t n_batches() const { return n_batches_; }
  std::size_t samples() const { return samples_; }

  void add(std::span<const double> values) {
    std::size_t b = samples_ / batch_size_;
    if (b >= n_batches_) b = n_batches_ - 1;
    double* row = &sums_[b * width_];
    for (std::size_t k = 0; k < width_; ++k) row[k] += values[k];
    ++counts_[b];
    ++samples_;
  }

  // Fold another accumulator (same layout) in, batch by batch.
  void merge(const BatchAccumulator& other) {
    require(other.width_ == width_ && other.n_batches_ == n_batches_, "incompatible accumulators");
    for (std::size_t i = 0; i < sums_.size(); ++i) sums_[i] += other.sums_[i];
    for (std::size_t b = 0; b < n_batches_; ++b) counts_[b] += other.counts_[b];
    samples_ += other.samples_;
  }

  // Side-by-side view of runs with identical batch occupancy (e.g. runs sharing
  // seeds at neighbouring parameters); jackknife on the result pairs the batches.
  static BatchAccumulator concat(std::span<const BatchAccumulator* const> parts) {
    require(!parts.empty(), "nothing to concatenate");
    const auto& first = *parts.front();
    BatchAccumulator out;
    out.n_batches_ = first.n_batches_;
    out.batch_size_ = first.batch_size_;
    out.samples_ = first.samples_;
    out.counts_ = first.counts_;
    for (const auto* p : parts) {
      require(p->n_batches_ == first.n_batches_ && p->counts_ == first.counts_,
              "paired runs need identical batch occupancy");
      out.width_ += p->width_;
    }
    out.sums_.assign(out.n_batches_ * out.width_, 0.0);
    for (std::size_t b = 0; b < out.n_batches_; ++b) {
      std::size_t off = 0;
      for (const auto* p : parts) {
        for (std::size_t k = 0; k < p->width_; ++k) out.sums_[b * out.width_ + off + k] = p->sums_[b * p->width_ + k];
        off += p->width_;
      }
    }
    return out;
  }

  // Batch means as rows of a n_batches x width table, skipping empty batches.
  std::vector<std::vector<double>> batch_means() const {
    std::vector<std::vector<double>> out;
    for (std::size_t b = 0; b < n_batches_; ++b) {
      if (counts_[b] == 0) continue;
      std::vector<double> row(width_);
      for (std::size_t k = 0; k < width_; ++k) row[k] = sums_[b * width_ + k] / static_cast<double>(counts_[b]);
      out.push_back(std::move(row));
    }
    return out;
  }

  Estimate estimate(std::size_t k) const {
    return jackknife([k](std::span<const double> m) { return m[k]; });
  }

  // Jackknife over batches for a smooth function of the observable means.
  Estimate jackknife(const std::function<double(std::span<const double>)>& f) const {
    const auto rows = batch_means();
    const std::size_t nb = rows.size();
    if (nb < kMinBatches) throw InvalidArgument("insufficient samples: fewer than 10 non-empty batches");
    std::vector<double> total(width_, 0.0);
    std::vector<double> weight(nb);
    std::size_t bi = 0;
    for (std::size_t b = 0; b < n_batches_; ++b) {
      if (counts_[b] == 0) continue;
      weight[bi++] = static_cast<double>(counts_[b]);
    }
    double wsum = 0.0;
    for (std::size_t i = 0; i < nb; ++i) {
      wsum += weight[i];
      for (std::size_t k = 0; k < width_; ++k) total[k] += weight[i] * rows[i][k];
    }
    std::vector<double> full(width_);
    for (std::size_t k = 0; k < width_; ++k) full[k] = total[k] / wsum;
    const double f_full = f(full);

    std::vector<double> loo(nb);
    std::vector<double> m(width_);
    double loo_mean = 0.0;
    for (std::size_t i = 0; i < nb; ++i) {
      for (std::size_t k = 0; k < width_; ++k) m[k] = (total[k] - weight[i] * rows[i][k]) / (wsum - weight[i]);
      loo[i] = f(m);
      loo_mean += loo[i];
    }
    loo_mean /= static_cast<double>(nb);
    double var = 0.0;
    for (double v : loo) var += (v - loo_mean) * (v - loo_mean);
    var *= static_cast<double>(nb - 1) / static_cast<double>(nb);
    return {f_full, std::sqrt(var)};
  }

 private:
  std::size_t width_ = 0;
  std::size_t n_batches_ = 0;
  std::size_t batch_size_ = 1;
  std::size_t samples_ = 0;
  std::vector<double> sums_;
  std::vector<std::size_t> counts_;
};

}  // namespace qlaser
