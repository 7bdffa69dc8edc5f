#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace qdc {

/// Estimate and its standard error.
struct ValueWithError {
  double value = 0.0;
  double error = 0.0;
};

}  // namespace qdc

namespace qdc::numerics {

/// Bisection for a sign change of `f` on [lo, hi]. Returns nothing useful
/// unless f(lo) and f(hi) have opposite signs; callers check that first.
template <class F>
double bisect(F&& f, double lo, double hi, double tol) {
  double f_lo = f(lo);
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    const double f_mid = f(mid);
    if (f_mid == 0.0) return mid;
    if ((f_mid > 0.0) == (f_lo > 0.0)) {
      lo = mid;
      f_lo = f_mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

inline std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = a;
    return out;
  }
  for (std::size_t i = 0; i < n; ++i)
    out[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
  return out;
}

inline std::vector<double> logspace(double a, double b, std::size_t n) {
  auto out = linspace(std::log(a), std::log(b), n);
  for (double& v : out) v = std::exp(v);
  return out;
}

/// Running mean / variance (Welford).
class RunningStats {
 public:
  void add(double v) {
    ++n_;
    const double d = v - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (v - mean_);
  }
  std::size_t count() const { return n_; }
  double mean() const { return mean_; }
  double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
  double stddev() const { return std::sqrt(variance()); }
  double standard_error() const {
    return n_ > 0 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
  }

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

/// Uniform bins [lo + i w, lo + (i + 1) w) with separate under/overflow tallies.
class Histogram {
 public:
  Histogram() = default;
  Histogram(double lo, double width, std::size_t bins) : lo_(lo), width_(width), counts_(bins, 0) {}

  void add(double v) {
    ++total_;
    if (v < lo_) {
      ++underflow_;
      return;
    }
    const double k = std::floor((v - lo_) / width_);
    if (k >= static_cast<double>(counts_.size())) {
      ++overflow_;
      return;
    }
    ++counts_[static_cast<std::size_t>(k)];
  }

  void merge(const Histogram& other) {
    if (counts_.empty() && total_ == 0) {
      *this = other;
      return;
    }
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
    underflow_ += other.underflow_;
    overflow_ += other.overflow_;
    total_ += other.total_;
  }

  std::size_t bins() const { return counts_.size(); }
  double lo() const { return lo_; }
  double width() const { return width_; }
  double left(std::size_t i) const { return lo_ + width_ * static_cast<double>(i); }
  double center(std::size_t i) const { return left(i) + 0.5 * width_; }
  std::size_t count(std::size_t i) const { return counts_[i]; }
  std::size_t total() const { return total_; }
  std::size_t underflow() const { return underflow_; }
  std::size_t overflow() const { return overflow_; }

  /// Fraction of all samples per unit length.
  double density(std::size_t i) const {
    return total_ ? static_cast<double>(counts_[i]) / (static_cast<double>(total_) * width_) : 0.0;
  }
  /// Binomial standard error of density(i).
  double density_error(std::size_t i) const {
    if (!total_) return 0.0;
    const double n = static_cast<double>(total_);
    const double q = static_cast<double>(counts_[i]) / n;
    return std::sqrt(q * (1.0 - q) / n) / width_;
  }

  std::size_t mode_bin() const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < counts_.size(); ++i)
      if (counts_[i] > counts_[best]) best = i;
    return best;
  }

 private:
  double lo_ = 0.0;
  double width_ = 1.0;
  std::vector<std::size_t> counts_;
  std::size_t underflow_ = 0;
  std::size_t overflow_ = 0;
  std::size_t total_ = 0;
};

}  // namespace qdc::numerics
