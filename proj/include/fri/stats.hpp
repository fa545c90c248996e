#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

namespace fri {

struct Estimate {
  double value = 0;
  double stderr_ = 0;
  std::uint64_t n = 0;
};

/** Mergeable mean / M2 accumulator (Chan et al. pairwise update). */
class RunningStats {
 public:
  void add(double x) {
    ++n_;
    const double delta = x - mean_;
    mean_ += delta / double(n_);
    m2_ += delta * (x - mean_);
  }
  void merge(const RunningStats& o) {
    if (o.n_ == 0) return;
    if (n_ == 0) {
      *this = o;
      return;
    }
    const double n = double(n_ + o.n_);
    const double delta = o.mean_ - mean_;
    mean_ += delta * double(o.n_) / n;
    m2_ += o.m2_ + delta * delta * double(n_) * double(o.n_) / n;
    n_ += o.n_;
  }
  std::uint64_t count() const { return n_; }
  double mean() const { return mean_; }
  double variance() const { return n_ > 1 ? m2_ / double(n_ - 1) : 0.0; }
  double stderr_mean() const { return n_ > 1 ? std::sqrt(variance() / double(n_)) : 0.0; }
  Estimate estimate() const { return {mean(), stderr_mean(), n_}; }

 private:
  std::uint64_t n_ = 0;
  double mean_ = 0;
  double m2_ = 0;
};

inline Estimate binomial_estimate(std::uint64_t hits, std::uint64_t n) {
  if (n == 0) return {};
  const double p = double(hits) / double(n);
  return {p, std::sqrt(p * (1 - p) / double(n)), n};
}

struct LinearFit {
  double slope = 0;
  double intercept = 0;
  double slope_stderr = 0;
  double slope_ci_lo = 0;
  double slope_ci_hi = 0;
  std::vector<double> residuals;
};

// Ordinary least squares with a 95% Student-t interval on the slope.
LinearFit least_squares(const std::vector<double>& x, const std::vector<double>& y);

// Upper-tail chi-square probability.
double chi_square_q(double stat, double dof);

struct ChiSquareResult {
  double statistic = 0;
  double dof = 0;
  double p_value = 1;
  int bins = 0;
};

// Chi-square goodness of fit of integer counts against a pmf on {0,1,...};
// bins with expected count below min_expected are pooled from the tails.
ChiSquareResult chi_square_counts(const std::vector<std::uint64_t>& samples,
                                  const std::function<double(std::uint64_t)>& pmf,
                                  double min_expected = 5.0, int fitted_params = 0);

// Runs fn(i) for i in [0,n) on up to `workers` threads. fn must only touch
// state owned by index i.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace fri
