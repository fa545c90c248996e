#include "fri/stats.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

#include <gsl/gsl_cdf.h>

namespace fri {

LinearFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n != y.size() || n < 2) throw std::invalid_argument("least_squares needs at least two paired points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= double(n);
  my /= double(n);
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0) throw std::invalid_argument("least_squares with degenerate abscissae");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double sse = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (f.intercept + f.slope * x[i]);
    f.residuals.push_back(r);
    sse += r * r;
  }
  if (n > 2) {
    f.slope_stderr = std::sqrt(sse / double(n - 2) / sxx);
    const double t = gsl_cdf_tdist_Pinv(0.975, double(n - 2));
    f.slope_ci_lo = f.slope - t * f.slope_stderr;
    f.slope_ci_hi = f.slope + t * f.slope_stderr;
  } else {
    f.slope_ci_lo = f.slope_ci_hi = f.slope;
  }
  return f;
}

double chi_square_q(double stat, double dof) { return gsl_cdf_chisq_Q(stat, dof); }

ChiSquareResult chi_square_counts(const std::vector<std::uint64_t>& samples,
                                  const std::function<double(std::uint64_t)>& pmf, double min_expected,
                                  int fitted_params) {
  const double n = double(samples.size());
  if (samples.empty()) throw std::invalid_argument("chi_square_counts with no samples");
  const std::uint64_t kmax = *std::max_element(samples.begin(), samples.end());
  std::vector<std::uint64_t> hist(kmax + 1, 0);
  for (auto s : samples) ++hist[s];

  // Bins are [lo_i, lo_{i+1}); the last bin is open-ended.
  std::vector<std::uint64_t> lo;
  std::vector<double> expected;
  double cdf = 0, acc = 0;
  std::uint64_t start = 0;
  for (std::uint64_t k = 0;; ++k) {
    const double p = pmf(k);
    acc += p * n;
    cdf += p;
    if (acc >= min_expected && n * (1 - cdf) >= min_expected) {
      lo.push_back(start);
      expected.push_back(acc);
      start = k + 1;
      acc = 0;
    }
    if (n * (1 - cdf) < min_expected || k > kmax + 1000000) break;
  }
  lo.push_back(start);
  expected.push_back(acc + std::max(0.0, n * (1 - cdf)));
  // Observed counts per bin.
  std::vector<double> observed(lo.size(), 0);
  for (std::uint64_t k = 0; k <= kmax; ++k) {
    auto it = std::upper_bound(lo.begin(), lo.end(), k);
    observed[std::size_t(it - lo.begin()) - 1] += double(hist[k]);
  }
  ChiSquareResult r;
  r.bins = int(lo.size());
  for (std::size_t i = 0; i < lo.size(); ++i) {
    const double e = expected[i];
    r.statistic += (observed[i] - e) * (observed[i] - e) / e;
  }
  r.dof = double(r.bins - 1 - fitted_params);
  r.p_value = r.dof > 0 ? chi_square_q(r.statistic, r.dof) : 1.0;
  return r;
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  const std::size_t w = std::min<std::size_t>(std::max(1, workers), n);
  if (w <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex err_mu;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < w; ++t)
    pool.emplace_back([&] {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lk(err_mu);
          if (!err) err = std::current_exception();
          next = n;
        }
      }
    });
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace fri
