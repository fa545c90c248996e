#pragma once

#include <cstdint>
#include <exception>
#include <iosfwd>
#include <string>
#include <vector>

#include "fri/growth.hpp"
#include "fri/rng.hpp"
#include "fri/scaling.hpp"
#include "fri/stats.hpp"

namespace fri {

enum class CrossingMethod {
  growth = 0,  // exact infinite-volume cluster growth
  window = 1,  // padded window samples
};

struct CrossingOptions {
  CrossingMethod method = CrossingMethod::growth;
  // Rooted: one extra trajectory through the origin (Palm version).
  bool rooted = true;
  GrowthOptions growth;
  int workers = 1;
};

// Frequency of {0 ↔ inner boundary of [-N,N)^d} at (u, T).
Estimate crossing_probability(int d, double u, double T, Coord N, std::uint64_t reps, RngStream rng,
                              const CrossingOptions& opt = {});

struct ThresholdSample {
  std::vector<double> thresholds;  // sorted; +inf when not crossed below the cap
  std::uint64_t censored = 0;
  double u_cap = 0;

  // Coupled crossing probability: fraction of replicates with threshold <= u.
  Estimate at(double u) const;
};

// Per-replicate crossing thresholds under the label coupling; replicate i uses rng.child(i).
ThresholdSample crossing_thresholds(int d, double T, Coord N, std::uint64_t reps, RngStream rng, double u_cap,
                                    const CrossingOptions& opt = {});

struct CrossingPoint {
  double u = 0;
  Estimate p;
};

struct CrossingCurve {
  double T = 0;
  Coord N = 0;
  std::uint64_t reps = 0;
  std::vector<CrossingPoint> points;
};

// Coupled curve: exactly nondecreasing in u.
CrossingCurve crossing_curve(int d, double T, Coord N, const std::vector<double>& us, std::uint64_t reps,
                             RngStream rng, const CrossingOptions& opt = {});

struct BisectOptions {
  double u0 = 0;        // scan start; 0 picks 0.05 / F_d(T)
  int max_doublings = 40;
  double u_max = 1e3;   // labels beyond this are never explored
  CrossingOptions crossing;
};

struct UStarProxy {
  double T = 0;
  Coord N = 0;
  double theta = 0.5;
  double u_estimate = 0;
  double u_lo = 0;
  double u_hi = 0;
  double tolerance = 0;
  std::uint64_t reps = 0;
  double p_lo = 0;  // coupled crossing frequency at u_lo (< theta)
  double p_hi = 0;  // at u_hi (>= theta)
  // Order-statistic 95% interval for the theta-quantile of the threshold law.
  double ci_lo = 0;
  double ci_hi = 0;
  // The statistical interval is wider than the bisection bracket.
  bool widened = false;
  std::uint64_t censored = 0;
  int iterations = 0;
};

// Throws NoBracketError when the scan never reaches theta.
UStarProxy bisect_u_star(int d, double T, Coord N, double theta, double tol, std::uint64_t reps, RngStream rng,
                         const BisectOptions& opt = {});
UStarProxy bisect_u_star(const ThresholdSample& s, double T, Coord N, double theta, double tol, double u0,
                         int max_doublings);

struct ScalingParams {
  double k = 4;  // N = k n_T
  double theta = 0.5;
  double tol = 0.05;
  std::uint64_t reps = 400;
  std::uint64_t seed = 1;
  bool record_wall_time = false;
  BisectOptions bisect;
};

struct ScalingRow {
  UStarProxy proxy;
  double stderr_ = 0;  // from the order-statistic interval
  double wall_time = 0;
};

struct ScalingResult {
  int d = 0;
  std::vector<ScalingRow> rows;
  LinearFit fit;  // log u vs log T
  std::vector<double> d4_ratio;  // u T / log T per row (d = 4)
  double d4_spread = 0;          // max/min of d4_ratio
  std::string error;             // set when a grid point failed; rows hold the finished points
  std::exception_ptr failure;
};

ScalingResult scaling_study(int d, const std::vector<double>& T_grid, const ScalingParams& p, int workers = 1);
// Fits log u on log T; also used on synthetic inputs.
LinearFit fit_exponent(const std::vector<double>& T, const std::vector<double>& u);

void write_scaling_csv(std::ostream& o, const ScalingResult& r, const ScalingParams& p, bool header = true);
void write_curve_csv(std::ostream& o, const CrossingCurve& c, int d, bool header = true);

}  // namespace fri
