#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "fri/green.hpp"
#include "fri/lattice.hpp"
#include "fri/rng.hpp"
#include "fri/stats.hpp"

namespace fri {

enum class CapMethod { last_exit_solve = 0, mc_escape = 1 };
const char* to_string(CapMethod m);

struct CapEstimate {
  double value = 0;
  double stderr_ = 0;
  double bias_bound = 0;  // MC only: bound on the truncation bias
  KillMean kill_mean;
  CapMethod method = CapMethod::last_exit_solve;
  std::uint64_t set_size = 0;
  double residual = 0;      // relative residual of the linear solve
  bool reduced = false;     // solved on the inner boundary only
};

struct EscapeVector {
  std::vector<Point> sites;   // lexicographically sorted
  std::vector<double> values;
  KillMean kill_mean;
  double residual = 0;

  double at(const Point& x) const;
  double total() const;
};

class SolveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SolverOptions {
  std::size_t solver_cap = 4096;
  double residual_tol = 1e-8;
};

struct McOptions {
  std::uint64_t reps_per_site = 2000;
  std::uint64_t horizon = 1000000;  // step cap for free walks
  double far_factor = 4.0;          // stop radius as a multiple of the set radius
  double far_min = 16.0;
};

struct CapacityBudget {
  SolverOptions solver;
  McOptions mc;
  bool allow_mc_fallback = true;
  int workers = 1;
};

// Solves G_A e = 1 on all of A.
EscapeVector escape_exact(const std::vector<Point>& A, const GreenTable& g, const SolverOptions& opt = {});
// Solves on the inner boundary only, with the interior fixed at 0 (free) or
// 1/(T+1) (killed).
EscapeVector escape_exact_reduced(const std::vector<Point>& A, const GreenTable& g, const SolverOptions& opt = {});

struct EscapeMcResult {
  Estimate est;
  double bias_bound = 0;
  std::uint64_t horizon = 0;
};

// Frequency of no return to A within `horizon` steps (free) or before killing.
EscapeMcResult escape_mc(const SiteSet& A, const Point& x, KillMean km, std::uint64_t reps, std::uint64_t horizon,
                         RngStream rng);

// Exact capacity: full solve when |A| fits the cap, reduced otherwise.
CapEstimate capacity_exact(const std::vector<Point>& A, const GreenTable& g, const SolverOptions& opt = {});
// Monte-Carlo capacity; the free case corrects escapes for the far-field
// return probability and reports half the correction as bias bound.
CapEstimate capacity_mc(const std::vector<Point>& A, KillMean km, const McOptions& opt, RngStream rng, int workers = 1);
CapEstimate capacity(const std::vector<Point>& A, KillMean km, CapMethod method, const GreenTable* g,
                     const CapacityBudget& budget, RngStream rng);

struct BoxCapOptions {
  std::size_t orbit_cap = 4096;
  double max_pair_work = 4e9;        // orbits x boundary sites allowed for the exact path
  std::uint64_t mc_samples = 200000;  // boundary walks for the MC path
  bool force_mc = false;
  int workers = 1;
};

// cap or cap^(T) of B_0(n), by symmetry-reduced exact solve or sampled MC.
CapEstimate box_capacity(int d, Coord n, KillMean km, const GreenTable* g, const BoxCapOptions& opt, RngStream rng);

struct RangeCapStats {
  Estimate mean;
  Estimate second_moment;
  std::vector<double> values;
  std::vector<std::size_t> sizes;
  std::uint64_t mc_fallbacks = 0;
  double mean_bias_bound = 0;
};

// Capacity of X[0,n] (killed = false, parameter n) or cap^(T) of R_{N_T}
// (killed = true, parameter T) over independent walks from the origin.
RangeCapStats range_capacity_stats(int d, double param, bool killed, std::uint64_t reps, RngStream rng,
                                   const GreenTable& g, const CapacityBudget& budget);

struct StoppedUnionResult {
  Estimate mean;
  double reference = 0;  // min{N n F_d(n), n^{d-2}}
  std::uint64_t reps = 0;
};

// E cap of the union of N walks from `starts`, each stopped at
// min(floor(n^2/2), first exit of the l-infinity radius-n ball around its start).
StoppedUnionResult stopped_union_capacity(int d, int N, int n, const std::vector<Point>& starts, std::uint64_t reps,
                                          RngStream rng, const GreenTable& g, const CapacityBudget& budget);

}  // namespace fri
