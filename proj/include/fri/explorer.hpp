#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fri/capacity.hpp"
#include "fri/green.hpp"
#include "fri/lattice.hpp"
#include "fri/rng.hpp"
#include "fri/sampler.hpp"

namespace fri {

struct ExploreConfig {
  int d = 3;
  double T = 64;
  double u = 0;   // explicit intensity; when 0, C2 / F_d(T) is used
  double C2 = 0;
  int M = 8;      // seed scan m = 0..M
  double c1 = 0;  // success constant; must be positive
  double p_c2 = 0.5927;
  int max_steps = 50;
  std::uint64_t seed = 0;
  // Labels on [0, max(u, u_top)]: runs with equal seed and u_top are coupled.
  double u_top = 0;
  // Box corners sit at spacing * n_T * x. The algorithm uses 10; smaller
  // values make successful steps observable at small T.
  int box_spacing = 10;

  double intensity() const;
  double p_plus() const { return 0.5 * (p_c2 + 1.0); }
  double threshold() const;  // c1 n_T^{d-2}
  void validate() const;
};

enum class CapDecision {
  empty = 0,
  size_bound = 1,      // |A| < threshold
  interior_bound = 2,  // |A|/(T+1) >= threshold
  exact = 3,
  subset_bound = 4,    // capacity of a subset already reaches the threshold
  chunk_bound = 5,     // subadditive upper bound stays below the threshold
  unresolved = 6,
};
const char* to_string(CapDecision c);

struct ThresholdCheck {
  bool pass = false;
  bool resolved = true;
  double value = 0;  // exact capacity or the bound that decided
  CapDecision how = CapDecision::empty;
};

// Decides cap^(T)(A) >= thr with the cheapest sufficient argument.
ThresholdCheck cap_threshold_check(const std::vector<Point>& A, double thr, const GreenTable& gT,
                                   const SolverOptions& opt = {});

struct StepOutcome {
  int k = 0;
  Point x;
  Point z;              // attachment neighbor (k >= 1)
  double measured = 0;  // capacity value or deciding bound
  double threshold = 0;
  bool success = false;
  bool tainted = false;
  CapDecision how = CapDecision::empty;
  std::size_t paths = 0;  // paths from the box meeting C_{k-1}
};

struct ExploreState {
  int d = 3;
  Coord nT = 1;
  bool seeded = false;
  int m0 = -1;
  Point x0;
  std::vector<Point> D;                // accepted slab sites, in order
  std::vector<Point> E;                // rejected slab sites
  std::map<Point, SiteSet> J;          // attachments
  std::vector<StepOutcome> log;
  std::vector<Point> revealed;         // box corners already sampled, sorted
  EdgeSet revealed_edges;
  bool tainted = false;
  int k = 0;

  int spacing = 10;

  bool in_slab(const Point& y) const;
  std::vector<Point> frontier() const;  // (∂^out_𝔚 D) \ E, sorted
  Point box_corner(const Point& x) const;  // spacing * n_T * x
  // Disjointness, J keys in D, attachments connected to the seed box.
  bool check_invariants(std::string* why = nullptr) const;
};

class ExploreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Paths starting in the box at slab point x use base.child(box_key(x)), so a
// box's sample does not depend on the order in which boxes are revealed.
std::uint64_t box_key(const Point& x);

// Step 0. Returns a state with seeded = false when no box in 0..M is covered.
ExploreState find_seed_box(const ExploreConfig& cfg, RngStream base);
// One step; throws ExploreError when the frontier is empty.
void explore_step(ExploreState& st, const ExploreConfig& cfg, const GreenTable& gT, RngStream base);

struct ExploreReport {
  ExploreState state;
  std::uint64_t trials = 0;     // steps k >= 1
  std::uint64_t successes = 0;
  double success_rate = 0;      // over untainted steps
  bool above_p_plus = false;
  bool stopped_at_step0 = false;
  bool frontier_exhausted = false;
};

ExploreReport run_exploration(const ExploreConfig& cfg, const GreenTable& gT);

struct ExploreBatch {
  std::vector<ExploreReport> runs;  // run i uses seed cfg.seed + i
  std::uint64_t untainted = 0;
  std::uint64_t above = 0;          // untainted runs with success rate > p_plus
  double fraction_above = 0;
};
ExploreBatch run_explorations(const ExploreConfig& cfg, int runs, const GreenTable& gT, int workers = 1);

// Coupled runs lo <= hi (equal seed and u_top): on the prefix where states
// agree, measured capacities are ordered, and the first differing outcome is
// a success for hi.
struct CoupledCheck {
  bool monotone = true;
  int shared_steps = 0;
  std::string detail;
};
CoupledCheck coupled_monotonicity(const ExploreReport& lo, const ExploreReport& hi);

// Step-1 success frequency over trials with seeds cfg.seed + i; trials whose
// Step 0 fails are left out (n counts the seeded ones).
Estimate step_success_probability(const ExploreConfig& cfg, std::uint64_t trials, const GreenTable& gT,
                                  int workers = 1);

void write_explore_csv(std::ostream& o, const ExploreReport& r, const std::string& run_id, bool header = true);

// Free capacity of the union of paths from B^T_{10 n_T e1} (intensity
// u_hat / F_d(T), length >= 2T) that hit A within 2T steps, each cut at its
// exit from the enlarged box or at floor(T). A must lie in the enlarged box at 0.
Estimate hitting_union_capacity(int d, double T, double u_hat, const std::vector<Point>& A, std::uint64_t reps,
                                RngStream rng, const GreenTable& g_free, const CapacityBudget& budget);

}  // namespace fri
