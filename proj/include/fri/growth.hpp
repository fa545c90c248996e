#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "fri/capacity.hpp"
#include "fri/lattice.hpp"
#include "fri/rng.hpp"
#include "fri/walk.hpp"

namespace fri {

/**
 * Exact growth of FRI clusters in infinite volume.
 *
 * Trajectories meeting a finite set S are generated at each x in S by
 * thinning: Pois(2du) candidates, each a backward killed walk from x that must
 * avoid S after time 0, joined to an independent forward killed walk. When S
 * grows in stages S_0 ⊂ S_1 ⊂ ..., candidates at a site first reached in
 * stage j additionally need their forward part to avoid S_{j-1}; this yields
 * exactly the trajectories that meet S_j but not S_{j-1}.
 */
struct GrowthOptions {
  std::uint64_t step_budget = 4000000000ULL;  // walk steps drawn per call
  // Adds one independent trajectory through the origin with label 0 (the
  // Palm version of the cloud given 0 ∈ V). Without it the crossing
  // probability is capped by P(0 ∈ V), which is about 2du.
  bool rooted = false;
};

struct InvasionResult {
  double threshold = std::numeric_limits<double>::infinity();  // u_c, finite only if crossed
  bool crossed = false;
  bool censored = false;      // step budget ran out
  double level_reached = 0;   // all labels below this were processed
  std::uint64_t trajectories = 0;
  std::uint64_t candidates = 0;
  std::uint64_t steps = 0;
  std::uint64_t sites = 0;
};

// Smallest u at which the origin is in V(E) and connects to the inner
// boundary of [-N,N)^d, searched over labels up to u_cap.
InvasionResult invasion_threshold(int d, double T, Coord N, double u_cap, const GrowthOptions& opt, RngStream rng);

// A trajectory distributed as one through 0 with V ∋ 0: the backward part
// avoids 0 after time 0, the forward part is free, length >= 1.
Path rooted_trajectory(int d, double T, RngStream rng);

struct LayerDraw {
  std::vector<std::vector<Path>> layers;  // Π_1, Π_2, ... up to the first empty one or k_max
  bool exhausted = false;                 // an empty layer was reached
  double weight = 1;                      // likelihood weight (conditioned first layer)
  std::uint64_t steps = 0;
};

// Layers of the trajectories around K at intensity u. `esK` is Es_K^(T).
// With condition_nonempty the first layer count is drawn given at least one
// trajectory; weight then equals P(count >= 1).
LayerDraw grow_layers(const EscapeVector& esK, double u, double T, int k_max, bool condition_nonempty,
                      const GrowthOptions& opt, RngStream rng);

}  // namespace fri
