#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <absl/container/flat_hash_map.h>

#include "fri/capacity.hpp"
#include "fri/green.hpp"
#include "fri/growth.hpp"
#include "fri/lattice.hpp"
#include "fri/sampler.hpp"

namespace fri {

/** Connected components of (V(E), E). Ids follow the lexicographic order of each cluster's smallest site. */
class ClusterMap {
 public:
  ClusterMap() = default;
  explicit ClusterMap(const EdgeSet& E);

  int dim() const { return d_; }
  std::size_t site_count() const { return sites_.size(); }
  std::size_t cluster_count() const { return sizes_.size(); }
  // -1 when p is not a vertex of E.
  std::int64_t id(const Point& p) const;
  std::uint64_t size_of(std::int64_t id) const { return sizes_[std::size_t(id)]; }
  const Point& representative(std::int64_t id) const { return reps_[std::size_t(id)]; }
  std::vector<Point> members(std::int64_t id) const;
  const std::vector<std::uint64_t>& sizes() const { return sizes_; }

 private:
  int d_ = 3;
  std::vector<Point> sites_;
  std::vector<std::int64_t> site_id_;
  absl::flat_hash_map<Point, std::uint32_t> index_;
  std::vector<std::uint64_t> sizes_;
  std::vector<Point> reps_;
};

ClusterMap clusters(const EdgeSet& E);

bool connected(const std::vector<Point>& A, const std::vector<Point>& B, const ClusterMap& m);
bool connected(const std::vector<Point>& A, const std::vector<Point>& B, const EdgeSet& E);

// 0 is in V(E) and its cluster meets the inner boundary of [-N,N)^d.
bool crossing(const EdgeSet& E, int d, Coord N);
// Window check: the unpadded window must contain [-N,N)^d.
bool crossing(const FriSample& s, Coord N);

struct LayerSeq {
  std::vector<Point> base;                     // K, sorted
  std::vector<std::vector<std::size_t>> layers;  // trajectory indices of Π_1, Π_2, ...
  bool exhausted = false;
};

// Layers over the realized trajectory list; a trajectory meets S when V(η) ∩ S ≠ ∅.
LayerSeq layered_decomposition(const std::vector<Point>& K, const std::vector<Trajectory>& ts, int k_max);
LayerSeq layered_decomposition(const std::vector<Point>& K, const FriSample& s, int k_max);

// K ∪ V(⋃ Π_k) and K ∪ (clusters of E meeting K).
SiteSet layered_union(const LayerSeq& L, const std::vector<Trajectory>& ts, int d);
SiteSet gamma_from_clusters(const std::vector<Point>& K, const EdgeSet& E);

struct LayerSeriesRow {
  int k = 0;
  Estimate mean_cap;
  std::uint64_t nonempty = 0;  // replicates with Π_k ≠ ∅
};

struct LayerSeries {
  int d = 0;
  double v = 0;
  double u = 0;
  double T = 0;
  std::uint64_t reps = 0;
  std::vector<LayerSeriesRow> rows;
  // Geometric fit mean_k ≈ a r^k by weighted least squares on log means.
  double ratio = 0;
  double ratio_lo = 0;
  double ratio_hi = 0;
  int fit_points = 0;
  std::uint64_t mc_fallbacks = 0;
};

struct LayerSeriesOptions {
  bool condition_first_layer = true;  // importance-weighted nonempty Π_1
  GrowthOptions growth;
  int workers = 1;
};

// u = v / F_d(T). `gT` must be the killed green table at T.
LayerSeries layer_capacity_series(int d, double v, double T, const std::vector<Point>& K, int k_max,
                                  std::uint64_t reps, RngStream rng, const GreenTable& gT,
                                  const CapacityBudget& budget, const LayerSeriesOptions& opt = {});

void fit_layer_ratio(LayerSeries& s);
void write_layer_csv(std::ostream& o, const LayerSeries& s, const std::string& run_id, bool header = true);

}  // namespace fri
