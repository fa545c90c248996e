#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "fri/lattice.hpp"
#include "fri/rng.hpp"
#include "fri/stats.hpp"

namespace fri {

// Direction code c in [0, 2d): axis c/2, sign + for even c, - for odd c.
inline void apply_step(Point& p, std::uint8_t c) { p.c[c >> 1] += (c & 1) ? -1 : 1; }
inline std::uint8_t step_code(int axis, int sign) { return std::uint8_t(2 * axis + (sign < 0 ? 1 : 0)); }

/** Start-anchored nearest-neighbor path stored as increment codes. */
struct Path {
  Point start;
  std::vector<std::uint8_t> steps;

  Path() = default;
  explicit Path(const Point& s) : start(s) {}

  std::size_t length() const { return steps.size(); }
  Point end() const;
  std::vector<Point> vertices() const;
  static Path from_vertices(const std::vector<Point>& v);

  template <typename F>
  void for_each_vertex(F&& f) const {
    Point p = start;
    f(p);
    for (auto c : steps) {
      apply_step(p, c);
      f(p);
    }
  }
  // Calls f(lo_endpoint, axis) per step.
  template <typename F>
  void for_each_edge(F&& f) const {
    Point p = start;
    for (auto c : steps) {
      Point q = p;
      apply_step(q, c);
      const int axis = c >> 1;
      f(p[axis] < q[axis] ? p : q, axis);
      p = q;
    }
  }
  // Vertex set of the path viewed as an edge set: empty for length 0.
  SiteSet vertex_set() const;
  bool nearest_neighbor_ok() const;
  friend bool operator==(const Path& a, const Path& b) { return a.start == b.start && a.steps == b.steps; }
};

struct KilledWalk {
  Path path;
  std::uint64_t lifetime = 0;
  double mean_length = 0;
};

inline constexpr std::uint64_t kNever = std::numeric_limits<std::uint64_t>::max();

enum class HitVariant { first_hit, entrance };

struct HittingResult {
  std::uint64_t index = kNever;
  HitVariant variant = HitVariant::first_hit;
  bool finite() const { return index != kNever; }
};

Path sample_srw(const Point& start, std::uint64_t steps, RngStream& rng);
KilledWalk sample_killed(const Point& start, double T, RngStream& rng);
// Appends `steps` uniform increments to `path`.
void extend_srw(Path& path, std::uint64_t steps, RngStream& rng);

HittingResult hitting_time(const Path& p, const SiteSet& A, HitVariant variant);

inline Coord n_T(double T) { return T < 1 ? 0 : Coord(std::floor(std::sqrt(T) + 1e-12)); }

// P(max_{i<=N_T} |X_i| >= t n_T) from the origin.
Estimate diameter_tail(int d, double T, double t, std::uint64_t reps, RngStream rng);

// The same tail at many radii from one set of walks: entry r estimates
// P(max |X_i| >= r) for r = 0..r_max.
std::vector<Estimate> diameter_tail_radii(int d, double T, Coord r_max, std::uint64_t reps, RngStream rng);

struct IntersectionProbs {
  Estimate p_self;
  Estimate p_two_walk_avoid;
  std::uint64_t horizon = 0;  // L_trunc
};

// d = 4 only. L_trunc defaults to n^2.
IntersectionProbs intersection_probs(int d, std::uint64_t n, std::uint64_t reps, RngStream rng,
                                     std::uint64_t horizon = 0);

}  // namespace fri
