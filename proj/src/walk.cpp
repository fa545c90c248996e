#include "fri/walk.hpp"

#include <algorithm>
#include <stdexcept>

namespace fri {

Point Path::end() const {
  Point p = start;
  for (auto c : steps) apply_step(p, c);
  return p;
}

std::vector<Point> Path::vertices() const {
  std::vector<Point> v;
  v.reserve(steps.size() + 1);
  for_each_vertex([&](const Point& p) { v.push_back(p); });
  return v;
}

Path Path::from_vertices(const std::vector<Point>& v) {
  if (v.empty()) throw std::invalid_argument("path needs at least one vertex");
  Path p(v.front());
  for (std::size_t i = 1; i < v.size(); ++i) {
    const Edge e = make_edge(v[i - 1], v[i]);
    p.steps.push_back(step_code(e.axis, v[i][e.axis] - v[i - 1][e.axis]));
  }
  return p;
}

SiteSet Path::vertex_set() const {
  SiteSet s(start.d);
  if (steps.empty()) return s;
  s.reserve(steps.size() + 1);
  for_each_vertex([&](const Point& p) { s.insert(p); });
  return s;
}

bool Path::nearest_neighbor_ok() const {
  const int two_d = 2 * start.d;
  return std::all_of(steps.begin(), steps.end(), [&](std::uint8_t c) { return int(c) < two_d; });
}

void extend_srw(Path& path, std::uint64_t steps, RngStream& rng) {
  const std::uint32_t two_d = std::uint32_t(2 * path.start.d);
  const std::size_t old = path.steps.size();
  path.steps.resize(old + steps);
  for (std::uint64_t i = 0; i < steps; ++i) path.steps[old + i] = std::uint8_t(rng.below(two_d));
}

Path sample_srw(const Point& start, std::uint64_t steps, RngStream& rng) {
  Path p(start);
  extend_srw(p, steps, rng);
  return p;
}

KilledWalk sample_killed(const Point& start, double T, RngStream& rng) {
  KilledWalk w;
  w.mean_length = T;
  w.lifetime = rng.killed_lifetime(T);
  w.path = sample_srw(start, w.lifetime, rng);
  return w;
}

HittingResult hitting_time(const Path& p, const SiteSet& A, HitVariant variant) {
  HittingResult r;
  r.variant = variant;
  const std::uint64_t first = variant == HitVariant::first_hit ? 0 : 1;
  Point x = p.start;
  if (first == 0 && A.contains(x)) {
    r.index = 0;
    return r;
  }
  for (std::size_t i = 0; i < p.steps.size(); ++i) {
    apply_step(x, p.steps[i]);
    if (A.contains(x)) {
      r.index = i + 1;
      return r;
    }
  }
  return r;
}

std::vector<Estimate> diameter_tail_radii(int d, double T, Coord r_max, std::uint64_t reps, RngStream rng) {
  if (reps == 0) throw std::invalid_argument("diameter_tail needs reps >= 1");
  if (!(T > 0)) throw std::invalid_argument("kill mean must be positive");
  std::vector<std::uint64_t> reach(std::size_t(r_max) + 2, 0);
  const std::uint32_t two_d = std::uint32_t(2 * d);
  for (std::uint64_t rep = 0; rep < reps; ++rep) {
    RngStream s = rng.child(rep);
    const std::uint64_t life = s.killed_lifetime(T);
    Point x(d);
    Coord m = 0;
    for (std::uint64_t i = 0; i < life && m <= r_max; ++i) {
      const std::uint8_t c = std::uint8_t(s.below(two_d));
      apply_step(x, c);
      m = std::max(m, std::abs(x.c[c >> 1]));
    }
    ++reach[std::size_t(std::min(m, r_max + 1))];
  }
  // Tail sums: count of walks with max >= r.
  std::vector<Estimate> out(std::size_t(r_max) + 1);
  std::uint64_t tail = 0;
  for (Coord r = r_max + 1; r >= 0; --r) {
    tail += reach[std::size_t(r)];
    if (r <= r_max) out[std::size_t(r)] = binomial_estimate(tail, reps);
  }
  return out;
}

Estimate diameter_tail(int d, double T, double t, std::uint64_t reps, RngStream rng) {
  if (T < 1) throw std::invalid_argument("diameter_tail needs T >= 1");
  const Coord r = Coord(std::ceil(t * double(n_T(T)) - 1e-12));
  return diameter_tail_radii(d, T, std::max<Coord>(r, 0), reps, rng)[std::size_t(std::max<Coord>(r, 0))];
}

IntersectionProbs intersection_probs(int d, std::uint64_t n, std::uint64_t reps, RngStream rng,
                                     std::uint64_t horizon) {
  if (d != 4) throw DimensionError("intersection_probs is defined for d = 4 only");
  if (n < 2) throw std::invalid_argument("intersection_probs needs n >= 2");
  if (reps == 0) throw std::invalid_argument("intersection_probs needs reps >= 1");
  IntersectionProbs out;
  out.horizon = horizon ? horizon : n * n;
  const std::uint32_t two_d = 8;
  std::uint64_t self_hits = 0, avoid = 0;
  for (std::uint64_t rep = 0; rep < reps; ++rep) {
    RngStream s = rng.child(rep);
    // Self: X[0,n] against X[2n, 2n+L].
    SiteSet first(d);
    Point x(d);
    Point lo = x, hi = x;
    first.insert(x);
    for (std::uint64_t i = 0; i < n; ++i) {
      apply_step(x, std::uint8_t(s.below(two_d)));
      first.insert(x);
      for (int k = 0; k < d; ++k) {
        lo[k] = std::min(lo[k], x[k]);
        hi[k] = std::max(hi[k], x[k]);
      }
    }
    for (std::uint64_t i = 0; i < n; ++i) apply_step(x, std::uint8_t(s.below(two_d)));
    auto inside = [&](const Point& p) {
      for (int k = 0; k < d; ++k)
        if (p[k] < lo[k] || p[k] > hi[k]) return false;
      return true;
    };
    bool hit = inside(x) && first.contains(x);
    for (std::uint64_t i = 0; i < out.horizon && !hit; ++i) {
      apply_step(x, std::uint8_t(s.below(two_d)));
      hit = inside(x) && first.contains(x);
    }
    self_hits += hit;

    // Two independent walks from 0; compare X[1,n] with X'[1,n].
    SiteSet a(d);
    Point y(d);
    for (std::uint64_t i = 0; i < n; ++i) {
      apply_step(y, std::uint8_t(s.below(two_d)));
      a.insert(y);
    }
    Point z(d);
    bool meet = false;
    for (std::uint64_t i = 0; i < n && !meet; ++i) {
      apply_step(z, std::uint8_t(s.below(two_d)));
      meet = a.contains(z);
    }
    avoid += !meet;
  }
  out.p_self = binomial_estimate(self_hits, reps);
  out.p_two_walk_avoid = binomial_estimate(avoid, reps);
  return out;
}

}  // namespace fri
