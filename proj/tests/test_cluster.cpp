#include <doctest.h>

#include <cmath>
#include <deque>
#include <map>
#include <set>

#include "fri/cluster.hpp"
#include "fri/growth.hpp"
#include "support.hpp"

using namespace fri;

namespace {

Trajectory traj(std::vector<Point> v, double label = 0.1) { return {Path::from_vertices(std::move(v)), label}; }

Point e(int i, Coord s) {
  Point p(3);
  p[i] = s;
  return p;
}

// Component labels by breadth-first search over an adjacency list.
std::map<Point, int> bfs_components(const std::vector<std::pair<Point, Point>>& edges) {
  std::map<Point, std::vector<Point>> adj;
  for (const auto& [a, b] : edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::map<Point, int> comp;
  int next = 0;
  for (const auto& [p, nb] : adj) {
    if (comp.count(p)) continue;
    std::deque<Point> q{p};
    comp[p] = next;
    while (!q.empty()) {
      const Point x = q.front();
      q.pop_front();
      for (const auto& y : adj[x])
        if (!comp.count(y)) {
          comp[y] = next;
          q.push_back(y);
        }
    }
    ++next;
  }
  return comp;
}

}  // namespace

TEST_CASE("cluster examples") {
  EdgeSet E(3);
  CHECK(clusters(E).cluster_count() == 0);

  std::vector<Trajectory> ts{traj({Point(3), e(0, 1), e(0, 2), e(0, 3), e(0, 4), e(0, 5)})};
  const auto m = clusters(edges_of(ts, 3));
  CHECK(m.cluster_count() == 1);
  CHECK(m.size_of(0) == 6);

  ts.push_back(traj({Point{2, 1, 0}, Point{2, 0, 0}, Point{2, -1, 0}}));
  ts.push_back(traj({Point{9, 9, 9}, Point{9, 9, 10}}));
  const auto m2 = clusters(edges_of(ts, 3));
  CHECK(m2.cluster_count() == 2);
  CHECK(m2.id(Point{2, 1, 0}) == m2.id(Point{0, 0, 0}));
  CHECK(m2.id(Point{9, 9, 9}) != m2.id(Point{0, 0, 0}));
  CHECK(m2.id(Point{7, 7, 7}) == -1);
  CHECK(m2.representative(0) == Point{0, 0, 0});
}

TEST_CASE("clusters match breadth-first search") {
  RngStream rng(50);
  for (int t = 0; t < 30; ++t) {
    std::vector<std::pair<Point, Point>> raw;
    EdgeSet E(3);
    const int m = 1 + int(rng.below(80));
    for (int i = 0; i < m; ++i) {
      Point a(3);
      for (int k = 0; k < 3; ++k) a[k] = Coord(rng.below(6));
      Point b = a;
      b[int(rng.below(3))] += 1;
      raw.emplace_back(a, b);
      E.insert(a, b);
    }
    const auto cm = clusters(E);
    const auto ref = bfs_components(raw);
    CHECK(cm.site_count() == ref.size());
    std::set<int> ref_ids;
    for (const auto& [p, c] : ref) ref_ids.insert(c);
    CHECK(cm.cluster_count() == ref_ids.size());
    for (const auto& [p, c] : ref)
      for (const auto& [q, c2] : ref) {
        if (lex_less(q, p)) continue;
        CHECK((cm.id(p) == cm.id(q)) == (c == c2));
      }
    std::uint64_t total = 0;
    for (std::size_t id = 0; id < cm.cluster_count(); ++id) {
      total += cm.size_of(std::int64_t(id));
      const auto mem = cm.members(std::int64_t(id));
      CHECK(*std::min_element(mem.begin(), mem.end()) == cm.representative(std::int64_t(id)));
      if (id > 0) CHECK(lex_less(cm.representative(std::int64_t(id) - 1), cm.representative(std::int64_t(id))));
    }
    CHECK(total == cm.site_count());
  }
}

TEST_CASE("connected sets") {
  const std::vector<Trajectory> ts{traj({Point(3), e(0, 1), e(0, 2)}), traj({e(1, 5), e(1, 6)})};
  const auto E = edges_of(ts, 3);
  CHECK(connected({Point(3)}, {e(0, 2)}, E));
  CHECK_FALSE(connected({Point(3)}, {e(1, 6)}, E));
  CHECK(connected({Point(3), e(1, 5)}, {e(1, 6)}, E));
  // Overlapping sets are connected by the empty path.
  CHECK(connected({Point{7, 7, 7}}, {Point{7, 7, 7}}, E));
}

TEST_CASE("crossing examples") {
  EdgeSet E(3);
  CHECK_FALSE(crossing(E, 3, 1));
  E.insert(Point(3), e(0, 1));
  CHECK(crossing(E, 3, 1));
  CHECK_FALSE(crossing(E, 3, 3));
  E.insert(e(0, 1), e(0, 2));
  CHECK(crossing(E, 3, 3));
  EdgeSet F(3);
  F.insert(e(2, -3), e(2, -2));
  F.insert(e(2, -2), e(2, -1));
  CHECK_FALSE(crossing(F, 3, 3));
  F.insert(e(2, -1), Point(3));
  CHECK(crossing(F, 3, 3));
}

TEST_CASE("crossing is monotone under the label coupling") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    FriConfig c;
    c.d = 3;
    c.T = 4;
    c.u = 0.6;
    c.u_top = 0.6;
    c.window = plain_box(Point{-4, -4, -4}, 8);
    c.seed = 60 + seed;
    const auto s = sample_window(c);
    bool prev = false;
    for (double v : {0.0, 0.1, 0.2, 0.4, 0.6}) {
      const bool x = crossing(s.at_level(v), 4);
      CHECK((!prev || x));
      prev = x;
    }
  }
}

TEST_CASE("layered decomposition of a chain") {
  const std::vector<Trajectory> ts{
      traj({Point(3), e(0, 1), e(0, 2)}),
      traj({e(0, 2), e(0, 3), e(0, 4)}),
      traj({e(0, 5), e(0, 4)}),
      traj({Point{9, 9, 9}, Point{9, 9, 10}}),
  };
  const std::vector<Point> K{Point(3)};
  const auto L = layered_decomposition(K, ts, 10);
  REQUIRE(L.layers.size() == 3);
  CHECK(L.layers[0] == std::vector<std::size_t>{0});
  CHECK(L.layers[1] == std::vector<std::size_t>{1});
  CHECK(L.layers[2] == std::vector<std::size_t>{2});
  CHECK(L.exhausted);
  const auto U = layered_union(L, ts, 3);
  CHECK(U.sorted() == gamma_from_clusters(K, edges_of(ts, 3)).sorted());
  CHECK(U.size() == 6);

  const auto far = layered_decomposition({Point{-5, -5, -5}}, ts, 10);
  CHECK(far.layers.empty());
  CHECK(far.exhausted);

  const auto cut = layered_decomposition(K, ts, 2);
  CHECK(cut.layers.size() == 2);
  CHECK_FALSE(cut.exhausted);
}

TEST_CASE("layers are disjoint and only touch earlier layers through their predecessor") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    FriConfig c;
    c.d = 3;
    c.T = 4;
    c.u = 0.3;
    c.window = plain_box(Point{-3, -3, -3}, 6);
    c.seed = 80 + seed;
    const auto s = sample_window(c);
    const std::vector<Point> K{Point(3)};
    const auto L = layered_decomposition(K, s, 1000);
    CHECK(L.exhausted);
    std::set<std::size_t> seen;
    SiteSet reached(3, K);
    for (std::size_t k = 0; k < L.layers.size(); ++k) {
      SiteSet next(3);
      for (auto i : L.layers[k]) {
        CHECK(seen.insert(i).second);
        bool meets = false;
        s.trajectories[i].path.for_each_vertex([&](const Point& x) {
          meets = meets || reached.contains(x);
          next.insert(x);
        });
        CHECK(meets);
      }
      for (const auto& x : next.sorted()) reached.insert(x);
    }
    CHECK(layered_union(L, s.trajectories, 3).sorted() == gamma_from_clusters(K, edges_of(s)).sorted());
  }
}

TEST_CASE("rooted trajectories pass through the origin") {
  RngStream rng(51);
  for (int i = 0; i < 100; ++i) {
    const Path p = rooted_trajectory(3, 9, rng.child(std::uint64_t(i)));
    CHECK(p.length() >= 1);
    bool has0 = false;
    p.for_each_vertex([&](const Point& x) { has0 = has0 || x == Point(3); });
    CHECK(has0);
    CHECK(p.nearest_neighbor_ok());
  }
  GrowthOptions g;
  g.rooted = true;
  const auto r = invasion_threshold(3, 9, 1, 1.0, g, RngStream(52));
  CHECK(r.crossed);
  CHECK(r.threshold == 0);
}

TEST_CASE("first layer capacity at small intensity") {
  // With few trajectories through the origin, the first layer is roughly one
  // two-sided trajectory: its capacity lies between that of the forward
  // killed range and twice it.
  const double T = 16, v = 0.05;
  const auto& gT = fri::testing::killed_table(3, T);
  CapacityBudget b;
  const auto s = layer_capacity_series(3, v, T, {Point(3)}, 2, 400, RngStream(53), gT, b);
  REQUIRE(!s.rows.empty());
  const double u = s.u;
  CHECK(u == doctest::Approx(v / std::sqrt(T)).epsilon(1e-12));
  const double EN = 2 * 3 * u / gT.value(Point(3));
  const auto range = range_capacity_stats(3, T, true, 2000, RngStream(54), gT, b);
  const double lo = -std::expm1(-EN) * range.mean.value;
  const double hi = 2 * EN * range.mean.value;
  const auto& k1 = s.rows[0].mean_cap;
  CHECK(k1.value >= lo - 3 * k1.stderr_);
  CHECK(k1.value <= hi + 3 * k1.stderr_);
  if (s.rows.size() > 1) CHECK(s.rows[1].mean_cap.value < k1.value);
}
