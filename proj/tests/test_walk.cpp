#include <doctest.h>

#include <cmath>
#include <map>

#include "fri/rng.hpp"
#include "fri/stats.hpp"
#include "fri/walk.hpp"

using namespace fri;

TEST_CASE("philox known answers") {
  // Published test vectors for Philox4x32-10.
  CHECK(RngStream::philox({0, 0, 0, 0}, {0, 0}) ==
        std::array<std::uint32_t, 4>{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  CHECK(RngStream::philox({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}) ==
        std::array<std::uint32_t, 4>{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
  CHECK(RngStream::philox({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}) ==
        std::array<std::uint32_t, 4>{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("streams are reproducible and distinct") {
  RngStream a(7, 3), b(7, 3), c(7, 4);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u32();
    CHECK(x == b.next_u32());
    differs = differs || x != c.next_u32();
  }
  CHECK(differs);
  CHECK(a.child(5).next_u64() == b.child(5).next_u64());
}

TEST_CASE("sample_srw") {
  RngStream rng(1);
  const auto p0 = sample_srw(Point{4, 5, 6}, 0, rng);
  CHECK(p0.length() == 0);
  CHECK(p0.vertices() == std::vector<Point>{Point{4, 5, 6}});

  std::map<Point, int> hits;
  const int N = 100000;
  for (int i = 0; i < N; ++i) ++hits[sample_srw(Point(3), 1, rng).end()];
  CHECK(hits.size() == 6);
  const double sigma = std::sqrt((1.0 / 6) * (5.0 / 6) / N);
  for (const auto& [x, n] : hits) CHECK(std::abs(double(n) / N - 1.0 / 6) <= 3 * sigma);

  // E|X_n|^2 = n for the simple random walk.
  RunningStats r2;
  for (int i = 0; i < 10000; ++i) {
    const Point e = sample_srw(Point(3), 100, rng).end();
    r2.add(double(e[0]) * e[0] + double(e[1]) * e[1] + double(e[2]) * e[2]);
  }
  CHECK(std::abs(r2.mean() - 100) <= 3 * r2.stderr_mean());
}

TEST_CASE("sampled paths are nearest-neighbor paths") {
  RngStream rng(2);
  for (int i = 0; i < 200; ++i) {
    const auto w = sample_killed(Point(4), 30, rng);
    CHECK(w.path.nearest_neighbor_ok());
    CHECK(w.path.length() == w.lifetime);
    CHECK(Path::from_vertices(w.path.vertices()) == w.path);
  }
}

TEST_CASE("killed lifetimes") {
  RngStream rng(3);
  const int N = 100000;
  int zero = 0;
  for (int i = 0; i < N; ++i) zero += sample_killed(Point(3), 1.0, rng).lifetime == 0;
  CHECK(std::abs(double(zero) / N - 0.5) <= 3 * std::sqrt(0.25 / N));

  RunningStats m;
  for (int i = 0; i < N; ++i) m.add(double(rng.killed_lifetime(50)));
  CHECK(std::abs(m.mean() - 50) <= 3 * m.stderr_mean());

  int none = 0;
  for (int i = 0; i < N; ++i) none += sample_killed(Point(3), 1e-6, rng).lifetime == 0;
  CHECK(double(none) / N >= 0.999);
}

TEST_CASE("killed lifetime histogram is geometric") {
  for (double T : {1.0, 10.0, 100.0}) {
    RngStream rng(4, std::uint64_t(T));
    std::vector<std::uint64_t> v(100000);
    for (auto& x : v) x = rng.killed_lifetime(T);
    const double q = T / (T + 1);
    const auto chi = chi_square_counts(v, [&](std::uint64_t k) { return std::pow(q, double(k)) / (T + 1); });
    CHECK(chi.p_value >= 1e-3);
  }
}

TEST_CASE("hitting times") {
  const auto p = Path::from_vertices({Point{0, 0, 0}, Point{1, 0, 0}, Point{1, 1, 0}});
  CHECK(hitting_time(p, SiteSet(3, {Point{1, 1, 0}}), HitVariant::first_hit).index == 2);
  CHECK(hitting_time(p, SiteSet(3, {Point{0, 0, 0}}), HitVariant::first_hit).index == 0);
  CHECK_FALSE(hitting_time(p, SiteSet(3, {Point{0, 0, 0}}), HitVariant::entrance).finite());
  CHECK_FALSE(hitting_time(p, SiteSet(3, {Point{9, 9, 9}}), HitVariant::first_hit).finite());
}

TEST_CASE("first hit never exceeds the entrance time") {
  RngStream rng(5);
  const SiteSet A(3, box_sites(plain_box(Point{-1, -1, -1}, 3)));
  for (int i = 0; i < 500; ++i) {
    Point s(3);
    for (int k = 0; k < 3; ++k) s[k] = Coord(rng.below(7)) - 3;
    const auto p = sample_srw(s, 40, rng);
    const auto h = hitting_time(p, A, HitVariant::first_hit);
    const auto e = hitting_time(p, A, HitVariant::entrance);
    CHECK(h.index <= e.index);
    if (!A.contains(s)) CHECK(h.index == e.index);
    if (A.contains(s)) CHECK(h.index == 0);
  }
}

TEST_CASE("diameter tail") {
  CHECK(diameter_tail(3, 100, 0, 100, RngStream(6)).value == 1.0);
  const auto a = diameter_tail(3, 100, 1, 2000, RngStream(6));
  const auto b = diameter_tail(3, 100, 1, 2000, RngStream(6));
  CHECK(a.value > 0);
  CHECK(a.value < 1);
  CHECK(a.value == b.value);

  // Stretched-exponential shape: log tail decreasing faster than linearly.
  std::vector<double> lp;
  for (double t : {2.0, 4.0, 8.0}) lp.push_back(std::log(diameter_tail(3, 400, t, 100000, RngStream(7)).value));
  CHECK(lp[1] < lp[0]);
  CHECK(lp[2] < lp[1]);
  CHECK(lp[2] - lp[1] < lp[1] - lp[0]);
  CHECK_THROWS_AS(diameter_tail(3, 100, 1, 0, RngStream(6)), std::invalid_argument);
}

TEST_CASE("intersection probabilities in d = 4") {
  const auto r = intersection_probs(4, 2, 10000, RngStream(8));
  CHECK(r.p_self.value > 0);
  CHECK(r.p_self.value < 1);
  CHECK(r.p_two_walk_avoid.value > 0);
  CHECK(r.p_two_walk_avoid.value < 1);
  CHECK(r.horizon == 4);
  CHECK_THROWS_AS(intersection_probs(3, 4, 10, RngStream(8)), DimensionError);

  std::vector<double> self, avoid;
  for (std::uint64_t n : {64, 256, 1024}) {
    const auto s = intersection_probs(4, n, 2000, RngStream(9, n));
    self.push_back(s.p_self.value);
    avoid.push_back(s.p_two_walk_avoid.value * std::sqrt(std::log(double(n))));
  }
  CHECK(self[1] < self[0]);
  CHECK(self[2] < self[1]);
  CHECK(*std::max_element(avoid.begin(), avoid.end()) / *std::min_element(avoid.begin(), avoid.end()) < 3);
}

TEST_CASE("merged running statistics match a single pass") {
  RngStream rng(10);
  RunningStats all, a, b;
  for (int i = 0; i < 1000; ++i) {
    const double x = rng.uniform();
    all.add(x);
    (i % 3 ? a : b).add(x);
  }
  a.merge(b);
  CHECK(a.count() == all.count());
  CHECK(a.mean() == doctest::Approx(all.mean()).epsilon(1e-12));
  CHECK(a.variance() == doctest::Approx(all.variance()).epsilon(1e-10));
}

TEST_CASE("least squares recovers a planted line") {
  std::vector<double> x, y;
  for (int i = 0; i < 6; ++i) {
    x.push_back(i);
    y.push_back(2.5 * i - 1);
  }
  const auto f = least_squares(x, y);
  CHECK(f.slope == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(f.intercept == doctest::Approx(-1).epsilon(1e-12));
}
