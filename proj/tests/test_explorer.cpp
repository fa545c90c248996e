#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fri/cluster.hpp"
#include "fri/explorer.hpp"
#include "support.hpp"

using namespace fri;
using fri::testing::killed_table;

namespace {

double small_c1() {
  static const double c1 = [] {
    double m = INFINITY;
    for (Coord n : {4, 8, 16})
      m = std::min(m, box_capacity(3, n, KillMean::free_walk(), &fri::testing::free_table(3), {}, RngStream(1)).value /
                          double(n));
    return 0.9 * m;
  }();
  return c1;
}

ExploreConfig base_config(std::uint64_t seed) {
  ExploreConfig c;
  c.d = 3;
  c.T = 16;
  c.u = 15;
  c.u_top = 30;
  c.c1 = small_c1();
  c.max_steps = 20;
  c.box_spacing = 2;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("configuration validation") {
  auto c = base_config(1);
  c.c1 = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = base_config(1);
  c.T = 0.5;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = base_config(1);
  c.d = 2;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = base_config(1);
  c.u = 0;
  c.C2 = 4;
  CHECK(c.intensity() == doctest::Approx(1).epsilon(1e-14));
  CHECK(c.p_plus() == doctest::Approx((0.5927 + 1) / 2).epsilon(1e-14));
}

TEST_CASE("zero intensity stops at step 0") {
  auto c = base_config(3);
  c.u = 0;
  c.u_top = 0;
  const auto r = run_exploration(c, killed_table(3, 16));
  CHECK(r.stopped_at_step0);
  CHECK_FALSE(r.state.seeded);
  CHECK(r.state.log.size() == 1);
  CHECK(r.successes == 0);
  CHECK(r.success_rate == 0);
}

TEST_CASE("max_steps = 0 logs only step 0") {
  auto c = base_config(4);
  c.max_steps = 0;
  const auto r = run_exploration(c, killed_table(3, 16));
  CHECK(r.state.log.size() == 1);
  CHECK(r.state.log[0].k == 0);
}

TEST_CASE("the first step takes the smallest frontier site") {
  const auto c = base_config(5);
  auto st = find_seed_box(c, RngStream(c.seed));
  REQUIRE(st.seeded);
  const Point x0 = st.x0;
  std::vector<Point> expect;
  // The slab fixes the first coordinate; steps move along the next two.
  for (int i = 1; i <= 2; ++i)
    for (Coord s : {-1, 1}) {
      Point y = x0;
      y[i] += s;
      expect.push_back(y);
    }
  std::sort(expect.begin(), expect.end());
  CHECK(st.frontier() == expect);
  explore_step(st, c, killed_table(3, 16), RngStream(c.seed));
  CHECK(st.log.back().x == expect.front());
}

TEST_CASE("a step at zero intensity fails") {
  const auto c = base_config(6);
  auto st = find_seed_box(c, RngStream(c.seed));
  REQUIRE(st.seeded);
  auto zero = c;
  zero.u = 0;
  zero.u_top = 0;
  explore_step(st, zero, killed_table(3, 16), RngStream(c.seed));
  CHECK_FALSE(st.log.back().success);
  CHECK(st.log.back().paths == 0);
  CHECK(std::find(st.E.begin(), st.E.end(), st.log.back().x) != st.E.end());
}

TEST_CASE("seed probability for unit boxes") {
  // n_T = 1: the box is one site, covered when some trajectory starts there.
  const double T = 2, u = 0.2;
  const double p = -std::expm1(-2 * 3 * u / (T + 1));
  int hits = 0;
  const int N = 4000;
  for (int i = 0; i < N; ++i) {
    ExploreConfig c = base_config(std::uint64_t(1000 + i));
    c.T = T;
    c.u = u;
    c.u_top = 0;
    c.M = 0;
    hits += find_seed_box(c, RngStream(c.seed)).seeded;
  }
  CHECK(std::abs(double(hits) / N - p) <= 3 * std::sqrt(p * (1 - p) / N));
}

TEST_CASE("runs are reproducible and keep their invariants") {
  const auto& gT = killed_table(3, 16);
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto c = base_config(20 + s);
    const auto a = run_exploration(c, gT);
    const auto b = run_exploration(c, gT);
    REQUIRE(a.state.log.size() == b.state.log.size());
    for (std::size_t j = 0; j < a.state.log.size(); ++j) {
      CHECK(a.state.log[j].x == b.state.log[j].x);
      CHECK(a.state.log[j].success == b.state.log[j].success);
      CHECK(a.state.log[j].measured == b.state.log[j].measured);
    }
    std::string why;
    CHECK_MESSAGE(a.state.check_invariants(&why), why);
    if (!a.state.seeded) continue;
    const auto seed_box = box_sites(plain_box(a.state.box_corner(a.state.x0), a.state.nT));
    for (const auto& [x, J] : a.state.J) CHECK(connected(seed_box, J.sorted(), a.state.revealed_edges));
  }
}

TEST_CASE("coupled runs are monotone in the intensity") {
  const auto& gT = killed_table(3, 16);
  int shared = 0;
  for (std::uint64_t s = 0; s < 6; ++s) {
    auto lo = base_config(40 + s);
    auto hi = lo;
    lo.u = 10;
    hi.u = 30;
    const auto cc = coupled_monotonicity(run_exploration(lo, gT), run_exploration(hi, gT));
    CHECK_MESSAGE(cc.monotone, cc.detail);
    shared += cc.shared_steps;
  }
  CHECK(shared > 0);
}

TEST_CASE("step success grows with the intensity") {
  const auto& gT = killed_table(3, 16);
  std::vector<Estimate> p;
  for (double u : {4.0, 8.0, 16.0}) {
    auto c = base_config(500);
    c.u = u;
    c.u_top = 0;
    p.push_back(step_success_probability(c, 60, gT));
  }
  for (std::size_t i = 1; i < p.size(); ++i)
    CHECK(p[i].value >= p[i - 1].value - 3 * std::hypot(p[i].stderr_, p[i - 1].stderr_));
}

TEST_CASE("capacity threshold decisions") {
  const auto& gT = killed_table(3, 16);
  const auto e = cap_threshold_check({}, 1, gT);
  CHECK_FALSE(e.pass);
  CHECK(e.how == CapDecision::empty);
  const auto small = cap_threshold_check({Point(3)}, 5, gT);
  CHECK_FALSE(small.pass);
  CHECK(small.value == doctest::Approx(1 / gT.value(Point(3))).epsilon(1e-12));
  // Large enough to skip the direct solve.
  const auto cube = box_sites(plain_box(Point(3), 11));
  const auto big = cap_threshold_check(cube, 2000, gT);
  CHECK_FALSE(big.pass);
  CHECK(big.how == CapDecision::size_bound);
  const auto easy = cap_threshold_check(cube, 1, gT);
  CHECK(easy.pass);
  CHECK(easy.how == CapDecision::interior_bound);
  const auto box = box_sites(plain_box(Point(3), 4));
  const double exact = capacity_exact(box, gT).value;
  CHECK(cap_threshold_check(box, exact * 0.99, gT).pass);
  CHECK_FALSE(cap_threshold_check(box, exact * 1.01, gT).pass);
}

TEST_CASE("exploration csv") {
  const auto r = run_exploration(base_config(7), killed_table(3, 16));
  std::ostringstream o;
  write_explore_csv(o, r, "run-7");
  const auto s = o.str();
  CHECK(s.rfind("run_id,", 0) == 0);
  CHECK(std::count(s.begin(), s.end(), '\n') == std::ptrdiff_t(r.state.log.size() + 1));
}
