#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "fri/capacity.hpp"
#include "fri/errors.hpp"
#include "fri/green.hpp"
#include "support.hpp"

using namespace fri;
using fri::testing::free_table;
using fri::testing::killed_table;

namespace {

CapacityBudget exact_only() {
  CapacityBudget b;
  b.allow_mc_fallback = false;
  return b;
}

double cap(const std::vector<Point>& A, const GreenTable& g) { return A.empty() ? 0.0 : capacity_exact(A, g).value; }

}  // namespace

TEST_CASE("green table symmetry and bounds") {
  const auto& g = free_table(3);
  const auto& gT = killed_table(3, 10);
  CHECK(g.value(Point{0, 0, 0}) >= 1);
  CHECK(gT.value(Point{0, 0, 0}) >= 1);
  CHECK(gT.value(Point{0, 0, 0}) <= 11);
  CHECK(g.value(Point{3, -1, 2}) == g.value(Point{-1, 2, -3}));
  CHECK(g(Point{1, 1, 1}, Point{4, 0, 3}) == g.value(Point{3, -1, 2}));
  for (const Point x : {Point{0, 0, 0}, Point{1, 0, 0}, Point{2, 3, 1}, Point{10, 4, 0}, Point{40, 0, 0}})
    CHECK(gT.value(x) <= g.value(x));
}

TEST_CASE("free green function at the origin agrees with the absorbing-boundary solve") {
  // Richardson extrapolation of Dirichlet solves on growing cubes is an
  // independent route to g(0,0).
  const double quad = free_table(3).value(Point(3));
  const double absorbing = absorbing_extrapolate_origin(3, KillMean::free_walk(), {12, 24, 48});
  CHECK(quad == doctest::Approx(1.516).epsilon(0.01 / 1.516));
  CHECK(std::abs(quad - absorbing) < 2e-3);
}

TEST_CASE("free green function Monte-Carlo agrees with the table") {
  const auto mc = green_mc(3, KillMean::free_walk(), Point(3), 20000, 4000, RngStream(21));
  const double g0 = free_table(3).value(Point(3));
  // Truncation only removes visits.
  CHECK(mc.est.value <= g0 + 3 * mc.est.stderr_);
  CHECK(mc.est.value + mc.truncation_bias >= g0 - 3 * mc.est.stderr_);
}

TEST_CASE("killed green function approaches the free one") {
  const auto g = build_green_quadrature(3, KillMean::killed(1e6), 8);
  const double diff = free_table(3).value(Point(3)) - g.value(Point(3));
  CHECK(diff > 0);
  CHECK(diff < 5e-3);
}

TEST_CASE("green table file round trip and missing cache") {
  const auto dir = std::filesystem::temp_directory_path() / "fri_green_test";
  std::filesystem::remove_all(dir);
  {
    GreenCache c(dir.string(), false);
    CHECK_THROWS_AS(c.get(3, KillMean::killed(5)), CacheMissing);
  }
  GreenCache c(dir.string(), true);
  c.set_radius_override(10);
  const auto t = c.get(3, KillMean::killed(5));
  CHECK(std::filesystem::exists(c.file_for(3, KillMean::killed(5))));
  const auto back = GreenTable::load(c.file_for(3, KillMean::killed(5)));
  CHECK(back.values() == t->values());
  CHECK(back.radius() == 10);
  CHECK(back.kill_mean() == KillMean::killed(5));
  CHECK_THROWS_AS(GreenTable::load((dir / "missing.fgt").string()), IoError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("escape_exact examples") {
  const auto& g = free_table(3);
  const auto e0 = escape_exact({Point(3)}, g);
  CHECK(e0.values[0] == doctest::Approx(1 / g.value(Point(3))).epsilon(1e-12));
  CHECK(e0.values[0] == doctest::Approx(0.6595).epsilon(1e-3));

  const auto& gT = killed_table(3, 10);
  const auto box = box_sites(plain_box(Point(3), 3));
  const auto e = escape_exact(box, gT);
  CHECK(std::abs(e.at(Point{1, 1, 1}) - 1.0 / 11) < 1e-10);

  for (int d = 3; d <= 5; ++d) {
    const auto& t = killed_table(d, 7);
    CHECK(escape_exact({Point(d)}, t).values[0] == doctest::Approx(1 / t.value(Point(d))).epsilon(1e-12));
  }
}

TEST_CASE("full and boundary-reduced solves agree") {
  const auto box = box_sites(plain_box(Point(3), 6));
  for (const GreenTable* g : {&free_table(3), &killed_table(3, 10)}) {
    const auto full = escape_exact(box, *g);
    const auto red = escape_exact_reduced(box, *g);
    for (std::size_t i = 0; i < box.size(); ++i) CHECK(std::abs(full.values[i] - red.values[i]) < 1e-9);
  }
}

TEST_CASE("escape_mc examples") {
  const auto box = box_sites(plain_box(Point(3), 3));
  const SiteSet S(3, box);
  const auto free_in = escape_mc(S, Point{1, 1, 1}, KillMean::free_walk(), 2000, 1000, RngStream(22));
  CHECK(free_in.est.value == 0);
  const auto killed_in = escape_mc(S, Point{1, 1, 1}, KillMean::killed(4), 20000, 0, RngStream(23));
  CHECK(std::abs(killed_in.est.value - 0.2) <= 3 * killed_in.est.stderr_);
  CHECK_THROWS_AS(escape_mc(S, Point{9, 9, 9}, KillMean::free_walk(), 10, 10, RngStream(1)), std::invalid_argument);

  const SiteSet O(3, {Point(3)});
  const auto mc = escape_mc(O, Point(3), KillMean::free_walk(), 20000, 10000, RngStream(24));
  const double exact = escape_exact({Point(3)}, free_table(3)).values[0];
  CHECK(std::abs(mc.est.value - exact) <= 3 * mc.est.stderr_ + mc.bias_bound);
}

TEST_CASE("capacity conventions and interior bound") {
  const auto c = capacity({}, KillMean::free_walk(), CapMethod::last_exit_solve, &free_table(3), {}, RngStream(1));
  CHECK(c.value == 0);
  RngStream rng(25);
  for (double T : {2.0, 10.0}) {
    const auto& gT = killed_table(3, T);
    for (int i = 0; i < 10; ++i) {
      const auto A = fri::testing::blob_with_core(3, 5 + rng.below(40), rng);
      const double n_int = double(fri::testing::interior(A).size());
      CHECK(cap(A, gT) >= n_int / (T + 1) - 1e-10);
    }
  }
}

TEST_CASE("capacity is monotone, subadditive and bounded by killing") {
  RngStream rng(26);
  const auto& g = free_table(3);
  const auto& gT = killed_table(3, 10);
  for (int t = 0; t < 30; ++t) {
    const auto A = fri::testing::random_blob(Point(3), 1 + rng.below(64), rng);
    Point off(3);
    off[0] = Coord(rng.below(8));
    off[1] = Coord(rng.below(8));
    const auto B = fri::testing::random_blob(off, 1 + rng.below(64), rng);
    SiteSet U(3, A);
    for (const auto& b : B) U.insert(b);
    const auto AB = U.sorted();
    CHECK(cap(AB, g) <= cap(A, g) + cap(B, g) + 1e-8);
    CHECK(cap(A, g) <= cap(AB, g) + 1e-8);
    CHECK(cap(A, gT) >= cap(A, g) - 1e-8);
    CHECK(cap(A, gT) <= double(A.size()) + 1e-8);

    const auto eA = escape_exact(A, g), eT = escape_exact(A, gT);
    for (std::size_t i = 0; i < A.size(); ++i) {
      CHECK(eT.values[i] >= eA.values[i] - 1e-8);
      CHECK(eA.values[i] >= -1e-9);
      CHECK(eA.values[i] <= 1 + 1e-9);
    }
  }
}

TEST_CASE("solver cap is enforced") {
  SolverOptions opt;
  opt.solver_cap = 10;
  CHECK_THROWS_AS(escape_exact(box_sites(plain_box(Point(3), 3)), free_table(3), opt), SolveError);
  CapacityBudget b = exact_only();
  b.solver.solver_cap = 4;
  CHECK_THROWS_AS(capacity(box_sites(plain_box(Point(3), 2)), KillMean::free_walk(), CapMethod::last_exit_solve,
                           &free_table(3), b, RngStream(1)),
                  SolveError);
}

TEST_CASE("box capacity grows like n in d = 3") {
  std::vector<double> ratio;
  for (Coord n : {4, 8, 16, 32}) {
    const auto c = box_capacity(3, n, KillMean::free_walk(), &free_table(3), {}, RngStream(27));
    ratio.push_back(c.value / double(n));
  }
  CHECK(*std::max_element(ratio.begin(), ratio.end()) / *std::min_element(ratio.begin(), ratio.end()) < 2);
  // The symmetry-reduced solve matches the plain one on a small cube.
  const auto small = box_capacity(3, 5, KillMean::free_walk(), &free_table(3), {}, RngStream(27));
  CHECK(small.value == doctest::Approx(cap(box_sites(plain_box(Point(3), 5)), free_table(3))).epsilon(1e-8));
}

TEST_CASE("range capacity statistics") {
  const auto r0 = range_capacity_stats(3, 0, false, 40, RngStream(28), free_table(3), exact_only());
  CHECK(r0.mean.value == doctest::Approx(cap({Point(3)}, free_table(3))).epsilon(1e-12));
  CHECK(r0.mean.stderr_ == doctest::Approx(0).epsilon(1e-12));
  const auto r = range_capacity_stats(3, 256, false, 60, RngStream(29), free_table(3), exact_only());
  CHECK(r.values.size() == 60);
  CHECK(r.second_moment.value >= r.mean.value * r.mean.value);
  CHECK_THROWS_AS(range_capacity_stats(3, 16, true, 10, RngStream(1), free_table(3), exact_only()),
                  std::invalid_argument);
}

TEST_CASE("stopped union capacity") {
  const auto& g = free_table(3);
  const auto one = stopped_union_capacity(3, 1, 2, {Point(3)}, 200, RngStream(30), g, exact_only());
  CHECK(one.mean.value > 0);
  // Every stopped walk stays in the radius-2 ball around its start.
  CHECK(one.mean.value <= cap(box_sites(plain_box(Point{-2, -2, -2}, 5)), g) + 1e-9);

  std::vector<Estimate> m;
  for (int N : {1, 2, 4, 8})
    m.push_back(stopped_union_capacity(3, N, 16, std::vector<Point>(std::size_t(N), Point(3)), 30, RngStream(31, N),
                                       g, exact_only())
                    .mean);
  for (std::size_t i = 1; i < m.size(); ++i)
    CHECK(m[i].value >= m[i - 1].value - 3 * std::hypot(m[i].stderr_, m[i - 1].stderr_));
}

TEST_CASE("capacity Monte-Carlo estimator agrees with the solve") {
  RngStream rng(32);
  McOptions mo;
  mo.reps_per_site = 4000;
  for (int t = 0; t < 4; ++t) {
    const int d = 3 + t % 2;
    const auto A = fri::testing::random_blob(Point(d), 3 + rng.below(10), rng);
    const auto km = t < 2 ? KillMean::killed(10) : KillMean::free_walk();
    const auto& g = km.is_free() ? free_table(d) : killed_table(d, 10);
    const auto mc = capacity_mc(A, km, mo, rng.child(std::uint64_t(t)));
    const double exact = cap(A, g);
    CHECK(std::abs(mc.value - exact) <= 3 * mc.stderr_ + mc.bias_bound + 1e-9);
  }
}
