#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "fri/critical.hpp"
#include "fri/errors.hpp"
#include "fri/scaling.hpp"

using namespace fri;

namespace {
constexpr double kBaselineUStar = 0.0257813;
}

TEST_CASE("scaling law examples") {
  CHECK(f_d(3, 64) == doctest::Approx(8).epsilon(1e-14));
  CHECK(f_d(4, std::exp(2.0)) == doctest::Approx(std::exp(2.0) / 2).epsilon(1e-14));
  CHECK(f_d(5, 100) == 100);
  CHECK(f_d(7, 3) == 3);
  CHECK_THROWS_AS(f_d(3, 1), std::invalid_argument);
  CHECK_THROWS_AS(f_d(2, 10), std::invalid_argument);
  for (int d = 3; d <= 6; ++d) {
    double prev = f_d(d, std::exp(1.0) + 0.01);
    for (double a = 3; a < 1e6; a *= 1.7) {
      const double f = f_d(d, a);
      CHECK(f > prev);
      prev = f;
    }
  }
}

TEST_CASE("crossing probability examples") {
  CrossingOptions plain;
  plain.rooted = false;
  CHECK(crossing_probability(3, 0, 16, 16, 50, RngStream(70), plain).value == 0);
  const auto hi = crossing_probability(3, 5, 4, 4, 100, RngStream(71));
  CHECK(hi.value >= 0.99);
}

TEST_CASE("coupled crossing curve is nondecreasing") {
  const std::vector<double> us{0.01, 0.02, 0.04, 0.08, 0.16, 0.32};
  const auto c = crossing_curve(3, 16, 16, us, 200, RngStream(72));
  REQUIRE(c.points.size() == us.size());
  for (std::size_t i = 1; i < us.size(); ++i) CHECK(c.points[i].p.value >= c.points[i - 1].p.value);

  const auto ts = crossing_thresholds(3, 16, 16, 200, RngStream(72), 0.32);
  for (double u : us) {
    CHECK(ts.at(u).value == c.points[std::size_t(std::find(us.begin(), us.end(), u) - us.begin())].p.value);
    CHECK(ts.at(u).value <= ts.at(2 * u).value);
  }
}

TEST_CASE("bisection needs a bracket") {
  ThresholdSample none;
  none.thresholds.assign(100, std::numeric_limits<double>::infinity());
  none.u_cap = 10;
  CHECK_THROWS_AS(bisect_u_star(none, 16, 16, 0.5, 0.05, 0.01, 10), NoBracketError);

  BisectOptions opt;
  opt.max_doublings = 0;
  opt.u0 = 1e-6;
  CHECK_THROWS_AS(bisect_u_star(3, 16, 16, 0.5, 0.05, 50, RngStream(73), opt), NoBracketError);
}

TEST_CASE("bisection on a known threshold sample") {
  ThresholdSample s;
  for (int i = 1; i <= 100; ++i) s.thresholds.push_back(0.01 * i);
  s.u_cap = 10;
  const auto r = bisect_u_star(s, 16, 16, 0.5, 1e-3, 0.05, 20);
  CHECK(r.u_lo < 0.5);
  CHECK(r.u_hi >= 0.5);
  CHECK(r.p_lo < 0.5);
  CHECK(r.p_hi >= 0.5);
  CHECK(r.u_hi - r.u_lo <= 1e-3 * r.u_hi + 1e-12);
  CHECK(r.ci_lo <= r.u_estimate);
  CHECK(r.ci_hi >= r.u_estimate);
}

TEST_CASE("quantile proxies are ordered in theta") {
  const auto ts = crossing_thresholds(3, 16, 16, 300, RngStream(74), 1e3);
  const auto a = bisect_u_star(ts, 16, 16, 0.25, 0.02, 0.01, 40);
  const auto b = bisect_u_star(ts, 16, 16, 0.75, 0.02, 0.01, 40);
  CHECK(a.u_estimate <= b.u_estimate);
}

TEST_CASE("bisection baseline in d = 3") {
  const auto r = bisect_u_star(3, 64, 32, 0.5, 0.1, 400, RngStream(75));
  CHECK(std::isfinite(r.u_estimate));
  CHECK(r.u_estimate > 0);
  CHECK(r.u_hi - r.u_lo <= 0.1 * r.u_hi + 1e-12);
  const auto again = bisect_u_star(3, 64, 32, 0.5, 0.1, 400, RngStream(75));
  CHECK(again.u_estimate == r.u_estimate);
  CHECK(again.u_lo == r.u_lo);
  CHECK(again.ci_hi == r.ci_hi);
  // Frozen from a reference run of this seed.
  CHECK(r.u_estimate == doctest::Approx(kBaselineUStar).epsilon(1e-5));
}

TEST_CASE("exponent fit on synthetic data") {
  std::vector<double> T, u;
  for (double t : {16.0, 32.0, 64.0, 128.0, 256.0}) {
    T.push_back(t);
    u.push_back(0.7 / std::sqrt(t));
  }
  const auto f = fit_exponent(T, u);
  CHECK(std::abs(f.slope + 0.5) < 1e-9);
  CHECK(std::exp(f.intercept) == doctest::Approx(0.7).epsilon(1e-9));
  for (double beta : {-1.0, -0.3, 0.2}) {
    std::vector<double> v;
    for (double t : T) v.push_back(2 * std::pow(t, beta));
    CHECK(std::abs(fit_exponent(T, v).slope - beta) < 1e-9);
  }
}

TEST_CASE("scaling study output") {
  ScalingParams p;
  p.reps = 100;
  p.tol = 0.1;
  CHECK_THROWS_AS(scaling_study(3, {16, 32, 64}, p), std::invalid_argument);
  const auto r = scaling_study(3, {4, 9, 16, 25}, p);
  CHECK(r.error.empty());
  REQUIRE(r.rows.size() == 4);
  const auto again = scaling_study(3, {4, 9, 16, 25}, p);
  for (std::size_t i = 0; i < 4; ++i) CHECK(again.rows[i].proxy.u_estimate == r.rows[i].proxy.u_estimate);
  std::ostringstream a, b;
  write_scaling_csv(a, r, p);
  write_scaling_csv(b, again, p);
  CHECK(a.str() == b.str());
  CHECK(a.str().rfind("d,T,", 0) == 0);
}
