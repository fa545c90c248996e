#include <doctest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "fri/sampler.hpp"
#include "fri/stats.hpp"
#include "support.hpp"

using namespace fri;

namespace {

FriConfig window_config(int d, double u, double T, Coord side, std::uint64_t seed) {
  FriConfig c;
  c.d = d;
  c.u = u;
  c.T = T;
  c.window = plain_box(Point(d), side);
  c.seed = seed;
  return c;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  RunningStats mx, my;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx.add(x[i]);
    my.add(y[i]);
  }
  double sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) sxy += (x[i] - mx.mean()) * (y[i] - my.mean());
  return sxy / double(x.size() - 1) / std::sqrt(mx.variance() * my.variance());
}

}  // namespace

TEST_CASE("vanishing intensity gives empty samples") {
  for (std::uint64_t s = 0; s < 200; ++s)
    CHECK(sample_window(window_config(3, 1e-9, 4, 6, s)).trajectories.empty());
  const auto z = sample_window(window_config(4, 0, 9, 4, 1));
  CHECK(z.trajectories.empty());
  CHECK(z.report.padding == 0);
}

TEST_CASE("equal seeds give identical samples") {
  const auto a = sample_window(window_config(3, 0.3, 4, 6, 77));
  const auto b = sample_window(window_config(3, 0.3, 4, 6, 77));
  const auto c = sample_window(window_config(3, 0.3, 4, 6, 78));
  CHECK(a == b);
  CHECK_FALSE(a == c);
  CHECK(!a.trajectories.empty());
}

TEST_CASE("window samples respect the padded window and the tolerance") {
  const auto s = sample_window(window_config(3, 0.4, 9, 6, 5));
  const auto box = s.padded_window();
  CHECK(s.report.bound <= s.config.report_tol);
  CHECK(s.report.padding >= s.report.floor_padding);
  for (const auto& t : s.trajectories) {
    CHECK(box.contains(t.path.start));
    CHECK(t.label <= s.config.u);
    CHECK(t.path.nearest_neighbor_ok());
  }
  auto cfg = window_config(3, 1, 16, 6, 5);
  cfg.padding_radius = 0;
  CHECK_THROWS_AS(sample_window(cfg), PaddingError);
}

TEST_CASE("mean number of starts") {
  // Each site carries Poisson(2du/(T+1)) starts.
  const double u = 0.5, T = 3;
  const LatticeBox box = plain_box(Point(3), 4);
  const double expect = 2 * 3 * u / (T + 1) * double(box.volume());
  RunningStats n;
  for (std::uint64_t r = 0; r < 200; ++r) n.add(double(sample_box_starts(3, u, T, box, RngStream(40, r)).trajectories.size()));
  CHECK(std::abs(n.mean() - expect) <= 3 * std::sqrt(expect / 200));
}

TEST_CASE("per-site start counts are Poisson dispersed") {
  const double u = 4, T = 1;
  const LatticeBox box = plain_box(Point(3), 2);
  const double mean = 2 * 3 * u / (T + 1);
  std::vector<std::uint64_t> counts;
  for (std::uint64_t r = 0; r < 200; ++r) {
    std::map<Point, std::uint64_t> c;
    for (const auto& p : box_sites(box)) c[p] = 0;
    for (const auto& t : sample_box_starts(3, u, T, box, RngStream(41, r)).trajectories) ++c[t.path.start];
    for (const auto& [p, k] : c) counts.push_back(k);
  }
  RunningStats s;
  for (auto k : counts) s.add(double(k));
  CHECK(std::abs(s.mean() - mean) <= 3 * std::sqrt(mean / double(counts.size())));
  const double ratio = s.variance() / s.mean();
  CHECK(std::abs(ratio - 1) <= 5 * std::sqrt(2.0 / double(counts.size())));
  const auto chi = chi_square_counts(counts, [&](std::uint64_t k) {
    return std::exp(-mean + double(k) * std::log(mean) - std::lgamma(double(k) + 1));
  });
  CHECK(chi.p_value >= 1e-3);
}

TEST_CASE("superposition of independent levels") {
  const LatticeBox box = plain_box(Point(3), 4);
  RunningStats joint, split;
  for (std::uint64_t r = 0; r < 300; ++r) {
    joint.add(double(sample_box_starts(3, 0.5, 4, box, RngStream(42, r)).trajectories.size()));
    split.add(double(sample_box_starts(3, 0.3, 4, box, RngStream(43, r)).trajectories.size() +
                     sample_box_starts(3, 0.2, 4, box, RngStream(44, r)).trajectories.size()));
  }
  const double z = (joint.mean() - split.mean()) / std::hypot(joint.stderr_mean(), split.stderr_mean());
  CHECK(std::abs(z) < 3.29);
}

TEST_CASE("coupled levels agree with direct samples") {
  auto hi = window_config(3, 0.4, 4, 6, 9);
  hi.u_top = 0.4;
  hi.padding_radius = 12;
  auto lo = hi;
  lo.u = 0.15;
  const auto s_hi = sample_window(hi);
  const auto s_lo = sample_window(lo);
  CHECK(s_hi.at_level(0.15).trajectories == s_lo.trajectories);
  CHECK(s_hi.at_level(0).trajectories.empty());
  CHECK(s_hi.at_level(0.4).trajectories == s_hi.trajectories);
  CHECK_THROWS_AS(s_hi.at_level(0.5), std::invalid_argument);
}

TEST_CASE("hitting samples") {
  const auto& g = fri::testing::killed_table(3, 10);
  const auto zero = sample_hitting({Point(3)}, 0, 10, g, RngStream(45));
  CHECK(zero.trajectories.empty());

  // Total count is Poisson(2d u cap^(T)(K)).
  const double u = 0.5;
  const double mean = 2 * 3 * u / g.value(Point(3));
  RunningStats n;
  for (std::uint64_t r = 0; r < 2000; ++r) n.add(double(sample_hitting({Point(3)}, u, 10, g, RngStream(46, r)).trajectories.size()));
  CHECK(std::abs(n.mean() - mean) <= 3 * std::sqrt(mean / 2000));

  // Starts are spread in proportion to the escape probabilities.
  const auto K = box_sites(plain_box(Point(3), 3));
  std::vector<double> acc(K.size(), 0), es;
  for (std::uint64_t r = 0; r < 300; ++r) {
    const auto h = sample_hitting(K, 5, 10, g, RngStream(47, r));
    es = h.escape;
    for (std::size_t i = 0; i < K.size(); ++i) acc[i] += double(h.counts[i]);
  }
  CHECK(pearson(es, acc) > 0.9);
  CHECK_THROWS_AS(sample_hitting(K, 1, 4, g, RngStream(1)), std::invalid_argument);
}

TEST_CASE("edges of trajectories") {
  std::vector<Trajectory> ts;
  ts.push_back({Path::from_vertices({Point{0, 0, 0}}), 0.1});
  CHECK(edges_of(ts, 3).size() == 0);
  ts.push_back({Path::from_vertices({Point{0, 0, 0}, Point{1, 0, 0}, Point{0, 0, 0}}), 0.2});
  CHECK(edges_of(ts, 3).size() == 1);
  ts.push_back({Path::from_vertices({Point{1, 0, 0}, Point{1, 1, 0}}), 0.3});
  const auto E = edges_of(ts, 3);
  CHECK(E.size() == 2);
  CHECK(E.contains(make_edge(Point{1, 1, 0}, Point{1, 0, 0})));
}

TEST_CASE("sample files round trip") {
  const auto s = sample_window(window_config(4, 0.2, 2, 4, 11));
  std::stringstream buf;
  save_sample(s, buf);
  const auto back = load_sample(buf);
  CHECK(back == s);
  CHECK(back.report.padding == s.report.padding);
  std::stringstream bad("not a sample");
  CHECK_THROWS(load_sample(bad));
}

TEST_CASE("configuration validation") {
  CHECK_THROWS_AS(sample_window(window_config(2, 0.1, 4, 4, 1)), DimensionError);
  CHECK_THROWS_AS(sample_window(window_config(3, -1, 4, 4, 1)), std::invalid_argument);
  CHECK_THROWS_AS(sample_window(window_config(3, 0.1, 0, 4, 1)), std::invalid_argument);
}
