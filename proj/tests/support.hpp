#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "fri/green.hpp"
#include "fri/lattice.hpp"
#include "fri/rng.hpp"
#include "fri/walk.hpp"

namespace fri::testing {

// Tables are built once per process and kept in memory.
inline GreenCache& tables() {
  static GreenCache cache;
  return cache;
}

inline const GreenTable& free_table(int d) { return *tables().get(d, KillMean::free_walk()); }
inline const GreenTable& killed_table(int d, double T) { return *tables().get(d, KillMean::killed(T)); }

// Connected random set: the sites visited by a walk from `start`, stopped
// once `size` distinct sites are collected.
inline std::vector<Point> random_blob(const Point& start, std::size_t size, RngStream& rng) {
  SiteSet s(start.d);
  Point p = start;
  s.insert(p);
  while (s.size() < size) {
    apply_step(p, std::uint8_t(rng.below(std::uint32_t(2 * start.d))));
    s.insert(p);
  }
  return s.sorted();
}

// A cube of side 3 (so at least one interior site) plus a random blob hanging off it.
inline std::vector<Point> blob_with_core(int d, std::size_t extra, RngStream& rng) {
  SiteSet s(d, box_sites(plain_box(Point(d), 3)));
  Point start(d);
  for (int i = 0; i < d; ++i) start[i] = 2;
  for (const auto& p : random_blob(start, extra, rng)) s.insert(p);
  return s.sorted();
}

inline std::vector<Point> interior(const std::vector<Point>& A) {
  if (A.empty()) return {};
  const int d = A.front().d;
  SiteSet S(d, A);
  std::vector<Point> out;
  for (const auto& x : A) {
    bool in = true;
    for (int i = 0; i < d && in; ++i)
      for (int s : {-1, 1}) {
        Point y = x;
        y[i] += s;
        if (!S.contains(y)) in = false;
      }
    if (in) out.push_back(x);
  }
  return out;
}

inline double log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= double(n);
  my /= double(n);
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
    sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
  }
  return sxy / sxx;
}

}  // namespace fri::testing
