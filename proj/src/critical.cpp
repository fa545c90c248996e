#include "fri/critical.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include <absl/container/flat_hash_map.h>

#include "fri/errors.hpp"
#include "fri/format.hpp"
#include "fri/log.hpp"
#include "fri/sampler.hpp"

namespace fri {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Minimax threshold inside a padded window sample: add trajectories by
// label until the origin's cluster meets the inner boundary.
double window_threshold(const FriSample& s, Coord N, const Path* root) {
  const int d = s.config.d;
  std::vector<std::size_t> order(s.trajectories.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return s.trajectories[a].label < s.trajectories[b].label; });
  absl::flat_hash_map<Point, std::uint32_t> idx;
  std::vector<std::uint32_t> parent{0};  // node 0: the boundary
  auto find = [&](std::uint32_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  auto node = [&](const Point& p) {
    auto [it, fresh] = idx.emplace(p, std::uint32_t(parent.size()));
    if (fresh) {
      parent.push_back(it->second);
      for (int i = 0; i < d; ++i)
        if (p[i] >= N - 1 || p[i] <= -N) {
          parent[it->second] = 0;
          break;
        }
    }
    return it->second;
  };
  const Point origin(d);
  auto add = [&](const Path& p) {
    if (p.length() == 0) return;
    std::uint32_t prev = node(p.start);
    Point x = p.start;
    for (auto c : p.steps) {
      apply_step(x, c);
      const std::uint32_t cur = node(x);
      const std::uint32_t a = find(prev), b = find(cur);
      if (a != b) {
        if (a == 0) parent[b] = 0;
        else parent[a] = b;
      }
      prev = cur;
    }
  };
  auto crossed = [&] {
    auto it = idx.find(origin);
    return it != idx.end() && find(it->second) == 0;
  };
  if (root) {
    add(*root);
    if (crossed()) return 0.0;
  }
  for (auto i : order) {
    add(s.trajectories[i].path);
    if (crossed()) return s.trajectories[i].label;
  }
  return kInf;
}

FriSample crossing_window(int d, double u, double T, Coord N, std::uint64_t seed, int workers) {
  FriConfig cfg;
  cfg.d = d;
  cfg.u = u;
  cfg.T = T;
  cfg.window = plain_box([&] {
    Point c(d);
    for (int i = 0; i < d; ++i) c[i] = -N;
    return c;
  }(), 2 * N);
  cfg.seed = seed;
  return sample_window(cfg, workers);
}

double replicate_threshold(int d, double T, Coord N, double u_cap, const CrossingOptions& opt, RngStream r,
                           bool* censored) {
  if (opt.method == CrossingMethod::growth) {
    GrowthOptions g = opt.growth;
    g.rooted = opt.rooted;
    const InvasionResult res = invasion_threshold(d, T, N, u_cap, g, r);
    if (censored) *censored = res.censored;
    return res.crossed ? res.threshold : kInf;
  }
  const FriSample s = crossing_window(d, u_cap, T, N, r.next_u64(), 1);
  Path root;
  if (opt.rooted) root = rooted_trajectory(d, T, r.child(1));
  if (censored) *censored = false;
  const double t = window_threshold(s, N, opt.rooted ? &root : nullptr);
  return t <= u_cap ? t : kInf;
}

}  // namespace

Estimate ThresholdSample::at(double u) const {
  const auto k = std::uint64_t(std::upper_bound(thresholds.begin(), thresholds.end(), u) - thresholds.begin());
  return binomial_estimate(k, thresholds.size());
}

ThresholdSample crossing_thresholds(int d, double T, Coord N, std::uint64_t reps, RngStream rng, double u_cap,
                                    const CrossingOptions& opt) {
  if (reps < 1) throw std::invalid_argument("reps must be >= 1");
  if (N < 1) throw std::invalid_argument("N must be >= 1");
  if (!(u_cap >= 0)) throw std::invalid_argument("u cap must be nonnegative");
  if (opt.method == CrossingMethod::window && !std::isfinite(u_cap))
    throw std::invalid_argument("window thresholds need a finite u cap");
  ThresholdSample out;
  out.u_cap = u_cap;
  out.thresholds.assign(reps, kInf);
  std::vector<char> cens(reps, 0);
  parallel_for(reps, opt.workers, [&](std::size_t i) {
    bool c = false;
    out.thresholds[i] = replicate_threshold(d, T, N, u_cap, opt, rng.child(i), &c);
    cens[i] = c;
  });
  for (char c : cens) out.censored += std::uint64_t(c);
  std::sort(out.thresholds.begin(), out.thresholds.end());
  return out;
}

Estimate crossing_probability(int d, double u, double T, Coord N, std::uint64_t reps, RngStream rng,
                              const CrossingOptions& opt) {
  if (!(u >= 0)) throw std::invalid_argument("u must be nonnegative");
  if (u == 0 && !opt.rooted) return binomial_estimate(0, reps);
  return crossing_thresholds(d, T, N, reps, rng, u, opt).at(u);
}

CrossingCurve crossing_curve(int d, double T, Coord N, const std::vector<double>& us, std::uint64_t reps,
                             RngStream rng, const CrossingOptions& opt) {
  CrossingCurve c;
  c.T = T;
  c.N = N;
  c.reps = reps;
  if (us.empty()) return c;
  const double top = *std::max_element(us.begin(), us.end());
  const ThresholdSample s = crossing_thresholds(d, T, N, reps, rng, top, opt);
  for (double u : us) c.points.push_back({u, s.at(u)});
  return c;
}

UStarProxy bisect_u_star(const ThresholdSample& s, double T, Coord N, double theta, double tol, double u0,
                         int max_doublings) {
  if (!(theta > 0 && theta < 1)) throw std::invalid_argument("theta must lie in (0,1)");
  if (!(tol > 0)) throw std::invalid_argument("tolerance must be positive");
  if (!(u0 > 0)) throw std::invalid_argument("scan start must be positive");
  UStarProxy r;
  r.T = T;
  r.N = N;
  r.theta = theta;
  r.tolerance = tol;
  r.reps = s.thresholds.size();
  r.censored = s.censored;
  auto p = [&](double u) { return s.at(u).value; };
  // Geometric scan for a bracket p(lo) < theta <= p(hi).
  double lo = 0, hi = 0;
  if (p(u0) >= theta) {
    hi = u0;
    lo = u0;
    for (int j = 0; j < max_doublings && p(lo) >= theta; ++j) lo *= 0.5;
    if (p(lo) >= theta) lo = 0;
  } else {
    lo = u0;
    hi = u0;
    int j = 0;
    for (; j < max_doublings && p(hi) < theta; ++j) {
      lo = hi;
      hi *= 2;
    }
    if (p(hi) < theta || hi > s.u_cap) {
      std::ostringstream os;
      os << "no bracket for theta=" << theta << " up to u=" << hi << " (T=" << T << ", N=" << N << ")";
      throw NoBracketError(os.str());
    }
  }
  while (hi - lo > tol * 0.5 * (hi + lo) && r.iterations < 200) {
    const double mid = 0.5 * (lo + hi);
    if (p(mid) < theta) lo = mid;
    else hi = mid;
    ++r.iterations;
  }
  r.u_lo = lo;
  r.u_hi = hi;
  r.u_estimate = 0.5 * (lo + hi);
  r.p_lo = p(lo);
  r.p_hi = p(hi);
  // Distribution-free interval for the quantile from order statistics.
  const double n = double(r.reps);
  const double half = 1.959963984540054 * std::sqrt(n * theta * (1 - theta));
  const auto rank = [&](double k) {
    const double c = std::clamp(std::floor(k), 0.0, n - 1);
    return s.thresholds[std::size_t(c)];
  };
  r.ci_lo = rank(n * theta - half);
  r.ci_hi = rank(std::ceil(n * theta + half));
  r.widened = (r.ci_hi - r.ci_lo) > (hi - lo);
  return r;
}

UStarProxy bisect_u_star(int d, double T, Coord N, double theta, double tol, std::uint64_t reps, RngStream rng,
                         const BisectOptions& opt) {
  const double u0 = opt.u0 > 0 ? opt.u0 : 0.05 / f_d(d, std::max(T, 2.0));
  const ThresholdSample s = crossing_thresholds(d, T, N, reps, rng, opt.u_max, opt.crossing);
  if (s.censored) log_warn(std::to_string(s.censored) + " replicates ran out of budget and count as not crossing");
  return bisect_u_star(s, T, N, theta, tol, u0, opt.max_doublings);
}

LinearFit fit_exponent(const std::vector<double>& T, const std::vector<double>& u) {
  if (T.size() != u.size() || T.size() < 2) throw std::invalid_argument("fit needs matching grids of size >= 2");
  std::vector<double> x, y;
  for (std::size_t i = 0; i < T.size(); ++i) {
    if (!(T[i] > 0) || !(u[i] > 0)) throw std::invalid_argument("fit needs positive T and u");
    x.push_back(std::log(T[i]));
    y.push_back(std::log(u[i]));
  }
  return least_squares(x, y);
}

ScalingResult scaling_study(int d, const std::vector<double>& T_grid, const ScalingParams& p, int workers) {
  if (T_grid.size() < 4) throw std::invalid_argument("scaling study needs at least 4 values of T");
  for (std::size_t i = 1; i < T_grid.size(); ++i)
    if (!(T_grid[i] > T_grid[i - 1])) throw std::invalid_argument("T grid must be increasing");
  ScalingResult out;
  out.d = d;
  const RngStream base(p.seed);
  for (double T : T_grid) {
    const auto t0 = std::chrono::steady_clock::now();
    ScalingRow row;
    const Coord N = std::max<Coord>(1, Coord(std::llround(p.k * double(n_T(T)))));
    BisectOptions b = p.bisect;
    b.crossing.workers = workers;
    try {
      row.proxy = bisect_u_star(d, T, N, p.theta, p.tol, p.reps, base.child(std::uint64_t(std::llround(T * 1024))), b);
    } catch (const std::exception& e) {
      out.error = e.what();
      out.failure = std::current_exception();
      break;
    }
    row.stderr_ = (row.proxy.ci_hi - row.proxy.ci_lo) / (2 * 1.959963984540054);
    row.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.rows.push_back(row);
  }
  if (out.rows.size() >= 2) {
    std::vector<double> Ts, us;
    for (const auto& r : out.rows) {
      Ts.push_back(r.proxy.T);
      us.push_back(r.proxy.u_estimate);
    }
    out.fit = fit_exponent(Ts, us);
  }
  if (d == 4 && !out.rows.empty()) {
    double mn = kInf, mx = 0;
    for (const auto& r : out.rows) {
      const double v = r.proxy.u_estimate * r.proxy.T / std::log(r.proxy.T);
      out.d4_ratio.push_back(v);
      mn = std::min(mn, v);
      mx = std::max(mx, v);
    }
    out.d4_spread = mx / mn;
  }
  return out;
}

void write_scaling_csv(std::ostream& o, const ScalingResult& r, const ScalingParams& p, bool header) {
  if (header) o << "d,T,N,theta,u_lo,u_hi,u_est,reps,seed,wall_time\n";
  for (const auto& row : r.rows) {
    const auto& x = row.proxy;
    o << r.d << ',' << fmt_double(x.T) << ',' << x.N << ',' << fmt_double(x.theta) << ',' << fmt_double(x.u_lo) << ','
      << fmt_double(x.u_hi) << ',' << fmt_double(x.u_estimate) << ',' << x.reps << ',' << p.seed << ',';
    if (p.record_wall_time) o << fmt_double(row.wall_time);
    o << '\n';
  }
}

void write_curve_csv(std::ostream& o, const CrossingCurve& c, int d, bool header) {
  if (header) o << "d,T,N,u,p,stderr,reps\n";
  for (const auto& pt : c.points)
    o << d << ',' << fmt_double(c.T) << ',' << c.N << ',' << fmt_double(pt.u) << ',' << fmt_double(pt.p.value) << ','
      << fmt_double(pt.p.stderr_) << ',' << c.reps << '\n';
}

}  // namespace fri
