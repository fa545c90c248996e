#include "fri/explorer.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "fri/cluster.hpp"
#include "fri/format.hpp"
#include "fri/scaling.hpp"

namespace fri {

double ExploreConfig::intensity() const {
  if (u > 0) return u;
  if (C2 > 0) return C2 / f_d(d, T);
  return 0;
}

double ExploreConfig::threshold() const { return c1 * std::pow(double(n_T(T)), d - 2); }

void ExploreConfig::validate() const {
  if (d < 3 || d > kMaxDim) throw std::invalid_argument("explorer needs 3 <= d <= 8");
  if (!(T >= 1)) throw std::invalid_argument("explorer needs T >= 1");
  if (!(u >= 0) || !(C2 >= 0)) throw std::invalid_argument("intensity must be nonnegative");
  if (u == 0 && C2 > 0 && !(T > 1)) throw std::invalid_argument("C2 needs T > 1");
  if (!(c1 > 0)) throw std::invalid_argument("c1 must be positive");
  if (!(p_c2 > 0 && p_c2 < 1)) throw std::invalid_argument("p_c(2) must lie in (0,1)");
  if (M < 0) throw std::invalid_argument("M must be >= 0");
  if (max_steps < 0) throw std::invalid_argument("max_steps must be >= 0");
  if (box_spacing < 1) throw std::invalid_argument("box spacing must be >= 1");
  if (!(u_top >= 0)) throw std::invalid_argument("u_top must be nonnegative");
}

const char* to_string(CapDecision c) {
  switch (c) {
    case CapDecision::empty: return "empty";
    case CapDecision::size_bound: return "size_bound";
    case CapDecision::interior_bound: return "interior_bound";
    case CapDecision::exact: return "exact";
    case CapDecision::subset_bound: return "subset_bound";
    case CapDecision::chunk_bound: return "chunk_bound";
    case CapDecision::unresolved: return "unresolved";
  }
  return "?";
}

namespace {
// Small sets are solved outright so the log carries the capacity itself.
constexpr std::size_t kExactBelow = 1024;
}  // namespace

ThresholdCheck cap_threshold_check(const std::vector<Point>& A, double thr, const GreenTable& gT,
                                   const SolverOptions& opt) {
  ThresholdCheck r;
  if (A.empty()) {
    r.pass = thr <= 0;
    return r;
  }
  const double n = double(A.size());
  const double T = gT.kill_mean().T;
  if (A.size() <= kExactBelow) {
    const CapEstimate c = capacity_exact(A, gT, opt);
    r.value = c.value;
    r.pass = c.value >= thr;
    r.how = CapDecision::exact;
    return r;
  }
  // Es lies in [1/(T+1), 1] on A.
  if (n < thr) {
    r.value = n;
    r.how = CapDecision::size_bound;
    return r;
  }
  if (!gT.kill_mean().is_free() && n / (T + 1) >= thr) {
    r.pass = true;
    r.value = n / (T + 1);
    r.how = CapDecision::interior_bound;
    return r;
  }
  try {
    const CapEstimate c = capacity_exact(A, gT, opt);
    r.value = c.value;
    r.pass = c.value >= thr;
    r.how = CapDecision::exact;
    return r;
  } catch (const SolveError&) {
  }
  std::vector<Point> sorted = A;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t chunk = std::max<std::size_t>(1, opt.solver_cap);
  double upper = 0;
  bool upper_ok = true;
  for (std::size_t i = 0; i < sorted.size(); i += chunk) {
    const std::vector<Point> part(sorted.begin() + std::ptrdiff_t(i),
                                  sorted.begin() + std::ptrdiff_t(std::min(sorted.size(), i + chunk)));
    try {
      const double c = capacity_exact(part, gT, opt).value;
      if (i == 0 && c >= thr) {
        r.pass = true;
        r.value = c;
        r.how = CapDecision::subset_bound;
        return r;
      }
      upper += c;
    } catch (const SolveError&) {
      upper_ok = false;
      break;
    }
  }
  if (upper_ok && upper < thr) {
    r.value = upper;
    r.how = CapDecision::chunk_bound;
    return r;
  }
  r.resolved = false;
  r.how = CapDecision::unresolved;
  return r;
}

// ---- state ----

namespace {

constexpr int kSlabA = 1, kSlabB = 2;

bool covers_box(const std::vector<Trajectory>& ts, const LatticeBox& box, int d) {
  if (box.side <= 1) return !ts.empty();
  const EdgeSet E = edges_of(ts, d);
  bool ok = true;
  for_each_site(box, [&](const Point& p) {
    if (!ok) return;
    for (int a = 0; a < d; ++a)
      if (p[a] + 1 < box.hi(a) && !E.contains(Edge{p, a})) {
        ok = false;
        return;
      }
  });
  return ok;
}

void reveal(ExploreState& st, const Point& corner, const std::vector<Trajectory>& ts) {
  auto it = std::lower_bound(st.revealed.begin(), st.revealed.end(), corner);
  if (it != st.revealed.end() && *it == corner) throw std::logic_error("box sampled twice: " + corner.str());
  st.revealed.insert(it, corner);
  st.revealed_edges.merge(edges_of(ts, st.d));
}

std::string coords(const Point& p) {
  std::string s;
  for (int i = 0; i < p.d; ++i) {
    if (i) s += ';';
    s += std::to_string(p[i]);
  }
  return s;
}

}  // namespace

bool ExploreState::in_slab(const Point& y) const {
  if (!seeded || y.d != d || y[0] != m0) return false;
  for (int i = 3; i < d; ++i)
    if (y[i] != 0) return false;
  return true;
}

std::vector<Point> ExploreState::frontier() const {
  std::vector<Point> out;
  if (!seeded) return out;
  auto in = [](const std::vector<Point>& v, const Point& p) { return std::find(v.begin(), v.end(), p) != v.end(); };
  for (const auto& x : D)
    for (int a : {kSlabA, kSlabB})
      for (Coord s : {-1, 1}) {
        Point y = x;
        y[a] += s;
        if (!in(D, y) && !in(E, y)) out.push_back(y);
      }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Point ExploreState::box_corner(const Point& x) const { return x.scaled(Coord(spacing) * nT); }

bool ExploreState::check_invariants(std::string* why) const {
  auto fail = [&](const std::string& m) {
    if (why) *why = m;
    return false;
  };
  if (!seeded) {
    if (!D.empty() || !E.empty() || !J.empty()) return fail("unseeded state holds sites");
    return true;
  }
  for (const auto& x : D) {
    if (!in_slab(x)) return fail("accepted site off the slab: " + x.str());
    if (std::find(E.begin(), E.end(), x) != E.end()) return fail("site both accepted and rejected: " + x.str());
    if (!J.count(x)) return fail("accepted site without attachment: " + x.str());
  }
  for (const auto& x : E)
    if (!in_slab(x)) return fail("rejected site off the slab: " + x.str());
  if (J.size() != D.size()) return fail("attachment keys differ from accepted sites");
  if (D.empty() || D.front() != x0) return fail("seed site missing");
  // Everything attached must sit in one cluster of the revealed edges.
  std::vector<Point> all;
  for (const auto& [x, V] : J)
    V.for_each([&](const Point& p) { all.push_back(p); });
  if (all.size() <= 1) return true;
  const ClusterMap cm(revealed_edges);
  const auto id0 = cm.id(all.front());
  if (id0 < 0) return fail("attachment site not revealed: " + all.front().str());
  for (const auto& p : all)
    if (cm.id(p) != id0) return fail("attachment not connected to the seed box: " + p.str());
  return true;
}

std::uint64_t box_key(const Point& x) {
  std::uint64_t h = splitmix64(0x626f78ULL + std::uint64_t(x.d));
  for (int i = 0; i < x.d; ++i) h = splitmix64(h ^ std::uint64_t(std::uint32_t(x[i])));
  return h;
}

ExploreState find_seed_box(const ExploreConfig& cfg, RngStream base) {
  cfg.validate();
  ExploreState st;
  st.d = cfg.d;
  st.nT = n_T(cfg.T);
  st.spacing = cfg.box_spacing;
  st.revealed_edges = EdgeSet(cfg.d);
  const double u = cfg.intensity();
  StepOutcome out;
  out.threshold = 1;
  for (int m = 0; m <= cfg.M; ++m) {
    const Point x = unit(cfg.d, 0, 1).scaled(m);
    const LatticeBox box = plain_box(st.box_corner(x), st.nT);
    const FriSample s = sample_box_starts(cfg.d, u, cfg.T, box, base.child(box_key(x)), cfg.u_top);
    reveal(st, box.corner, s.trajectories);
    if (!st.seeded && covers_box(s.trajectories, box, cfg.d)) {
      st.seeded = true;
      st.m0 = m;
      st.x0 = x;
      out.x = x;
      out.paths = s.trajectories.size();
    }
  }
  if (st.seeded) {
    st.D.push_back(st.x0);
    st.J.emplace(st.x0, SiteSet(cfg.d, box_sites(plain_box(st.box_corner(st.x0), st.nT))));
    out.success = true;
    out.measured = 1;
  } else {
    out.x = unit(cfg.d, 0, 1).scaled(cfg.M);
  }
  out.how = CapDecision::exact;
  st.log.push_back(out);
  return st;
}

void explore_step(ExploreState& st, const ExploreConfig& cfg, const GreenTable& gT, RngStream base) {
  const auto fr = st.frontier();
  if (fr.empty()) throw ExploreError("frontier is empty");
  if (gT.dim() != cfg.d || !(gT.kill_mean() == KillMean::killed(cfg.T)))
    throw std::invalid_argument("explorer needs the killed green table at T");
  const Point x = fr.front();
  StepOutcome out;
  out.k = ++st.k;
  out.x = x;
  out.threshold = cfg.threshold();
  for (const auto& [z, A] : st.J)
    if (l1(z, x) == 1) {
      out.z = z;
      break;
    }
  const SiteSet& C = st.J.at(out.z);

  const LatticeBox box = plain_box(st.box_corner(x), st.nT);
  const FriSample s = sample_box_starts(cfg.d, cfg.intensity(), cfg.T, box, base.child(box_key(x)), cfg.u_top);
  reveal(st, box.corner, s.trajectories);

  SiteSet V(cfg.d);
  for (const auto& t : s.trajectories) {
    if (t.path.length() == 0) continue;
    bool hit = false;
    t.path.for_each_vertex([&](const Point& p) { hit = hit || C.contains(p); });
    if (!hit) continue;
    ++out.paths;
    t.path.for_each_vertex([&](const Point& p) { V.insert(p); });
  }
  const LatticeBox big = enlarged_box(box.corner, st.nT);
  std::vector<Point> A;
  V.for_each([&](const Point& p) {
    if (big.contains(p)) A.push_back(p);
  });
  std::sort(A.begin(), A.end());

  const ThresholdCheck chk = cap_threshold_check(A, out.threshold, gT);
  out.measured = chk.value;
  out.how = chk.how;
  if (!chk.resolved) {
    out.tainted = true;
    st.tainted = true;
    st.E.push_back(x);
  } else if (chk.pass) {
    out.success = true;
    st.D.push_back(x);
    st.J.emplace(x, std::move(V));
  } else {
    st.E.push_back(x);
  }
  st.log.push_back(out);
}

// ---- runs ----

namespace {

void summarize(ExploreReport& r, double p_plus) {
  for (const auto& o : r.state.log) {
    if (o.tainted) continue;
    ++r.trials;
    r.successes += o.success;
  }
  r.success_rate = r.trials ? double(r.successes) / double(r.trials) : 0.0;
  r.above_p_plus = !r.state.tainted && r.trials > 0 && r.success_rate > p_plus;
}

}  // namespace

ExploreReport run_exploration(const ExploreConfig& cfg, const GreenTable& gT) {
  cfg.validate();
  const RngStream base(cfg.seed);
  ExploreReport r;
  r.state = find_seed_box(cfg, base);
  if (!r.state.seeded) {
    r.stopped_at_step0 = true;
  } else {
    for (int k = 0; k < cfg.max_steps; ++k) {
      if (r.state.frontier().empty()) {
        r.frontier_exhausted = true;
        break;
      }
      explore_step(r.state, cfg, gT, base);
    }
  }
  summarize(r, cfg.p_plus());
  return r;
}

ExploreBatch run_explorations(const ExploreConfig& cfg, int runs, const GreenTable& gT, int workers) {
  if (runs < 0) throw std::invalid_argument("runs must be >= 0");
  cfg.validate();
  ExploreBatch b;
  b.runs.resize(std::size_t(runs));
  parallel_for(std::size_t(runs), workers, [&](std::size_t i) {
    ExploreConfig c = cfg;
    c.seed = cfg.seed + i;
    b.runs[i] = run_exploration(c, gT);
  });
  for (const auto& r : b.runs) {
    if (r.state.tainted) continue;
    ++b.untainted;
    b.above += r.above_p_plus;
  }
  b.fraction_above = b.untainted ? double(b.above) / double(b.untainted) : 0.0;
  return b;
}

CoupledCheck coupled_monotonicity(const ExploreReport& lo, const ExploreReport& hi) {
  CoupledCheck c;
  const auto& a = lo.state;
  const auto& b = hi.state;
  if (a.seeded && !b.seeded) {
    c.monotone = false;
    c.detail = "step 0 succeeded only at the lower intensity";
    return c;
  }
  if (a.seeded && b.m0 > a.m0) {
    c.monotone = false;
    c.detail = "seed box index larger at the higher intensity";
    return c;
  }
  if (!a.seeded || a.m0 != b.m0) return c;
  c.shared_steps = 1;
  const std::size_t n = std::min(a.log.size(), b.log.size());
  for (std::size_t k = 1; k < n; ++k) {
    const auto& p = a.log[k];
    const auto& q = b.log[k];
    if (p.x != q.x || p.z != q.z || p.tainted || q.tainted) break;
    ++c.shared_steps;
    if (p.success && !q.success) {
      c.monotone = false;
      c.detail = "step " + std::to_string(k) + " succeeded only at the lower intensity";
      return c;
    }
    if (p.how == CapDecision::exact && q.how == CapDecision::exact &&
        p.measured > q.measured * (1 + 1e-9) + 1e-12) {
      c.monotone = false;
      c.detail = "step " + std::to_string(k) + " capacity decreased with intensity";
      return c;
    }
    if (p.success != q.success) break;
  }
  return c;
}

Estimate step_success_probability(const ExploreConfig& cfg, std::uint64_t trials, const GreenTable& gT,
                                  int workers) {
  cfg.validate();
  // 0 = unseeded or tainted, 1 = failure, 2 = success.
  std::vector<int> res(trials, 0);
  parallel_for(trials, workers, [&](std::size_t i) {
    ExploreConfig c = cfg;
    c.seed = cfg.seed + i;
    const RngStream base(c.seed);
    ExploreState st = find_seed_box(c, base);
    if (!st.seeded) return;
    explore_step(st, c, gT, base);
    const auto& o = st.log.back();
    if (!o.tainted) res[i] = o.success ? 2 : 1;
  });
  std::uint64_t n = 0, s = 0;
  for (int v : res) {
    n += v > 0;
    s += v == 2;
  }
  return binomial_estimate(s, n);
}

void write_explore_csv(std::ostream& o, const ExploreReport& r, const std::string& run_id, bool header) {
  if (header) o << "run_id,k,x_k,z,capT,threshold,success,tainted\n";
  for (const auto& s : r.state.log)
    o << run_id << ',' << s.k << ',' << coords(s.x) << ',' << (s.k > 0 ? coords(s.z) : std::string()) << ','
      << fmt_double(s.measured) << ',' << fmt_double(s.threshold) << ',' << int(s.success) << ',' << int(s.tainted)
      << '\n';
}

Estimate hitting_union_capacity(int d, double T, double u_hat, const std::vector<Point>& A, std::uint64_t reps,
                                RngStream rng, const GreenTable& g_free, const CapacityBudget& budget) {
  if (!(T > 1) || !(u_hat >= 0)) throw std::invalid_argument("need T > 1 and u_hat >= 0");
  if (!g_free.kill_mean().is_free() || g_free.dim() != d) throw std::invalid_argument("needs the free green table");
  const Coord n = n_T(T);
  const LatticeBox near = enlarged_box(Point(d), n);
  for (const auto& a : A)
    if (!near.contains(a)) throw std::invalid_argument("A must lie in the enlarged box at 0");
  const SiteSet As(d, A);
  const Point corner = unit(d, 0, 1).scaled(10 * n);
  const LatticeBox box = plain_box(corner, n);
  const LatticeBox big = enlarged_box(corner, n);
  const std::uint64_t horizon = std::uint64_t(std::floor(2 * T));
  const std::uint64_t cut = std::uint64_t(std::floor(T));
  // Lengths are >= 2T with probability (T/(T+1))^ceil(2T).
  const double p_long = std::pow(T / (T + 1), std::ceil(2 * T));
  const double mean = 2.0 * d * (u_hat / f_d(d, T)) / (T + 1) * double(box.volume()) * p_long;
  std::vector<double> caps(reps, 0.0);
  parallel_for(reps, budget.workers, [&](std::size_t r) {
    RngStream s = rng.child(r);
    const std::uint64_t count = s.poisson(mean);
    SiteSet U(d);
    for (std::uint64_t j = 0; j < count; ++j) {
      Point x(d);
      for (int i = 0; i < d; ++i) x[i] = box.lo(i) + Coord(s.below(std::uint32_t(n)));
      const Path p = sample_srw(x, horizon, s);
      if (!hitting_time(p, As, HitVariant::first_hit).finite()) continue;
      // Keep η(0..H) with H = first exit from the enlarged box, capped at floor(T).
      std::uint64_t i = 0;
      bool done = false;
      p.for_each_vertex([&](const Point& v) {
        if (done) return;
        U.insert(v);
        done = !big.contains(v) || i == cut;
        ++i;
      });
    }
    if (U.empty()) return;
    const auto sites = U.sorted();
    try {
      caps[r] = capacity_exact(sites, g_free, budget.solver).value;
    } catch (const SolveError&) {
      if (!budget.allow_mc_fallback) throw;
      caps[r] = capacity_mc(sites, KillMean::free_walk(), budget.mc, s.child(1)).value;
    }
  });
  RunningStats st;
  for (double c : caps) st.add(c);
  return st.estimate();
}

}  // namespace fri
