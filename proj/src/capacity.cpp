#include "fri/capacity.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <sstream>

#include <Eigen/Dense>

#include "fri/log.hpp"
#include "fri/scaling.hpp"
#include "fri/walk.hpp"

namespace fri {

const char* to_string(CapMethod m) { return m == CapMethod::last_exit_solve ? "last_exit_solve" : "mc_escape"; }

double EscapeVector::at(const Point& x) const {
  auto it = std::lower_bound(sites.begin(), sites.end(), x);
  if (it == sites.end() || *it != x) throw std::out_of_range("site not in escape vector: " + x.str());
  return values[std::size_t(it - sites.begin())];
}

double EscapeVector::total() const {
  double s = 0;
  for (double v : values) s += v;
  return s;
}

namespace {

std::vector<Point> sorted_unique(const std::vector<Point>& A) {
  std::vector<Point> v = A;
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

void check_dims(const std::vector<Point>& A, const GreenTable& g) {
  for (const auto& p : A)
    if (p.d != g.dim()) throw DimensionError("set dimension differs from green table dimension");
}

// Solves M e = b for symmetric M; throws SolveError on failure.
Eigen::VectorXd spd_solve(const Eigen::MatrixXd& M, const Eigen::VectorXd& b, double tol, double* residual) {
  Eigen::VectorXd e;
  Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() == Eigen::Success) {
    e = llt.solve(b);
  } else {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
    if (ldlt.info() != Eigen::Success) throw SolveError("factorization failed");
    e = ldlt.solve(b);
  }
  const double res = (M * e - b).norm() / b.norm();
  if (residual) *residual = res;
  if (!(res <= tol)) {
    std::ostringstream os;
    os << "linear solve residual " << res << " above tolerance " << tol;
    throw SolveError(os.str());
  }
  return e;
}

void check_range(std::vector<double>& v) {
  for (double& x : v) {
    if (!(x > -1e-9 && x < 1 + 1e-9)) {
      std::ostringstream os;
      os << "escape value " << x << " outside [0,1]";
      throw SolveError(os.str());
    }
    x = std::clamp(x, 0.0, 1.0);  // rounding only; the check above bounds the change
  }
}

}  // namespace

EscapeVector escape_exact(const std::vector<Point>& A_in, const GreenTable& g, const SolverOptions& opt) {
  EscapeVector out;
  out.kill_mean = g.kill_mean();
  out.sites = sorted_unique(A_in);
  const std::size_t m = out.sites.size();
  if (m == 0) return out;
  check_dims(out.sites, g);
  if (m > opt.solver_cap) throw SolveError("set size " + std::to_string(m) + " exceeds solver cap");
  Eigen::MatrixXd G{Eigen::Index(m), Eigen::Index(m)};
  for (std::size_t i = 0; i < m; ++i) {
    G(Eigen::Index(i), Eigen::Index(i)) = g.value(Canonical{{}, out.sites[i].d});
    for (std::size_t j = 0; j < i; ++j) {
      const double v = g(out.sites[i], out.sites[j]);
      G(Eigen::Index(i), Eigen::Index(j)) = v;
      G(Eigen::Index(j), Eigen::Index(i)) = v;
    }
  }
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(Eigen::Index(m));
  const Eigen::VectorXd e = spd_solve(G, ones, opt.residual_tol, &out.residual);
  out.values.assign(e.data(), e.data() + m);
  check_range(out.values);
  return out;
}

EscapeVector escape_exact_reduced(const std::vector<Point>& A_in, const GreenTable& g, const SolverOptions& opt) {
  EscapeVector out;
  out.kill_mean = g.kill_mean();
  out.sites = sorted_unique(A_in);
  const std::size_t m = out.sites.size();
  if (m == 0) return out;
  check_dims(out.sites, g);
  SiteSet S(out.sites.front().d, out.sites);
  const std::vector<Point> bnd = inner_boundary(S);
  const std::size_t nb = bnd.size();
  if (nb > opt.solver_cap) throw SolveError("boundary size " + std::to_string(nb) + " exceeds solver cap");
  const double e_int = g.kill_mean().is_free() ? 0.0 : 1.0 / (g.kill_mean().T + 1.0);
  std::vector<Point> interior;
  {
    std::size_t bi = 0;
    for (const auto& p : out.sites) {
      if (bi < nb && bnd[bi] == p) {
        ++bi;
        continue;
      }
      interior.push_back(p);
    }
  }
  Eigen::MatrixXd G{Eigen::Index(nb), Eigen::Index(nb)};
  Eigen::VectorXd rhs = Eigen::VectorXd::Ones(Eigen::Index(nb));
  for (std::size_t i = 0; i < nb; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      const double v = g(bnd[i], bnd[j]);
      G(Eigen::Index(i), Eigen::Index(j)) = v;
      G(Eigen::Index(j), Eigen::Index(i)) = v;
    }
    if (e_int > 0) {
      double s = 0;
      for (const auto& y : interior) s += g(bnd[i], y);
      rhs(Eigen::Index(i)) -= e_int * s;
    }
  }
  const Eigen::VectorXd e = spd_solve(G, rhs, opt.residual_tol, &out.residual);
  out.values.assign(m, e_int);
  std::size_t bi = 0;
  for (std::size_t i = 0; i < m && bi < nb; ++i)
    if (out.sites[i] == bnd[bi]) out.values[i] = e(Eigen::Index(bi++));
  check_range(out.values);
  return out;
}

CapEstimate capacity_exact(const std::vector<Point>& A, const GreenTable& g, const SolverOptions& opt) {
  CapEstimate c;
  c.kill_mean = g.kill_mean();
  c.method = CapMethod::last_exit_solve;
  const auto pts = sorted_unique(A);
  c.set_size = pts.size();
  if (pts.empty()) return c;
  EscapeVector e;
  if (pts.size() <= opt.solver_cap) {
    e = escape_exact(pts, g, opt);
  } else {
    e = escape_exact_reduced(pts, g, opt);
    c.reduced = true;
  }
  c.value = e.total();
  c.residual = e.residual;
  return c;
}

// ---- Monte Carlo ----

namespace {

struct EscapeDraw {
  bool escaped = false;
  double phi = 0;  // c_d |X_tau - c|^{2-d} at the stopping point (free only)
};

template <typename Contains>
EscapeDraw escape_walk(const Contains& in, const Point& x, KillMean km, std::uint64_t horizon, double far2,
                       const double* center, double cd, RngStream& rng) {
  const int d = x.d;
  const std::uint32_t two_d = std::uint32_t(2 * d);
  Point p = x;
  EscapeDraw r;
  if (!km.is_free()) {
    const std::uint64_t life = rng.killed_lifetime(km.T);
    for (std::uint64_t i = 0; i < life; ++i) {
      apply_step(p, std::uint8_t(rng.below(two_d)));
      if (in(p)) return r;
    }
    r.escaped = true;
    return r;
  }
  auto dist2 = [&] {
    double s = 0;
    for (int i = 0; i < d; ++i) {
      const double t = double(p[i]) - center[i];
      s += t * t;
    }
    return s;
  };
  for (std::uint64_t i = 0; i < horizon; ++i) {
    apply_step(p, std::uint8_t(rng.below(two_d)));
    if (in(p)) return r;
    if (far2 > 0 && (i & 7) == 7 && dist2() >= far2) break;
  }
  r.escaped = true;
  if (cd > 0) r.phi = cd * std::pow(dist2(), 0.5 * (2.0 - d));
  return r;
}

struct Geometry {
  double center[kMaxDim] = {};
  double radius = 0;
};

Geometry geometry(const std::vector<Point>& A) {
  Geometry g;
  const int d = A.front().d;
  for (const auto& p : A)
    for (int i = 0; i < d; ++i) g.center[i] += p[i];
  for (int i = 0; i < d; ++i) g.center[i] /= double(A.size());
  for (const auto& p : A) {
    double s = 0;
    for (int i = 0; i < d; ++i) s += (p[i] - g.center[i]) * (p[i] - g.center[i]);
    g.radius = std::max(g.radius, std::sqrt(s));
  }
  return g;
}

// Combines per-walk escape indicators and far-field weights into a corrected
// capacity: cap = W * (R - cap * M) with R, M the means of esc and esc*phi,
// W the size of the set the walks are drawn uniformly from.
CapEstimate corrected_estimate(const std::vector<EscapeDraw>& draws, double weight, KillMean km) {
  CapEstimate c;
  c.kill_mean = km;
  c.method = CapMethod::mc_escape;
  const double n = double(draws.size());
  double R = 0, M = 0;
  for (const auto& dr : draws) {
    R += dr.escaped;
    M += dr.escaped ? dr.phi : 0.0;
  }
  R /= n;
  M /= n;
  const double cap_hat = weight * R / (1.0 + weight * M);
  RunningStats st;
  for (const auto& dr : draws) st.add(dr.escaped ? weight * (1.0 - cap_hat * dr.phi) : 0.0);
  c.value = st.mean();
  c.stderr_ = st.stderr_mean();
  c.bias_bound = 0.5 * cap_hat * weight * M;
  return c;
}

}  // namespace

EscapeMcResult escape_mc(const SiteSet& A, const Point& x, KillMean km, std::uint64_t reps, std::uint64_t horizon,
                         RngStream rng) {
  if (!A.contains(x)) throw std::invalid_argument("escape_mc: start not in A");
  if (km.is_free() && horizon < 1) throw std::invalid_argument("escape_mc: horizon must be >= 1");
  if (reps == 0) throw std::invalid_argument("escape_mc: reps must be >= 1");
  auto in = [&](const Point& p) { return A.contains(p); };
  std::uint64_t esc = 0;
  for (std::uint64_t r = 0; r < reps; ++r) {
    RngStream s = rng.child(r);
    esc += escape_walk(in, x, km, horizon, 0.0, nullptr, 0.0, s).escaped;
  }
  EscapeMcResult out;
  out.est = binomial_estimate(esc, reps);
  out.horizon = horizon;
  if (km.is_free()) out.bias_bound = std::min<double>(1.0, double(A.size()) * return_tail_bound(x.d, horizon));
  return out;
}

CapEstimate capacity_mc(const std::vector<Point>& A_in, KillMean km, const McOptions& opt, RngStream rng,
                        int workers) {
  const auto A = sorted_unique(A_in);
  CapEstimate c;
  c.kill_mean = km;
  c.method = CapMethod::mc_escape;
  c.set_size = A.size();
  if (A.empty()) return c;
  const int d = A.front().d;
  SiteSet S(d, A);
  const Geometry geo = geometry(A);
  const double far = std::max(opt.far_factor * geo.radius, opt.far_min);
  const double cd = km.is_free() ? green_asymptotic_constant(d) : 0.0;
  auto in = [&](const Point& p) { return S.contains(p); };
  const std::uint64_t reps = opt.reps_per_site;
  std::vector<EscapeDraw> draws(A.size() * reps);
  parallel_for(A.size(), workers, [&](std::size_t i) {
    RngStream s = rng.child(i);
    for (std::uint64_t r = 0; r < reps; ++r)
      draws[i * reps + r] = escape_walk(in, A[i], km, opt.horizon, km.is_free() ? far * far : 0.0, geo.center, cd, s);
  });
  CapEstimate est = corrected_estimate(draws, double(A.size()), km);
  est.set_size = A.size();
  return est;
}

CapEstimate capacity(const std::vector<Point>& A, KillMean km, CapMethod method, const GreenTable* g,
                     const CapacityBudget& budget, RngStream rng) {
  if (A.empty()) {
    CapEstimate c;
    c.kill_mean = km;
    c.method = method;
    return c;
  }
  if (method == CapMethod::last_exit_solve) {
    if (!g) throw std::invalid_argument("exact capacity needs a green table");
    if (!(g->kill_mean() == km)) throw std::invalid_argument("green table kill mean does not match");
    try {
      return capacity_exact(A, *g, budget.solver);
    } catch (const SolveError& e) {
      if (!budget.allow_mc_fallback) throw;
      log_warn(std::string("exact capacity failed (") + e.what() + "); using Monte-Carlo escape estimates");
    }
  }
  return capacity_mc(A, km, budget.mc, rng, budget.workers);
}

// ---- boxes ----

namespace {

// Orbit key of a box site under reflections and permutations.
Canonical box_key(const Point& p, Coord n) {
  Canonical k;
  k.d = p.d;
  for (int i = 0; i < p.d; ++i) k.c[i] = std::min(p[i], n - 1 - p[i]);
  std::sort(k.c.begin(), k.c.begin() + k.d);
  return k;
}

double binomial(double n, double k) {
  if (k < 0 || k > n) return 0;
  double r = 1;
  for (int i = 1; i <= int(k); ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace

CapEstimate box_capacity(int d, Coord n, KillMean km, const GreenTable* g, const BoxCapOptions& opt, RngStream rng) {
  if (n < 1) throw std::invalid_argument("box side must be positive");
  CapEstimate c;
  c.kill_mean = km;
  const double vol = std::pow(double(n), d);
  const double interior = n >= 2 ? std::pow(double(n - 2), d) : 0.0;
  const double bnd = vol - interior;
  c.set_size = std::uint64_t(vol);
  const Coord m = (n + 1) / 2;
  const double orbits = binomial(double(m + d - 2), double(d - 1));
  const bool exact = !opt.force_mc && g && orbits <= double(opt.orbit_cap) &&
                     orbits * bnd * (km.is_free() ? 1.0 : vol / bnd) <= opt.max_pair_work;
  if (exact) {
    if (g->dim() != d || !(g->kill_mean() == km)) throw std::invalid_argument("green table does not match box query");
    std::map<std::vector<Coord>, int> orbit_of;
    std::vector<Point> reps;
    std::vector<Point> bsites, isites;
    std::vector<int> bid;
    for_each_site(plain_box(Point(d), n), [&](const Point& p) {
      const Canonical k = box_key(p, n);
      if (k.c[0] != 0) {
        isites.push_back(p);
        return;
      }
      std::vector<Coord> key(k.c.begin(), k.c.begin() + d);
      auto [it, fresh] = orbit_of.emplace(key, int(reps.size()));
      if (fresh) reps.push_back(p);
      bsites.push_back(p);
      bid.push_back(it->second);
    });
    const std::size_t no = reps.size();
    std::vector<double> size(no, 0);
    for (int b : bid) size[std::size_t(b)] += 1;
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(Eigen::Index(no), Eigen::Index(no));
    Eigen::VectorXd rhs = Eigen::VectorXd::Ones(Eigen::Index(no));
    const double e_int = km.is_free() ? 0.0 : 1.0 / (km.T + 1.0);
    parallel_for(no, opt.workers, [&](std::size_t a) {
      for (std::size_t j = 0; j < bsites.size(); ++j) M(Eigen::Index(a), bid[j]) += (*g)(reps[a], bsites[j]);
      if (e_int > 0) {
        double s = 0;
        for (const auto& y : isites) s += (*g)(reps[a], y);
        rhs(Eigen::Index(a)) -= e_int * s;
      }
    });
    const Eigen::VectorXd e = M.partialPivLu().solve(rhs);
    c.residual = (M * e - rhs).norm() / rhs.norm();
    if (!(c.residual <= 1e-8)) throw SolveError("box capacity solve residual too large");
    double cap = e_int * double(isites.size());
    for (std::size_t b = 0; b < no; ++b) {
      if (!(e(Eigen::Index(b)) > -1e-9 && e(Eigen::Index(b)) < 1 + 1e-9)) throw SolveError("box escape value outside [0,1]");
      cap += size[b] * e(Eigen::Index(b));
    }
    c.value = cap;
    c.method = CapMethod::last_exit_solve;
    c.reduced = true;
    return c;
  }
  // Sampled boundary sites, far-field corrected escapes.
  const double center_v = 0.5 * double(n - 1);
  double center[kMaxDim];
  for (int i = 0; i < d; ++i) center[i] = center_v;
  const double radius = 0.5 * double(n) * std::sqrt(double(d));
  McOptions mo;
  const double far = std::max(mo.far_factor * radius, mo.far_min);
  const double cd = km.is_free() ? green_asymptotic_constant(d) : 0.0;
  auto in = [&](const Point& p) {
    for (int i = 0; i < d; ++i)
      if (p[i] < 0 || p[i] >= n) return false;
    return true;
  };
  const std::uint64_t N = opt.mc_samples;
  std::vector<EscapeDraw> draws(N);
  const std::uint64_t chunk = 4096;
  const std::size_t nchunks = std::size_t((N + chunk - 1) / chunk);
  parallel_for(nchunks, opt.workers, [&](std::size_t ci) {
    RngStream s = rng.child(ci);
    for (std::uint64_t i = ci * chunk; i < std::min<std::uint64_t>(N, (ci + 1) * chunk); ++i) {
      Point p(d);
      while (true) {
        bool on = false;
        for (int k = 0; k < d; ++k) {
          p[k] = Coord(s.below(std::uint32_t(n)));
          on = on || p[k] == 0 || p[k] == n - 1;
        }
        if (on) break;
      }
      draws[i] = escape_walk(in, p, km, mo.horizon, km.is_free() ? far * far : 0.0, center, cd, s);
    }
  });
  CapEstimate est = corrected_estimate(draws, bnd, km);
  if (!km.is_free()) est.value += double(interior) / (km.T + 1.0);
  est.set_size = std::uint64_t(vol);
  return est;
}

// ---- range statistics ----

namespace {

CapEstimate cap_with_fallback(const std::vector<Point>& A, const GreenTable& g, const CapacityBudget& budget,
                              RngStream rng, bool* fell_back) {
  try {
    return capacity_exact(A, g, budget.solver);
  } catch (const SolveError& e) {
    if (!budget.allow_mc_fallback) throw;
    if (fell_back) *fell_back = true;
    return capacity_mc(A, g.kill_mean(), budget.mc, rng, 1);
  }
}

}  // namespace

RangeCapStats range_capacity_stats(int d, double param, bool killed, std::uint64_t reps, RngStream rng,
                                   const GreenTable& g, const CapacityBudget& budget) {
  if (reps < 1) throw std::invalid_argument("range_capacity_stats needs reps >= 1");
  if (g.dim() != d) throw DimensionError("green table dimension mismatch");
  if (killed && !(g.kill_mean() == KillMean::killed(param)))
    throw std::invalid_argument("killed range statistics need the matching killed green table");
  if (!killed && !g.kill_mean().is_free()) throw std::invalid_argument("free range statistics need the free table");
  if (!(param >= 0)) throw std::invalid_argument("range parameter must be nonnegative");
  RangeCapStats out;
  out.values.assign(reps, 0);
  out.sizes.assign(reps, 0);
  std::vector<char> fb(reps, 0);
  std::vector<double> bias(reps, 0);
  parallel_for(reps, budget.workers, [&](std::size_t r) {
    RngStream s = rng.child(r);
    const std::uint64_t steps = killed ? s.killed_lifetime(param) : std::uint64_t(param);
    const Path p = sample_srw(Point(d), steps, s);
    SiteSet range(d);
    p.for_each_vertex([&](const Point& x) { range.insert(x); });
    const auto pts = range.sorted();
    bool f = false;
    const CapEstimate c = cap_with_fallback(pts, g, budget, s.child(1), &f);
    out.values[r] = c.value;
    out.sizes[r] = pts.size();
    fb[r] = f;
    bias[r] = c.bias_bound;
  });
  RunningStats m1, m2;
  for (std::size_t r = 0; r < reps; ++r) {
    m1.add(out.values[r]);
    m2.add(out.values[r] * out.values[r]);
    out.mc_fallbacks += fb[r];
    out.mean_bias_bound += bias[r] / double(reps);
  }
  out.mean = m1.estimate();
  out.second_moment = m2.estimate();
  return out;
}

StoppedUnionResult stopped_union_capacity(int d, int N, int n, const std::vector<Point>& starts, std::uint64_t reps,
                                          RngStream rng, const GreenTable& g, const CapacityBudget& budget) {
  if (N < 1 || n < 2) throw std::invalid_argument("stopped_union_capacity needs N >= 1 and n >= 2");
  if (starts.size() != std::size_t(N)) throw std::invalid_argument("need exactly N start points");
  if (!g.kill_mean().is_free()) throw std::invalid_argument("stopped union capacity uses the free green table");
  const std::uint64_t cap_steps = std::uint64_t(n) * std::uint64_t(n) / 2;
  std::vector<double> vals(reps, 0);
  parallel_for(reps, budget.workers, [&](std::size_t r) {
    RngStream s = rng.child(r);
    SiteSet U(d);
    const std::uint32_t two_d = std::uint32_t(2 * d);
    for (const auto& x0 : starts) {
      Point x = x0;
      U.insert(x);
      for (std::uint64_t j = 0; j < cap_steps; ++j) {
        apply_step(x, std::uint8_t(s.below(two_d)));
        U.insert(x);
        if (linf(x, x0) >= n) break;
      }
    }
    vals[r] = cap_with_fallback(U.sorted(), g, budget, s.child(1), nullptr).value;
  });
  StoppedUnionResult out;
  RunningStats st;
  for (double v : vals) st.add(v);
  out.mean = st.estimate();
  out.reps = reps;
  out.reference = std::min(double(N) * double(n) * f_d(d, double(n)), std::pow(double(n), d - 2));
  return out;
}

}  // namespace fri
