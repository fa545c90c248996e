#include "commands.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <sstream>

#include "fri/calibration.hpp"
#include "fri/cluster.hpp"
#include "fri/critical.hpp"
#include "fri/errors.hpp"
#include "fri/explorer.hpp"
#include "fri/format.hpp"
#include "fri/log.hpp"
#include "fri/sampler.hpp"
#include "fri/scaling.hpp"

namespace fri {

namespace {

using ojson = nlohmann::ordered_json;

class Params {
 public:
  explicit Params(const RawParams& raw) : raw_(raw) {}

  ojson resolved = ojson::object();

  std::int64_t integer(const std::string& k, std::int64_t def, std::int64_t lo, std::int64_t hi) {
    std::int64_t v = def;
    if (auto s = take(k)) {
      const char* b = s->data();
      const char* e = b + s->size();
      auto [p, ec] = std::from_chars(b, e, v);
      if (ec != std::errc() || p != e) bad(k, *s, "an integer");
    }
    if (v < lo || v > hi) range(k, std::to_string(lo) + ".." + std::to_string(hi));
    resolved[k] = v;
    return v;
  }

  std::uint64_t seed(const std::string& k, std::uint64_t def) {
    std::uint64_t v = def;
    if (auto s = take(k)) {
      const char* b = s->data();
      const char* e = b + s->size();
      auto [p, ec] = std::from_chars(b, e, v);
      if (ec != std::errc() || p != e) bad(k, *s, "an unsigned integer");
    }
    resolved[k] = v;
    return v;
  }

  // Closed range [lo, hi] unless lo_open.
  double real(const std::string& k, double def, double lo, double hi, bool lo_open = false) {
    double v = def;
    if (auto s = take(k)) v = parse_real(k, *s);
    check_real(k, v, lo, hi, lo_open);
    resolved[k] = v;
    return v;
  }

  std::vector<double> reals(const std::string& k, std::vector<double> def, double lo, double hi, bool lo_open = false) {
    std::vector<double> v = std::move(def);
    if (auto s = take(k)) {
      v.clear();
      for (const auto& item : split(*s, ',')) v.push_back(parse_real(k, item));
    }
    if (v.empty()) throw ConfigError(k + " must not be empty");
    for (double x : v) check_real(k, x, lo, hi, lo_open);
    resolved[k] = v;
    return v;
  }

  bool flag(const std::string& k, bool def) {
    bool v = def;
    if (auto s = take(k)) {
      if (*s == "true" || *s == "1" || *s == "yes") v = true;
      else if (*s == "false" || *s == "0" || *s == "no") v = false;
      else bad(k, *s, "a boolean");
    }
    resolved[k] = v;
    return v;
  }

  std::string choice(const std::string& k, const std::string& def, const std::vector<std::string>& allowed) {
    std::string v = def;
    if (auto s = take(k)) v = *s;
    if (std::find(allowed.begin(), allowed.end(), v) == allowed.end()) {
      std::string all;
      for (const auto& a : allowed) all += (all.empty() ? "" : "|") + a;
      throw ConfigError(k + " must be one of " + all + ", got '" + v + "'");
    }
    resolved[k] = v;
    return v;
  }

  std::string text(const std::string& k, const std::string& def) {
    std::string v = def;
    if (auto s = take(k)) v = *s;
    resolved[k] = v;
    return v;
  }

  // T = "inf" selects the free walk.
  KillMean kill_mean(const std::string& k, const std::string& def) {
    std::string s = def;
    if (auto v = take(k)) s = *v;
    if (s == "inf" || s == "free") {
      resolved[k] = "inf";
      return KillMean::free_walk();
    }
    const double T = parse_real(k, s);
    check_real(k, T, 0, 1e12, true);
    resolved[k] = T;
    return KillMean::killed(T);
  }

  std::vector<Point> points(const std::string& k, int d) {
    std::vector<Point> out;
    auto s = take(k);
    if (!s) throw ConfigError(k + " is required");
    for (const auto& item : split(*s, ';')) {
      const auto cs = split(item, ',');
      if (int(cs.size()) != d) throw ConfigError(k + ": point '" + item + "' does not have " + std::to_string(d) + " coordinates");
      Point p(d);
      for (int i = 0; i < d; ++i) {
        const char* b = cs[std::size_t(i)].data();
        const char* e = b + cs[std::size_t(i)].size();
        auto [q, ec] = std::from_chars(b, e, p[i]);
        if (ec != std::errc() || q != e) bad(k, item, "integer coordinates");
      }
      out.push_back(p);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    resolved[k] = *s;
    return out;
  }

  bool has(const std::string& k) const { return raw_.count(k) > 0; }

  void finish() const {
    for (const auto& [k, v] : raw_)
      if (!used_.count(k)) throw ConfigError("unknown parameter '" + k + "'");
  }

 private:
  std::optional<std::string> take(const std::string& k) {
    used_.insert(k);
    auto it = raw_.find(k);
    if (it == raw_.end()) return std::nullopt;
    return it->second;
  }
  static std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) {
      const auto b = cur.find_first_not_of(" \t");
      const auto e = cur.find_last_not_of(" \t");
      if (b != std::string::npos) out.push_back(cur.substr(b, e - b + 1));
    }
    return out;
  }
  [[noreturn]] static void bad(const std::string& k, const std::string& v, const char* what) {
    throw ConfigError(k + " must be " + what + ", got '" + v + "'");
  }
  [[noreturn]] static void range(const std::string& k, const std::string& r) {
    throw ConfigError(k + " out of range (" + r + ")");
  }
  static double parse_real(const std::string& k, const std::string& s) {
    double v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v)) bad(k, s, "a finite number");
    return v;
  }
  static void check_real(const std::string& k, double v, double lo, double hi, bool lo_open) {
    if (lo_open ? !(v > lo) : !(v >= lo)) range(k, (lo_open ? "> " : ">= ") + fmt_double(lo));
    if (!(v <= hi)) range(k, "<= " + fmt_double(hi));
  }

  const RawParams& raw_;
  std::set<std::string> used_;
};

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex16(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

struct Run {
  const CommandEnv& env;
  CommandResult& res;
  std::vector<std::pair<std::string, std::string>> files;
  GreenCache cache;
  std::string cache_dir;

  void add(std::string name, std::string content) { files.emplace_back(std::move(name), std::move(content)); }

  std::shared_ptr<const GreenTable> table(int d, KillMean km) {
    try {
      return cache.get(d, km);
    } catch (const CacheMissing&) {
    }
    if (!env.mc_fallback)
      throw CacheMissing("no green table for d=" + std::to_string(d) + ", T=" + km.str() + " in '" + cache_dir +
                         "'; run calibrate first or pass --mc-fallback");
    log_warn("building the green table for d=" + std::to_string(d) + ", T=" + km.str() + " in memory");
    auto t = std::make_shared<GreenTable>(build_green_quadrature(d, km, default_green_radius(d)));
    cache.put(t);
    return t;
  }

  CalibrationConstants constants(int d) {
    const std::string path = (std::filesystem::path(cache_dir) / ("constants_d" + std::to_string(d) + ".json")).string();
    if (!std::filesystem::exists(path))
      throw CacheMissing("no calibration constants at '" + path + "'; run calibrate first or set c1");
    return load_constants(path);
  }

  CapacityBudget budget() const {
    CapacityBudget b;
    b.allow_mc_fallback = env.mc_fallback;
    b.workers = env.workers;
    return b;
  }

  void commit() {
    std::error_code ec;
    std::filesystem::create_directories(env.out_dir, ec);
    if (ec) throw IoError("cannot create output directory '" + env.out_dir + "': " + ec.message());
    for (const auto& [name, content] : files) {
      const auto path = std::filesystem::path(env.out_dir) / name;
      std::ofstream f(path, std::ios::binary);
      if (!f) throw IoError("cannot write " + path.string());
      f << content;
      if (!f) throw IoError("write failed: " + path.string());
      res.outputs.push_back(name);
    }
  }
};

// Everything a command does once its parameters are validated.
using Body = std::function<void(Run&)>;
using Parser = std::function<Body(Params&)>;

int dim(Params& p, int def = 3) { return int(p.integer("d", def, 3, kMaxDim)); }

Coord crossing_N(Params& p, double T) {
  const auto N = p.integer("N", 0, 0, 1 << 20);
  const double k = p.real("k", 4, 0, 1e6, true);
  if (N > 0) return Coord(N);
  return std::max<Coord>(1, Coord(std::llround(k * double(n_T(T)))));
}

// ---- sample ----

Body parse_sample(Params& p) {
  FriConfig c;
  c.d = dim(p);
  c.u = p.real("u", 0.01, 0, 1e9);
  c.T = p.real("T", 16, 1, 1e9);
  const Coord side = Coord(p.integer("window_side", std::max<Coord>(8, 4 * n_T(c.T)), 1, 1 << 16));
  const Coord lo = Coord(p.integer("window_lo", -side / 2, -(1 << 20), 1 << 20));
  Point corner(c.d);
  for (int i = 0; i < c.d; ++i) corner[i] = lo;
  c.window = plain_box(corner, side);
  c.padding_radius = int(p.integer("padding", -1, -1, 1 << 16));
  c.report_tol = p.real("report_tol", 1e-3, 0, 1, true);
  c.u_top = p.real("u_top", 0, 0, 1e9);
  c.seed = p.seed("seed", 1);
  const Coord N = Coord(p.integer("crossing_N", 0, 0, 1 << 16));
  c.validate();
  return [c, N](Run& r) {
    const FriSample s = sample_window(c, r.env.workers);
    std::ostringstream bin;
    save_sample(s, bin);
    const EdgeSet E = edges_of(s);
    const ClusterMap cm(E);
    std::uint64_t largest = 0;
    for (auto z : cm.sizes()) largest = std::max(largest, z);
    std::ostringstream csv;
    csv << "d,u,T,window_lo,window_side,padding,t_star,bound,trajectories,edges,clusters,largest_cluster,crossing_N,"
           "crossing\n";
    int cross = -1;
    if (N > 0) cross = crossing(s, N) ? 1 : 0;
    csv << c.d << ',' << fmt_double(c.u) << ',' << fmt_double(c.T) << ',' << c.window.corner[0] << ','
        << c.window.side << ',' << s.report.padding << ',' << fmt_double(s.report.t_star) << ','
        << fmt_double(s.report.bound) << ',' << s.trajectories.size() << ',' << E.size() << ','
        << cm.cluster_count() << ',' << largest << ',' << N << ',' << (cross < 0 ? std::string() : std::to_string(cross))
        << '\n';
    r.add("sample.fri", bin.str());
    r.add("sample.csv", csv.str());
    r.res.summary["trajectories"] = s.trajectories.size();
    r.res.summary["padding"] = s.report.padding;
    r.res.summary["truncation_bound"] = s.report.bound;
    if (cross >= 0) r.res.summary["crossing"] = bool(cross);
  };
}

// ---- capacity ----

Body parse_capacity(Params& p) {
  const int d = dim(p);
  const KillMean km = p.kill_mean("T", "inf");
  const std::string set = p.choice("set", "box", {"box", "points", "random"});
  std::vector<Point> A;
  Coord n = 0;
  if (set == "box") {
    n = Coord(p.integer("n", 4, 1, 4096));
  } else if (set == "points") {
    A = p.points("points", d);
  } else {
    const auto size = p.integer("size", 10, 1, 100000);
    const auto radius = p.integer("radius", 3, 0, 1 << 16);
    const auto seed = p.seed("set_seed", 7);
    double vol = 1;
    for (int i = 0; i < d; ++i) vol *= double(2 * radius + 1);
    if (double(size) > vol) throw ConfigError("size exceeds the number of sites within radius");
    RngStream g(seed);
    SiteSet S(d);
    while (S.size() < std::size_t(size)) {
      Point x(d);
      for (int i = 0; i < d; ++i) x[i] = Coord(g.below(std::uint32_t(2 * radius + 1))) - Coord(radius);
      S.insert(x);
    }
    A = S.sorted();
  }
  const std::string method = p.choice("method", "auto", {"auto", "exact", "mc"});
  const auto reps = p.integer("mc_reps", 2000, 1, 1LL << 40);
  const auto seed = p.seed("seed", 1);
  return [=](Run& r) {
    CapEstimate e;
    CapacityBudget b = r.budget();
    b.mc.reps_per_site = std::uint64_t(reps);
    const RngStream rng(seed);
    std::string label = set;
    if (set == "box") {
      BoxCapOptions o;
      o.force_mc = method == "mc";
      o.workers = r.env.workers;
      std::shared_ptr<const GreenTable> g;
      if (method != "mc") g = r.table(d, km);
      e = box_capacity(d, n, km, g.get(), o, rng);
      label = "box" + std::to_string(n);
    } else if (method == "mc") {
      e = capacity_mc(A, km, b.mc, rng, r.env.workers);
    } else {
      const auto g = r.table(d, km);
      if (method == "exact") {
        e = capacity_exact(A, *g, b.solver);
      } else {
        e = capacity(A, km, CapMethod::last_exit_solve, g.get(), b, rng);
      }
    }
    std::ostringstream csv;
    csv << "d,T,set,size,method,value,stderr,bias_bound,residual\n";
    csv << d << ',' << (km.is_free() ? std::string("inf") : fmt_double(km.T)) << ',' << label << ',' << e.set_size
        << ',' << to_string(e.method) << ',' << fmt_double(e.value) << ',' << fmt_double(e.stderr_) << ','
        << fmt_double(e.bias_bound) << ',' << fmt_double(e.residual) << '\n';
    r.add("capacity.csv", csv.str());
    r.res.summary["capacity"] = e.value;
    r.res.summary["stderr"] = e.stderr_;
    r.res.summary["method"] = to_string(e.method);
  };
}

// ---- range-cap ----

Body parse_range_cap(Params& p) {
  const int d = dim(p);
  const bool killed = p.flag("killed", false);
  const std::vector<double> grid =
      killed ? p.reals("grid", {16, 64, 256}, 1, 1e7, true) : p.reals("grid", {64, 128, 256, 512, 1024}, 2, 1e7);
  const auto reps = p.integer("reps", 200, 2, 1LL << 32);
  const auto seed = p.seed("seed", 1);
  return [=](Run& r) {
    const RngStream root(seed);
    std::ostringstream csv;
    csv << "d,killed,param,reps,mean,stderr,second_moment,second_stderr,F_d,ratio\n";
    std::vector<double> lx, ly;
    double worst = 0;
    std::uint64_t fallbacks = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double a = grid[i];
      const auto g = r.table(d, killed ? KillMean::killed(a) : KillMean::free_walk());
      const RangeCapStats s = range_capacity_stats(d, a, killed, std::uint64_t(reps), root.child(i), *g, r.budget());
      const double F = f_d(d, a);
      csv << d << ',' << int(killed) << ',' << fmt_double(a) << ',' << reps << ',' << fmt_double(s.mean.value) << ','
          << fmt_double(s.mean.stderr_) << ',' << fmt_double(s.second_moment.value) << ','
          << fmt_double(s.second_moment.stderr_) << ',' << fmt_double(F) << ',' << fmt_double(s.mean.value / F)
          << '\n';
      lx.push_back(std::log(a));
      ly.push_back(std::log(s.mean.value));
      worst = std::max(worst, s.second_moment.value / (s.mean.value * s.mean.value));
      fallbacks += s.mc_fallbacks;
    }
    r.add("range_cap.csv", csv.str());
    if (grid.size() >= 2) {
      const LinearFit f = least_squares(lx, ly);
      r.res.summary["slope"] = f.slope;
      r.res.summary["slope_ci"] = {f.slope_ci_lo, f.slope_ci_hi};
    }
    r.res.summary["max_second_over_first_sq"] = worst;
    r.res.summary["mc_fallbacks"] = fallbacks;
  };
}

CrossingOptions crossing_options(Params& p) {
  CrossingOptions o;
  o.method = p.choice("method", "growth", {"growth", "window"}) == "growth" ? CrossingMethod::growth
                                                                          : CrossingMethod::window;
  o.rooted = p.flag("rooted", true);
  o.growth.step_budget = std::uint64_t(p.integer("step_budget", 4000000000LL, 1000, 1LL << 50));
  return o;
}

// ---- crossing ----

Body parse_crossing(Params& p) {
  const int d = dim(p);
  const double T = p.real("T", 16, 1, 1e9);
  const Coord N = crossing_N(p, T);
  const std::vector<double> us = p.reals("u_grid", {}, 0, 1e6, true);
  const auto reps = p.integer("reps", 200, 1, 1LL << 32);
  const auto seed = p.seed("seed", 1);
  const CrossingOptions o = crossing_options(p);
  return [=](Run& r) {
    CrossingOptions oo = o;
    oo.workers = r.env.workers;
    const CrossingCurve c = crossing_curve(d, T, N, us, std::uint64_t(reps), RngStream(seed), oo);
    std::ostringstream csv;
    write_curve_csv(csv, c, d);
    r.add("crossing.csv", csv.str());
    r.res.summary["N"] = N;
    auto& pts = r.res.summary["p"] = ojson::array();
    for (const auto& pt : c.points) pts.push_back(pt.p.value);
  };
}

ScalingParams scaling_params(Params& p) {
  ScalingParams s;
  s.theta = p.real("theta", 0.5, 0, 1, true);
  if (!(s.theta < 1)) throw ConfigError("theta must be < 1");
  s.tol = p.real("tol", 0.05, 0, 1, true);
  s.reps = std::uint64_t(p.integer("reps", 400, 10, 1LL << 32));
  s.seed = p.seed("seed", 1);
  s.bisect.u0 = p.real("u0", 0, 0, 1e6);
  s.bisect.max_doublings = int(p.integer("max_doublings", 40, 1, 200));
  s.bisect.u_max = p.real("u_max", 1e3, 0, 1e9, true);
  s.bisect.crossing = crossing_options(p);
  return s;
}

void proxy_summary(ojson& j, const UStarProxy& x) {
  j["u_est"] = x.u_estimate;
  j["u_lo"] = x.u_lo;
  j["u_hi"] = x.u_hi;
  j["quantile_ci"] = {x.ci_lo, x.ci_hi};
  j["widened"] = x.widened;
  j["censored"] = x.censored;
}

// ---- bisect ----

Body parse_bisect(Params& p) {
  const int d = dim(p);
  const double T = p.real("T", 16, 1, 1e9);
  const Coord N = crossing_N(p, T);
  ScalingParams s = scaling_params(p);
  s.record_wall_time = p.flag("record_wall_time", false);
  return [=](Run& r) {
    BisectOptions b = s.bisect;
    b.crossing.workers = r.env.workers;
    const auto t0 = std::chrono::steady_clock::now();
    ScalingResult res;
    res.d = d;
    ScalingRow row;
    row.proxy = bisect_u_star(d, T, N, s.theta, s.tol, s.reps, RngStream(s.seed), b);
    row.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    res.rows.push_back(row);
    std::ostringstream csv;
    write_scaling_csv(csv, res, s);
    r.add("bisect.csv", csv.str());
    proxy_summary(r.res.summary, row.proxy);
  };
}

// ---- scaling ----

Body parse_scaling(Params& p) {
  const int d = dim(p);
  const std::vector<double> def = d == 5 ? std::vector<double>{16, 32, 64, 128} : std::vector<double>{16, 32, 64, 128, 256};
  const std::vector<double> grid = p.reals("T_grid", def, 1, 1e9);
  ScalingParams s = scaling_params(p);
  s.k = p.real("k", 4, 0, 1e6, true);
  s.record_wall_time = p.flag("record_wall_time", false);
  if (grid.size() < 4) throw ConfigError("T_grid needs at least 4 values");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) throw ConfigError("T_grid must be increasing");
  return [=](Run& r) {
    const ScalingResult res = scaling_study(d, grid, s, r.env.workers);
    if (res.failure) std::rethrow_exception(res.failure);
    std::ostringstream csv;
    write_scaling_csv(csv, res, s);
    r.add("scaling.csv", csv.str());
    r.res.summary["slope"] = res.fit.slope;
    r.res.summary["slope_ci"] = {res.fit.slope_ci_lo, res.fit.slope_ci_hi};
    if (d == 4) {
      r.res.summary["d4_ratio"] = res.d4_ratio;
      r.res.summary["d4_spread"] = res.d4_spread;
    }
  };
}

// ---- layers ----

Body parse_layers(Params& p) {
  const int d = dim(p, 5);
  const double v = p.real("v", 0.02, 0, 1e6, true);
  const double T = p.real("T", 64, 1, 1e9, true);
  if (!(T > 1)) throw ConfigError("T must be > 1");
  std::vector<Point> K{Point(d)};
  if (p.has("K")) K = p.points("K", d);
  else p.resolved["K"] = "origin";
  const int k_max = int(p.integer("k_max", 5, 1, 64));
  const auto reps = p.integer("reps", 500, 2, 1LL << 32);
  const bool condition = p.flag("condition_first_layer", true);
  const auto seed = p.seed("seed", 1);
  return [=](Run& r) {
    const auto g = r.table(d, KillMean::killed(T));
    LayerSeriesOptions o;
    o.condition_first_layer = condition;
    o.workers = r.env.workers;
    const LayerSeries s = layer_capacity_series(d, v, T, K, k_max, std::uint64_t(reps), RngStream(seed), *g, r.budget(), o);
    std::ostringstream csv;
    write_layer_csv(csv, s, r.res.run_id);
    r.add("layers.csv", csv.str());
    r.res.summary["ratio"] = s.ratio;
    r.res.summary["ratio_ci"] = {s.ratio_lo, s.ratio_hi};
    r.res.summary["fit_points"] = s.fit_points;
    r.res.summary["mc_fallbacks"] = s.mc_fallbacks;
  };
}

// ---- explore ----

Body parse_explore(Params& p) {
  ExploreConfig c;
  c.d = dim(p);
  c.T = p.real("T", 16, 1, 1e9);
  c.u = p.real("u", 0, 0, 1e9);
  c.C2 = p.real("C2", 0, 0, 1e12);
  c.M = int(p.integer("M", 8, 0, 1 << 20));
  c.c1 = p.real("c1", 0, 0, 1e9);  // 0: take c1_hat from the calibration constants
  c.p_c2 = p.real("p_c2", 0.5927, 0, 1, true);
  c.max_steps = int(p.integer("max_steps", 50, 0, 1 << 24));
  c.box_spacing = int(p.integer("box_spacing", 10, 1, 1 << 10));
  c.u_top = p.real("u_top", 0, 0, 1e9);
  c.seed = p.seed("seed", 1);
  const int runs = int(p.integer("runs", 10, 1, 1 << 20));
  if (!(c.p_c2 < 1)) throw ConfigError("p_c2 must be < 1");
  {
    ExploreConfig probe = c;
    if (!(probe.c1 > 0)) probe.c1 = 1;
    probe.validate();
  }
  return [=](Run& r) {
    ExploreConfig cc = c;
    if (!(cc.c1 > 0)) {
      cc.c1 = r.constants(cc.d).c1_hat.value;
      r.res.summary["c1_from_constants"] = cc.c1;
    }
    const auto g = r.table(cc.d, KillMean::killed(cc.T));
    const ExploreBatch b = run_explorations(cc, runs, *g, r.env.workers);
    std::ostringstream log, runs_csv;
    runs_csv << "run_id,seed,seeded,m0,trials,successes,rate,above_p_plus,tainted\n";
    for (std::size_t i = 0; i < b.runs.size(); ++i) {
      const auto& x = b.runs[i];
      const std::string id = r.res.run_id + "-" + std::to_string(i);
      write_explore_csv(log, x, id, i == 0);
      runs_csv << id << ',' << cc.seed + i << ',' << int(x.state.seeded) << ',' << x.state.m0 << ',' << x.trials << ','
               << x.successes << ',' << fmt_double(x.success_rate) << ',' << int(x.above_p_plus) << ','
               << int(x.state.tainted) << '\n';
    }
    r.add("explore.csv", log.str());
    r.add("explore_runs.csv", runs_csv.str());
    r.res.summary["p_plus"] = cc.p_plus();
    r.res.summary["fraction_above_p_plus"] = b.fraction_above;
    r.res.summary["untainted_runs"] = b.untainted;
  };
}

// ---- calibrate ----

Body parse_calibrate(Params& p) {
  const int d = dim(p);
  CalibrationOptions o;
  o.seed = p.seed("seed", 1);
  {
    const auto v = p.reals("box_n", {4, 8, 16, 32}, 1, 4096);
    o.box_n.assign(v.begin(), v.end());
  }
  o.range_n = p.reals("range_n", {64, 128, 256}, 2, 1e7);
  o.range_reps = std::uint64_t(p.integer("range_reps", 100, 2, 1LL << 32));
  o.killed_T = p.reals("killed_T", {16, 64}, 1, 1e7, true);
  o.killed_reps = std::uint64_t(p.integer("killed_reps", 100, 2, 1LL << 32));
  {
    const auto v = p.reals("stopped_N", {1, 4, 16}, 1, 1e6);
    o.stopped_N.assign(v.begin(), v.end());
  }
  o.stopped_n = int(p.integer("stopped_n", 16, 2, 1 << 16));
  o.stopped_reps = std::uint64_t(p.integer("stopped_reps", 50, 2, 1LL << 32));
  o.c6_T = p.real("c6_T", 16, 1, 1e7, true);
  o.c6_u_hat = p.real("c6_u_hat", 1, 0, 1e9, true);
  o.c6_reps = std::uint64_t(p.integer("c6_reps", 200, 1, 1LL << 32));
  // Extra killed tables to cache for later commands.
  const std::vector<double> table_T = p.reals("table_T", {16, 64}, 1, 1e7, true);
  return [=](Run& r) {
    std::set<double> Ts(table_T.begin(), table_T.end());
    Ts.insert(o.killed_T.begin(), o.killed_T.end());
    std::vector<KillMean> kms{KillMean::free_walk()};
    for (double T : Ts) kms.push_back(KillMean::killed(T));
    ojson tables = ojson::array();
    for (const auto& km : kms) {
      if (!r.cache.on_disk(d, km)) {
        auto t = std::make_shared<GreenTable>(build_green_quadrature(d, km, default_green_radius(d)));
        t->set_manifest(ojson{{"run_id", r.res.run_id}, {"command", "calibrate"}, {"params", r.res.params}}.dump());
        std::filesystem::create_directories(r.cache_dir);
        t->save(r.cache.file_for(d, km));
        r.cache.put(t);
      }
      tables.push_back(r.cache.file_for(d, km));
    }
    CalibrationOptions oo = o;
    oo.budget = r.budget();
    oo.budget.allow_mc_fallback = true;
    oo.box.workers = r.env.workers;
    CalibrationConstants c = calibrate(d, oo, r.cache);
    c.provenance = r.res.run_id;
    const std::string json = constants_to_json(c) + "\n";
    const auto path = std::filesystem::path(r.cache_dir) / ("constants_d" + std::to_string(d) + ".json");
    save_constants(c, path.string());
    r.add("constants.json", json);
    r.res.summary["constants_file"] = path.string();
    r.res.summary["green_tables"] = tables;
    r.res.summary["c1_hat"] = c.c1_hat.value;
  };
}

const std::map<std::string, Parser>& registry() {
  static const std::map<std::string, Parser> m{
      {"sample", parse_sample},     {"capacity", parse_capacity}, {"range-cap", parse_range_cap},
      {"crossing", parse_crossing}, {"bisect", parse_bisect},     {"scaling", parse_scaling},
      {"layers", parse_layers},     {"explore", parse_explore},   {"calibrate", parse_calibrate},
  };
  return m;
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"sample", "capacity", "range-cap", "crossing", "bisect",
                                              "scaling", "layers", "explore", "calibrate"};
  return names;
}

CommandResult run_command(const std::string& name, const RawParams& raw, const CommandEnv& env) {
  const auto& reg = registry();
  auto it = reg.find(name);
  if (it == reg.end()) throw UnknownCommand("unknown command '" + name + "'");
  if (env.workers < 1) throw ConfigError("workers must be >= 1");
  CommandResult res;
  res.command = name;
  Params p(raw);
  const std::string cache_dir = p.text("cache_dir", "green-cache");
  Body body = it->second(p);
  p.finish();
  res.params = p.resolved;
  res.run_id = hex16(fnv1a(name + "\n" + res.params.dump()));
  res.summary = ojson::object();
  Run run{env, res, {}, GreenCache(cache_dir, false), cache_dir};
  body(run);
  run.commit();
  return res;
}

}  // namespace fri
