#include "fri/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <tuple>

#include "fri/log.hpp"
#include "fri/stats.hpp"

namespace fri {

void FriConfig::validate() const {
  if (d < 1 || d > kMaxDim) throw DimensionError("dimension out of range");
  if (d < 3) throw DimensionError("the sampler needs d >= 3");
  if (!(u >= 0) || !std::isfinite(u)) throw std::invalid_argument("intensity u must be a finite nonnegative number");
  if (!(T > 0) || !std::isfinite(T)) throw std::invalid_argument("kill mean T must be positive");
  if (window.corner.d != d) throw DimensionError("window dimension differs from d");
  if (window.side < 1) throw std::invalid_argument("window must be nonempty");
  if (padding_radius < -1) throw std::invalid_argument("padding radius must be nonnegative");
  if (!(report_tol > 0)) throw std::invalid_argument("report tolerance must be positive");
  if (!(u_top >= 0)) throw std::invalid_argument("u_top must be nonnegative");
}

namespace {

constexpr std::uint64_t kCalibrationSeed = 0x7ad1a5e5ULL;
constexpr std::uint64_t kCalibrationReps = 20000;

struct TailCache {
  std::mutex mu;
  std::map<std::pair<int, double>, std::vector<Estimate>> tails;
};

TailCache& tail_cache() {
  static TailCache c;
  return c;
}

const std::vector<Estimate>& tail_for(int d, double T) {
  auto& c = tail_cache();
  std::lock_guard<std::mutex> lk(c.mu);
  auto key = std::make_pair(d, T);
  auto it = c.tails.find(key);
  if (it != c.tails.end()) return it->second;
  const Coord r_max = Coord(12 * std::max<Coord>(n_T(T), 1) + 4);
  auto v = diameter_tail_radii(d, T, r_max, kCalibrationReps, RngStream(kCalibrationSeed, std::uint64_t(d)));
  return c.tails.emplace(key, std::move(v)).first->second;
}

// Sites at l-infinity distance exactly r from the box.
double shell(const LatticeBox& b, int d, double r) {
  double outer = 1, inner = 1;
  for (int i = 0; i < d; ++i) {
    const double w = double(b.hi(i) - b.lo(i));
    outer *= w + 2 * r;
    inner *= w + 2 * (r - 1);
  }
  return outer - inner;
}

double omitted_mass(const FriConfig& cfg, const std::vector<Estimate>& tail, int pad) {
  const double lambda = 2.0 * cfg.d * cfg.u / (cfg.T + 1.0);
  double s = 0;
  for (std::size_t r = std::size_t(pad) + 1; r < tail.size(); ++r) s += shell(cfg.window, cfg.d, double(r)) * tail[r].value;
  return lambda * s;
}

LatticeBox pad_box(const LatticeBox& w, int pad) {
  LatticeBox b;
  b.corner = Point(w.corner.d);
  for (int i = 0; i < w.corner.d; ++i) b.corner[i] = w.lo(i) - pad;
  b.side = w.extent() + 2 * pad;
  b.kind = BoxKind::plain;
  return b;
}

Trajectory draw_trajectory(const Point& start, double label, double T, RngStream& s) {
  Trajectory t;
  t.label = label;
  t.path.start = start;
  const std::uint64_t life = s.killed_lifetime(T);
  t.path.steps.resize(life);
  const std::uint32_t two_d = std::uint32_t(2 * start.d);
  for (auto& c : t.path.steps) c = std::uint8_t(s.below(two_d));
  return t;
}

bool traj_less(const Trajectory& a, const Trajectory& b) {
  if (a.path.start != b.path.start) return a.path.start < b.path.start;
  if (a.label != b.label) return a.label < b.label;
  return a.path.steps < b.path.steps;
}

// Poisson starts on a plain box with uniform labels on [0, top]; keeps label <= u.
std::vector<Trajectory> sample_box(int d, double u, double top, double T, const LatticeBox& box, RngStream rng,
                                   int workers) {
  const Coord n0 = box.extent();
  double slab = 1;
  for (int i = 1; i < d; ++i) slab *= double(box.extent());
  const double mean = 2.0 * d * top / (T + 1.0) * slab;
  std::vector<std::vector<Trajectory>> parts(static_cast<std::size_t>(n0));
  parallel_for(std::size_t(n0), workers, [&](std::size_t i) {
    if (!(top > 0)) return;
    RngStream s = rng.child(i);
    const std::uint64_t count = s.poisson(mean);
    auto& out = parts[i];
    for (std::uint64_t j = 0; j < count; ++j) {
      Point x(d);
      x[0] = box.lo(0) + Coord(i);
      for (int k = 1; k < d; ++k) x[k] = box.lo(k) + Coord(s.below(std::uint32_t(box.extent())));
      const double label = top * s.uniform();
      Trajectory t = draw_trajectory(x, label, T, s);
      if (label <= u) out.push_back(std::move(t));
    }
  });
  std::vector<Trajectory> all;
  for (auto& p : parts)
    for (auto& t : p) all.push_back(std::move(t));
  std::sort(all.begin(), all.end(), traj_less);
  return all;
}

}  // namespace

TruncationReport calibrate_padding(const FriConfig& cfg) {
  cfg.validate();
  TruncationReport rep;
  rep.calibration_reps = kCalibrationReps;
  const Coord nt = std::max<Coord>(cfg.n_T(), 1);
  if (cfg.u == 0) {
    rep.padding = cfg.padding_radius < 0 ? 0 : cfg.padding_radius;
    rep.t_star = double(rep.padding) / double(nt);
    return rep;
  }
  const auto& tail = tail_for(cfg.d, cfg.T);
  int floor_pad = -1;
  for (int q = 0; q <= 48; ++q) {
    const int pad = int(std::ceil(0.25 * q * double(nt) - 1e-12));
    if (omitted_mass(cfg, tail, pad) <= cfg.report_tol) {
      floor_pad = pad;
      rep.t_star = 0.25 * q;
      break;
    }
  }
  if (floor_pad < 0) floor_pad = int(tail.size());
  rep.floor_padding = floor_pad;
  if (cfg.padding_radius >= 0) {
    if (cfg.padding_radius < floor_pad) {
      std::ostringstream os;
      os << "padding " << cfg.padding_radius << " below the safety floor " << floor_pad << " for tolerance "
         << cfg.report_tol;
      throw PaddingError(os.str());
    }
    rep.padding = cfg.padding_radius;
    rep.t_star = double(rep.padding) / double(nt);
  } else {
    rep.padding = floor_pad;
  }
  rep.bound = omitted_mass(cfg, tail, rep.padding);
  return rep;
}

LatticeBox FriSample::padded_window() const { return pad_box(config.window, report.padding); }

FriSample FriSample::at_level(double v) const {
  if (!(v >= 0) || v > config.u) throw std::invalid_argument("level must lie in [0, u]");
  FriSample s;
  s.config = config;
  s.config.u = v;
  s.report = report;
  for (const auto& t : trajectories)
    if (t.label <= v) s.trajectories.push_back(t);
  return s;
}

bool operator==(const FriSample& a, const FriSample& b) {
  return a.config.d == b.config.d && a.config.u == b.config.u && a.config.T == b.config.T &&
         a.config.seed == b.config.seed && a.report.padding == b.report.padding && a.trajectories == b.trajectories;
}

FriSample sample_window(const FriConfig& cfg, int workers) {
  FriSample s;
  s.config = cfg;
  s.report = calibrate_padding(cfg);
  const LatticeBox box = s.padded_window();
  s.trajectories = sample_box(cfg.d, cfg.u, cfg.label_top(), cfg.T, box, RngStream(cfg.seed), workers);
  return s;
}

FriSample sample_box_starts(int d, double u, double T, const LatticeBox& box, RngStream rng, double u_top) {
  FriSample s;
  s.config.d = d;
  s.config.u = u;
  s.config.T = T;
  s.config.window = pad_box(box, 0);
  s.config.padding_radius = 0;
  s.config.seed = rng.seed();
  s.config.u_top = u_top;
  s.trajectories = sample_box(d, u, s.config.label_top(), T, s.config.window, rng, 1);
  return s;
}

HittingSample sample_hitting(const std::vector<Point>& K, double u, double T, const GreenTable& g, RngStream rng) {
  if (K.empty()) throw std::invalid_argument("sample_hitting needs a nonempty target");
  if (!(u >= 0)) throw std::invalid_argument("intensity must be nonnegative");
  if (!(g.kill_mean() == KillMean::killed(T))) throw std::invalid_argument("green table must be killed at T");
  HittingSample h;
  h.u = u;
  h.T = T;
  const EscapeVector e = escape_exact(K, g);
  h.target = e.sites;
  h.escape = e.values;
  h.counts.assign(h.target.size(), 0);
  const int d = h.target.front().d;
  for (std::size_t i = 0; i < h.target.size(); ++i) {
    RngStream s = rng.child(i);
    h.counts[i] = s.poisson(2.0 * d * u * h.escape[i]);
    for (std::uint64_t j = 0; j < h.counts[i]; ++j) h.trajectories.push_back(draw_trajectory(h.target[i], 0.0, T, s));
  }
  return h;
}

EdgeSet edges_of(const std::vector<Trajectory>& ts, int d) {
  EdgeSet E(d);
  for (const auto& t : ts) t.path.for_each_edge([&](const Point& lo, int axis) { E.insert(Edge{lo, axis}); });
  return E;
}

EdgeSet edges_of(const FriSample& s) { return edges_of(s.trajectories, s.config.d); }
EdgeSet edges_of(const HittingSample& s) {
  return edges_of(s.trajectories, s.target.empty() ? 3 : s.target.front().d);
}

// ---- run files ----

namespace {

constexpr char kMagic[8] = {'F', 'R', 'I', 'R', 'U', 'N', '\0', '\0'};
constexpr std::uint32_t kVersion = 1;

template <typename V>
void put(std::ostream& o, const V& v) {
  o.write(reinterpret_cast<const char*>(&v), sizeof v);
}
template <typename V>
V get(std::istream& i) {
  V v{};
  i.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!i) throw FormatError("truncated run file");
  return v;
}

}  // namespace

void save_sample(const FriSample& s, std::ostream& o) {
  const auto& c = s.config;
  o.write(kMagic, 8);
  put(o, kVersion);
  put(o, std::int32_t(c.d));
  put(o, c.u);
  put(o, c.T);
  put(o, c.u_top);
  put(o, c.report_tol);
  put(o, c.seed);
  for (int i = 0; i < c.d; ++i) put(o, std::int32_t(c.window.corner[i]));
  put(o, std::int32_t(c.window.side));
  put(o, std::int32_t(c.window.kind == BoxKind::plain ? 0 : 1));
  put(o, std::int32_t(c.padding_radius));
  put(o, s.report.t_star);
  put(o, std::int32_t(s.report.padding));
  put(o, s.report.floor_padding);
  put(o, s.report.bound);
  put(o, s.report.calibration_reps);
  put(o, std::uint64_t(s.trajectories.size()));
  for (const auto& t : s.trajectories) {
    for (int i = 0; i < c.d; ++i) put(o, std::int32_t(t.path.start[i]));
    put(o, t.label);
    const std::uint64_t n = t.path.length();
    put(o, n);
    // Two increments per byte.
    for (std::uint64_t k = 0; k < n; k += 2) {
      const std::uint8_t lo = t.path.steps[k];
      const std::uint8_t hi = k + 1 < n ? t.path.steps[k + 1] : 0;
      put(o, std::uint8_t(lo | (hi << 4)));
    }
  }
  if (!o) throw IoError("failed writing run file");
}

FriSample load_sample(std::istream& in) {
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) throw FormatError("not a run file");
  const auto version = get<std::uint32_t>(in);
  if (version != kVersion) throw FormatError("unsupported run file version " + std::to_string(version));
  FriSample s;
  auto& c = s.config;
  c.d = get<std::int32_t>(in);
  if (c.d < 1 || c.d > kMaxDim) throw FormatError("bad dimension in run file");
  c.u = get<double>(in);
  c.T = get<double>(in);
  c.u_top = get<double>(in);
  c.report_tol = get<double>(in);
  c.seed = get<std::uint64_t>(in);
  c.window.corner = Point(c.d);
  for (int i = 0; i < c.d; ++i) c.window.corner[i] = get<std::int32_t>(in);
  c.window.side = get<std::int32_t>(in);
  c.window.kind = get<std::int32_t>(in) == 0 ? BoxKind::plain : BoxKind::enlarged;
  c.padding_radius = get<std::int32_t>(in);
  s.report.t_star = get<double>(in);
  s.report.padding = get<std::int32_t>(in);
  s.report.floor_padding = get<double>(in);
  s.report.bound = get<double>(in);
  s.report.calibration_reps = get<std::uint64_t>(in);
  const auto count = get<std::uint64_t>(in);
  const int two_d = 2 * c.d;
  for (std::uint64_t j = 0; j < count; ++j) {
    Trajectory t;
    t.path.start = Point(c.d);
    for (int i = 0; i < c.d; ++i) t.path.start[i] = get<std::int32_t>(in);
    t.label = get<double>(in);
    const auto n = get<std::uint64_t>(in);
    if (n > (std::uint64_t(1) << 40)) throw FormatError("implausible trajectory length");
    t.path.steps.resize(n);
    for (std::uint64_t k = 0; k < n; k += 2) {
      const auto b = get<std::uint8_t>(in);
      t.path.steps[k] = b & 15;
      if (k + 1 < n) t.path.steps[k + 1] = b >> 4;
      if (t.path.steps[k] >= two_d || (k + 1 < n && t.path.steps[k + 1] >= two_d))
        throw FormatError("bad increment code");
    }
    s.trajectories.push_back(std::move(t));
  }
  return s;
}

void save_sample(const FriSample& s, const std::string& path) {
  std::ofstream o(path, std::ios::binary);
  if (!o) throw IoError("cannot open " + path);
  save_sample(s, o);
}

FriSample load_sample(const std::string& path) {
  std::ifstream i(path, std::ios::binary);
  if (!i) throw IoError("cannot open " + path);
  return load_sample(i);
}

}  // namespace fri
