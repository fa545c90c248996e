#include "fri/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "fri/errors.hpp"
#include "fri/explorer.hpp"
#include "fri/scaling.hpp"

namespace fri {

namespace {

constexpr double kZ = 1.959963984540054;

struct Ratio {
  double value, se;
  std::uint64_t n;
};

FittedConstant pick(const std::vector<Ratio>& rs, bool want_min, double scale, int d, std::uint64_t seed,
                    std::string basis) {
  if (rs.empty()) throw std::invalid_argument("empty calibration grid");
  auto it = want_min ? std::min_element(rs.begin(), rs.end(), [](auto& a, auto& b) { return a.value < b.value; })
                     : std::max_element(rs.begin(), rs.end(), [](auto& a, auto& b) { return a.value < b.value; });
  FittedConstant f;
  f.value = scale * it->value;
  f.ci_lo = scale * (it->value - kZ * it->se);
  f.ci_hi = scale * (it->value + kZ * it->se);
  f.d = d;
  for (const auto& r : rs) f.samples += r.n;
  f.seed = seed;
  f.basis = std::move(basis);
  return f;
}

std::string grid(const std::vector<double>& v) {
  std::ostringstream o;
  for (std::size_t i = 0; i < v.size(); ++i) o << (i ? "," : "") << v[i];
  return o.str();
}

}  // namespace

CalibrationConstants calibrate(int d, const CalibrationOptions& opt, GreenCache& cache) {
  if (d < 3) throw std::invalid_argument("calibration needs d >= 3");
  CalibrationConstants c;
  c.d = d;
  const RngStream root(opt.seed);
  const auto g_free = cache.get(d, KillMean::free_walk());

  std::vector<Ratio> box;
  std::vector<double> box_grid;
  for (std::size_t i = 0; i < opt.box_n.size(); ++i) {
    const Coord n = opt.box_n[i];
    const CapEstimate e = box_capacity(d, n, KillMean::free_walk(), g_free.get(), opt.box, root.child(1).child(i));
    const double s = std::pow(double(n), d - 2);
    box.push_back({e.value / s, e.stderr_ / s, 1});
    box_grid.push_back(n);
  }
  c.c1_hat = pick(box, true, 0.9, d, opt.seed, "0.9 min cap(B_0(n))/n^(d-2), n in " + grid(box_grid));
  c.c2_hat = pick(box, false, 1.0, d, opt.seed, "max cap(B_0(n))/n^(d-2), n in " + grid(box_grid));

  std::vector<Ratio> first, second;
  for (std::size_t i = 0; i < opt.range_n.size(); ++i) {
    const double n = opt.range_n[i];
    const RangeCapStats r = range_capacity_stats(d, n, false, opt.range_reps, root.child(2).child(i), *g_free, opt.budget);
    const double F = f_d(d, n);
    first.push_back({r.mean.value / F, r.mean.stderr_ / F, r.mean.n});
    second.push_back({r.second_moment.value / (F * F), r.second_moment.stderr_ / (F * F), r.second_moment.n});
  }
  c.C4_hat = pick(first, true, 1.0, d, opt.seed, "min E cap(X[0,n])/F_d(n), n in " + grid(opt.range_n));
  c.C5_hat = pick(first, false, 1.0, d, opt.seed, "max E cap(X[0,n])/F_d(n), n in " + grid(opt.range_n));
  c.C10_hat = pick(second, false, 1.0, d, opt.seed, "max E cap(X[0,n])^2/F_d(n)^2, n in " + grid(opt.range_n));

  std::vector<Ratio> killed;
  for (std::size_t i = 0; i < opt.killed_T.size(); ++i) {
    const double T = opt.killed_T[i];
    const auto gT = cache.get(d, KillMean::killed(T));
    const RangeCapStats r = range_capacity_stats(d, T, true, opt.killed_reps, root.child(3).child(i), *gT, opt.budget);
    const double F = f_d(d, T);
    killed.push_back({r.mean.value / F, r.mean.stderr_ / F, r.mean.n});
  }
  c.C6_hat = pick(killed, false, 1.0, d, opt.seed, "max E cap^T(R_{N_T})/F_d(T), T in " + grid(opt.killed_T));

  std::vector<Ratio> stopped;
  std::vector<double> N_grid;
  for (std::size_t i = 0; i < opt.stopped_N.size(); ++i) {
    const int N = opt.stopped_N[i];
    // All walks from the origin: overlapping starts give the smallest union.
    const std::vector<Point> starts(static_cast<std::size_t>(N), Point(d));
    const StoppedUnionResult r =
        stopped_union_capacity(d, N, opt.stopped_n, starts, opt.stopped_reps, root.child(4).child(i), *g_free, opt.budget);
    stopped.push_back({r.mean.value / r.reference, r.mean.stderr_ / r.reference, r.mean.n});
    N_grid.push_back(N);
  }
  c.c5_hat = pick(stopped, true, 1.0, d, opt.seed,
                  "min E cap(stopped union)/min(N n F_d(n), n^(d-2)), n = " + std::to_string(opt.stopped_n) +
                      ", N in " + grid(N_grid));

  {
    const Coord nT = n_T(opt.c6_T);
    const auto A = box_sites(plain_box(Point(d), nT));
    const Estimate e = hitting_union_capacity(d, opt.c6_T, opt.c6_u_hat, A, opt.c6_reps, root.child(5), *g_free,
                                              opt.budget);
    const double s = opt.c6_u_hat * std::pow(double(nT), d - 2);
    std::ostringstream b;
    b << "E cap(hitting union)/(u_hat n_T^(d-2)), A = B_0^T, T = " << opt.c6_T << ", u_hat = " << opt.c6_u_hat;
    c.c6_hat = pick({{e.value / s, e.stderr_ / s, e.n}}, true, 1.0, d, opt.seed, b.str());
  }
  return c;
}

namespace {

nlohmann::json to_j(const FittedConstant& f) {
  return {{"value", f.value}, {"ci_lo", f.ci_lo}, {"ci_hi", f.ci_hi}, {"d", f.d},
          {"samples", f.samples}, {"seed", f.seed}, {"basis", f.basis}};
}

FittedConstant from_j(const nlohmann::json& j) {
  FittedConstant f;
  f.value = j.at("value").get<double>();
  f.ci_lo = j.at("ci_lo").get<double>();
  f.ci_hi = j.at("ci_hi").get<double>();
  f.d = j.at("d").get<int>();
  f.samples = j.at("samples").get<std::uint64_t>();
  f.seed = j.at("seed").get<std::uint64_t>();
  f.basis = j.at("basis").get<std::string>();
  return f;
}

#define FRI_CONSTANTS(X) X(c1_hat) X(c2_hat) X(C4_hat) X(C5_hat) X(C6_hat) X(C10_hat) X(c5_hat) X(c6_hat)

}  // namespace

std::string constants_to_json(const CalibrationConstants& c) {
  nlohmann::json j;
  j["d"] = c.d;
  j["provenance"] = c.provenance;
#define X(name) j[#name] = to_j(c.name);
  FRI_CONSTANTS(X)
#undef X
  return j.dump(2);
}

CalibrationConstants constants_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    CalibrationConstants c;
    c.d = j.at("d").get<int>();
    c.provenance = j.value("provenance", std::string());
#define X(name) c.name = from_j(j.at(#name));
    FRI_CONSTANTS(X)
#undef X
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad constants file: ") + e.what());
  }
}

void save_constants(const CalibrationConstants& c, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  f << constants_to_json(c) << '\n';
  if (!f) throw IoError("write failed: " + path);
}

CalibrationConstants load_constants(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read " + path);
  std::ostringstream s;
  s << f.rdbuf();
  return constants_from_json(s.str());
}

}  // namespace fri
