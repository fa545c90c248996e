#include "fri/green.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <Eigen/Dense>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_sf_bessel.h>
#include <gsl/gsl_sf_gamma.h>

#include "fri/errors.hpp"
#include "fri/log.hpp"
#include "fri/walk.hpp"

namespace fri {

std::string KillMean::str() const {
  if (is_free()) return "inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", T);
  return buf;
}

const char* to_string(GreenMethod m) {
  switch (m) {
    case GreenMethod::monte_carlo: return "monte_carlo";
    case GreenMethod::absorbing_solve: return "absorbing_solve";
    case GreenMethod::bessel_quadrature: return "bessel_quadrature";
  }
  return "?";
}

Canonical canonicalize(const Point& disp) {
  Canonical k;
  k.d = disp.d;
  for (int i = 0; i < disp.d; ++i) k.c[i] = std::abs(disp.c[i]);
  // Insertion sort; d is small.
  for (int i = 1; i < k.d; ++i) {
    Coord v = k.c[i];
    int j = i - 1;
    while (j >= 0 && k.c[j] > v) {
      k.c[j + 1] = k.c[j];
      --j;
    }
    k.c[j + 1] = v;
  }
  return k;
}

CanonicalIndex::CanonicalIndex(int d, int radius) : d_(d), r_(radius) {
  if (d < 1 || d > kMaxDim) throw DimensionError("dimension out of range");
  if (radius < 0) throw std::invalid_argument("negative table radius");
  const std::size_t rows = std::size_t(radius + d + 1);
  binom_.assign(rows * std::size_t(d + 1), 0);
  for (std::size_t n = 0; n < rows; ++n) {
    binom_[n * std::size_t(d + 1)] = 1;
    for (std::size_t k = 1; k <= std::size_t(d) && k <= n; ++k) {
      const std::uint64_t a = binom_[(n - 1) * std::size_t(d + 1) + k - 1];
      const std::uint64_t b = k <= n - 1 ? binom_[(n - 1) * std::size_t(d + 1) + k] : 0;
      binom_[n * std::size_t(d + 1) + k] = a + b;
    }
  }
  size_ = binom_[std::size_t(radius + d) * std::size_t(d + 1) + std::size_t(d)];
}

// ---- quadrature ----

namespace {

void scaled_bessel_array(double z, int nmax, double* out) {
  if (gsl_sf_bessel_In_scaled_array(0, nmax, z, out) == GSL_SUCCESS) return;
  // High orders underflow for small z; find the largest order that does not.
  int lo = 0, hi = nmax;
  std::vector<double> tmp(std::size_t(nmax) + 1);
  while (lo < hi) {
    const int mid = (lo + hi + 1) / 2;
    if (gsl_sf_bessel_In_scaled_array(0, mid, z, tmp.data()) == GSL_SUCCESS)
      lo = mid;
    else
      hi = mid - 1;
  }
  gsl_sf_bessel_In_scaled_array(0, lo, z, out);
  for (int n = lo + 1; n <= nmax; ++n) out[n] = 0;
}

struct GslErrorsOff {
  GslErrorsOff() { gsl_set_error_handler_off(); }
};
const GslErrorsOff g_gsl_off;

}  // namespace

GreenQuadrature::GreenQuadrature(int d, KillMean km, int max_order, double h)
    : d_(d), km_(km), max_order_(max_order), h_(h) {
  if (d < 1 || d > kMaxDim) throw DimensionError("dimension out of range");
  if (km.is_free() && d <= 2) throw DimensionError("free Green's function needs d >= 3");
  if (!km.is_free() && !(km.T > 0)) throw std::invalid_argument("kill mean must be positive");
  const double s = km.survival();
  const double y_lo = -25.0;
  double t_hi;
  if (km.is_free()) {
    const double z_cut = std::max(1e7, 400.0 * double(max_order) * double(max_order));
    t_hi = double(d) * z_cut;
  } else {
    t_hi = 60.0 * (km.T + 1.0);
  }
  const std::size_t n = std::size_t(std::ceil((std::log(t_hi) - y_lo) / h));
  tail_L_ = std::exp(y_lo + double(n) * h);
  w_.resize(n);
  bessel_.assign((std::size_t(max_order) + 1) * n, 0.0);
  std::vector<double> col(std::size_t(max_order) + 1);
  for (std::size_t j = 0; j < n; ++j) {
    const double t = std::exp(y_lo + (double(j) + 0.5) * h);
    w_[j] = h * t * std::exp(-t * (1.0 - s));
    scaled_bessel_array(s * t / double(d), max_order, col.data());
    for (int o = 0; o <= max_order; ++o) bessel_[std::size_t(o) * n + j] = col[std::size_t(o)];
  }
}

double GreenQuadrature::value(const Canonical& k) const {
  if (!covers(k)) throw std::out_of_range("displacement beyond quadrature order range");
  const std::size_t n = w_.size();
  const double* rows[kMaxDim];
  for (int i = 0; i < d_; ++i) rows[i] = &bessel_[std::size_t(k.c[i]) * n];
  double sum = 0;
  for (std::size_t j = 0; j < n; ++j) {
    double p = w_[j];
    for (int i = 0; i < d_; ++i) p *= rows[i][j];
    sum += p;
  }
  if (km_.is_free()) {
    const double half = 0.5 * double(d_);
    double mu = 0;
    for (int i = 0; i < d_; ++i) mu += 4.0 * double(k.c[i]) * double(k.c[i]) - 1.0;
    const double a = double(d_) * mu / 8.0;
    const double pref = std::pow(double(d_) / (2.0 * M_PI), half);
    sum += pref * (std::pow(tail_L_, 1.0 - half) / (half - 1.0) - a * std::pow(tail_L_, -half) / half);
  }
  return sum;
}

// ---- table ----

GreenTable::GreenTable(int d, KillMean km, GreenMethod method, int radius, std::vector<double> values,
                       std::vector<double> stderrs, double tolerance)
    : km_(km), method_(method), tol_(tolerance), index_(d, radius), values_(std::move(values)),
      stderr_(std::move(stderrs)) {
  if (values_.size() != index_.size()) throw std::invalid_argument("green table size does not match radius");
  if (stderr_.empty()) stderr_.assign(values_.size(), 0.0);
  if (stderr_.size() != values_.size()) throw std::invalid_argument("green table stderr size mismatch");
}

GreenTable::GreenTable(const GreenTable& o)
    : km_(o.km_), method_(o.method_), tol_(o.tol_), index_(o.index_), values_(o.values_), stderr_(o.stderr_),
      manifest_(o.manifest_), quad_(o.quad_) {}

GreenTable& GreenTable::operator=(const GreenTable& o) {
  if (this == &o) return *this;
  km_ = o.km_;
  method_ = o.method_;
  tol_ = o.tol_;
  index_ = o.index_;
  values_ = o.values_;
  stderr_ = o.stderr_;
  manifest_ = o.manifest_;
  quad_ = o.quad_;
  return *this;
}

double GreenTable::operator()(const Point& a, const Point& b) const {
  Canonical k;
  k.d = a.d;
  for (int i = 0; i < a.d; ++i) k.c[i] = std::abs(a.c[i] - b.c[i]);
  for (int i = 1; i < k.d; ++i) {
    Coord v = k.c[i];
    int j = i - 1;
    while (j >= 0 && k.c[j] > v) {
      k.c[j + 1] = k.c[j];
      --j;
    }
    k.c[j + 1] = v;
  }
  return value(k);
}

Estimate GreenTable::value_with_stderr(const Point& disp) const {
  const Canonical k = canonicalize(disp);
  if (k.max() <= radius()) {
    const auto i = index_.index(k);
    return {values_[i], stderr_[i], 1};
  }
  return {miss(k), 0.0, 1};
}

double GreenTable::miss(const Canonical& k) const {
  if (quad_ && quad_->covers(k)) {
    ++quad_misses_;
    return quad_->value(k);
  }
  std::vector<Coord> key(k.c.begin(), k.c.begin() + k.d);
  std::lock_guard<std::mutex> lk(mc_mu_);
  if (auto it = mc_cache_.find(key); it != mc_cache_.end()) return it->second;
  if (mc_misses_++ == 0)
    log_warn("green table (d=" + std::to_string(dim()) + ", T=" + km_.str() +
             ") miss beyond radius; using Monte-Carlo estimates");
  Point x(k.d);
  std::uint64_t h = 1469598103934665603ull;
  for (int i = 0; i < k.d; ++i) {
    x[i] = k.c[i];
    h = splitmix64(h ^ std::uint64_t(std::uint32_t(k.c[i])));
  }
  const auto r = green_mc(k.d, km_, x, 100000, 100000, RngStream(0x6d63u, h));
  mc_cache_[key] = r.est.value;
  return r.est.value;
}

namespace {
constexpr const char* kGreenMagic = "FRIGREEN";
constexpr int kGreenVersion = 1;

std::string hexfloat(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}
}  // namespace

void GreenTable::save(const std::string& path) const {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw IoError("cannot write green table: " + path);
    os << kGreenMagic << ' ' << kGreenVersion << '\n';
    os << "d=" << dim() << '\n';
    os << "kill_mean=" << (km_.is_free() ? std::string("inf") : hexfloat(km_.T)) << '\n';
    os << "method=" << to_string(method_) << '\n';
    os << "radius=" << radius() << '\n';
    os << "tolerance=" << hexfloat(tol_) << '\n';
    os << "max_order=" << (quad_ ? quad_->max_order() : -1) << '\n';
    os << "step=" << (quad_ ? hexfloat(quad_->step()) : std::string("0")) << '\n';
    os << "entries=" << values_.size() << '\n';
    std::string m = manifest_;
    std::replace(m.begin(), m.end(), '\n', ' ');
    os << "manifest=" << m << '\n';
    os << "end\n";
    os.write(reinterpret_cast<const char*>(values_.data()), std::streamsize(values_.size() * sizeof(double)));
    os.write(reinterpret_cast<const char*>(stderr_.data()), std::streamsize(stderr_.size() * sizeof(double)));
    if (!os) throw IoError("failed writing green table: " + path);
  }
  std::filesystem::rename(tmp, path);
}

GreenTable GreenTable::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open green table: " + path);
  std::string magic;
  int version = 0;
  is >> magic >> version;
  if (magic != kGreenMagic || version != kGreenVersion) throw FormatError("not a green table file: " + path);
  is.ignore(1);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(is, line) && line != "end") {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("malformed green table header: " + path);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto num = [&](const char* k) {
    auto it = kv.find(k);
    if (it == kv.end()) throw FormatError(std::string("green table header lacks ") + k);
    return it->second;
  };
  const int d = std::stoi(num("d"));
  const std::string kms = num("kill_mean");
  const KillMean km = kms == "inf" ? KillMean::free_walk() : KillMean::killed(std::strtod(kms.c_str(), nullptr));
  GreenMethod method = GreenMethod::bessel_quadrature;
  const std::string ms = num("method");
  if (ms == "monte_carlo") method = GreenMethod::monte_carlo;
  else if (ms == "absorbing_solve") method = GreenMethod::absorbing_solve;
  const int radius = std::stoi(num("radius"));
  const double tol = std::strtod(num("tolerance").c_str(), nullptr);
  const int max_order = std::stoi(num("max_order"));
  const double step = std::strtod(num("step").c_str(), nullptr);
  const std::size_t entries = std::stoull(num("entries"));
  std::vector<double> v(entries), e(entries);
  is.read(reinterpret_cast<char*>(v.data()), std::streamsize(entries * sizeof(double)));
  is.read(reinterpret_cast<char*>(e.data()), std::streamsize(entries * sizeof(double)));
  if (!is) throw FormatError("truncated green table: " + path);
  GreenTable t(d, km, method, radius, std::move(v), std::move(e), tol);
  t.manifest_ = kv["manifest"];
  if (max_order >= 0) t.attach_quadrature(std::make_shared<GreenQuadrature>(d, km, max_order, step));
  return t;
}

int default_green_radius(int d) {
  switch (d) {
    case 1:
    case 2:
    case 3: return 160;
    case 4: return 80;
    case 5: return 48;
    case 6: return 24;
    default: return 12;
  }
}

GreenTable build_green_quadrature(int d, KillMean km, int radius, int max_order, double h) {
  max_order = std::max(max_order, radius);
  auto q = std::make_shared<GreenQuadrature>(d, km, max_order, h);
  CanonicalIndex idx(d, radius);
  std::vector<double> v(idx.size());
  std::uint64_t next = 0;
  idx.for_each([&](const Canonical& k) {
    const auto i = idx.index(k);
    if (i != next++) throw std::logic_error("canonical enumeration out of order");
    v[i] = q->value(k);
  });
  GreenTable t(d, km, GreenMethod::bessel_quadrature, radius, std::move(v), {}, 1e-7);
  t.attach_quadrature(q);
  std::ostringstream m;
  m << "{\"builder\":\"bessel_quadrature\",\"d\":" << d << ",\"kill_mean\":\"" << km.str() << "\",\"radius\":" << radius
    << ",\"max_order\":" << max_order << ",\"step\":" << h << ",\"nodes\":" << q->nodes() << "}";
  t.set_manifest(m.str());
  return t;
}

// ---- absorbing solve ----

namespace {

double orbit_size(const Canonical& k) {
  // d! / prod(mult!) * 2^{nonzero}
  double n = 1;
  for (int i = 2; i <= k.d; ++i) n *= i;
  int run = 1;
  for (int i = 1; i <= k.d; ++i) {
    if (i < k.d && k.c[i] == k.c[i - 1]) {
      ++run;
    } else {
      for (int r = 2; r <= run; ++r) n /= r;
      run = 1;
    }
  }
  for (int i = 0; i < k.d; ++i)
    if (k.c[i] != 0) n *= 2;
  return n;
}

}  // namespace

std::vector<double> absorbing_green_values(int d, KillMean km, int R, double cg_tol) {
  if (km.is_free() && d <= 2) throw DimensionError("free Green's function needs d >= 3");
  CanonicalIndex idx(d, R);
  const std::size_t n = idx.size();
  const int deg = 2 * d;
  std::vector<std::int64_t> nb(n * std::size_t(deg), -1);
  std::vector<double> m(n);
  idx.for_each([&](const Canonical& k) {
    const auto i = idx.index(k);
    m[i] = orbit_size(k);
    Point p(d);
    for (int a = 0; a < d; ++a) p[a] = k.c[a];
    for (int a = 0; a < d; ++a)
      for (int sgn = 0; sgn < 2; ++sgn) {
        Point q = p;
        q[a] += sgn ? -1 : 1;
        const Canonical kq = canonicalize(q);
        if (kq.max() <= R) nb[i * std::size_t(deg) + std::size_t(2 * a + sgn)] = std::int64_t(idx.index(kq));
      }
  });
  const double coef = km.survival() / double(deg);
  auto apply = [&](const std::vector<double>& x, std::vector<double>& y) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0;
      const std::int64_t* row = &nb[i * std::size_t(deg)];
      for (int k = 0; k < deg; ++k)
        if (row[k] >= 0) s += x[std::size_t(row[k])];
      y[i] = x[i] - coef * s;
    }
  };
  auto dot = [&](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += m[i] * a[i] * b[i];
    return s;
  };
  std::vector<double> x(n, 0.0), r(n, 0.0), p, Ap(n);
  r[0] = 1.0;  // source at the origin (orbit size 1)
  p = r;
  double rr = dot(r, r);
  const double r0 = std::sqrt(rr);
  for (std::size_t it = 0; it < 50 * n + 1000 && std::sqrt(rr) > cg_tol * r0; ++it) {
    apply(p, Ap);
    const double alpha = rr / dot(p, Ap);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * Ap[i];
    }
    const double rr_new = dot(r, r);
    const double beta = rr_new / rr;
    rr = rr_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
  }
  if (std::sqrt(rr) > 1e3 * cg_tol * r0) throw std::runtime_error("absorbing solve did not converge");
  return x;
}

double absorbing_extrapolate_origin(int d, KillMean km, const std::vector<int>& radii,
                                    std::vector<double>* per_radius) {
  if (radii.size() < 3) throw std::invalid_argument("extrapolation needs three radii");
  std::vector<double> g;
  for (int R : radii) g.push_back(absorbing_green_values(d, km, R)[0]);
  if (per_radius) *per_radius = g;
  // g(R) = g_inf + b R^{2-d} + c R^{1-d}, least squares.
  Eigen::MatrixXd A(radii.size(), 3);
  Eigen::VectorXd y(radii.size());
  for (std::size_t i = 0; i < radii.size(); ++i) {
    const double R = radii[i];
    A(Eigen::Index(i), 0) = 1;
    A(Eigen::Index(i), 1) = std::pow(R, 2.0 - d);
    A(Eigen::Index(i), 2) = std::pow(R, 1.0 - d);
    y(Eigen::Index(i)) = g[i];
  }
  const Eigen::VectorXd coef = A.colPivHouseholderQr().solve(y);
  return coef(0);
}

GreenTable build_green_absorbing(int d, KillMean km, int radius, int R0, double tol, int R_cap,
                                 AbsorbingReport* report) {
  AbsorbingReport rep;
  int R = std::max(R0, radius + 1);
  CanonicalIndex target(d, radius);
  std::vector<double> prev = absorbing_green_values(d, km, R);
  rep.radii.push_back(R);
  rep.origin_values.push_back(prev[0]);
  std::vector<double> cur;
  while (true) {
    const int R2 = 2 * R;
    if (R2 > R_cap) break;
    cur = absorbing_green_values(d, km, R2);
    rep.radii.push_back(R2);
    rep.origin_values.push_back(cur[0]);
    double change = 0;
    for (std::size_t i = 0; i < target.size(); ++i) change = std::max(change, std::fabs(cur[i] - prev[i]) / cur[i]);
    rep.relative_change = change;
    prev = cur;
    R = R2;
    if (change < tol) {
      rep.converged = true;
      break;
    }
  }
  if (rep.radii.size() >= 3) {
    Eigen::MatrixXd A(rep.radii.size(), 3);
    Eigen::VectorXd y(rep.radii.size());
    for (std::size_t i = 0; i < rep.radii.size(); ++i) {
      const double Ri = rep.radii[i];
      A(Eigen::Index(i), 0) = 1;
      A(Eigen::Index(i), 1) = std::pow(Ri, 2.0 - d);
      A(Eigen::Index(i), 2) = std::pow(Ri, 1.0 - d);
      y(Eigen::Index(i)) = rep.origin_values[i];
    }
    rep.extrapolated_origin = A.colPivHouseholderQr().solve(y)(0);
  } else {
    rep.extrapolated_origin = prev[0];
  }
  if (!rep.converged)
    log_warn("absorbing solve not converged at R=" + std::to_string(R) +
             " (relative change " + std::to_string(rep.relative_change) + ")");
  std::vector<double> v(prev.begin(), prev.begin() + std::ptrdiff_t(target.size()));
  std::vector<double> e(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) e[i] = rep.relative_change * v[i];
  GreenTable t(d, km, GreenMethod::absorbing_solve, radius, std::move(v), std::move(e), tol);
  std::ostringstream m;
  m << "{\"builder\":\"absorbing_solve\",\"d\":" << d << ",\"kill_mean\":\"" << km.str() << "\",\"radius\":" << radius
    << ",\"R_final\":" << R << ",\"converged\":" << (rep.converged ? "true" : "false") << "}";
  t.set_manifest(m.str());
  if (report) *report = rep;
  return t;
}

// ---- Monte Carlo ----

double return_tail_bound(int d, std::uint64_t L) {
  if (d <= 2) return std::numeric_limits<double>::infinity();
  const double half = 0.5 * d;
  return 2.0 * std::pow(double(d) / (2.0 * M_PI), half) * std::pow(double(std::max<std::uint64_t>(L, 1)), 1.0 - half) /
         (half - 1.0);
}

double green_asymptotic_constant(int d) {
  const double half = 0.5 * d;
  return half * gsl_sf_gamma(half - 1.0) * std::pow(M_PI, -half);
}

GreenMcResult green_mc(int d, KillMean km, const Point& x, std::uint64_t reps, std::uint64_t horizon, RngStream rng) {
  if (km.is_free() && d <= 2) throw DimensionError("free Green's function needs d >= 3");
  if (reps == 0) throw std::invalid_argument("green_mc needs reps >= 1");
  GreenMcResult out;
  out.horizon = horizon;
  RunningStats st;
  const std::uint32_t two_d = std::uint32_t(2 * d);
  for (std::uint64_t r = 0; r < reps; ++r) {
    RngStream s = rng.child(r);
    std::uint64_t steps = horizon;
    if (!km.is_free()) steps = std::min(steps, s.killed_lifetime(km.T));
    Point p(d);
    std::uint64_t visits = (p == x);
    for (std::uint64_t i = 0; i < steps; ++i) {
      apply_step(p, std::uint8_t(s.below(two_d)));
      visits += (p == x);
    }
    st.add(double(visits));
  }
  out.est = st.estimate();
  out.truncation_bias = return_tail_bound(d, horizon) * (km.is_free() ? 1.0 : std::pow(km.survival(), double(horizon)));
  return out;
}

// ---- cache ----

std::string GreenCache::file_for(int d, KillMean km) const {
  return (std::filesystem::path(dir_) / ("green_d" + std::to_string(d) + "_T" + km.str() + ".fgt")).string();
}

bool GreenCache::on_disk(int d, KillMean km) const { return !dir_.empty() && std::filesystem::exists(file_for(d, km)); }

std::shared_ptr<const GreenTable> GreenCache::get(int d, KillMean km) {
  std::lock_guard<std::mutex> lk(mu_);
  const auto key = std::make_pair(d, km.T);
  if (auto it = tables_.find(key); it != tables_.end()) return it->second;
  const int want = radius_override_ > 0 ? radius_override_ : default_green_radius(d);
  if (on_disk(d, km)) {
    auto t = std::make_shared<GreenTable>(GreenTable::load(file_for(d, km)));
    if (t->radius() >= want || !allow_build_) {
      tables_[key] = t;
      return t;
    }
  }
  if (!allow_build_)
    throw CacheMissing("no green table for d=" + std::to_string(d) + ", T=" + km.str() +
                       (dir_.empty() ? std::string() : " in " + dir_));
  auto t = std::make_shared<GreenTable>(build_green_quadrature(d, km, want));
  if (!dir_.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    try {
      t->save(file_for(d, km));
    } catch (const std::exception& e) {
      log_warn(std::string("could not persist green table: ") + e.what());
    }
  }
  tables_[key] = t;
  return t;
}

std::shared_ptr<const GreenTable> GreenCache::ensure(int d, KillMean km) {
  const bool prev = allow_build_;
  allow_build_ = true;
  try {
    auto t = get(d, km);
    allow_build_ = prev;
    return t;
  } catch (...) {
    allow_build_ = prev;
    throw;
  }
}

void GreenCache::put(std::shared_ptr<const GreenTable> t) {
  std::lock_guard<std::mutex> lk(mu_);
  tables_[std::make_pair(t->dim(), t->kill_mean().T)] = std::move(t);
}

}  // namespace fri
