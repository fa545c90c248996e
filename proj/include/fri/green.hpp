#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "fri/lattice.hpp"
#include "fri/rng.hpp"
#include "fri/stats.hpp"

namespace fri {

/** Mean lifetime T of a killed walk, or infinity for the free walk. */
struct KillMean {
  double T = std::numeric_limits<double>::infinity();

  static KillMean free_walk() { return {}; }
  static KillMean killed(double t) { return {t}; }
  bool is_free() const { return std::isinf(T); }
  // Per-step survival probability T/(T+1).
  double survival() const { return is_free() ? 1.0 : T / (T + 1.0); }
  std::string str() const;
  friend bool operator==(const KillMean& a, const KillMean& b) { return a.T == b.T; }
  friend bool operator<(const KillMean& a, const KillMean& b) { return a.T < b.T; }
};

enum class GreenMethod { monte_carlo = 0, absorbing_solve = 1, bessel_quadrature = 2 };
const char* to_string(GreenMethod m);

// Sorted absolute coordinates, ascending; the orbit representative of a
// displacement under coordinate permutations and sign flips.
struct Canonical {
  std::array<Coord, kMaxDim> c{};
  int d = 0;
  Coord max() const { return d ? c[d - 1] : 0; }
};
Canonical canonicalize(const Point& disp);

/** Colex rank of canonical tuples; a radius-r table is a prefix of radius r+1. */
class CanonicalIndex {
 public:
  CanonicalIndex() = default;
  CanonicalIndex(int d, int radius);
  int dim() const { return d_; }
  int radius() const { return r_; }
  std::uint64_t size() const { return size_; }
  std::uint64_t index(const Canonical& k) const {
    std::uint64_t idx = 0;
    for (int i = 0; i < d_; ++i) idx += binom_[std::size_t(k.c[i] + i) * std::size_t(d_ + 1) + std::size_t(i + 1)];
    return idx;
  }
  // Visits every canonical tuple with max <= radius in index order.
  template <typename F>
  void for_each(F&& f) const;

 private:
  int d_ = 0;
  int r_ = 0;
  std::uint64_t size_ = 0;
  std::vector<std::uint64_t> binom_;
};

/**
 * Expected visits to x by a walk from 0 with survival s per step, written as
 * g_s(x) = \int_0^\infty e^{-t(1-s)} \prod_i e^{-ts/d} I_{|x_i|}(ts/d) dt and
 * integrated with a trapezoid rule in log t; the free case adds the analytic
 * large-t tail from the Bessel asymptotics.
 */
class GreenQuadrature {
 public:
  GreenQuadrature(int d, KillMean km, int max_order, double h = 0.3);

  int dim() const { return d_; }
  KillMean kill_mean() const { return km_; }
  int max_order() const { return max_order_; }
  double step() const { return h_; }
  std::size_t nodes() const { return w_.size(); }
  bool covers(const Canonical& k) const { return k.max() <= max_order_; }
  double value(const Canonical& k) const;

 private:
  int d_;
  KillMean km_;
  int max_order_;
  double h_;
  double tail_L_ = 0;                // free case: start of the analytic tail
  std::vector<double> w_;            // node weights
  std::vector<double> bessel_;       // [order][node], scaled I_n(z_j)
};

/**
 * Green's function table over canonical displacements up to `radius`.
 * Lookups outside the table use the attached quadrature when present and a
 * Monte-Carlo estimate (with a warning) otherwise.
 */
class GreenTable {
 public:
  GreenTable() = default;
  GreenTable(int d, KillMean km, GreenMethod method, int radius, std::vector<double> values,
             std::vector<double> stderrs, double tolerance);

  int dim() const { return index_.dim(); }
  KillMean kill_mean() const { return km_; }
  GreenMethod method() const { return method_; }
  int radius() const { return index_.radius(); }
  double tolerance() const { return tol_; }
  const std::string& manifest() const { return manifest_; }
  void set_manifest(std::string m) { manifest_ = std::move(m); }

  void attach_quadrature(std::shared_ptr<const GreenQuadrature> q) { quad_ = std::move(q); }
  bool has_quadrature() const { return quad_ != nullptr; }

  double value(const Point& disp) const { return value(canonicalize(disp)); }
  double value(const Canonical& k) const {
    if (k.max() <= index_.radius()) return values_[index_.index(k)];
    return miss(k);
  }
  double operator()(const Point& a, const Point& b) const;
  Estimate value_with_stderr(const Point& disp) const;
  bool covers(const Point& disp) const { return canonicalize(disp).max() <= radius(); }

  std::uint64_t quadrature_misses() const { return quad_misses_.load(); }
  std::uint64_t mc_misses() const { return mc_misses_.load(); }
  const std::vector<double>& values() const { return values_; }

  void save(const std::string& path) const;
  static GreenTable load(const std::string& path);

  GreenTable(const GreenTable& o);
  GreenTable& operator=(const GreenTable& o);

 private:
  double miss(const Canonical& k) const;

  KillMean km_;
  GreenMethod method_ = GreenMethod::bessel_quadrature;
  double tol_ = 0;
  CanonicalIndex index_;
  std::vector<double> values_;
  std::vector<double> stderr_;
  std::string manifest_;
  std::shared_ptr<const GreenQuadrature> quad_;
  mutable std::atomic<std::uint64_t> quad_misses_{0};
  mutable std::atomic<std::uint64_t> mc_misses_{0};
  mutable std::mutex mc_mu_;
  mutable std::map<std::vector<Coord>, double> mc_cache_;
};

// Default dense radius per dimension.
int default_green_radius(int d);

GreenTable build_green_quadrature(int d, KillMean km, int radius, int max_order = 1024, double h = 0.3);

/** Result of the absorbing-boundary solve on [-R,R]^d. */
struct AbsorbingReport {
  std::vector<int> radii;
  std::vector<double> origin_values;  // g_R(0) per radius
  double relative_change = 0;         // between the last two radii
  bool converged = false;
  double extrapolated_origin = 0;     // Richardson value in powers R^{2-d}, R^{1-d}
};

// g_R(0,x) for canonical x, max(x) <= R, with Dirichlet condition outside [-R,R]^d.
std::vector<double> absorbing_green_values(int d, KillMean km, int R, double cg_tol = 1e-12);

// Radius policy: solve at R and 2R until relative change of the target values
// drops below tol or R would exceed R_cap. Returns a table of radius `radius`.
GreenTable build_green_absorbing(int d, KillMean km, int radius, int R0, double tol, int R_cap,
                                 AbsorbingReport* report = nullptr);

// Richardson extrapolation of g_R(0) over the given radii.
double absorbing_extrapolate_origin(int d, KillMean km, const std::vector<int>& radii,
                                    std::vector<double>* per_radius = nullptr);

/** Monte-Carlo estimate of g(0,x) from visit counts of truncated walks. */
struct GreenMcResult {
  Estimate est;
  double truncation_bias = 0;  // upper bound on the missed visits beyond the horizon
  std::uint64_t horizon = 0;
};
GreenMcResult green_mc(int d, KillMean km, const Point& x, std::uint64_t reps, std::uint64_t horizon,
                       RngStream rng);

// Upper bound on sum_{n>L} max_z p_n(z) from the local limit theorem.
double return_tail_bound(int d, std::uint64_t L);

// Asymptotic constant c_d in g(x) ~ c_d |x|^{2-d}.
double green_asymptotic_constant(int d);

/** Process-wide registry of tables keyed by (d, T), optionally backed by files. */
class GreenCache {
 public:
  GreenCache() = default;
  explicit GreenCache(std::string dir, bool allow_build = true) : dir_(std::move(dir)), allow_build_(allow_build) {}

  void set_dir(std::string dir) { dir_ = std::move(dir); }
  void set_allow_build(bool b) { allow_build_ = b; }
  void set_radius_override(int r) { radius_override_ = r; }
  const std::string& dir() const { return dir_; }

  std::string file_for(int d, KillMean km) const;
  bool on_disk(int d, KillMean km) const;
  // Returns the table, loading or building it as permitted. Throws
  // CacheMissing when neither a file nor a build is allowed.
  std::shared_ptr<const GreenTable> get(int d, KillMean km);
  // Builds (or loads) and persists to dir.
  std::shared_ptr<const GreenTable> ensure(int d, KillMean km);
  void put(std::shared_ptr<const GreenTable> t);

 private:
  std::string dir_;
  bool allow_build_ = true;
  int radius_override_ = 0;
  std::mutex mu_;
  std::map<std::pair<int, double>, std::shared_ptr<const GreenTable>> tables_;
};

class CacheMissing : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename F>
void CanonicalIndex::for_each(F&& f) const {
  Canonical k;
  k.d = d_;
  // Colex order: last coordinate outermost.
  std::function<void(int, Coord)> rec = [&](int i, Coord hi) {
    if (i < 0) {
      f(k);
      return;
    }
    for (Coord v = 0; v <= hi; ++v) {
      k.c[i] = v;
      rec(i - 1, v);
    }
  };
  rec(d_ - 1, r_);
}

}  // namespace fri
