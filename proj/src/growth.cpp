#include "fri/growth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <queue>

#include <absl/container/flat_hash_map.h>

#include "fri/errors.hpp"

namespace fri {

namespace {

constexpr std::uint32_t kAbsent = std::numeric_limits<std::uint32_t>::max();

/** Site -> stage at which it joined. */
class StageMap {
 public:
  explicit StageMap(int d) : codec_(d) {}

  std::uint32_t get(const Point& p) const {
    if (codec_.fits(p)) {
      auto it = packed_.find(codec_.pack(p));
      return it == packed_.end() ? kAbsent : it->second;
    }
    auto it = overflow_.find(p);
    return it == overflow_.end() ? kAbsent : it->second;
  }
  // Returns true if p was new.
  bool insert(const Point& p, std::uint32_t stage) {
    if (codec_.fits(p)) return packed_.emplace(codec_.pack(p), stage).second;
    return overflow_.emplace(p, stage).second;
  }
  std::size_t size() const { return packed_.size() + overflow_.size(); }

 private:
  KeyCodec codec_;
  absl::flat_hash_map<std::uint64_t, std::uint32_t> packed_;
  std::map<Point, std::uint32_t> overflow_;
};

std::uint64_t site_hash(const Point& p) {
  std::uint64_t h = 0x9e3779b97f4a7c15ULL ^ std::uint64_t(p.d);
  for (int i = 0; i < p.d; ++i) h = splitmix64(h ^ std::uint64_t(std::uint32_t(p[i])));
  return h;
}

struct Walker {
  const StageMap& stages;
  double T;
  std::uint64_t steps = 0;

  // Killed walk from x whose vertices after time 0 all have stage > limit
  // (limit < 0: unrestricted). Empty optional on rejection.
  std::optional<std::vector<std::uint8_t>> walk(const Point& x, long limit, RngStream& s) {
    const std::uint64_t life = s.killed_lifetime(T);
    const std::uint32_t two_d = std::uint32_t(2 * x.d);
    std::vector<std::uint8_t> codes;
    codes.reserve(std::size_t(std::min<std::uint64_t>(life, 1 << 16)));
    Point p = x;
    for (std::uint64_t i = 0; i < life; ++i) {
      const auto c = std::uint8_t(s.below(two_d));
      apply_step(p, c);
      ++steps;
      codes.push_back(c);
      if (limit >= 0) {
        const std::uint32_t st = stages.get(p);
        if (st != kAbsent && long(st) <= limit) return std::nullopt;
      }
    }
    return codes;
  }
};

// Joins a backward part (walk from x, to be reversed) with a forward part.
Path join(const Point& x, const std::vector<std::uint8_t>& back, const std::vector<std::uint8_t>& fwd) {
  Point start = x;
  for (auto c : back) apply_step(start, c);
  Path p(start);
  p.steps.reserve(back.size() + fwd.size());
  for (auto it = back.rbegin(); it != back.rend(); ++it) p.steps.push_back(std::uint8_t(*it ^ 1));
  p.steps.insert(p.steps.end(), fwd.begin(), fwd.end());
  return p;
}

struct Arrival {
  double label;
  Point site;
  std::uint64_t index;
  bool operator>(const Arrival& o) const { return label > o.label; }
};

}  // namespace

InvasionResult invasion_threshold(int d, double T, Coord N, double u_cap, const GrowthOptions& opt, RngStream rng) {
  if (d < 3 || d > kMaxDim) throw DimensionError("invasion needs 3 <= d <= 8");
  if (N < 1) throw std::invalid_argument("box radius N must be >= 1");
  if (!(T > 0)) throw std::invalid_argument("kill mean must be positive");
  InvasionResult res;
  StageMap stages(d);
  Walker w{stages, T};
  const double rate = 2.0 * d;  // candidates per site per unit of u
  std::priority_queue<Arrival, std::vector<Arrival>, std::greater<Arrival>> heap;
  auto first_arrival = [&](const Point& x) {
    RngStream s = rng.child(site_hash(x));
    heap.push({s.exponential(rate), x, 0});
  };
  const Point origin(d);
  stages.insert(origin, 0);
  first_arrival(origin);
  std::uint32_t stage = 0;
  double level = 0;
  auto outside = [&](const Point& p) {
    for (int i = 0; i < d; ++i)
      if (p[i] >= N - 1 || p[i] <= -N) return true;
    return false;
  };
  if (opt.rooted) {
    const Path root = rooted_trajectory(d, T, rng.child(0x726f6f74ULL));
    w.steps += root.length();
    stage = 1;
    ++res.trajectories;
    bool hit = outside(origin);
    root.for_each_vertex([&](const Point& v) {
      if (stages.insert(v, stage)) {
        first_arrival(v);
        hit = hit || outside(v);
      }
    });
    if (hit) {
      res.crossed = true;
      res.threshold = 0;
      res.steps = w.steps;
      res.sites = stages.size();
      return res;
    }
  }
  while (!heap.empty()) {
    const Arrival a = heap.top();
    if (a.label > u_cap) {
      res.level_reached = u_cap;
      break;
    }
    heap.pop();
    res.level_reached = a.label;
    ++res.candidates;
    RngStream s = rng.child(site_hash(a.site)).child(a.index + 1);
    heap.push({a.label + s.exponential(rate), a.site, a.index + 1});
    const long st = long(stages.get(a.site));
    auto back = w.walk(a.site, st, s);
    if (back) {
      auto fwd = w.walk(a.site, st - 1, s);
      if (fwd && back->size() + fwd->size() > 0) {
        level = std::max(level, a.label);
        ++stage;
        ++res.trajectories;
        const Path p = join(a.site, *back, *fwd);
        bool hit = false;
        p.for_each_vertex([&](const Point& v) {
          if (stages.insert(v, stage)) {
            first_arrival(v);
            hit = hit || outside(v);
          }
        });
        // The origin only counts once some trajectory covers it.
        if (hit || (stage == 1 && outside(origin))) {
          res.crossed = true;
          res.threshold = level;
          break;
        }
      }
    }
    if (w.steps > opt.step_budget) {
      res.censored = true;
      break;
    }
  }
  res.steps = w.steps;
  res.sites = stages.size();
  return res;
}

Path rooted_trajectory(int d, double T, RngStream rng) {
  StageMap stages(d);
  const Point origin(d);
  stages.insert(origin, 0);
  Walker w{stages, T};
  while (true) {
    auto back = w.walk(origin, 0, rng);
    if (!back) continue;
    auto fwd = w.walk(origin, -1, rng);
    if (back->size() + fwd->size() > 0) return join(origin, *back, *fwd);
  }
}

namespace {

std::uint64_t zero_truncated_poisson(double mean, RngStream& s) {
  if (mean > 1.0) {
    while (true) {
      const std::uint64_t k = s.poisson(mean);
      if (k > 0) return k;
    }
  }
  // Inversion over k >= 1.
  const double norm = -std::expm1(-mean);
  double p = std::exp(-mean) * mean / norm;
  double u = s.uniform();
  std::uint64_t k = 1;
  while (u > p && k < 1000) {
    u -= p;
    ++k;
    p *= mean / double(k);
  }
  return k;
}

}  // namespace

LayerDraw grow_layers(const EscapeVector& esK, double u, double T, int k_max, bool condition_nonempty,
                      const GrowthOptions& opt, RngStream rng) {
  if (esK.sites.empty()) throw std::invalid_argument("grow_layers needs a nonempty K");
  if (!(u >= 0)) throw std::invalid_argument("intensity must be nonnegative");
  if (k_max < 1) throw std::invalid_argument("k_max must be >= 1");
  if (!(esK.kill_mean == KillMean::killed(T))) throw std::invalid_argument("escape vector must be killed at T");
  const int d = esK.sites.front().d;
  LayerDraw out;
  StageMap stages(d);
  Walker w{stages, T};
  for (const auto& x : esK.sites) stages.insert(x, 0);

  // First layer: Pois(2du Es_K(x)) trajectories first entering K at x.
  std::vector<double> lam(esK.sites.size());
  double total = 0;
  for (std::size_t i = 0; i < lam.size(); ++i) total += lam[i] = 2.0 * d * u * esK.values[i];
  RngStream s0 = rng.child(0);
  std::uint64_t count = 0;
  if (total > 0) {
    if (condition_nonempty) {
      out.weight = -std::expm1(-total);
      count = zero_truncated_poisson(total, s0);
    } else {
      count = s0.poisson(total);
    }
  } else if (condition_nonempty) {
    out.weight = 0;
  }
  std::vector<Path> layer;
  for (std::uint64_t j = 0; j < count; ++j) {
    double r = s0.uniform() * total;
    std::size_t i = 0;
    while (i + 1 < lam.size() && r >= lam[i]) r -= lam[i++];
    const Point& x = esK.sites[i];
    RngStream s = s0.child(j + 1);
    std::optional<std::vector<std::uint8_t>> back;
    while (!(back = w.walk(x, 0, s))) {
      if (w.steps > opt.step_budget) throw BudgetError("layer growth exceeded its step budget");
    }
    auto fwd = w.walk(x, -1, s);
    if (back->size() + fwd->size() > 0) layer.push_back(join(x, *back, *fwd));
  }

  for (int k = 1;; ++k) {
    if (layer.empty()) {
      out.exhausted = true;
      break;
    }
    out.layers.push_back(std::move(layer));
    layer.clear();
    if (k >= k_max) break;
    // New sites of layer k get stage k.
    std::vector<Point> fresh;
    for (const auto& p : out.layers.back())
      p.for_each_vertex([&](const Point& v) {
        if (stages.insert(v, std::uint32_t(k))) fresh.push_back(v);
      });
    std::sort(fresh.begin(), fresh.end());
    for (const auto& x : fresh) {
      RngStream s = rng.child(site_hash(x));
      const std::uint64_t m = s.poisson(2.0 * d * u);
      for (std::uint64_t j = 0; j < m; ++j) {
        auto back = w.walk(x, k, s);
        if (!back) continue;
        auto fwd = w.walk(x, k - 1, s);
        if (!fwd || back->size() + fwd->size() == 0) continue;
        layer.push_back(join(x, *back, *fwd));
      }
      if (w.steps > opt.step_budget) throw BudgetError("layer growth exceeded its step budget");
    }
  }
  out.steps = w.steps;
  return out;
}

}  // namespace fri
