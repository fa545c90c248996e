#include "fri/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "fri/format.hpp"
#include "fri/scaling.hpp"

namespace fri {

namespace {

struct UnionFind {
  std::vector<std::uint32_t> parent, size;
  explicit UnionFind(std::size_t n) : parent(n), size(n, 1) { std::iota(parent.begin(), parent.end(), 0u); }
  std::uint32_t find(std::uint32_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (size[a] < size[b]) std::swap(a, b);
    parent[b] = a;
    size[a] += size[b];
  }
};

}  // namespace

ClusterMap::ClusterMap(const EdgeSet& E) : d_(E.dim()) {
  auto idx = [&](const Point& p) {
    auto [it, fresh] = index_.emplace(p, std::uint32_t(sites_.size()));
    if (fresh) sites_.push_back(p);
    return it->second;
  };
  std::vector<std::pair<std::uint32_t, std::uint32_t>> links;
  links.reserve(E.size());
  E.for_each([&](const Edge& e) {
    const std::uint32_t a = idx(e.lo);
    const std::uint32_t b = idx(e.hi());
    links.emplace_back(a, b);
  });
  UnionFind uf(sites_.size());
  for (auto [a, b] : links) uf.unite(a, b);
  // Smallest member per root, then ids in the order of those members.
  const std::uint32_t none = std::numeric_limits<std::uint32_t>::max();
  std::vector<std::uint32_t> best(sites_.size(), none);
  for (std::uint32_t i = 0; i < sites_.size(); ++i) {
    const std::uint32_t r = uf.find(i);
    if (best[r] == none || sites_[i] < sites_[best[r]]) best[r] = i;
  }
  std::vector<std::uint32_t> roots;
  for (std::uint32_t i = 0; i < sites_.size(); ++i)
    if (uf.find(i) == i) roots.push_back(i);
  std::sort(roots.begin(), roots.end(), [&](std::uint32_t a, std::uint32_t b) { return sites_[best[a]] < sites_[best[b]]; });
  std::vector<std::int64_t> root_id(sites_.size(), -1);
  for (std::size_t k = 0; k < roots.size(); ++k) {
    root_id[roots[k]] = std::int64_t(k);
    reps_.push_back(sites_[best[roots[k]]]);
    sizes_.push_back(uf.size[roots[k]]);
  }
  site_id_.resize(sites_.size());
  for (std::uint32_t i = 0; i < sites_.size(); ++i) site_id_[i] = root_id[uf.find(i)];
}

std::int64_t ClusterMap::id(const Point& p) const {
  auto it = index_.find(p);
  return it == index_.end() ? -1 : site_id_[it->second];
}

std::vector<Point> ClusterMap::members(std::int64_t id) const {
  std::vector<Point> out;
  for (std::size_t i = 0; i < sites_.size(); ++i)
    if (site_id_[i] == id) out.push_back(sites_[i]);
  std::sort(out.begin(), out.end());
  return out;
}

ClusterMap clusters(const EdgeSet& E) { return ClusterMap(E); }

bool connected(const std::vector<Point>& A, const std::vector<Point>& B, const ClusterMap& m) {
  SiteSet a(A.empty() ? m.dim() : A.front().d, A);
  for (const auto& b : B)
    if (a.contains(b)) return true;
  std::vector<std::int64_t> ids;
  for (const auto& p : A) {
    const auto i = m.id(p);
    if (i >= 0) ids.push_back(i);
  }
  std::sort(ids.begin(), ids.end());
  for (const auto& p : B) {
    const auto i = m.id(p);
    if (i >= 0 && std::binary_search(ids.begin(), ids.end(), i)) return true;
  }
  return false;
}

bool connected(const std::vector<Point>& A, const std::vector<Point>& B, const EdgeSet& E) {
  return connected(A, B, ClusterMap(E));
}

bool crossing(const EdgeSet& E, int d, Coord N) {
  if (N < 1) throw std::invalid_argument("N must be >= 1");
  const ClusterMap m(E);
  const auto id0 = m.id(Point(d));
  if (id0 < 0) return false;
  for (const auto& p : m.members(id0))
    for (int i = 0; i < d; ++i)
      if (p[i] >= N - 1 || p[i] <= -N) return true;
  return false;
}

bool crossing(const FriSample& s, Coord N) {
  const auto& w = s.config.window;
  for (int i = 0; i < s.config.d; ++i)
    if (w.lo(i) > -N || w.hi(i) < N) throw std::invalid_argument("window too small for the crossing box");
  return crossing(edges_of(s), s.config.d, N);
}

LayerSeq layered_decomposition(const std::vector<Point>& K, const std::vector<Trajectory>& ts, int k_max) {
  if (k_max < 1) throw std::invalid_argument("k_max must be >= 1");
  LayerSeq L;
  L.base = K;
  std::sort(L.base.begin(), L.base.end());
  L.base.erase(std::unique(L.base.begin(), L.base.end()), L.base.end());
  if (L.base.empty()) {
    L.exhausted = true;
    return L;
  }
  // Inverted index: site -> trajectories through it (V = ∅ for length 0).
  absl::flat_hash_map<Point, std::vector<std::uint32_t>> through;
  for (std::uint32_t i = 0; i < ts.size(); ++i) {
    if (ts[i].path.length() == 0) continue;
    ts[i].path.for_each_vertex([&](const Point& v) {
      auto& l = through[v];
      if (l.empty() || l.back() != i) l.push_back(i);
    });
  }
  // First layer index per site: 0 for K, k for V(Π_k) \ earlier.
  absl::flat_hash_map<Point, int> first;
  for (const auto& x : L.base) first.emplace(x, 0);
  std::vector<char> used(ts.size(), 0);
  std::vector<Point> frontier = L.base;
  for (int k = 1; k <= k_max; ++k) {
    std::vector<std::size_t> layer;
    for (const auto& x : frontier) {
      auto it = through.find(x);
      if (it == through.end()) continue;
      for (auto i : it->second) {
        if (used[i]) continue;
        // Must avoid K and V(Π_j) for j <= k-2.
        bool ok = true;
        ts[i].path.for_each_vertex([&](const Point& v) {
          auto f = first.find(v);
          if (f != first.end() && f->second <= k - 2) ok = false;
        });
        if (!ok) throw std::logic_error("layer recursion met an earlier layer");
        used[i] = 1;
        layer.push_back(i);
      }
    }
    if (layer.empty()) {
      L.exhausted = true;
      break;
    }
    std::sort(layer.begin(), layer.end());
    frontier.clear();
    for (auto i : layer)
      ts[i].path.for_each_vertex([&](const Point& v) {
        if (first.emplace(v, k).second) frontier.push_back(v);
      });
    std::sort(frontier.begin(), frontier.end());
    L.layers.push_back(std::move(layer));
  }
  return L;
}

LayerSeq layered_decomposition(const std::vector<Point>& K, const FriSample& s, int k_max) {
  for (const auto& x : K)
    if (!s.config.window.contains(x)) throw std::invalid_argument("K must lie inside the unpadded window");
  return layered_decomposition(K, s.trajectories, k_max);
}

SiteSet layered_union(const LayerSeq& L, const std::vector<Trajectory>& ts, int d) {
  SiteSet out(d, L.base);
  for (const auto& layer : L.layers)
    for (auto i : layer) ts[i].path.for_each_vertex([&](const Point& v) { out.insert(v); });
  return out;
}

SiteSet gamma_from_clusters(const std::vector<Point>& K, const EdgeSet& E) {
  const ClusterMap m(E);
  SiteSet out(E.dim(), K);
  std::vector<std::int64_t> ids;
  for (const auto& x : K) {
    const auto i = m.id(x);
    if (i >= 0) ids.push_back(i);
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  for (auto i : ids)
    for (const auto& p : m.members(i)) out.insert(p);
  return out;
}

// ---- layer capacity series ----

LayerSeries layer_capacity_series(int d, double v, double T, const std::vector<Point>& K, int k_max,
                                  std::uint64_t reps, RngStream rng, const GreenTable& gT,
                                  const CapacityBudget& budget, const LayerSeriesOptions& opt) {
  if (!(v > 0)) throw std::invalid_argument("v must be positive");
  if (reps < 1) throw std::invalid_argument("reps must be >= 1");
  if (gT.dim() != d || !(gT.kill_mean() == KillMean::killed(T)))
    throw std::invalid_argument("layer series needs the killed green table at T");
  LayerSeries out;
  out.d = d;
  out.v = v;
  out.T = T;
  out.u = v / f_d(d, T);
  out.reps = reps;
  const EscapeVector esK = escape_exact(K, gT, budget.solver);
  std::vector<std::vector<double>> caps(reps, std::vector<double>(std::size_t(k_max), 0.0));
  std::vector<std::uint64_t> fallbacks(reps, 0);
  parallel_for(reps, opt.workers, [&](std::size_t r) {
    RngStream s = rng.child(r);
    const LayerDraw draw = grow_layers(esK, out.u, T, k_max, opt.condition_first_layer, opt.growth, s.child(0));
    for (std::size_t k = 0; k < draw.layers.size(); ++k) {
      SiteSet V(d);
      for (const auto& p : draw.layers[k]) p.for_each_vertex([&](const Point& x) { V.insert(x); });
      CapEstimate c;
      try {
        c = capacity_exact(V.sorted(), gT, budget.solver);
      } catch (const SolveError&) {
        if (!budget.allow_mc_fallback) throw;
        c = capacity_mc(V.sorted(), KillMean::killed(T), budget.mc, s.child(k + 1));
        ++fallbacks[r];
      }
      caps[r][k] = draw.weight * c.value;
    }
  });
  for (int k = 0; k < k_max; ++k) {
    RunningStats st;
    std::uint64_t ne = 0;
    for (std::size_t r = 0; r < reps; ++r) {
      st.add(caps[r][std::size_t(k)]);
      ne += caps[r][std::size_t(k)] > 0;
    }
    out.rows.push_back({k + 1, st.estimate(), ne});
  }
  for (auto f : fallbacks) out.mc_fallbacks += f;
  fit_layer_ratio(out);
  return out;
}

void fit_layer_ratio(LayerSeries& s) {
  // Weighted fit of log mean_k on k; weights from the delta-method variance.
  double sw = 0, swx = 0, swy = 0, swxx = 0, swxy = 0;
  int pts = 0;
  for (const auto& row : s.rows) {
    const double m = row.mean_cap.value, se = row.mean_cap.stderr_;
    if (!(m > 0) || !(se > 0) || row.nonempty < 2) continue;
    const double w = (m / se) * (m / se);
    const double x = row.k, y = std::log(m);
    sw += w;
    swx += w * x;
    swy += w * y;
    swxx += w * x * x;
    swxy += w * x * y;
    ++pts;
  }
  s.fit_points = pts;
  if (pts < 2) {
    s.ratio = s.ratio_lo = s.ratio_hi = std::numeric_limits<double>::quiet_NaN();
    return;
  }
  const double den = sw * swxx - swx * swx;
  const double b = (sw * swxy - swx * swy) / den;
  const double se_b = std::sqrt(sw / den);
  s.ratio = std::exp(b);
  s.ratio_lo = std::exp(b - 1.959963984540054 * se_b);
  s.ratio_hi = std::exp(b + 1.959963984540054 * se_b);
}

void write_layer_csv(std::ostream& o, const LayerSeries& s, const std::string& run_id, bool header) {
  if (header) o << "run_id,k,mean_capT,stderr,reps,u,T,d\n";
  for (const auto& r : s.rows)
    o << run_id << ',' << r.k << ',' << fmt_double(r.mean_cap.value) << ',' << fmt_double(r.mean_cap.stderr_) << ','
      << s.reps << ',' << fmt_double(s.u) << ',' << fmt_double(s.T) << ',' << s.d << '\n';
}

}  // namespace fri
