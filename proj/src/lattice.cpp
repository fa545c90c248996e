#include "fri/lattice.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

namespace fri {

Point::Point(int dim) : d(dim) {
  if (dim < 1 || dim > kMaxDim) throw DimensionError("dimension out of range: " + std::to_string(dim));
}

Point::Point(std::initializer_list<Coord> coords) : d(int(coords.size())) {
  if (d < 1 || d > kMaxDim) throw DimensionError("dimension out of range: " + std::to_string(d));
  int i = 0;
  for (Coord v : coords) c[i++] = v;
}

Point Point::from(const Coord* coords, int dim) {
  Point p(dim);
  for (int i = 0; i < dim; ++i) p.c[i] = coords[i];
  return p;
}

bool operator<(const Point& a, const Point& b) {
  if (a.d != b.d) return a.d < b.d;
  for (int i = 0; i < a.d; ++i)
    if (a.c[i] != b.c[i]) return a.c[i] < b.c[i];
  return false;
}

static void check_same(const Point& a, const Point& b) {
  if (a.d != b.d) throw DimensionError("dimension mismatch");
}

Point Point::operator+(const Point& o) const {
  check_same(*this, o);
  Point r(d);
  for (int i = 0; i < d; ++i) r.c[i] = c[i] + o.c[i];
  return r;
}

Point Point::operator-(const Point& o) const {
  check_same(*this, o);
  Point r(d);
  for (int i = 0; i < d; ++i) r.c[i] = c[i] - o.c[i];
  return r;
}

Point Point::scaled(Coord k) const {
  Point r(d);
  for (int i = 0; i < d; ++i) r.c[i] = c[i] * k;
  return r;
}

std::string Point::str() const {
  std::ostringstream os;
  os << '(';
  for (int i = 0; i < d; ++i) os << (i ? "," : "") << c[i];
  os << ')';
  return os.str();
}

Point unit(int d, int axis, Coord sign) {
  Point p(d);
  p[axis] = sign;
  return p;
}

bool lex_less(const Point& x, const Point& y) {
  check_same(x, y);
  return x < y;
}

Coord linf(const Point& a, const Point& b) {
  check_same(a, b);
  Coord m = 0;
  for (int i = 0; i < a.d; ++i) m = std::max(m, std::abs(a.c[i] - b.c[i]));
  return m;
}

Coord l1(const Point& a, const Point& b) {
  check_same(a, b);
  Coord s = 0;
  for (int i = 0; i < a.d; ++i) s += std::abs(a.c[i] - b.c[i]);
  return s;
}

// ---- KeyCodec ----

KeyCodec::KeyCodec(int d) : d_(d) {
  if (d < 1 || d > kMaxDim) throw DimensionError("dimension out of range: " + std::to_string(d));
  bits_ = std::min(61 / d, 31);
}

bool KeyCodec::fits(const Point& p) const {
  if (p.d != d_) throw DimensionError("dimension mismatch");
  const Coord l = lo(), h = hi();
  for (int i = 0; i < d_; ++i)
    if (p.c[i] < l || p.c[i] > h) return false;
  return true;
}

std::uint64_t KeyCodec::pack(const Point& p) const {
  std::uint64_t k = 0;
  const std::int64_t bias = std::int64_t(1) << (bits_ - 1);
  for (int i = d_ - 1; i >= 0; --i) k = (k << bits_) | std::uint64_t(std::int64_t(p.c[i]) + bias);
  return k;
}

Point KeyCodec::unpack(std::uint64_t key) const {
  Point p(d_);
  const std::uint64_t mask = (std::uint64_t(1) << bits_) - 1;
  const std::int64_t bias = std::int64_t(1) << (bits_ - 1);
  for (int i = 0; i < d_; ++i) {
    p.c[i] = Coord(std::int64_t(key & mask) - bias);
    key >>= bits_;
  }
  return p;
}

// ---- SiteSet ----

SiteSet::SiteSet(int d, const std::vector<Point>& pts) : codec_(d) {
  packed_.reserve(pts.size());
  for (const auto& p : pts) insert(p);
}

bool SiteSet::insert(const Point& p) {
  if (codec_.fits(p)) return packed_.insert(codec_.pack(p)).second;
  return overflow_.insert(p).second;
}

bool SiteSet::contains(const Point& p) const {
  if (codec_.fits(p)) return packed_.contains(codec_.pack(p));
  return overflow_.count(p) > 0;
}

void SiteSet::clear() {
  packed_.clear();
  overflow_.clear();
}

void SiteSet::merge(const SiteSet& other) {
  if (other.dim() != dim()) throw DimensionError("dimension mismatch");
  packed_.insert(other.packed_.begin(), other.packed_.end());
  overflow_.insert(other.overflow_.begin(), other.overflow_.end());
}

std::vector<Point> SiteSet::sorted() const {
  std::vector<Point> v;
  v.reserve(size());
  for_each([&](const Point& p) { v.push_back(p); });
  std::sort(v.begin(), v.end());
  return v;
}

bool operator==(const SiteSet& a, const SiteSet& b) {
  return a.dim() == b.dim() && a.packed_ == b.packed_ && a.overflow_ == b.overflow_;
}

// ---- boxes ----

bool LatticeBox::contains(const Point& p) const {
  if (p.d != corner.d) throw DimensionError("dimension mismatch");
  for (int i = 0; i < p.d; ++i)
    if (p[i] < lo(i) || p[i] >= hi(i)) return false;
  return true;
}

std::uint64_t LatticeBox::volume() const {
  std::uint64_t v = 1;
  for (int i = 0; i < corner.d; ++i) v *= std::uint64_t(extent());
  return v;
}

LatticeBox plain_box(const Point& corner, Coord n) { return {corner, n, BoxKind::plain}; }
LatticeBox enlarged_box(const Point& corner, Coord n) { return {corner, n, BoxKind::enlarged}; }

std::vector<Point> box_sites(const LatticeBox& b, int ambient_d) {
  if (b.corner.d != ambient_d) throw DimensionError("box corner dimension differs from ambient dimension");
  return box_sites(b);
}

std::vector<Point> box_sites(const LatticeBox& b) {
  if (b.side < 1) throw std::invalid_argument("box side must be positive");
  std::vector<Point> out;
  out.reserve(b.volume());
  for_each_site(b, [&](const Point& p) { out.push_back(p); });
  return out;
}

// ---- boundaries ----

template <typename F>
static void for_each_neighbor(const Point& p, F&& f) {
  Point q = p;
  for (int i = 0; i < p.d; ++i) {
    q[i] = p[i] + 1;
    f(q);
    q[i] = p[i] - 1;
    f(q);
    q[i] = p[i];
  }
}

std::vector<Point> inner_boundary(const SiteSet& A) {
  std::vector<Point> out;
  A.for_each([&](const Point& p) {
    bool edge = false;
    for_each_neighbor(p, [&](const Point& q) { edge = edge || !A.contains(q); });
    if (edge) out.push_back(p);
  });
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Point> outer_boundary(const SiteSet& A) {
  SiteSet seen(A.dim());
  A.for_each([&](const Point& p) {
    for_each_neighbor(p, [&](const Point& q) {
      if (!A.contains(q)) seen.insert(q);
    });
  });
  return seen.sorted();
}

Boundaries boundaries(const std::vector<Point>& A) {
  if (A.empty()) throw std::invalid_argument("boundaries of an empty set");
  SiteSet s(A.front().d, A);
  return {inner_boundary(s), outer_boundary(s)};
}

Coord set_distance(const std::vector<Point>& A, const std::vector<Point>& B) {
  if (A.empty() || B.empty()) throw std::invalid_argument("set_distance of an empty set");
  Coord best = std::numeric_limits<Coord>::max();
  for (const auto& a : A)
    for (const auto& b : B) {
      best = std::min(best, linf(a, b));
      if (best == 0) return 0;
    }
  return best;
}

bool set_lex_less(const std::vector<Point>& A, const std::vector<Point>& B, bool* subset_clause) {
  if (subset_clause) *subset_clause = false;
  std::vector<Point> a = A, b = B;
  std::sort(a.begin(), a.end());
  a.erase(std::unique(a.begin(), a.end()), a.end());
  std::sort(b.begin(), b.end());
  b.erase(std::unique(b.begin(), b.end()), b.end());
  if (a == b) return false;
  if (std::includes(b.begin(), b.end(), a.begin(), a.end())) {
    if (subset_clause) *subset_clause = true;
    return true;
  }
  auto [ia, ib] = std::mismatch(a.begin(), a.end(), b.begin(), b.end());
  // B is a proper prefix of A: there is no y_{i0} to compare against.
  if (ib == b.end()) return false;
  return *ia < *ib;
}

// ---- edges ----

Point Edge::hi() const {
  Point p = lo;
  p[axis] += 1;
  return p;
}

Edge make_edge(const Point& a, const Point& b) {
  check_same(a, b);
  int axis = -1;
  for (int i = 0; i < a.d; ++i) {
    const Coord diff = b[i] - a[i];
    if (diff == 0) continue;
    if (axis >= 0 || (diff != 1 && diff != -1)) throw std::invalid_argument("points are not nearest neighbors");
    axis = i;
  }
  if (axis < 0) throw std::invalid_argument("points are not nearest neighbors");
  return a[axis] < b[axis] ? Edge{a, axis} : Edge{b, axis};
}

bool EdgeSet::insert(const Edge& e) {
  if (codec_.fits(e.lo)) return packed_.insert((codec_.pack(e.lo) << 3) | std::uint64_t(e.axis)).second;
  return overflow_.insert(e).second;
}

bool EdgeSet::contains(const Edge& e) const {
  if (codec_.fits(e.lo)) return packed_.contains((codec_.pack(e.lo) << 3) | std::uint64_t(e.axis));
  return overflow_.count(e) > 0;
}

void EdgeSet::merge(const EdgeSet& other) {
  if (other.dim() != dim()) throw DimensionError("dimension mismatch");
  packed_.insert(other.packed_.begin(), other.packed_.end());
  overflow_.insert(other.overflow_.begin(), other.overflow_.end());
}

std::vector<Edge> EdgeSet::sorted() const {
  std::vector<Edge> v;
  v.reserve(size());
  for_each([&](const Edge& e) { v.push_back(e); });
  std::sort(v.begin(), v.end());
  return v;
}

SiteSet EdgeSet::vertices() const {
  SiteSet s(dim());
  s.reserve(2 * size());
  for_each([&](const Edge& e) {
    s.insert(e.lo);
    s.insert(e.hi());
  });
  return s;
}

}  // namespace fri
