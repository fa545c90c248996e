#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <absl/container/flat_hash_set.h>

namespace fri {

inline constexpr int kMaxDim = 8;
using Coord = std::int32_t;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/** A site of Z^d. The dimension is carried at runtime. */
struct Point {
  std::array<Coord, kMaxDim> c{};
  int d = 0;

  Point() = default;
  explicit Point(int dim);
  Point(std::initializer_list<Coord> coords);
  static Point from(const Coord* coords, int dim);

  int dim() const { return d; }
  Coord operator[](int i) const { return c[i]; }
  Coord& operator[](int i) { return c[i]; }

  friend bool operator==(const Point& a, const Point& b) {
    if (a.d != b.d) return false;
    for (int i = 0; i < a.d; ++i)
      if (a.c[i] != b.c[i]) return false;
    return true;
  }
  friend bool operator!=(const Point& a, const Point& b) { return !(a == b); }
  // Lexicographic; used by ordered containers.
  friend bool operator<(const Point& a, const Point& b);

  Point operator+(const Point& o) const;
  Point operator-(const Point& o) const;
  Point scaled(Coord k) const;

  template <typename H>
  friend H AbslHashValue(H h, const Point& p) {
    h = H::combine(std::move(h), p.d);
    for (int i = 0; i < p.d; ++i) h = H::combine(std::move(h), p.c[i]);
    return h;
  }

  std::string str() const;
};

// Unit vector e_i (0-based axis) in dimension d.
Point unit(int d, int axis, Coord sign = 1);

bool lex_less(const Point& x, const Point& y);
Coord linf(const Point& a, const Point& b);
Coord l1(const Point& a, const Point& b);

/** Mixed-radix packing of coordinates into 61 bits, centered at the origin. */
class KeyCodec {
 public:
  explicit KeyCodec(int d);
  int dim() const { return d_; }
  int bits() const { return bits_; }
  Coord lo() const { return -(Coord(1) << (bits_ - 1)); }
  Coord hi() const { return (Coord(1) << (bits_ - 1)) - 1; }
  bool fits(const Point& p) const;
  std::uint64_t pack(const Point& p) const;  // caller checks fits()
  Point unpack(std::uint64_t key) const;
  // Key offset of a unit step along axis (add/subtract from a packed key).
  std::uint64_t step(int axis) const { return std::uint64_t(1) << (bits_ * axis); }

 private:
  int d_;
  int bits_;
};

/** Set of sites: packed keys when they fit, ordered fallback otherwise. */
class SiteSet {
 public:
  SiteSet() : SiteSet(3) {}
  explicit SiteSet(int d) : codec_(d) {}
  SiteSet(int d, const std::vector<Point>& pts);

  int dim() const { return codec_.dim(); }
  const KeyCodec& codec() const { return codec_; }
  bool insert(const Point& p);
  bool contains(const Point& p) const;
  bool contains_key(std::uint64_t key) const { return packed_.contains(key); }
  std::size_t size() const { return packed_.size() + overflow_.size(); }
  bool empty() const { return size() == 0; }
  void clear();
  void reserve(std::size_t n) { packed_.reserve(n); }
  bool has_overflow() const { return !overflow_.empty(); }
  void merge(const SiteSet& other);

  // Lexicographically sorted list of members.
  std::vector<Point> sorted() const;

  template <typename F>
  void for_each(F&& f) const {
    for (auto k : packed_) f(codec_.unpack(k));
    for (const auto& p : overflow_) f(p);
  }

  friend bool operator==(const SiteSet& a, const SiteSet& b);

 private:
  KeyCodec codec_;
  absl::flat_hash_set<std::uint64_t> packed_;
  std::set<Point> overflow_;
};

enum class BoxKind { plain, enlarged };

struct LatticeBox {
  Point corner;
  Coord side = 1;
  BoxKind kind = BoxKind::plain;

  Coord lo(int i) const { return kind == BoxKind::plain ? corner[i] : corner[i] - side; }
  // Exclusive upper bound.
  Coord hi(int i) const { return kind == BoxKind::plain ? corner[i] + side : corner[i] + 2 * side; }
  Coord extent() const { return kind == BoxKind::plain ? side : 3 * side; }
  bool contains(const Point& p) const;
  std::uint64_t volume() const;
};

LatticeBox plain_box(const Point& corner, Coord n);
LatticeBox enlarged_box(const Point& corner, Coord n);

// Enumerates sites in lexicographic order.
std::vector<Point> box_sites(const LatticeBox& b, int ambient_d);
std::vector<Point> box_sites(const LatticeBox& b);

template <typename F>
void for_each_site(const LatticeBox& b, F&& f) {
  const int d = b.corner.d;
  Point p(d);
  for (int i = 0; i < d; ++i) p[i] = b.lo(i);
  if (b.side <= 0) return;
  while (true) {
    f(p);
    int i = d - 1;
    while (i >= 0) {
      if (++p[i] < b.hi(i)) break;
      p[i] = b.lo(i);
      --i;
    }
    if (i < 0) return;
  }
}

struct Boundaries {
  std::vector<Point> inner;
  std::vector<Point> outer;
};

Boundaries boundaries(const std::vector<Point>& A);
std::vector<Point> inner_boundary(const SiteSet& A);
std::vector<Point> outer_boundary(const SiteSet& A);

Coord set_distance(const std::vector<Point>& A, const std::vector<Point>& B);

/**
 * Order on finite sets: A precedes B when A is a proper subset of B, or when
 * A is not a subset of B and the first differing element of the sorted
 * sequences is smaller in A. Equal sets are not ordered. `subset_clause`
 * reports whether the subset branch decided the comparison.
 */
bool set_lex_less(const std::vector<Point>& A, const std::vector<Point>& B,
                  bool* subset_clause = nullptr);

struct Edge {
  Point lo;  // endpoint with the smaller coordinate along axis
  int axis = 0;

  Point hi() const;
  friend bool operator==(const Edge& a, const Edge& b) { return a.axis == b.axis && a.lo == b.lo; }
  friend bool operator<(const Edge& a, const Edge& b) {
    if (a.lo != b.lo) return a.lo < b.lo;
    return a.axis < b.axis;
  }
};

// Throws unless |a-b|_2 = 1.
Edge make_edge(const Point& a, const Point& b);

class EdgeSet {
 public:
  EdgeSet() : EdgeSet(3) {}
  explicit EdgeSet(int d) : codec_(d) {}

  int dim() const { return codec_.dim(); }
  bool insert(const Edge& e);
  bool insert(const Point& a, const Point& b) { return insert(make_edge(a, b)); }
  bool contains(const Edge& e) const;
  std::size_t size() const { return packed_.size() + overflow_.size(); }
  bool empty() const { return size() == 0; }
  void merge(const EdgeSet& other);

  std::vector<Edge> sorted() const;
  SiteSet vertices() const;

  template <typename F>
  void for_each(F&& f) const {
    for (auto k : packed_) f(Edge{codec_.unpack(k >> 3), int(k & 7)});
    for (const auto& e : overflow_) f(e);
  }

 private:
  KeyCodec codec_;
  absl::flat_hash_set<std::uint64_t> packed_;
  std::set<Edge> overflow_;
};

}  // namespace fri
