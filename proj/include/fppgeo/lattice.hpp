#pragma once

// Integer-lattice geometry on Z^d: vertices, edges, boxes, hyperplanes,
// exact direction normalization and the level-then-lexicographic order.

#include <algorithm>
#include <array>
#include <cmath>
#include <compare>
#include <cstdint>
#include <cstdlib>
#include <initializer_list>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "fppgeo/error.hpp"

namespace fppgeo {

inline constexpr int kMaxDim = 4;
using Coord = std::int64_t;

class Vertex {
 public:
  Vertex() = default;

  explicit Vertex(int dim) : dim_(dim) { check_dim(dim); }

  Vertex(std::initializer_list<Coord> coords) : dim_(static_cast<int>(coords.size())) {
    check_dim(dim_);
    std::copy(coords.begin(), coords.end(), c_.begin());
  }

  static Vertex from_span(std::span<const Coord> coords) {
    Vertex v(static_cast<int>(coords.size()));
    std::copy(coords.begin(), coords.end(), v.c_.begin());
    return v;
  }

  static Vertex unit(int dim, int axis, Coord sign = 1) {
    Vertex v(dim);
    v.c_[axis] = sign;
    return v;
  }

  int dim() const noexcept { return dim_; }
  Coord operator[](int i) const noexcept { return c_[i]; }
  Coord& operator[](int i) noexcept { return c_[i]; }
  std::span<const Coord> coords() const noexcept { return {c_.data(), static_cast<size_t>(dim_)}; }

  Coord l1_norm() const noexcept {
    Coord s = 0;
    for (int i = 0; i < dim_; ++i) s += std::llabs(c_[i]);
    return s;
  }

  friend Vertex operator+(Vertex a, const Vertex& b) noexcept {
    for (int i = 0; i < a.dim_; ++i) a.c_[i] += b.c_[i];
    return a;
  }
  friend Vertex operator-(Vertex a, const Vertex& b) noexcept {
    for (int i = 0; i < a.dim_; ++i) a.c_[i] -= b.c_[i];
    return a;
  }
  friend Vertex operator-(Vertex a) noexcept {
    for (int i = 0; i < a.dim_; ++i) a.c_[i] = -a.c_[i];
    return a;
  }

  // Lexicographic, coordinate 1 first. Unused slots are zero, so comparing
  // the full array is lexicographic for equal dimensions.
  friend bool operator==(const Vertex&, const Vertex&) = default;
  friend std::strong_ordering operator<=>(const Vertex& a, const Vertex& b) {
    if (auto c = a.dim_ <=> b.dim_; c != 0) return c;
    return a.c_ <=> b.c_;
  }

  std::string str() const {
    std::string s = "(";
    for (int i = 0; i < dim_; ++i) {
      if (i) s += ",";
      s += std::to_string(c_[i]);
    }
    return s + ")";
  }

 private:
  static void check_dim(int dim) {
    if (dim < 1 || dim > kMaxDim)
      throw Error(ErrorCode::kInvalidParameter,
                  "dimension must be in [1," + std::to_string(kMaxDim) + "], got " + std::to_string(dim));
  }

  std::array<Coord, kMaxDim> c_{};
  int dim_ = 0;
};

inline std::ostream& operator<<(std::ostream& os, const Vertex& v) { return os << v.str(); }

inline Coord l1_distance(const Vertex& a, const Vertex& b) { return (a - b).l1_norm(); }

/// Nearest neighbours in the fixed order +e1, -e1, +e2, -e2, ...
inline std::vector<Vertex> neighbors(const Vertex& v) {
  std::vector<Vertex> out;
  out.reserve(2 * v.dim());
  for (int i = 0; i < v.dim(); ++i) {
    Vertex up = v, down = v;
    up[i] += 1;
    down[i] -= 1;
    out.push_back(up);
    out.push_back(down);
  }
  return out;
}

/// Undirected nearest-neighbour edge stored canonically as its
/// lexicographically smaller endpoint plus the axis of the step.
struct UndirectedEdge {
  Vertex lo;
  int axis = 0;

  static UndirectedEdge between(const Vertex& a, const Vertex& b) {
    if (a.dim() != b.dim() || l1_distance(a, b) != 1)
      throw Error(ErrorCode::kInvalidParameter, "edge endpoints " + a.str() + ", " + b.str() + " are not adjacent");
    int axis = 0;
    while (a[axis] == b[axis]) ++axis;
    return {std::min(a, b), axis};
  }

  Vertex hi() const {
    Vertex h = lo;
    h[axis] += 1;
    return h;
  }

  friend bool operator==(const UndirectedEdge&, const UndirectedEdge&) = default;
  friend auto operator<=>(const UndirectedEdge&, const UndirectedEdge&) = default;
};

struct DirectedEdge {
  Vertex tail;
  Vertex head;

  UndirectedEdge undirected() const { return UndirectedEdge::between(tail, head); }
  Vertex displacement() const { return head - tail; }

  friend bool operator==(const DirectedEdge&, const DirectedEdge&) = default;
};

/// Axis-aligned box of lattice vertices with inclusive corners. Vertex
/// indices follow lexicographic order (last coordinate fastest).
class Box {
 public:
  Box() = default;

  Box(Vertex lower, Vertex upper) : lower_(lower), upper_(upper) {
    if (lower.dim() != upper.dim() || lower.dim() < 1)
      throw Error(ErrorCode::kInvalidParameter, "box corners have mismatched dimensions");
    for (int i = 0; i < dim(); ++i)
      if (lower[i] > upper[i])
        throw Error(ErrorCode::kInvalidParameter, "box lower corner exceeds upper corner on axis " + std::to_string(i));
    std::int64_t s = 1;
    for (int i = dim() - 1; i >= 0; --i) {
      stride_[i] = s;
      s *= extent(i);
    }
    volume_ = s;
  }

  /// Box [-r, r]^d.
  static Box centered(int dim, Coord radius) {
    Vertex lo(dim), hi(dim);
    for (int i = 0; i < dim; ++i) {
      lo[i] = -radius;
      hi[i] = radius;
    }
    return {lo, hi};
  }

  /// Box with `side` vertices per axis, centred on the origin (lower corner
  /// -side/2 rounded toward zero).
  static Box from_side(int dim, Coord side) {
    if (side < 1) throw Error(ErrorCode::kInvalidParameter, "box side must be positive");
    Vertex lo(dim), hi(dim);
    for (int i = 0; i < dim; ++i) {
      lo[i] = -(side / 2);
      hi[i] = lo[i] + side - 1;
    }
    return {lo, hi};
  }

  int dim() const noexcept { return lower_.dim(); }
  const Vertex& lower() const noexcept { return lower_; }
  const Vertex& upper() const noexcept { return upper_; }
  Coord extent(int axis) const noexcept { return upper_[axis] - lower_[axis] + 1; }
  std::int64_t volume() const noexcept { return volume_; }
  std::int64_t stride(int axis) const noexcept { return stride_[axis]; }

  /// Largest extent across axes, in edges.
  Coord linf_size() const noexcept {
    Coord m = 0;
    for (int i = 0; i < dim(); ++i) m = std::max(m, extent(i) - 1);
    return m;
  }

  bool contains(const Vertex& v) const noexcept {
    if (v.dim() != dim()) return false;
    for (int i = 0; i < dim(); ++i)
      if (v[i] < lower_[i] || v[i] > upper_[i]) return false;
    return true;
  }

  bool contains(const Box& b) const noexcept { return contains(b.lower_) && contains(b.upper_); }

  bool on_boundary(const Vertex& v) const noexcept {
    for (int i = 0; i < dim(); ++i)
      if (v[i] == lower_[i] || v[i] == upper_[i]) return true;
    return false;
  }

  std::int64_t index(const Vertex& v) const noexcept {
    std::int64_t idx = 0;
    for (int i = 0; i < dim(); ++i) idx += (v[i] - lower_[i]) * stride_[i];
    return idx;
  }

  Vertex vertex(std::int64_t idx) const noexcept {
    Vertex v(dim());
    for (int i = 0; i < dim(); ++i) {
      v[i] = lower_[i] + idx / stride_[i];
      idx %= stride_[i];
    }
    return v;
  }

  /// Box shrunk by `pad` on every side; nullopt when nothing remains.
  std::optional<Box> shrunk(Coord pad) const {
    Vertex lo = lower_, hi = upper_;
    for (int i = 0; i < dim(); ++i) {
      lo[i] += pad;
      hi[i] -= pad;
      if (lo[i] > hi[i]) return std::nullopt;
    }
    return Box(lo, hi);
  }

  std::vector<Vertex> vertices() const {
    std::vector<Vertex> out;
    out.reserve(static_cast<size_t>(volume_));
    for (std::int64_t i = 0; i < volume_; ++i) out.push_back(vertex(i));
    return out;
  }

  friend bool operator==(const Box& a, const Box& b) { return a.lower_ == b.lower_ && a.upper_ == b.upper_; }

  std::string str() const { return "[" + lower_.str() + ".." + upper_.str() + "]"; }

 private:
  Vertex lower_, upper_;
  std::array<std::int64_t, kMaxDim> stride_{};
  std::int64_t volume_ = 0;
};

/// All lattice edges with both endpoints in `box`, sorted.
inline std::vector<UndirectedEdge> box_edges(const Box& box) {
  std::vector<UndirectedEdge> out;
  for (std::int64_t i = 0; i < box.volume(); ++i) {
    const Vertex v = box.vertex(i);
    for (int axis = 0; axis < box.dim(); ++axis)
      if (v[axis] < box.upper()[axis]) out.push_back({v, axis});
  }
  return out;
}

/// Analysis-window padding: windows sit at least this far inside a solve box.
inline Coord default_padding(const Box& box) { return std::max<Coord>(box.linf_size() / 4, 16); }

/// Real hyperplane {z : z.rho = alpha}.
struct Hyperplane {
  std::vector<double> rho;
  double alpha = 0.0;

  Hyperplane(std::vector<double> direction, double level) : rho(std::move(direction)), alpha(level) {
    if (std::all_of(rho.begin(), rho.end(), [](double x) { return x == 0.0; }))
      throw Error(ErrorCode::kInvalidDirection, "hyperplane direction must be nonzero");
  }

  double level_of(const Vertex& v) const {
    double s = 0;
    for (int i = 0; i < v.dim(); ++i) s += rho[i] * static_cast<double>(v[i]);
    return s;
  }
};

struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;
};

/// Best rational approximation of x with denominator <= max_den, by
/// continued-fraction convergents (and the best semiconvergent at the end).
inline Rational rational_from_double(double x, std::int64_t max_den = 1'000'000) {
  if (!std::isfinite(x)) throw Error(ErrorCode::kInvalidParameter, "non-finite direction component");
  if (max_den < 1) throw Error(ErrorCode::kInvalidParameter, "denominator bound must be positive");
  const bool neg = x < 0;
  double r = std::fabs(x);
  std::int64_t p0 = 0, q0 = 1, p1 = 1, q1 = 0;
  for (int iter = 0; iter < 64; ++iter) {
    const double fl = std::floor(r);
    if (fl > 9.0e15) break;
    const auto a = static_cast<std::int64_t>(fl);
    const std::int64_t q2 = q0 + a * q1;
    if (q2 > max_den) {
      const std::int64_t k = (max_den - q0) / q1;
      const std::int64_t ps = p0 + k * p1, qs = q0 + k * q1;
      const double target = std::fabs(x);
      if (std::fabs(static_cast<double>(ps) / qs - target) < std::fabs(static_cast<double>(p1) / q1 - target)) {
        p1 = ps;
        q1 = qs;
      }
      break;
    }
    const std::int64_t p2 = p0 + a * p1;
    p0 = p1;
    q0 = q1;
    p1 = p2;
    q1 = q2;
    const double frac = r - fl;
    if (frac < 1e-15) break;
    r = 1.0 / frac;
  }
  return {neg ? -p1 : p1, q1};
}

/// Primitive integer direction: nonzero with gcd of |components| equal to 1,
/// so the levels {z.theta : z in Z^d} are exactly Z.
class IntegerDirection {
 public:
  IntegerDirection() = default;

  explicit IntegerDirection(Vertex theta) : theta_(theta) {
    Coord g = 0;
    for (int i = 0; i < theta.dim(); ++i) g = std::gcd(g, std::llabs(theta[i]));
    if (g == 0) throw Error(ErrorCode::kInvalidDirection, "direction must be nonzero");
    if (g != 1)
      throw Error(ErrorCode::kInvalidDirection, "direction " + theta.str() + " is not primitive (gcd " + std::to_string(g) + ")");
  }

  int dim() const noexcept { return theta_.dim(); }
  const Vertex& vector() const noexcept { return theta_; }
  Coord operator[](int i) const noexcept { return theta_[i]; }

  Coord dot(const Vertex& v) const noexcept {
    Coord s = 0;
    for (int i = 0; i < dim(); ++i) s += theta_[i] * v[i];
    return s;
  }

  /// Squared Euclidean norm.
  Coord norm2() const noexcept { return dot(theta_); }

  std::vector<double> as_doubles() const {
    std::vector<double> out(dim());
    for (int i = 0; i < dim(); ++i) out[i] = static_cast<double>(theta_[i]);
    return out;
  }

  friend bool operator==(const IntegerDirection&, const IntegerDirection&) = default;

 private:
  Vertex theta_;
};

namespace detail {

inline std::int64_t checked_mul(std::int64_t a, std::int64_t b) {
  std::int64_t r;
  if (__builtin_mul_overflow(a, b, &r))
    throw Error(ErrorCode::kInvalidParameter, "integer overflow while normalizing direction");
  return r;
}

}  // namespace detail

/// Clears denominators and divides by the gcd of the resulting integers.
/// The output is a positive multiple of the input.
inline IntegerDirection normalize_direction(std::span<const Rational> direction) {
  if (direction.size() < 1 || direction.size() > static_cast<size_t>(kMaxDim))
    throw Error(ErrorCode::kInvalidDirection, "direction has unsupported dimension");
  std::int64_t lcm = 1;
  for (const auto& q : direction) {
    if (q.den == 0) throw Error(ErrorCode::kInvalidDirection, "zero denominator");
    const std::int64_t den = std::llabs(q.den);
    lcm = detail::checked_mul(lcm / std::gcd(lcm, den), den);
  }
  Vertex v(static_cast<int>(direction.size()));
  Coord g = 0;
  for (size_t i = 0; i < direction.size(); ++i) {
    const auto& q = direction[i];
    const std::int64_t sign = q.den < 0 ? -1 : 1;
    v[static_cast<int>(i)] = detail::checked_mul(sign * q.num, lcm / std::llabs(q.den));
    g = std::gcd(g, std::llabs(v[static_cast<int>(i)]));
  }
  if (g == 0) throw Error(ErrorCode::kInvalidDirection, "zero direction");
  for (int i = 0; i < v.dim(); ++i) v[i] /= g;
  return IntegerDirection(v);
}

inline IntegerDirection normalize_direction(std::span<const double> direction, std::int64_t max_den = 1'000'000) {
  std::vector<Rational> q;
  q.reserve(direction.size());
  for (double x : direction) q.push_back(rational_from_double(x, max_den));
  return normalize_direction(std::span<const Rational>(q));
}

/// All z in `box` with z.theta == level, in lexicographic order.
inline std::vector<Vertex> hyperplane_vertices(const IntegerDirection& theta, Coord level, const Box& box) {
  const int d = box.dim();
  if (theta.dim() != d) throw Error(ErrorCode::kInvalidParameter, "direction and box dimensions differ");
  // Solve for the last axis with a nonzero component; iterate the others.
  int solve_axis = d - 1;
  while (theta[solve_axis] == 0) --solve_axis;
  std::vector<Vertex> out;
  Vertex lo = box.lower(), hi = box.upper();
  lo[solve_axis] = hi[solve_axis] = 0;
  const Box free_box(lo, hi);
  for (std::int64_t i = 0; i < free_box.volume(); ++i) {
    Vertex z = free_box.vertex(i);
    const Coord rest = level - theta.dot(z);
    if (rest % theta[solve_axis] != 0) continue;
    z[solve_axis] = rest / theta[solve_axis];
    if (box.contains(z)) out.push_back(z);
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// x precedes y: lower level along theta, ties broken lexicographically.
/// Reflexive (x precedes x).
inline bool precedes(const Vertex& x, const Vertex& y, const IntegerDirection& theta) {
  const Coord lx = theta.dot(x), ly = theta.dot(y);
  if (lx != ly) return lx < ly;
  return x <= y;
}

/// Strict comparator form of `precedes`, for sorting.
struct PrecedesLess {
  IntegerDirection theta;
  bool operator()(const Vertex& x, const Vertex& y) const { return x != y && precedes(x, y, theta); }
};

}  // namespace fppgeo
