#pragma once

// Passage times by exact multi-source Dijkstra inside a finite box, with a
// deterministic successor per vertex. For hyperplane targets the successor
// array is the finite-volume geodesic forest.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <limits>
#include <ostream>
#include <queue>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "fppgeo/environment.hpp"
#include "fppgeo/error.hpp"
#include "fppgeo/format.hpp"
#include "fppgeo/lattice.hpp"

namespace fppgeo {

using Index = std::int64_t;
inline constexpr Index kNoVertex = -1;

enum class HyperplaneMode { kExactLattice, kHalfspaceFrontier };

enum class Topology { kOpen, kTorus };

struct PointTarget {
  Vertex v;
};

struct HyperplaneTarget {
  HyperplaneMode mode = HyperplaneMode::kExactLattice;
  IntegerDirection theta;     // ExactLattice
  Coord level = 0;            // ExactLattice
  std::vector<double> rho;    // HalfspaceFrontier
  double alpha = 0.0;         // HalfspaceFrontier
};

class TargetSpec {
 public:
  static TargetSpec point(const Vertex& v) { return TargetSpec(PointTarget{v}); }

  /// {z : z.theta == level}.
  static TargetSpec lattice_plane(const IntegerDirection& theta, Coord level) {
    HyperplaneTarget h;
    h.mode = HyperplaneMode::kExactLattice;
    h.theta = theta;
    h.level = level;
    h.rho = theta.as_doubles();
    h.alpha = static_cast<double>(level);
    return TargetSpec(h);
  }

  /// {z : z.rho >= alpha and some neighbour w has w.rho < alpha}.
  static TargetSpec halfspace_frontier(std::vector<double> rho, double alpha) {
    Hyperplane check(rho, alpha);  // validates rho != 0
    HyperplaneTarget h;
    h.mode = HyperplaneMode::kHalfspaceFrontier;
    h.rho = std::move(check.rho);
    h.alpha = alpha;
    return TargetSpec(h);
  }

  bool is_point() const noexcept { return std::holds_alternative<PointTarget>(v_); }
  const PointTarget& as_point() const { return std::get<PointTarget>(v_); }
  const HyperplaneTarget& as_hyperplane() const { return std::get<HyperplaneTarget>(v_); }

  /// Level parameter of a hyperplane target (alpha), NaN for point targets.
  double alpha() const noexcept {
    return is_point() ? std::numeric_limits<double>::quiet_NaN() : std::get<HyperplaneTarget>(v_).alpha;
  }

  bool contains(const Vertex& z, Topology topo = Topology::kOpen, Coord period = 0) const {
    if (is_point()) {
      const Vertex& p = as_point().v;
      if (topo == Topology::kOpen) return z == p;
      for (int i = 0; i < z.dim(); ++i)
        if (detail::floor_mod(z[i] - p[i], period) != 0) return false;
      return true;
    }
    const auto& h = as_hyperplane();
    if (h.mode == HyperplaneMode::kExactLattice) {
      const Coord l = h.theta.dot(z);
      return topo == Topology::kOpen ? l == h.level : detail::floor_mod(l - h.level, period) == 0;
    }
    double s = 0.0, slack = 0.0;
    for (int i = 0; i < z.dim(); ++i) {
      s += h.rho[i] * static_cast<double>(z[i]);
      slack = std::max(slack, std::fabs(h.rho[i]));
    }
    return s >= h.alpha && s - slack < h.alpha;
  }

 private:
  explicit TargetSpec(std::variant<PointTarget, HyperplaneTarget> v) : v_(std::move(v)) {}
  std::variant<PointTarget, HyperplaneTarget> v_;
};

/// Thrown when a successor chain ends before reaching a target; carries the
/// partial path.
class TruncatedPathError : public Error {
 public:
  TruncatedPathError(const std::string& msg, std::vector<Vertex> partial)
      : Error(ErrorCode::kTruncatedPath, msg), partial_(std::move(partial)) {}
  const std::vector<Vertex>& partial_path() const noexcept { return partial_; }

 private:
  std::vector<Vertex> partial_;
};

class DistanceField;
DistanceField solve(const WeightEnvironment& env, const Box& box, const TargetSpec& target,
                    Topology topology = Topology::kOpen);

/// Immutable result of `solve`: passage times to the target, the successor of
/// each non-target vertex, and a flag for geodesics that touch the box faces.
class DistanceField {
 public:
  const Box& box() const noexcept { return box_; }
  const TargetSpec& target() const noexcept { return target_; }
  const WeightEnvironment& env() const noexcept { return env_; }
  Topology topology() const noexcept { return topology_; }
  Index size() const noexcept { return box_.volume(); }

  double T(Index i) const noexcept { return dist_[i]; }
  Index succ(Index i) const noexcept { return succ_[i]; }
  bool is_target(Index i) const noexcept { return is_target_[i] != 0; }
  bool boundary_touched(Index i) const noexcept { return touched_[i] != 0; }

  /// Vertices in settle order: every successor precedes its predecessors.
  const std::vector<Index>& settle_order() const noexcept { return order_; }
  const std::vector<double>& distances() const noexcept { return dist_; }
  const std::vector<Index>& successors() const noexcept { return succ_; }

  Index index_of(const Vertex& x) const {
    if (!box_.contains(x)) throw Error(ErrorCode::kRange, "vertex " + x.str() + " outside box " + box_.str());
    return box_.index(x);
  }

  double passage_time(const Vertex& x) const { return dist_[index_of(x)]; }
  bool boundary_touched(const Vertex& x) const { return touched_[index_of(x)] != 0; }

  /// Weight of the edge from box index i to its successor.
  double successor_weight(Index i) const { return env_.weight_of(edge_between(i, succ_[i])); }

  /// Lattice edge joining two box-adjacent indices (wrap-aware on a torus).
  UndirectedEdge edge_between(Index a, Index b) const {
    const Vertex va = box_.vertex(a), vb = box_.vertex(b);
    for (int i = 0; i < box_.dim(); ++i) {
      const Coord diff = vb[i] - va[i];
      if (diff == 0) continue;
      if (diff == 1) return {va, i};
      if (diff == -1) return {vb, i};
      // Torus wrap: upper face joined to lower face.
      return diff > 0 ? UndirectedEdge{va - Vertex::unit(va.dim(), i), i} : UndirectedEdge{va, i};
    }
    throw Error(ErrorCode::kInvalidParameter, "indices are not adjacent");
  }

 private:
  friend DistanceField solve(const WeightEnvironment&, const Box&, const TargetSpec&, Topology);

  DistanceField(const WeightEnvironment& env, const Box& box, const TargetSpec& target, Topology topo)
      : box_(box), target_(target), env_(env), topology_(topo) {}

  Box box_;
  TargetSpec target_;
  WeightEnvironment env_;
  Topology topology_;
  std::vector<double> dist_;
  std::vector<Index> succ_;
  std::vector<Index> order_;
  std::vector<std::uint8_t> is_target_;
  std::vector<std::uint8_t> touched_;
};

namespace detail {

/// Calls f(neighbour_index, edge) for every box neighbour of `v` (index `idx`).
template <typename F>
void for_each_box_neighbor(const Box& box, Topology topo, const Vertex& v, Index idx, F&& f) {
  const int d = box.dim();
  for (int i = 0; i < d; ++i) {
    const Index s = box.stride(i);
    const Coord ext = box.extent(i);
    const Coord c = v[i] - box.lower()[i];
    Vertex down = v;
    down[i] -= 1;
    // +e_i first, then -e_i, matching neighbors().
    if (c + 1 < ext) {
      f(idx + s, UndirectedEdge{v, i});
    } else if (topo == Topology::kTorus) {
      f(idx - (ext - 1) * s, UndirectedEdge{v, i});
    }
    if (c > 0) {
      f(idx - s, UndirectedEdge{down, i});
    } else if (topo == Topology::kTorus) {
      f(idx + (ext - 1) * s, UndirectedEdge{down, i});
    }
  }
}

}  // namespace detail

inline DistanceField solve(const WeightEnvironment& env, const Box& box, const TargetSpec& target, Topology topology) {
  if (env.dim() != box.dim()) throw Error(ErrorCode::kInvalidParameter, "environment and box dimensions differ");
  Coord period = 0;
  if (topology == Topology::kTorus) {
    if (!env.torus()) throw Error(ErrorCode::kInvalidParameter, "torus solve requires a periodic environment");
    period = box.extent(0);
    for (int i = 0; i < box.dim(); ++i) {
      if (box.extent(i) != period || (*env.torus())[i] != period)
        throw Error(ErrorCode::kInvalidParameter, "torus solve requires a cubic box matching the environment periods");
    }
    if (!target.is_point() && target.as_hyperplane().mode != HyperplaneMode::kExactLattice)
      throw Error(ErrorCode::kInvalidParameter, "torus solve supports only exact lattice hyperplanes");
  }

  DistanceField f(env, box, target, topology);
  const Index n = box.volume();
  f.dist_.assign(n, std::numeric_limits<double>::infinity());
  f.succ_.assign(n, kNoVertex);
  f.is_target_.assign(n, 0);
  f.touched_.assign(n, 0);
  f.order_.reserve(n);

  using Item = std::pair<double, Index>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
  for (Index i = 0; i < n; ++i) {
    if (target.contains(box.vertex(i), topology, period)) {
      f.is_target_[i] = 1;
      f.dist_[i] = 0.0;
      heap.emplace(0.0, i);
    }
  }
  if (heap.empty()) throw Error(ErrorCode::kNoTarget, "target does not meet box " + box.str());

  std::vector<std::uint8_t> settled(n, 0);
  while (!heap.empty()) {
    const auto [d, u] = heap.top();
    heap.pop();
    if (settled[u]) continue;  // stale entry
    settled[u] = 1;
    f.order_.push_back(u);
    const Vertex vu = box.vertex(u);
    detail::for_each_box_neighbor(box, topology, vu, u, [&](Index nb, const UndirectedEdge& e) {
      if (settled[nb]) return;
      const double nd = d + env.weight_of(e);
      if (nd < f.dist_[nb]) {
        f.dist_[nb] = nd;
        heap.emplace(nd, nb);
      }
    });
  }

  // Successor: argmin over earlier-settled neighbours of w + T, ties to the
  // lexicographically smallest (= smallest index) neighbour.
  std::vector<Index> rank(n);
  for (Index r = 0; r < n; ++r) rank[f.order_[r]] = r;
  for (Index r = 0; r < n; ++r) {
    const Index u = f.order_[r];
    const Vertex vu = box.vertex(u);
    if (!f.is_target_[u]) {
      double best = std::numeric_limits<double>::infinity();
      Index arg = kNoVertex;
      detail::for_each_box_neighbor(box, topology, vu, u, [&](Index nb, const UndirectedEdge& e) {
        if (rank[nb] >= r) return;
        const double val = f.dist_[nb] + env.weight_of(e);
        if (val < best || (val == best && nb < arg)) {
          best = val;
          arg = nb;
        }
      });
      f.succ_[u] = arg;
    }
    const bool face = topology == Topology::kOpen && box.on_boundary(vu);
    f.touched_[u] = face || (f.succ_[u] != kNoVertex && f.touched_[f.succ_[u]]);
  }
  return f;
}

inline double passage_time(const DistanceField& field, const Vertex& x) { return field.passage_time(x); }

/// Successor chain from x to the target. The chain always ends at a target
/// in a solved field; a chain ending elsewhere raises TruncatedPathError.
inline std::vector<Vertex> extract_geodesic(const DistanceField& field, const Vertex& x) {
  Index i = field.index_of(x);
  std::vector<Vertex> path;
  while (true) {
    path.push_back(field.box().vertex(i));
    if (field.is_target(i)) return path;
    const Index s = field.succ(i);
    if (s == kNoVertex || static_cast<Index>(path.size()) > field.size())
      throw TruncatedPathError("successor chain from " + x.str() + " ends before the target", path);
    i = s;
  }
}

/// Sum of edge weights along a vertex path (consecutive vertices adjacent,
/// possibly across a torus seam when `field` is periodic).
inline double path_weight(const DistanceField& field, const std::vector<Vertex>& path) {
  double s = 0.0;
  for (size_t k = 0; k + 1 < path.size(); ++k)
    s += field.env().weight_of(field.edge_between(field.box().index(path[k]), field.box().index(path[k + 1])));
  return s;
}

// ---- export -------------------------------------------------------------

/// Columns x1..xd,T,succ_dx1..succ_dxd,boundary_touched; successor columns
/// are empty for target vertices.
inline void write_distance_csv(std::ostream& os, const DistanceField& field) {
  const int d = field.box().dim();
  for (int i = 1; i <= d; ++i) os << 'x' << i << ',';
  os << 'T';
  for (int i = 1; i <= d; ++i) os << ",succ_dx" << i;
  os << ",boundary_touched\n";
  for (Index k = 0; k < field.size(); ++k) {
    const Vertex v = field.box().vertex(k);
    os << join_coords(v) << ',' << format_double(field.T(k));
    if (field.succ(k) == kNoVertex) {
      for (int i = 0; i < d; ++i) os << ',';
    } else {
      Vertex dv = field.box().vertex(field.succ(k)) - v;
      for (int i = 0; i < d; ++i) {
        if (dv[i] > 1) dv[i] = -1;  // torus seam
        if (dv[i] < -1) dv[i] = 1;
        os << ',' << dv[i];
      }
    }
    os << ',' << (field.boundary_touched(k) ? 1 : 0) << '\n';
  }
}

inline constexpr char kDumpMagic[8] = {'F', 'P', 'P', 'G', 'D', 'F', '0', '1'};
inline constexpr std::uint32_t kDumpVersion = 1;

struct DistanceDump {
  std::uint32_t version = 0;
  Box box;
  std::uint32_t target_kind = 0;  // 0 point, 1 exact lattice, 2 halfspace frontier
  std::vector<std::int64_t> target_ints;
  std::vector<double> target_reals;
  std::uint64_t seed = 0;
  std::vector<double> T;
};

namespace detail {

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!is) throw Error(ErrorCode::kIo, "truncated distance dump");
  return v;
}

}  // namespace detail

/// Binary dump, host little-endian: magic, version, d, box corners, target,
/// seed, count, then T as float64 in lexicographic vertex order.
inline void write_distance_dump(std::ostream& os, const DistanceField& field) {
  static_assert(std::endian::native == std::endian::little, "dump format is little-endian");
  const Box& b = field.box();
  os.write(kDumpMagic, sizeof kDumpMagic);
  detail::put<std::uint32_t>(os, kDumpVersion);
  detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(b.dim()));
  for (int i = 0; i < b.dim(); ++i) detail::put<std::int64_t>(os, b.lower()[i]);
  for (int i = 0; i < b.dim(); ++i) detail::put<std::int64_t>(os, b.upper()[i]);
  const TargetSpec& t = field.target();
  if (t.is_point()) {
    detail::put<std::uint32_t>(os, 0);
    for (int i = 0; i < b.dim(); ++i) detail::put<std::int64_t>(os, t.as_point().v[i]);
  } else if (t.as_hyperplane().mode == HyperplaneMode::kExactLattice) {
    detail::put<std::uint32_t>(os, 1);
    for (int i = 0; i < b.dim(); ++i) detail::put<std::int64_t>(os, t.as_hyperplane().theta[i]);
    detail::put<std::int64_t>(os, t.as_hyperplane().level);
  } else {
    detail::put<std::uint32_t>(os, 2);
    for (int i = 0; i < b.dim(); ++i) detail::put<double>(os, t.as_hyperplane().rho[i]);
    detail::put<double>(os, t.as_hyperplane().alpha);
  }
  detail::put<std::uint64_t>(os, field.env().seed());
  detail::put<std::uint64_t>(os, static_cast<std::uint64_t>(field.size()));
  os.write(reinterpret_cast<const char*>(field.distances().data()),
           static_cast<std::streamsize>(field.distances().size() * sizeof(double)));
}

inline DistanceDump read_distance_dump(std::istream& is) {
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kDumpMagic, sizeof magic) != 0) throw Error(ErrorCode::kIo, "not a distance dump");
  DistanceDump d;
  d.version = detail::get<std::uint32_t>(is);
  if (d.version != kDumpVersion) throw Error(ErrorCode::kIo, "unsupported dump version " + std::to_string(d.version));
  const auto dim = static_cast<int>(detail::get<std::uint32_t>(is));
  Vertex lo(dim), hi(dim);
  for (int i = 0; i < dim; ++i) lo[i] = detail::get<std::int64_t>(is);
  for (int i = 0; i < dim; ++i) hi[i] = detail::get<std::int64_t>(is);
  d.box = Box(lo, hi);
  d.target_kind = detail::get<std::uint32_t>(is);
  if (d.target_kind == 0) {
    for (int i = 0; i < dim; ++i) d.target_ints.push_back(detail::get<std::int64_t>(is));
  } else if (d.target_kind == 1) {
    for (int i = 0; i <= dim; ++i) d.target_ints.push_back(detail::get<std::int64_t>(is));
  } else if (d.target_kind == 2) {
    for (int i = 0; i <= dim; ++i) d.target_reals.push_back(detail::get<double>(is));
  } else {
    throw Error(ErrorCode::kIo, "unknown target kind in dump");
  }
  d.seed = detail::get<std::uint64_t>(is);
  const auto n = detail::get<std::uint64_t>(is);
  if (static_cast<std::int64_t>(n) != d.box.volume()) throw Error(ErrorCode::kIo, "dump size does not match box");
  d.T.resize(n);
  is.read(reinterpret_cast<char*>(d.T.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!is) throw Error(ErrorCode::kIo, "truncated distance dump");
  return d;
}

}  // namespace fppgeo
