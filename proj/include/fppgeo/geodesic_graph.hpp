#pragma once

// Finite-volume geodesic graph toward a hyperplane: the out-degree-one
// successor forest, Busemann increments, forward paths, backward clusters,
// weak components, encounter points and the truncation operator.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "fppgeo/environment.hpp"
#include "fppgeo/error.hpp"
#include "fppgeo/format.hpp"
#include "fppgeo/geodesics.hpp"
#include "fppgeo/lattice.hpp"
#include "fppgeo/union_find.hpp"

namespace fppgeo {

class GeodesicGraph {
 public:
  /// Graph from an explicit successor array (handcrafted fixtures, tests).
  /// Vertices with out == kNoVertex are roots; `is_target` marks which roots
  /// are genuine targets.
  static GeodesicGraph from_successors(const Box& box, std::vector<Index> out, std::vector<std::uint8_t> is_target,
                                       Topology topology = Topology::kOpen, double alpha = 0.0) {
    if (static_cast<Index>(out.size()) != box.volume() || static_cast<Index>(is_target.size()) != box.volume())
      throw Error(ErrorCode::kInvalidParameter, "successor array does not match box volume");
    GeodesicGraph g;
    g.box_ = box;
    g.topology_ = topology;
    g.alpha_ = alpha;
    g.out_ = std::move(out);
    g.is_target_ = std::move(is_target);
    g.touched_.assign(g.out_.size(), 0);
    g.rebuild_reverse();
    g.order_ = g.order_from_roots();
    for (auto it = g.order_.begin(); it != g.order_.end(); ++it) {
      const Index u = *it;
      const bool face = topology == Topology::kOpen && box.on_boundary(box.vertex(u));
      g.touched_[u] = face || (g.out_[u] != kNoVertex && g.touched_[g.out_[u]]);
    }
    return g;
  }

  const Box& box() const noexcept { return box_; }
  Topology topology() const noexcept { return topology_; }
  double alpha() const noexcept { return alpha_; }
  const std::optional<IntegerDirection>& direction() const noexcept { return direction_; }
  bool truncated() const noexcept { return truncated_; }
  Index size() const noexcept { return box_.volume(); }

  Index out(Index i) const noexcept { return out_[i]; }
  const std::vector<Index>& successors() const noexcept { return out_; }
  bool is_target(Index i) const noexcept { return is_target_[i] != 0; }
  /// Forward path from i touches a box face.
  bool boundary_touched(Index i) const noexcept { return touched_[i] != 0; }
  /// Vertices ordered so that every successor precedes its predecessors.
  const std::vector<Index>& order() const noexcept { return order_; }

  std::span<const Index> predecessors(Index i) const noexcept {
    return {rev_.data() + rev_offsets_[i], rev_.data() + rev_offsets_[i + 1]};
  }
  Index in_degree(Index i) const noexcept { return rev_offsets_[i + 1] - rev_offsets_[i]; }

  Index n_edges() const noexcept {
    return static_cast<Index>(std::count_if(out_.begin(), out_.end(), [](Index s) { return s != kNoVertex; }));
  }

  Index index_of(const Vertex& x) const {
    if (!box_.contains(x)) throw Error(ErrorCode::kRange, "vertex " + x.str() + " outside box " + box_.str());
    return box_.index(x);
  }

  std::optional<DirectedEdge> out_edge(const Vertex& x) const {
    const Index s = out_[index_of(x)];
    if (s == kNoVertex) return std::nullopt;
    return DirectedEdge{x, box_.vertex(s)};
  }

  friend bool operator==(const GeodesicGraph& a, const GeodesicGraph& b) {
    return a.box_ == b.box_ && a.out_ == b.out_;
  }

 private:
  friend GeodesicGraph build_graph(const DistanceField& field);
  friend GeodesicGraph truncate(const GeodesicGraph& g, const Box& inner);

  void rebuild_reverse() {
    const Index n = static_cast<Index>(out_.size());
    rev_offsets_.assign(n + 1, 0);
    for (Index u = 0; u < n; ++u)
      if (out_[u] != kNoVertex) ++rev_offsets_[out_[u] + 1];
    for (Index i = 0; i < n; ++i) rev_offsets_[i + 1] += rev_offsets_[i];
    rev_.assign(rev_offsets_[n], 0);
    std::vector<Index> fill(rev_offsets_.begin(), rev_offsets_.end() - 1);
    for (Index u = 0; u < n; ++u)
      if (out_[u] != kNoVertex) rev_[fill[out_[u]]++] = u;
  }

  // BFS from roots over reverse edges; vertices on successor cycles are
  // appended last.
  std::vector<Index> order_from_roots() const {
    const Index n = static_cast<Index>(out_.size());
    std::vector<Index> order;
    order.reserve(n);
    std::vector<std::uint8_t> seen(n, 0);
    for (Index u = 0; u < n; ++u)
      if (out_[u] == kNoVertex) {
        order.push_back(u);
        seen[u] = 1;
      }
    for (size_t head = 0; head < order.size(); ++head)
      for (Index p : predecessors(order[head]))
        if (!seen[p]) {
          seen[p] = 1;
          order.push_back(p);
        }
    for (Index u = 0; u < n; ++u)
      if (!seen[u]) order.push_back(u);
    return order;
  }

  Box box_;
  Topology topology_ = Topology::kOpen;
  double alpha_ = 0.0;
  std::optional<IntegerDirection> direction_;
  bool truncated_ = false;
  std::vector<Index> out_;
  std::vector<std::uint8_t> is_target_;
  std::vector<std::uint8_t> touched_;
  std::vector<Index> order_;
  std::vector<Index> rev_offsets_;
  std::vector<Index> rev_;
};

/// out_edge(x) = <x, succ(x)> for a field solved toward a hyperplane.
inline GeodesicGraph build_graph(const DistanceField& field) {
  if (field.target().is_point())
    throw Error(ErrorCode::kWrongTarget, "geodesic graphs are built from hyperplane-target fields");
  GeodesicGraph g;
  g.box_ = field.box();
  g.topology_ = field.topology();
  const auto& h = field.target().as_hyperplane();
  g.alpha_ = h.alpha;
  if (h.mode == HyperplaneMode::kExactLattice) g.direction_ = h.theta;
  g.out_ = field.successors();
  g.is_target_.resize(field.size());
  g.touched_.resize(field.size());
  for (Index i = 0; i < field.size(); ++i) {
    g.is_target_[i] = field.is_target(i);
    g.touched_[i] = field.boundary_touched(i);
  }
  g.order_ = field.settle_order();
  g.rebuild_reverse();
  return g;
}

/// B(x,y) = T(x,H) - T(y,H) over a hyperplane-target field.
class BusemannField {
 public:
  explicit BusemannField(const DistanceField& field) : field_(&field) {
    if (field.target().is_point()) throw Error(ErrorCode::kWrongTarget, "Busemann increments need a hyperplane target");
  }

  double operator()(const Vertex& x, const Vertex& y) const {
    return field_->passage_time(x) - field_->passage_time(y);
  }

  const DistanceField& field() const noexcept { return *field_; }

 private:
  const DistanceField* field_;
};

inline double busemann(const DistanceField& field, const Vertex& x, const Vertex& y) {
  return BusemannField(field)(x, y);
}

struct ForwardPath {
  std::vector<Vertex> vertices;
  bool reached_target = false;
  bool touches_boundary = false;
};

/// The out-edge chain from x until a root.
inline ForwardPath forward_path(const GeodesicGraph& g, const Vertex& x) {
  ForwardPath p;
  Index i = g.index_of(x);
  while (true) {
    const Vertex v = g.box().vertex(i);
    p.vertices.push_back(v);
    if (g.topology() == Topology::kOpen && g.box().on_boundary(v)) p.touches_boundary = true;
    if (g.out(i) == kNoVertex) {
      p.reached_target = g.is_target(i);
      return p;
    }
    if (static_cast<Index>(p.vertices.size()) > g.size())
      throw Error(ErrorCode::kInvalidParameter, "successor cycle through " + x.str());
    i = g.out(i);
  }
}

struct BackwardCluster {
  std::vector<Vertex> members;  // BFS order, x first
  Index size = 0;
  Index max_depth = 0;
  bool touches_boundary = false;  // size is then only a lower bound
};

/// C^b_x = {y : y -> x}, by BFS over reverse edges.
inline BackwardCluster backward_cluster(const GeodesicGraph& g, const Vertex& x) {
  BackwardCluster c;
  std::vector<std::pair<Index, Index>> queue{{g.index_of(x), 0}};
  for (size_t head = 0; head < queue.size(); ++head) {
    const auto [u, depth] = queue[head];
    const Vertex v = g.box().vertex(u);
    c.members.push_back(v);
    c.max_depth = std::max(c.max_depth, depth);
    if (g.topology() == Topology::kOpen && g.box().on_boundary(v)) c.touches_boundary = true;
    for (Index p : g.predecessors(u)) queue.emplace_back(p, depth + 1);
  }
  c.size = static_cast<Index>(c.members.size());
  return c;
}

/// Backward-cluster size, depth and boundary contact for every vertex at once.
struct ClusterStats {
  std::vector<Index> size;
  std::vector<Index> depth;
  std::vector<std::uint8_t> touches_boundary;
};

inline ClusterStats cluster_stats(const GeodesicGraph& g) {
  const Index n = g.size();
  ClusterStats s{std::vector<Index>(n, 1), std::vector<Index>(n, 0), std::vector<std::uint8_t>(n, 0)};
  for (Index u = 0; u < n; ++u)
    s.touches_boundary[u] = g.topology() == Topology::kOpen && g.box().on_boundary(g.box().vertex(u));
  const auto& order = g.order();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const Index u = *it, p = g.out(u);
    if (p == kNoVertex) continue;
    s.size[p] += s.size[u];
    s.depth[p] = std::max(s.depth[p], s.depth[u] + 1);
    s.touches_boundary[p] |= s.touches_boundary[u];
  }
  return s;
}

struct AveragedSample {
  double alpha = 0.0;
  DistanceField field;
  GeodesicGraph graph;
};

/// Level alpha ~ Uniform[0, n) drawn from rng_seed, then the geodesic graph
/// toward the frontier of {z : z.theta >= alpha}.
inline AveragedSample sample_averaged_graph(const WeightEnvironment& env, double n, const Box& box,
                                            const IntegerDirection& direction, std::uint64_t rng_seed) {
  if (!(n > 0.0)) throw Error(ErrorCode::kInvalidParameter, "averaging length n must be positive");
  const double alpha = n * unit_interval(splitmix64(rng_seed));
  DistanceField field = solve(env, box, TargetSpec::halfspace_frontier(direction.as_doubles(), alpha));
  GeodesicGraph graph = build_graph(field);
  return {alpha, std::move(field), std::move(graph)};
}

/// Keeps out-edges with both endpoints in `inner`; the vertex set is unchanged.
inline GeodesicGraph truncate(const GeodesicGraph& g, const Box& inner) {
  if (!g.box().contains(inner)) throw Error(ErrorCode::kRange, "truncation box " + inner.str() + " not inside " + g.box().str());
  GeodesicGraph t = g;
  for (Index u = 0; u < t.size(); ++u) {
    const Index s = t.out_[u];
    if (s == kNoVertex) continue;
    if (!inner.contains(t.box_.vertex(u)) || !inner.contains(t.box_.vertex(s))) t.out_[u] = kNoVertex;
  }
  t.truncated_ = true;
  t.rebuild_reverse();
  return t;
}

struct ComponentDecomposition {
  std::vector<Index> label;  // compact, numbered by first vertex in index order
  std::vector<Index> sizes;
  Index n_components = 0;
  Index cycles_detected = 0;
};

/// Weak components by union-find over undirected out-edges.
inline ComponentDecomposition components(const GeodesicGraph& g) {
  const Index n = g.size();
  UnionFind uf(n);
  ComponentDecomposition c;
  for (Index u = 0; u < n; ++u)
    if (g.out(u) != kNoVertex && !uf.unite(u, g.out(u))) ++c.cycles_detected;
  c.label.assign(n, -1);
  std::vector<Index> root_label(n, -1);
  for (Index u = 0; u < n; ++u) {
    const Index r = uf.find(u);
    if (root_label[r] < 0) {
      root_label[r] = c.n_components++;
      c.sizes.push_back(0);
    }
    c.label[u] = root_label[r];
    ++c.sizes[root_label[r]];
  }
  return c;
}

/// Vertices whose removal leaves at least three pieces of their component
/// each reaching graph distance >= threshold from the vertex.
inline std::vector<Vertex> encounter_points(const GeodesicGraph& g, Index threshold) {
  if (threshold < 1) throw Error(ErrorCode::kInvalidParameter, "encounter threshold must be >= 1");
  const Index n = g.size();
  const ClusterStats st = cluster_stats(g);
  // Two largest (child height + 1) per vertex, for the rerooting pass.
  std::vector<Index> best1(n, 0), best2(n, 0);
  for (Index u = 0; u < n; ++u) {
    const Index p = g.out(u);
    if (p == kNoVertex) continue;
    const Index reach = st.depth[u] + 1;
    if (reach > best1[p]) {
      best2[p] = best1[p];
      best1[p] = reach;
    } else if (reach > best2[p]) {
      best2[p] = reach;
    }
  }
  // up[u]: farthest distance from u through its out-edge (0 when none).
  std::vector<Index> up(n, 0);
  for (Index u : g.order()) {
    const Index p = g.out(u);
    if (p == kNoVertex) continue;
    const Index sibling = (st.depth[u] + 1 == best1[p]) ? best2[p] : best1[p];
    up[u] = 1 + std::max(up[p], sibling);
  }
  std::vector<Vertex> out;
  for (Index u = 0; u < n; ++u) {
    int arms = up[u] >= threshold ? 1 : 0;
    for (Index c : g.predecessors(u))
      if (st.depth[c] + 1 >= threshold) ++arms;
    if (arms >= 3) out.push_back(g.box().vertex(u));
  }
  return out;
}

// ---- export -------------------------------------------------------------

/// Columns x1..xd,dx1..dxd; displacement empty for roots.
inline void write_graph_csv(std::ostream& os, const GeodesicGraph& g) {
  const int d = g.box().dim();
  for (int i = 1; i <= d; ++i) os << 'x' << i << ',';
  for (int i = 1; i <= d; ++i) os << "dx" << i << (i == d ? '\n' : ',');
  for (Index k = 0; k < g.size(); ++k) {
    const Vertex v = g.box().vertex(k);
    os << join_coords(v);
    if (g.out(k) == kNoVertex) {
      for (int i = 0; i < d; ++i) os << ',';
    } else {
      Vertex dv = g.box().vertex(g.out(k)) - v;
      for (int i = 0; i < d; ++i) {
        if (dv[i] > 1) dv[i] = -1;
        if (dv[i] < -1) dv[i] = 1;
        os << ',' << dv[i];
      }
    }
    os << '\n';
  }
}

inline nlohmann::json graph_summary_json(const GeodesicGraph& g) {
  const ComponentDecomposition c = components(g);
  const ClusterStats st = cluster_stats(g);
  const Index max_depth = st.depth.empty() ? 0 : *std::max_element(st.depth.begin(), st.depth.end());
  return {{"alpha", g.alpha()},
          {"n_vertices", g.size()},
          {"n_edges", g.n_edges()},
          {"n_components", c.n_components},
          {"max_backward_depth", max_depth}};
}

}  // namespace fppgeo
