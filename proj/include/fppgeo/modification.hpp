#pragma once

// Upward edge-weight modification on a strip between two parallel
// hyperplanes: the strip, the protected paths, the eligible edge set, the
// event conditions on the unmodified graph and the severing check afterwards.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "fppgeo/environment.hpp"
#include "fppgeo/error.hpp"
#include "fppgeo/format.hpp"
#include "fppgeo/geodesic_graph.hpp"
#include "fppgeo/geodesics.hpp"
#include "fppgeo/lattice.hpp"
#include "fppgeo/parallel.hpp"

namespace fppgeo {

/// Strip {0 <= z.theta <= N, dist(z, R theta) <= M} plus the event parameters.
struct StripSpec {
  IntegerDirection theta;
  Coord N = 1;
  double M = 1.0;
  Coord M_prime = 1;
  double epsilon = 0.1;
  double delta = 0.1;

  void validate() const {
    if (theta.dim() == 0) throw Error(ErrorCode::kInvalidDirection, "strip direction is unset");
    if (N < 1) throw Error(ErrorCode::kInvalidParameter, "strip N must be >= 1");
    if (!(M > 0) || !std::isfinite(M)) throw Error(ErrorCode::kInvalidParameter, "strip M must be finite and > 0");
    if (M_prime < 1) throw Error(ErrorCode::kInvalidParameter, "M' must be >= 1");
    if (!(epsilon > 0) || !std::isfinite(epsilon)) throw Error(ErrorCode::kInvalidParameter, "epsilon must be > 0");
    if (!(delta > 0) || !std::isfinite(delta)) throw Error(ErrorCode::kInvalidParameter, "delta must be > 0");
  }
};

namespace detail {

using Wide = __int128;

/// |z|^2 |theta|^2 - (z.theta)^2, i.e. |theta|^2 times the squared distance to R theta.
inline Wide scaled_dist2(const Vertex& z, const IntegerDirection& theta) {
  Wide zz = 0, zt = 0, tt = 0;
  for (int i = 0; i < z.dim(); ++i) {
    zz += static_cast<Wide>(z[i]) * z[i];
    zt += static_cast<Wide>(z[i]) * theta[i];
    tt += static_cast<Wide>(theta[i]) * theta[i];
  }
  return zz * tt - zt * zt;
}

/// scaled_dist2(W) >= or <= M^2 |theta|^2 q^2 where W = q w.
inline bool far_from_line(const Vertex& W, Coord q, const StripSpec& s) {
  const long double lhs = static_cast<long double>(scaled_dist2(W, s.theta));
  const long double rhs = static_cast<long double>(s.M) * s.M * s.theta.norm2() * q * q;
  return lhs >= rhs;
}

/// Points of the edge lo -> lo + e_axis at rational offsets p/q. With
/// q = |theta_axis| every integer level on the edge is hit at an integer p.
struct EdgeParam {
  Vertex lo;
  int axis = 0;
  Coord q = 1;
  Coord sigma = 0;  // sign of theta_axis
  Coord l0 = 0;     // level of lo

  EdgeParam(const UndirectedEdge& e, const IntegerDirection& theta) : lo(e.lo), axis(e.axis) {
    const Coord t = theta[axis];
    q = t == 0 ? 1 : std::llabs(t);
    sigma = (t > 0) - (t < 0);
    l0 = theta.dot(lo);
  }

  /// q times the point at offset p/q.
  Vertex scaled(Coord p) const {
    Vertex W = lo;
    for (int i = 0; i < W.dim(); ++i) W[i] *= q;
    W[axis] += p;
    return W;
  }

  /// Offsets whose point lies on level L.
  std::vector<Coord> on_level(Coord L) const {
    if (sigma == 0) return l0 == L ? std::vector<Coord>{0, 1} : std::vector<Coord>{};
    const Coord p = sigma * (L - l0);
    return p >= 0 && p <= q ? std::vector<Coord>{p} : std::vector<Coord>{};
  }

  /// End offsets of the sub-segment with level in [a, b]; empty if none.
  std::vector<Coord> slab_ends(Coord a, Coord b) const {
    if (sigma == 0) return l0 >= a && l0 <= b ? std::vector<Coord>{0, 1} : std::vector<Coord>{};
    Coord p1 = sigma * (a - l0), p2 = sigma * (b - l0);
    if (p1 > p2) std::swap(p1, p2);
    p1 = std::max<Coord>(p1, 0);
    p2 = std::min<Coord>(p2, q);
    if (p1 > p2) return {};
    return {p1, p2};
  }
};

inline Coord scaled_l1(const Vertex& W, const Vertex& shift, Coord q) {
  Coord s = 0;
  for (int i = 0; i < W.dim(); ++i) s += std::llabs(W[i] - q * shift[i]);
  return s;
}

}  // namespace detail

inline bool in_strip(const StripSpec& s, const Vertex& z) {
  const Coord l = s.theta.dot(z);
  if (l < 0 || l > s.N) return false;
  return static_cast<long double>(detail::scaled_dist2(z, s.theta)) <=
         static_cast<long double>(s.M) * s.M * s.theta.norm2();
}

/// Box containing the strip: the level range along theta widened by M in
/// the directions orthogonal to it.
inline Box strip_bounding_box(const StripSpec& s) {
  s.validate();
  const int d = s.theta.dim();
  const double t2 = static_cast<double>(s.theta.norm2());
  Vertex lo(d), hi(d);
  for (int i = 0; i < d; ++i) {
    const double end = static_cast<double>(s.N) * s.theta[i] / t2;
    const double across = s.M * std::sqrt(1.0 - s.theta[i] * s.theta[i] / t2);
    // Snap values within rounding of an integer so exact corners stay tight.
    auto snap = [](double x) { return std::fabs(x - std::round(x)) < 1e-9 ? std::round(x) : x; };
    lo[i] = static_cast<Coord>(std::floor(snap(std::min(0.0, end) - across)));
    hi[i] = static_cast<Coord>(std::ceil(snap(std::max(0.0, end) + across)));
  }
  return Box(lo, hi);
}

/// Strip vertices in index order. The box must cover the strip.
inline std::vector<Vertex> strip_vertices(const StripSpec& s, const Box& box) {
  const Box bb = strip_bounding_box(s);
  if (!box.contains(bb)) throw Error(ErrorCode::kRange, "box " + box.str() + " does not cover the strip " + bb.str());
  std::vector<Vertex> out;
  for (Index i = 0; i < bb.volume(); ++i) {
    const Vertex z = bb.vertex(i);
    if (in_strip(s, z)) out.push_back(z);
  }
  std::sort(out.begin(), out.end(), [&](const Vertex& a, const Vertex& b) { return box.index(a) < box.index(b); });
  return out;
}

/// Which of the three protection rules an edge meets.
struct EdgeProtection {
  bool near_start = false;  // a point on level 0 at l1 norm >= M'
  bool near_end = false;    // a point on level N at l1 distance >= M' from xi
  bool off_axis = false;    // a point in the slab at distance >= M from the line
  bool any() const noexcept { return near_start || near_end || off_axis; }
};

inline EdgeProtection edge_protection(const StripSpec& s, const Vertex& xi, const UndirectedEdge& e) {
  const detail::EdgeParam ep(e, s.theta);
  const Vertex zero(xi.dim());
  EdgeProtection r;
  for (Coord p : ep.on_level(0))
    if (detail::scaled_l1(ep.scaled(p), zero, ep.q) >= ep.q * s.M_prime) r.near_start = true;
  for (Coord p : ep.on_level(s.N))
    if (detail::scaled_l1(ep.scaled(p), xi, ep.q) >= ep.q * s.M_prime) r.near_end = true;
  // Squared distance to the line is convex along the edge, so the ends of the
  // in-slab part suffice.
  for (Coord p : ep.slab_ends(0, s.N))
    if (detail::far_from_line(ep.scaled(p), ep.q, s)) r.off_axis = true;
  return r;
}

/// Box vertices that are endpoints of a protected edge, in index order.
inline std::vector<Vertex> protected_vertices(const StripSpec& s, const Box& box, const Vertex& xi) {
  std::vector<Vertex> out;
  for (Index i = 0; i < box.volume(); ++i) {
    const Vertex v = box.vertex(i);
    bool hit = false;
    for (int a = 0; a < box.dim() && !hit; ++a) {
      Vertex down = v;
      down[a] -= 1;
      hit = edge_protection(s, xi, UndirectedEdge{v, a}).any() || edge_protection(s, xi, UndirectedEdge{down, a}).any();
    }
    if (hit) out.push_back(v);
  }
  return out;
}

namespace detail {

/// reach[v]: the forward path of some source passes through v.
inline std::vector<std::uint8_t> forward_reach(const GeodesicGraph& g, const std::vector<Vertex>& sources) {
  std::vector<std::uint8_t> reach(g.size(), 0);
  for (const Vertex& v : sources) reach[g.index_of(v)] = 1;
  const auto& order = g.order();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const Index u = *it;
    if (reach[u] && g.out(u) != kNoVertex) reach[g.out(u)] = 1;
  }
  return reach;
}

inline bool edge_on_paths(const GeodesicGraph& g, const std::vector<std::uint8_t>& reach, Index a, Index b) {
  return (g.out(a) == b && reach[a]) || (g.out(b) == a && reach[b]);
}

inline void require_direction(const GeodesicGraph& g, const StripSpec& s) {
  if (g.topology() != Topology::kOpen) throw Error(ErrorCode::kInvalidParameter, "strip experiments need an open box");
  if (!g.direction() || !(*g.direction() == s.theta))
    throw Error(ErrorCode::kWrongTarget, "graph is not built toward a lattice hyperplane along the strip direction");
  if (g.alpha() < static_cast<double>(s.N))
    throw Error(ErrorCode::kWrongTarget, "target level must be >= N");
}

}  // namespace detail

/// Strip edges off the forward paths of y and of every protected vertex,
/// sorted.
inline std::vector<UndirectedEdge> eligible_edges(const GeodesicGraph& g, const StripSpec& s, const Vertex& y,
                                                  const std::vector<Vertex>& protected_set) {
  detail::require_direction(g, s);
  const Box& box = g.box();
  std::vector<Vertex> sources = protected_set;
  sources.push_back(y);
  const auto reach = detail::forward_reach(g, sources);
  std::vector<UndirectedEdge> out;
  for (const Vertex& z : strip_vertices(s, box)) {
    for (int a = 0; a < box.dim(); ++a) {
      Vertex up = z;
      up[a] += 1;
      if (!box.contains(up) || !in_strip(s, up)) continue;
      if (detail::edge_on_paths(g, reach, box.index(z), box.index(up))) continue;
      out.push_back(UndirectedEdge{z, a});
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// ≺-minimal element.
inline Vertex progenitor(const std::vector<Vertex>& set, const IntegerDirection& theta) {
  if (set.empty()) throw Error(ErrorCode::kInvalidParameter, "progenitor of an empty set");
  return *std::min_element(set.begin(), set.end(), PrecedesLess{theta});
}

struct EventReport {
  bool a2_1 = false;  // the path from xi stays above level N after xi
  bool a2_2 = false;  // path from y comes near xi without meeting its path
  bool a2_3 = false;  // passage-time bound along the path from y near xi
  bool a2_4 = false;  // protected paths avoid the path from xi
  std::optional<bool> a1_3;  // passage-time bound along the whole path from y (bounded weights)
  bool pass = false;

  std::optional<Vertex> a2_1_witness;      // first later vertex at level <= N
  std::optional<Vertex> a2_2_near;         // first vertex of the y path within eps |xi|_1 of xi
  std::optional<Vertex> a2_2_common;       // first common vertex
  std::optional<Vertex> a2_3_witness;      // first vertex breaking the bound
  double a2_3_max_ratio = 0.0;             // max T(y,v) / |v - y|_1 over checked v
  std::optional<Vertex> a2_4_witness;      // ≺-minimal protected vertex meeting the xi path
  std::optional<double> detour_time;       // largest strip-avoiding detour, unbounded weights
  Index n_protected = 0;
};

namespace detail {

/// Largest, over pairs of vertices adjacent to both the strip and its
/// complement, of the cheapest connection avoiding strip-internal edges.
inline double max_strip_detour(const WeightEnvironment& env, const Box& box, const StripSpec& s) {
  const Index n = box.volume();
  std::vector<std::uint8_t> inside(n, 0);
  for (Index i = 0; i < n; ++i) inside[i] = in_strip(s, box.vertex(i));
  std::vector<Index> rim;
  for (Index i = 0; i < n; ++i) {
    bool to_in = false, to_out = false;
    for_each_box_neighbor(box, Topology::kOpen, box.vertex(i), i, [&](Index j, const UndirectedEdge&) {
      (inside[j] ? to_in : to_out) = true;
    });
    if (to_in && to_out) rim.push_back(i);
  }
  double worst = 0.0;
  using Item = std::pair<double, Index>;
  std::vector<double> dist(n);
  for (Index src : rim) {
    std::fill(dist.begin(), dist.end(), std::numeric_limits<double>::infinity());
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    dist[src] = 0.0;
    heap.push({0.0, src});
    while (!heap.empty()) {
      const auto [du, u] = heap.top();
      heap.pop();
      if (du > dist[u]) continue;
      for_each_box_neighbor(box, Topology::kOpen, box.vertex(u), u, [&](Index v, const UndirectedEdge& e) {
        if (inside[u] && inside[v]) return;
        const double dv = du + env.weight_of(e);
        if (dv < dist[v]) {
          dist[v] = dv;
          heap.push({dv, v});
        }
      });
    }
    for (Index w : rim) worst = std::max(worst, dist[w]);
  }
  return worst;
}

inline void check_endpoints(const StripSpec& s, const Vertex& y, const Vertex& xi) {
  s.validate();
  if (s.theta.dot(xi) != s.N)
    throw Error(ErrorCode::kInvalidParameter, "xi " + xi.str() + " is not on level N = " + std::to_string(s.N));
  if (s.theta.dot(y) != 0) throw Error(ErrorCode::kInvalidParameter, "y " + y.str() + " is not on level 0");
  if (y.l1_norm() > s.M_prime)
    throw Error(ErrorCode::kInvalidParameter, "y " + y.str() + " has l1 norm above M' = " + std::to_string(s.M_prime));
}

}  // namespace detail

struct EventOptions {
  /// Detour bound for unbounded weights; unset accepts the largest detour found.
  std::optional<double> detour_bound;
};

/// Evaluates the event conditions on the unmodified graph.
inline EventReport check_event(const GeodesicGraph& g, const DistanceField& field, const StripSpec& s,
                               const Vertex& y, const Vertex& xi, const EventOptions& opts = {}) {
  detail::check_endpoints(s, y, xi);
  detail::require_direction(g, s);
  const Box& box = g.box();
  const IntegerDirection& th = s.theta;
  EventReport r;

  const auto gx = forward_path(g, xi).vertices;
  r.a2_1 = true;
  for (size_t k = 1; k < gx.size(); ++k)
    if (th.dot(gx[k]) <= s.N) {
      r.a2_1 = false;
      r.a2_1_witness = gx[k];
      break;
    }

  std::vector<std::uint8_t> on_xi(g.size(), 0);
  for (const Vertex& v : gx) on_xi[box.index(v)] = 1;
  const auto gy = forward_path(g, y).vertices;
  const double reach = s.epsilon * static_cast<double>(xi.l1_norm());
  for (const Vertex& v : gy) {
    if (!r.a2_2_near && static_cast<double>(l1_distance(v, xi)) <= reach) r.a2_2_near = v;
    if (!r.a2_2_common && on_xi[box.index(v)]) r.a2_2_common = v;
  }
  r.a2_2 = r.a2_2_near && !r.a2_2_common;

  const double S = field.env().spec().sup_support().value;
  if (std::isfinite(S)) {
    r.a2_3 = true;
    r.a1_3 = true;
    double t = 0.0;
    for (size_t k = 0; k < gy.size(); ++k) {
      if (k > 0) t += field.env().weight_of(gy[k - 1], gy[k]);
      const Coord dist = l1_distance(gy[k], y);
      if (dist < s.M_prime) continue;
      const bool ok = t <= static_cast<double>(dist) * (S - s.delta);
      if (!ok) r.a1_3 = false;
      if (static_cast<double>(l1_distance(gy[k], xi)) > reach) continue;
      r.a2_3_max_ratio = std::max(r.a2_3_max_ratio, t / static_cast<double>(dist));
      if (!ok && r.a2_3) {
        r.a2_3 = false;
        r.a2_3_witness = gy[k];
      }
    }
  } else {
    r.detour_time = detail::max_strip_detour(field.env(), box, s);
    r.a2_3 = !opts.detour_bound || *r.detour_time <= *opts.detour_bound;
  }

  const auto prot = protected_vertices(s, box, xi);
  r.n_protected = static_cast<Index>(prot.size());
  std::vector<std::uint8_t> hit(g.size(), 0);
  for (Index u : g.order()) hit[u] = on_xi[u] || (g.out(u) != kNoVertex && hit[g.out(u)]);
  std::vector<Vertex> bad;
  for (const Vertex& z : prot)
    if (hit[box.index(z)]) bad.push_back(z);
  r.a2_4 = bad.empty();
  if (!bad.empty()) r.a2_4_witness = progenitor(bad, th);

  r.pass = r.a2_1 && r.a2_2 && r.a2_3 && r.a2_4;
  return r;
}

struct SeveringReport {
  bool severed = true;
  Index n_violators = 0;
  std::optional<Vertex> violator;  // ≺-minimal z at level <= 0 whose path meets the xi path
  std::vector<Vertex> segment;     // its crossing of the strip, v1 ... v2
  double segment_time = 0.0;
  double bound = 0.0;  // (S - 3 delta / 4) |xi|_1
  bool below_bound = false;
};

/// Vertices at level <= 0 whose forward path meets the forward path of xi, in
/// index order.
inline std::vector<Vertex> severing_violators(const GeodesicGraph& g, const StripSpec& s, const Vertex& xi) {
  const Box& box = g.box();
  std::vector<std::uint8_t> hit(g.size(), 0);
  for (const Vertex& v : forward_path(g, xi).vertices) hit[box.index(v)] = 1;
  for (Index u : g.order())
    if (g.out(u) != kNoVertex && hit[g.out(u)]) hit[u] = 1;
  std::vector<Vertex> out;
  for (Index u = 0; u < g.size(); ++u) {
    const Vertex v = box.vertex(u);
    if (hit[u] && s.theta.dot(v) <= 0) out.push_back(v);
  }
  return out;
}

inline SeveringReport verify_severing(const GeodesicGraph& g, const DistanceField& field, const StripSpec& s,
                                      const Vertex& xi) {
  const IntegerDirection& th = s.theta;
  SeveringReport r;
  r.bound = (field.env().spec().sup_support().value - 0.75 * s.delta) * static_cast<double>(xi.l1_norm());
  const auto bad = severing_violators(g, s, xi);
  r.n_violators = static_cast<Index>(bad.size());
  r.severed = bad.empty();
  if (r.severed) return r;
  const Vertex z = progenitor(bad, th);
  r.violator = z;

  std::vector<std::uint8_t> on_xi(g.size(), 0);
  for (const Vertex& v : forward_path(g, xi).vertices) on_xi[g.box().index(v)] = 1;
  std::vector<Vertex> path;
  for (const Vertex& v : forward_path(g, z).vertices) {
    path.push_back(v);
    if (on_xi[g.box().index(v)]) break;
  }
  const auto level = [&](size_t k) { return th.dot(path[k]); };
  size_t a = 0;
  for (size_t k = 0; k < path.size(); ++k)
    if (level(k) <= 0) a = k;
  size_t b = path.size();
  for (size_t k = a + 1; k < path.size(); ++k)
    if (level(k) >= s.N) {
      b = k;
      break;
    }
  if (b == path.size()) return r;
  const size_t v1 = level(a) == 0 ? a : a + 1;
  const size_t v2 = level(b) == s.N ? b : b - 1;
  if (v2 < v1) return r;
  r.segment.assign(path.begin() + static_cast<std::ptrdiff_t>(v1), path.begin() + static_cast<std::ptrdiff_t>(v2) + 1);
  for (size_t k = 1; k < r.segment.size(); ++k) r.segment_time += field.env().weight_of(r.segment[k - 1], r.segment[k]);
  r.below_bound = r.segment_time <= r.bound;
  return r;
}

struct ModificationMode {
  enum class Kind { kBounded, kUnbounded };
  Kind kind = Kind::kBounded;
  double lambda = 0.0;  // unbounded mode only
  std::optional<double> detour_bound;

  static ModificationMode bounded() { return {}; }
  static ModificationMode unbounded(double lambda, std::optional<double> detour_bound = std::nullopt) {
    return {Kind::kUnbounded, lambda, detour_bound};
  }
};

struct ModificationSetup {
  StripSpec spec;
  Box box;
  Coord alpha = 0;  // target level, >= N
};

struct ModificationOutcome {
  double lambda = 0.0;
  std::vector<UndirectedEdge> edges;  // the eligible set that was raised
  EventReport event;
  SeveringReport severing;
  std::optional<Vertex> cluster_progenitor;  // of the component of xi after modification
  std::optional<WeightEnvironment> modified_env;
  GeodesicGraph original;
  GeodesicGraph modified;
  nlohmann::json original_summary;
  nlohmann::json modified_summary;
};

/// lambda for a mode: S - delta/2 for bounded weights (which also requires
/// E t <= S - 2 delta), else the caller's value.
inline double modification_level(const DistributionSpec& dist, const StripSpec& s, const ModificationMode& mode) {
  if (mode.kind == ModificationMode::Kind::kUnbounded) {
    if (!(mode.lambda >= 0) || !std::isfinite(mode.lambda))
      throw Error(ErrorCode::kInvalidParameter, "lambda must be finite and >= 0");
    return mode.lambda;
  }
  const double S = dist.sup_support().value;
  if (!std::isfinite(S)) throw Error(ErrorCode::kMode, "bounded mode needs weights with bounded support");
  if (dist.mean() > S - 2 * s.delta)
    throw Error(ErrorCode::kInvalidParameter, "delta too large: need E t <= S - 2 delta");
  return S - s.delta / 2;
}

namespace detail {

inline Vertex component_progenitor(const GeodesicGraph& g, const Vertex& x, const IntegerDirection& theta) {
  std::vector<Index> root(g.size());
  for (Index u : g.order()) root[u] = g.out(u) == kNoVertex ? u : root[g.out(u)];
  const Index rx = root[g.index_of(x)];
  std::vector<Vertex> members;
  for (Index u = 0; u < g.size(); ++u)
    if (root[u] == rx) members.push_back(g.box().vertex(u));
  return progenitor(members, theta);
}

inline ModificationOutcome modify_on(const DistanceField& field, GeodesicGraph g, const StripSpec& s, const Vertex& y,
                                     const Vertex& xi, const ModificationMode& mode, std::optional<EventReport> event) {
  ModificationOutcome out;
  out.lambda = modification_level(field.env().spec(), s, mode);
  out.event = event ? *event : check_event(g, field, s, y, xi, {mode.detour_bound});
  out.edges = eligible_edges(g, s, y, protected_vertices(s, g.box(), xi));
  out.modified_env = field.env().with_overrides(out.edges, out.lambda);
  const DistanceField mod = solve(*out.modified_env, field.box(), field.target());
  out.modified = build_graph(mod);
  out.severing = verify_severing(out.modified, mod, s, xi);
  out.cluster_progenitor = component_progenitor(out.modified, xi, s.theta);
  out.original_summary = graph_summary_json(g);
  out.modified_summary = graph_summary_json(out.modified);
  out.original = std::move(g);
  return out;
}

}  // namespace detail

/// Solve, check the event, raise the eligible edges to max(t, lambda), solve
/// again and test severing.
inline ModificationOutcome run_modification(const WeightEnvironment& env, const ModificationSetup& setup,
                                            const Vertex& y, const Vertex& xi, const ModificationMode& mode) {
  const StripSpec& s = setup.spec;
  detail::check_endpoints(s, y, xi);
  modification_level(env.spec(), s, mode);
  if (setup.alpha < s.N) throw Error(ErrorCode::kInvalidParameter, "target level alpha must be >= N");
  const Box bb = strip_bounding_box(s);
  if (!setup.box.contains(bb))
    throw Error(ErrorCode::kRange, "box " + setup.box.str() + " does not cover the strip " + bb.str());
  const DistanceField field = solve(env, setup.box, TargetSpec::lattice_plane(s.theta, setup.alpha));
  return detail::modify_on(field, build_graph(field), s, y, xi, mode, std::nullopt);
}

// ---- parameter scan --------------------------------------------------------

/// M as a function of N: scale * N + offset.
struct MRule {
  double scale = 0.0;
  double offset = 1.0;
  double operator()(Coord N) const { return scale * static_cast<double>(N) + offset; }
};

struct ScanConfig {
  int dim = 2;
  DistributionSpec dist = DistributionSpec::uniform(0, 1);
  std::uint64_t seed_begin = 0;
  std::uint64_t seed_end = 1;  // exclusive
  IntegerDirection theta{Vertex{1, 0}};
  std::vector<Coord> N_list{8};
  MRule M_rule;
  Coord M_prime = 2;
  double epsilon = 0.25;
  double delta = 0.1;
  ModificationMode mode;
  Coord pad = 0;           // extra margin around the strip; 0 means 2 M'
  Coord alpha_offset = 1;  // target level is N + alpha_offset
  bool timing = false;
};

struct ScanRow {
  std::uint64_t seed = 0;
  Coord N = 0;
  double M = 0.0;
  bool event_pass = false;
  bool severed = false;
  std::optional<Coord> witness_level;  // level of the violating vertex when not severed
  double runtime_ms = 0.0;             // 0 unless timing is on
};

/// Lattice point of level N closest to the line, ≺-minimal among ties.
inline Vertex nearest_on_level(const IntegerDirection& theta, Coord N) {
  const int d = theta.dim();
  const double t2 = static_cast<double>(theta.norm2());
  Coord span = 0;
  for (int i = 0; i < d; ++i) span += std::llabs(theta[i]);
  Vertex lo(d), hi(d);
  for (int i = 0; i < d; ++i) {
    const auto c = static_cast<Coord>(std::llround(static_cast<double>(N) * theta[i] / t2));
    lo[i] = c - span;
    hi[i] = c + span;
  }
  const auto cands = hyperplane_vertices(theta, N, Box(lo, hi));
  if (cands.empty()) throw Error(ErrorCode::kInvalidParameter, "no lattice point found on level " + std::to_string(N));
  return *std::min_element(cands.begin(), cands.end(), [&](const Vertex& a, const Vertex& b) {
    const auto da = detail::scaled_dist2(a, theta), db = detail::scaled_dist2(b, theta);
    if (da != db) return da < db;
    return PrecedesLess{theta}(a, b);
  });
}

inline ScanRow scan_trial(const ScanConfig& c, std::uint64_t seed, Coord N) {
  const auto start = std::chrono::steady_clock::now();
  StripSpec s{c.theta, N, c.M_rule(N), c.M_prime, c.epsilon, c.delta};
  s.validate();
  ScanRow row;
  row.seed = seed;
  row.N = N;
  row.M = s.M;
  const Coord pad = c.pad > 0 ? c.pad : 2 * c.M_prime;
  const Box bb = strip_bounding_box(s);
  Vertex lo = bb.lower(), hi = bb.upper();
  for (int i = 0; i < c.dim; ++i) {
    lo[i] -= pad;
    hi[i] += pad;
  }
  const Box box(lo, hi);
  const WeightEnvironment env(c.dim, c.dist, seed);
  const DistanceField field = solve(env, box, TargetSpec::lattice_plane(c.theta, N + c.alpha_offset));
  GeodesicGraph g = build_graph(field);
  const Vertex xi = nearest_on_level(c.theta, N);

  std::vector<Vertex> ys;
  for (const Vertex& v : hyperplane_vertices(c.theta, 0, box))
    if (v.l1_norm() <= c.M_prime) ys.push_back(v);
  std::sort(ys.begin(), ys.end(), PrecedesLess{c.theta});
  std::optional<EventReport> chosen;
  Vertex y = ys.front();
  for (const Vertex& cand : ys) {
    auto ev = check_event(g, field, s, cand, xi, {c.mode.detour_bound});
    if (ev.pass) {
      y = cand;
      chosen = ev;
      break;
    }
  }
  const auto out = detail::modify_on(field, std::move(g), s, y, xi, c.mode, chosen);
  row.event_pass = out.event.pass;
  row.severed = out.severing.severed;
  if (out.severing.violator) row.witness_level = c.theta.dot(*out.severing.violator);
  if (c.timing)
    row.runtime_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return row;
}

/// All (seed, N) trials, seeds outer, in deterministic order.
inline std::vector<ScanRow> run_scan(const ScanConfig& c, int jobs = 1) {
  if (c.seed_end <= c.seed_begin) throw Error(ErrorCode::kInvalidParameter, "empty seed range");
  if (c.N_list.empty()) throw Error(ErrorCode::kInvalidParameter, "N list is empty");
  modification_level(c.dist, StripSpec{c.theta, c.N_list.front(), 1.0, c.M_prime, c.epsilon, c.delta}, c.mode);
  const auto n_seeds = static_cast<std::int64_t>(c.seed_end - c.seed_begin);
  const auto n_N = static_cast<std::int64_t>(c.N_list.size());
  std::vector<ScanRow> rows(static_cast<size_t>(n_seeds * n_N));
  parallel_for(n_seeds * n_N, jobs, [&](std::int64_t k) {
    rows[k] = scan_trial(c, c.seed_begin + static_cast<std::uint64_t>(k / n_N), c.N_list[k % n_N]);
  });
  return rows;
}

struct ScanSummary {
  Index trials = 0;
  Index event_passes = 0;
  Index severed_given_event = 0;
  double event_frequency = 0.0;
  double conditional_severing_rate = 0.0;  // NaN without event passes
};

inline ScanSummary summarize_scan(const std::vector<ScanRow>& rows) {
  ScanSummary s;
  s.trials = static_cast<Index>(rows.size());
  for (const auto& r : rows)
    if (r.event_pass) {
      ++s.event_passes;
      if (r.severed) ++s.severed_given_event;
    }
  s.event_frequency = s.trials ? static_cast<double>(s.event_passes) / static_cast<double>(s.trials) : 0.0;
  s.conditional_severing_rate = s.event_passes
                                    ? static_cast<double>(s.severed_given_event) / static_cast<double>(s.event_passes)
                                    : std::numeric_limits<double>::quiet_NaN();
  return s;
}

inline void write_scan_csv(std::ostream& os, const std::vector<ScanRow>& rows) {
  os << "seed,N,M,event_pass,severed,witness_level,runtime_ms\n";
  for (const auto& r : rows) {
    os << r.seed << ',' << r.N << ',' << format_double(r.M) << ',' << (r.event_pass ? 1 : 0) << ','
       << (r.severed ? 1 : 0) << ',';
    if (r.witness_level) os << *r.witness_level;
    os << ',' << format_double(r.runtime_ms) << '\n';
  }
}

inline nlohmann::json to_json(const EventReport& r) {
  auto opt = [](const std::optional<Vertex>& v) { return v ? nlohmann::json(v->str()) : nlohmann::json(nullptr); };
  nlohmann::json j = {{"pass", r.pass},
                      {"a2_1", r.a2_1},
                      {"a2_2", r.a2_2},
                      {"a2_3", r.a2_3},
                      {"a2_4", r.a2_4},
                      {"a1_3", r.a1_3 ? nlohmann::json(*r.a1_3) : nlohmann::json(nullptr)},
                      {"a2_1_witness", opt(r.a2_1_witness)},
                      {"a2_2_near", opt(r.a2_2_near)},
                      {"a2_2_common", opt(r.a2_2_common)},
                      {"a2_3_witness", opt(r.a2_3_witness)},
                      {"a2_3_max_ratio", r.a2_3_max_ratio},
                      {"a2_4_witness", opt(r.a2_4_witness)},
                      {"n_protected", r.n_protected}};
  j["detour_time"] = r.detour_time ? nlohmann::json(*r.detour_time) : nlohmann::json(nullptr);
  return j;
}

inline nlohmann::json to_json(const ModificationOutcome& o) {
  nlohmann::json seg = nlohmann::json::array();
  for (const Vertex& v : o.severing.segment) seg.push_back(v.str());
  return {{"lambda", o.lambda},
          {"n_edges", o.edges.size()},
          {"event", to_json(o.event)},
          {"severed", o.severing.severed},
          {"n_violators", o.severing.n_violators},
          {"violator", o.severing.violator ? nlohmann::json(o.severing.violator->str()) : nlohmann::json(nullptr)},
          {"segment", seg},
          {"segment_time", o.severing.segment_time},
          {"segment_bound", o.severing.bound},
          {"cluster_progenitor", o.cluster_progenitor ? nlohmann::json(o.cluster_progenitor->str()) : nlohmann::json(nullptr)},
          {"original", o.original_summary},
          {"modified", o.modified_summary}};
}

}  // namespace fppgeo
