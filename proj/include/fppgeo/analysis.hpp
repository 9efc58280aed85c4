#pragma once

// Statistical checks on simulated fields and graphs: shape estimates, Busemann
// vector fits, crossing counts, backward-cluster tails, hyperplane
// intersection radii and the progenitor mass-transport balance.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "fppgeo/environment.hpp"
#include "fppgeo/error.hpp"
#include "fppgeo/geodesic_graph.hpp"
#include "fppgeo/geodesics.hpp"
#include "fppgeo/lattice.hpp"
#include "fppgeo/parallel.hpp"
#include "fppgeo/report.hpp"

namespace fppgeo {

// ---- small statistics -----------------------------------------------------

struct SampleSummary {
  Index n = 0;
  double mean = 0.0;
  double stderr_ = 0.0;
};

/// Mean and standard error, summed in input order.
inline SampleSummary summarize(std::span<const double> v) {
  SampleSummary s;
  s.n = static_cast<Index>(v.size());
  if (v.empty()) return s;
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.stderr_ = std::sqrt(ss / static_cast<double>(s.n - 1) / static_cast<double>(s.n));
  }
  return s;
}

inline double median(std::vector<double> v) {
  if (v.empty()) throw Error(ErrorCode::kInvalidParameter, "median of an empty sample");
  std::sort(v.begin(), v.end());
  const size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

/// Two-sample comparison of means: |mean_a - mean_b| <= k * sqrt(se_a^2 + se_b^2).
struct MeanComparison {
  double difference = 0.0;
  double pooled_stderr = 0.0;
  double k_sigma = 3.0;
  bool pass = false;
};

inline MeanComparison compare_means(std::span<const double> a, std::span<const double> b, double k_sigma = 3.0) {
  const auto sa = summarize(a), sb = summarize(b);
  MeanComparison c;
  c.difference = sa.mean - sb.mean;
  c.pooled_stderr = std::sqrt(sa.stderr_ * sa.stderr_ + sb.stderr_ * sb.stderr_);
  c.k_sigma = k_sigma;
  c.pass = std::fabs(c.difference) <= k_sigma * c.pooled_stderr;
  return c;
}

// ---- direction grids --------------------------------------------------------

/// Unit vectors: equally spaced angles for d = 2, a Fibonacci spiral for d = 3.
/// Components within 1e-12 of zero are snapped to zero.
inline std::vector<std::vector<double>> direction_grid(int dim, int n = 64) {
  if (n < 1) throw Error(ErrorCode::kInvalidParameter, "direction grid size must be positive");
  std::vector<std::vector<double>> out;
  out.reserve(static_cast<size_t>(n));
  if (dim == 2) {
    for (int k = 0; k < n; ++k) {
      const double a = 2.0 * std::numbers::pi * k / n;
      out.push_back({std::cos(a), std::sin(a)});
    }
  } else if (dim == 3) {
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int k = 0; k < n; ++k) {
      const double z = 1.0 - (2.0 * k + 1.0) / n;
      const double r = std::sqrt(1.0 - z * z);
      out.push_back({r * std::cos(golden * k), r * std::sin(golden * k), z});
    }
  } else {
    throw Error(ErrorCode::kInvalidParameter, "direction grids exist for d = 2 and d = 3 only");
  }
  for (auto& u : out)
    for (double& c : u)
      if (std::fabs(c) < 1e-12) c = 0.0;
  return out;
}

/// floor(r * xi) componentwise.
inline Vertex scaled_lattice_point(std::span<const double> xi, double r) {
  Vertex x(static_cast<int>(xi.size()));
  for (size_t i = 0; i < xi.size(); ++i) x[static_cast<int>(i)] = static_cast<Coord>(std::floor(r * xi[i]));
  return x;
}

// ---- shape ------------------------------------------------------------------

struct ShapeOptions {
  int grid_size = 64;
  std::optional<Coord> box_radius;  // default: radius plus the default padding
  Index max_volume = 100'000'000;
  int jobs = 1;
};

/// Radius of the smallest centred box holding radius r plus its padding.
inline Coord safe_box_radius(int dim, double r) {
  const auto rr = static_cast<Coord>(std::ceil(r));
  return rr + default_padding(Box::centered(dim, rr));
}

namespace detail {

inline Box shape_box(int dim, double r_max, const ShapeOptions& opts) {
  const Coord need = safe_box_radius(dim, r_max);
  Coord radius = need;
  if (opts.box_radius) {
    if (*opts.box_radius < need)
      throw Error(ErrorCode::kRange, "radius " + format_double(r_max) + " needs a box of radius " + std::to_string(need) +
                                         " but the box radius is " + std::to_string(*opts.box_radius));
    radius = *opts.box_radius;
  }
  const Box box = Box::centered(dim, radius);
  if (box.volume() > opts.max_volume)
    throw Error(ErrorCode::kRange, "radius " + format_double(r_max) + " needs " + std::to_string(box.volume()) +
                                       " vertices, above the limit " + std::to_string(opts.max_volume));
  return box;
}

inline void check_radii(std::span<const double> radii) {
  if (radii.empty()) throw Error(ErrorCode::kInvalidParameter, "at least one radius is required");
  for (double r : radii)
    if (!(r >= 1.0) || !std::isfinite(r)) throw Error(ErrorCode::kInvalidParameter, "radii must be finite and >= 1");
}

/// T(0, floor(r xi)) for every radius and direction, one solve per seed.
inline std::vector<std::vector<double>> radial_passage_times(const WeightEnvironment& env, const Box& box,
                                                             std::span<const double> radii,
                                                             const std::vector<std::vector<double>>& grid,
                                                             Index n_seeds, int jobs) {
  const int d = env.dim();
  std::vector<Vertex> points;
  for (double r : radii)
    for (const auto& xi : grid) {
      Vertex x = scaled_lattice_point(xi, r);
      if (x.l1_norm() == 0) throw Error(ErrorCode::kInvalidParameter, "radius " + format_double(r) + " is too small");
      points.push_back(std::move(x));
    }
  std::vector<std::vector<double>> T(static_cast<size_t>(n_seeds));
  parallel_for(n_seeds, jobs, [&](Index s) {
    const auto field = solve(env.with_seed(env.seed() + static_cast<std::uint64_t>(s)), box, TargetSpec::point(Vertex(d)));
    auto& row = T[static_cast<size_t>(s)];
    row.reserve(points.size());
    for (const auto& x : points) row.push_back(field.passage_time(x));
  });
  return T;
}

}  // namespace detail

struct ShapeDirection {
  std::vector<double> xi;        // grid direction
  Vertex x;                      // floor(r xi)
  std::vector<double> point;     // x / r
  double ghat = 0.0;             // mean T(0,x) / r
  double stderr_ = 0.0;
  std::vector<double> boundary;  // x / mean T(0,x), a sample of the level set boundary
};

struct ShapeAtRadius {
  double radius = 0.0;
  std::vector<ShapeDirection> directions;
  Index convexity_flags = 0;  // d = 2 only: inward turns of the boundary polygon
};

struct ShapeEstimate {
  Box box;
  std::uint64_t base_seed = 0;
  Index n_seeds = 0;
  std::vector<ShapeAtRadius> radii;
  std::vector<std::vector<double>> samples;  // [seed][radius * grid + direction] = T(0,x)
};

namespace detail {

inline Index count_inward_turns(const std::vector<ShapeDirection>& dirs) {
  const size_t n = dirs.size();
  if (n < 3 || dirs[0].boundary.size() != 2) return 0;
  Index flags = 0;
  for (size_t k = 0; k < n; ++k) {
    const auto& a = dirs[(k + n - 1) % n].boundary;
    const auto& b = dirs[k].boundary;
    const auto& c = dirs[(k + 1) % n].boundary;
    const double cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
    const double scale = std::hypot(b[0] - a[0], b[1] - a[1]) * std::hypot(c[0] - b[0], c[1] - b[1]);
    if (cross < -0.05 * scale) ++flags;
  }
  return flags;
}

}  // namespace detail

/// ghat(xi) ~ mean over seeds of T(0, floor(r xi)) / r, with seeds
/// env.seed(), env.seed()+1, ...
inline ShapeEstimate estimate_shape(const WeightEnvironment& env, std::span<const double> radii, Index n_seeds,
                                    const ShapeOptions& opts = {}) {
  detail::check_radii(radii);
  if (n_seeds < 1) throw Error(ErrorCode::kInvalidParameter, "n_seeds must be >= 1");
  const int d = env.dim();
  const auto grid = direction_grid(d, opts.grid_size);
  const double r_max = *std::max_element(radii.begin(), radii.end());
  ShapeEstimate est;
  est.box = detail::shape_box(d, r_max, opts);
  est.base_seed = env.seed();
  est.n_seeds = n_seeds;
  est.samples = detail::radial_passage_times(env, est.box, radii, grid, n_seeds, opts.jobs);

  const size_t nk = grid.size();
  for (size_t ri = 0; ri < radii.size(); ++ri) {
    ShapeAtRadius at;
    at.radius = radii[ri];
    for (size_t k = 0; k < nk; ++k) {
      ShapeDirection dir;
      dir.xi = grid[k];
      dir.x = scaled_lattice_point(grid[k], radii[ri]);
      std::vector<double> t;
      for (const auto& row : est.samples) t.push_back(row[ri * nk + k]);
      const auto s = summarize(t);
      dir.ghat = s.mean / radii[ri];
      dir.stderr_ = s.stderr_ / radii[ri];
      for (int i = 0; i < d; ++i) {
        dir.point.push_back(static_cast<double>(dir.x[i]) / radii[ri]);
        dir.boundary.push_back(s.mean > 0.0 ? static_cast<double>(dir.x[i]) / s.mean : 0.0);
      }
      at.directions.push_back(std::move(dir));
    }
    at.convexity_flags = detail::count_inward_turns(at.directions);
    est.radii.push_back(std::move(at));
  }
  return est;
}

struct ShapeResidual {
  std::vector<double> radii;
  std::vector<double> ghat_unit;                  // per direction, ghat of x/|x|_1 at the largest radius
  std::vector<std::vector<double>> per_seed;      // [radius][seed]
  std::vector<double> medians;                    // per radius
  bool decreasing = false;                        // medians nonincreasing in the radius
};

/// max over directions of |T(0,x) - ghat(x)| / |x|_1 at each radius, with ghat
/// taken from the largest radius.
inline ShapeResidual shape_residual(const WeightEnvironment& env, std::vector<double> radii, Index n_seeds,
                                    const ShapeOptions& opts = {}) {
  if (radii.size() < 3) throw Error(ErrorCode::kInvalidParameter, "shape_residual needs at least 3 radii to show a trend");
  detail::check_radii(radii);
  if (n_seeds < 1) throw Error(ErrorCode::kInvalidParameter, "n_seeds must be >= 1");
  std::sort(radii.begin(), radii.end());
  const int d = env.dim();
  const auto grid = direction_grid(d, opts.grid_size);
  const Box box = detail::shape_box(d, radii.back(), opts);
  const auto T = detail::radial_passage_times(env, box, radii, grid, n_seeds, opts.jobs);

  const size_t nk = grid.size(), last = radii.size() - 1;
  ShapeResidual out;
  out.radii = radii;
  for (size_t k = 0; k < nk; ++k) {
    const auto norm = static_cast<double>(scaled_lattice_point(grid[k], radii[last]).l1_norm());
    double sum = 0.0;
    for (const auto& row : T) sum += row[last * nk + k];
    out.ghat_unit.push_back(sum / static_cast<double>(T.size()) / norm);
  }
  for (size_t ri = 0; ri < radii.size(); ++ri) {
    std::vector<double> per;
    for (const auto& row : T) {
      double worst = 0.0;
      for (size_t k = 0; k < nk; ++k) {
        const auto norm = static_cast<double>(scaled_lattice_point(grid[k], radii[ri]).l1_norm());
        worst = std::max(worst, std::fabs(row[ri * nk + k] - out.ghat_unit[k] * norm) / norm);
      }
      per.push_back(worst);
    }
    out.medians.push_back(median(per));
    out.per_seed.push_back(std::move(per));
  }
  out.decreasing = std::is_sorted(out.medians.rbegin(), out.medians.rend());
  return out;
}

// ---- Busemann vector ----------------------------------------------------------

struct BusemannVectorEstimate {
  std::vector<double> rho;
  double residual_rms = 0.0;
  Box window;
  Index n_points = 0;
};

/// Least-squares rho minimizing sum over the window of (B(0,x) - rho.x)^2.
/// The window must sit inside the field box shrunk by `pad` (default padding
/// when omitted).
inline BusemannVectorEstimate estimate_busemann_vector(const DistanceField& field, const Box& window,
                                                       std::optional<Coord> pad = std::nullopt) {
  if (field.target().is_point()) throw Error(ErrorCode::kWrongTarget, "Busemann fits need a hyperplane target");
  const Box& box = field.box();
  const int d = box.dim();
  const auto inner = box.shrunk(pad.value_or(default_padding(box)));
  if (!inner || !inner->contains(window))
    throw Error(ErrorCode::kRange, "window " + window.str() + " is not inside the padded region of " + box.str());
  const double t0 = field.passage_time(Vertex(d));
  const auto verts = window.vertices();
  Eigen::MatrixXd A(static_cast<Eigen::Index>(verts.size()), d);
  Eigen::VectorXd b(static_cast<Eigen::Index>(verts.size()));
  for (size_t r = 0; r < verts.size(); ++r) {
    for (int i = 0; i < d; ++i) A(static_cast<Eigen::Index>(r), i) = static_cast<double>(verts[r][i]);
    b(static_cast<Eigen::Index>(r)) = t0 - field.passage_time(verts[r]);
  }
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  if (qr.rank() < d) throw Error(ErrorCode::kInvalidParameter, "window " + window.str() + " gives a rank-deficient design");
  const Eigen::VectorXd rho = qr.solve(b);
  BusemannVectorEstimate est;
  est.rho.assign(rho.data(), rho.data() + d);
  est.residual_rms = std::sqrt((A * rho - b).squaredNorm() / static_cast<double>(verts.size()));
  est.window = window;
  est.n_points = static_cast<Index>(verts.size());
  return est;
}

// ---- crossings, directedness ----------------------------------------------------

struct CrossingReport {
  std::vector<Vertex> samples;
  std::vector<double> levels;
  std::vector<std::vector<Index>> counts;  // [sample][level]: #{v in Gamma_x : v.theta < level}
  std::vector<Index> path_length;          // vertices on Gamma_x
  std::vector<Index> max_per_level;
  Index max_count = 0;
};

inline CrossingReport crossing_counts(const GeodesicGraph& g, const IntegerDirection& theta, std::vector<double> levels,
                                      const std::vector<Vertex>& samples) {
  CrossingReport r;
  r.samples = samples;
  r.levels = std::move(levels);
  r.max_per_level.assign(r.levels.size(), 0);
  for (const Vertex& x : samples) {
    const auto path = forward_path(g, x);
    std::vector<Index> row(r.levels.size(), 0);
    for (const Vertex& v : path.vertices) {
      const auto l = static_cast<double>(theta.dot(v));
      for (size_t j = 0; j < r.levels.size(); ++j)
        if (l < r.levels[j]) ++row[j];
    }
    for (size_t j = 0; j < row.size(); ++j) {
      r.max_per_level[j] = std::max(r.max_per_level[j], row[j]);
      r.max_count = std::max(r.max_count, row[j]);
    }
    r.counts.push_back(std::move(row));
    r.path_length.push_back(static_cast<Index>(path.vertices.size()));
  }
  return r;
}

/// Angular concentration of forward-path displacements (root minus start).
struct DirectednessReport {
  Index n_paths = 0;
  std::vector<double> mean_direction;  // mean of unit displacement vectors
  double resultant_length = 0.0;       // |mean_direction|, 1 when all agree
};

inline DirectednessReport directedness(const GeodesicGraph& g, const std::vector<Vertex>& samples) {
  const int d = g.box().dim();
  DirectednessReport r;
  r.mean_direction.assign(d, 0.0);
  for (const Vertex& x : samples) {
    const auto p = forward_path(g, x);
    const Vertex disp = p.vertices.back() - x;
    double norm = 0.0;
    for (int i = 0; i < d; ++i) norm += static_cast<double>(disp[i]) * static_cast<double>(disp[i]);
    if (norm == 0.0) continue;
    norm = std::sqrt(norm);
    for (int i = 0; i < d; ++i) r.mean_direction[i] += static_cast<double>(disp[i]) / norm;
    ++r.n_paths;
  }
  double len = 0.0;
  for (double& c : r.mean_direction) {
    if (r.n_paths) c /= static_cast<double>(r.n_paths);
    len += c * c;
  }
  r.resultant_length = std::sqrt(len);
  return r;
}

// ---- backward clusters --------------------------------------------------------

struct BackwardTail {
  Box window;
  Index n_window = 0;
  Index n_censored = 0;  // clusters touching the box boundary
  double censored_fraction = 0.0;
  std::vector<Index> k;
  std::vector<Index> size_ge;   // #{uncensored x : #C^b_x >= k}
  std::vector<Index> depth_ge;  // #{uncensored x : depth >= k}
  std::vector<double> p_size_ge;
  std::vector<double> p_depth_ge;
  Index depth_sum = 0;       // sum of depths over uncensored x
  Index depth_tail_sum = 0;  // sum over k = 1..max depth of depth_ge
  double mean_depth = 0.0;
  bool monotone = true;
};

/// Empirical tails of backward-cluster size and depth over window vertices,
/// censoring clusters that touch the box boundary. Default k grid is
/// 1..(max depth + 1).
inline BackwardTail backward_tail(const GeodesicGraph& g, const Box& window, std::vector<Index> k_grid = {}) {
  if (!g.box().contains(window)) throw Error(ErrorCode::kRange, "window " + window.str() + " not inside " + g.box().str());
  const auto st = cluster_stats(g);
  BackwardTail t;
  t.window = window;
  std::vector<Index> sizes, depths;
  for (const Vertex& x : window.vertices()) {
    const Index i = g.box().index(x);
    ++t.n_window;
    if (st.touches_boundary[i]) {
      ++t.n_censored;
      continue;
    }
    sizes.push_back(st.size[i]);
    depths.push_back(st.depth[i]);
  }
  t.censored_fraction = t.n_window ? static_cast<double>(t.n_censored) / static_cast<double>(t.n_window) : 0.0;
  const Index max_depth = depths.empty() ? 0 : *std::max_element(depths.begin(), depths.end());
  if (k_grid.empty())
    for (Index k = 1; k <= max_depth + 1; ++k) k_grid.push_back(k);
  std::sort(k_grid.begin(), k_grid.end());
  t.k = k_grid;
  const auto n_ok = static_cast<double>(sizes.size());
  for (Index k : k_grid) {
    const auto s = std::count_if(sizes.begin(), sizes.end(), [k](Index v) { return v >= k; });
    const auto dd = std::count_if(depths.begin(), depths.end(), [k](Index v) { return v >= k; });
    t.size_ge.push_back(s);
    t.depth_ge.push_back(dd);
    t.p_size_ge.push_back(n_ok > 0 ? static_cast<double>(s) / n_ok : 0.0);
    t.p_depth_ge.push_back(n_ok > 0 ? static_cast<double>(dd) / n_ok : 0.0);
  }
  for (Index v : depths) t.depth_sum += v;
  for (Index k = 1; k <= max_depth; ++k)
    t.depth_tail_sum += std::count_if(depths.begin(), depths.end(), [k](Index v) { return v >= k; });
  t.mean_depth = n_ok > 0 ? static_cast<double>(t.depth_sum) / n_ok : 0.0;
  t.monotone = std::is_sorted(t.p_depth_ge.rbegin(), t.p_depth_ge.rend()) &&
               std::is_sorted(t.p_size_ge.rbegin(), t.p_size_ge.rend());
  return t;
}

// ---- hyperplane intersection radii ------------------------------------------------

struct RadiusEntry {
  Coord level = 0;
  Index component = 0;
  Index n_vertices = 0;
  Coord radius = 0;  // max pairwise l1 distance on the level
};

struct LevelRadiusSummary {
  Coord level = 0;
  Index n_components = 0;
  double mean = 0.0;
  double stderr_ = 0.0;
  Coord max = 0;
};

struct IntersectionRadiusReport {
  std::vector<RadiusEntry> entries;
  std::vector<LevelRadiusSummary> levels;

  std::vector<double> radii_at(Coord level) const {
    std::vector<double> out;
    for (const auto& e : entries)
      if (e.level == level) out.push_back(static_cast<double>(e.radius));
    return out;
  }
};

/// Max pairwise l1 distance of a point set: the largest spread of s.v over
/// sign vectors s with s_1 = +1.
inline Coord max_pairwise_l1(std::span<const Vertex> pts) {
  if (pts.size() < 2) return 0;
  const int d = pts[0].dim();
  Coord best = 0;
  for (std::uint32_t mask = 0; mask < (1u << (d - 1)); ++mask) {
    Coord lo = std::numeric_limits<Coord>::max(), hi = std::numeric_limits<Coord>::min();
    for (const Vertex& v : pts) {
      Coord s = v[0];
      for (int i = 1; i < d; ++i) s += (mask >> (i - 1)) & 1u ? -v[i] : v[i];
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
    best = std::max(best, hi - lo);
  }
  return best;
}

/// For every weak component meeting H_theta(n) inside `window`, the radius of
/// that intersection.
inline IntersectionRadiusReport intersection_radii(const GeodesicGraph& g, const IntegerDirection& theta,
                                                   const std::vector<Coord>& levels,
                                                   std::optional<Box> window = std::nullopt) {
  const Box w = window.value_or(g.box());
  if (!g.box().contains(w)) throw Error(ErrorCode::kRange, "window " + w.str() + " not inside " + g.box().str());
  const auto comp = components(g);
  IntersectionRadiusReport r;
  for (Coord n : levels) {
    const auto verts = hyperplane_vertices(theta, n, w);
    std::vector<std::pair<Index, Vertex>> tagged;
    for (const auto& v : verts) tagged.emplace_back(comp.label[g.box().index(v)], v);
    std::stable_sort(tagged.begin(), tagged.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<double> rs;
    Coord mx = 0;
    for (size_t i = 0; i < tagged.size();) {
      size_t j = i;
      std::vector<Vertex> pts;
      while (j < tagged.size() && tagged[j].first == tagged[i].first) pts.push_back(tagged[j++].second);
      const Coord rad = max_pairwise_l1(pts);
      r.entries.push_back({n, tagged[i].first, static_cast<Index>(pts.size()), rad});
      rs.push_back(static_cast<double>(rad));
      mx = std::max(mx, rad);
      i = j;
    }
    const auto s = summarize(rs);
    r.levels.push_back({n, static_cast<Index>(rs.size()), s.mean, s.stderr_, mx});
  }
  return r;
}

// ---- mass transport -------------------------------------------------------------

struct MassTransportReport {
  Vertex periods;
  Index n_vertices = 0;
  Index n_components = 0;
  Index total_out = 0;  // sum over x0 of sum_x m(x0, x), via component labels
  Index total_in = 0;   // sum over x0 of sum_x m(x, x0), via search from each progenitor
  double mean_out = 0.0;
  double mean_in = 0.0;
  Index difference = 0;
  bool exact = false;
  std::vector<Vertex> progenitors;
};

/// m(x, y) = 1 iff y is the precedes-minimal vertex of the component of x.
/// On a torus the two double sums are exchanged by reindexing; they are
/// computed by independent routes and compared as integers.
inline MassTransportReport mass_transport_balance(const GeodesicGraph& g, const IntegerDirection& theta) {
  if (g.topology() != Topology::kTorus)
    throw Error(ErrorCode::kInvalidParameter, "mass transport balance needs a graph built on a torus");
  const Index n = g.size();
  const auto comp = components(g);
  const Box& box = g.box();
  std::vector<Index> prog(static_cast<size_t>(comp.n_components), kNoVertex);
  const PrecedesLess less{theta};
  for (Index u = 0; u < n; ++u) {
    Index& p = prog[comp.label[u]];
    if (p == kNoVertex || less(box.vertex(u), box.vertex(p))) p = u;
  }
  MassTransportReport r;
  r.periods = Vertex(box.dim());
  for (int i = 0; i < box.dim(); ++i) r.periods[i] = box.extent(i);
  r.n_vertices = n;
  r.n_components = comp.n_components;
  // Out-route: each x sends unit mass to the progenitor of its label.
  std::vector<Index> received(n, 0);
  for (Index x = 0; x < n; ++x)
    if (prog[comp.label[x]] != kNoVertex) ++r.total_out;
  // In-route: each progenitor receives the size of its undirected component.
  std::vector<std::uint8_t> seen(n, 0);
  for (Index p : prog) {
    std::vector<Index> q{p};
    seen[p] = 1;
    for (size_t h = 0; h < q.size(); ++h) {
      const Index u = q[h];
      auto visit = [&](Index w) {
        if (w != kNoVertex && !seen[w]) {
          seen[w] = 1;
          q.push_back(w);
        }
      };
      visit(g.out(u));
      for (Index w : g.predecessors(u)) visit(w);
    }
    received[p] = static_cast<Index>(q.size());
    r.progenitors.push_back(box.vertex(p));
  }
  for (Index x = 0; x < n; ++x) r.total_in += received[x];
  r.mean_out = static_cast<double>(r.total_out) / static_cast<double>(n);
  r.mean_in = static_cast<double>(r.total_in) / static_cast<double>(n);
  r.difference = r.total_out - r.total_in;
  r.exact = r.difference == 0;
  std::sort(r.progenitors.begin(), r.progenitors.end(), less);
  return r;
}

// ---- reports ----------------------------------------------------------------------

namespace detail {

inline std::string vertex_param(const char* key, const Vertex& v) { return std::string(key) + "=" + join_coords(v, ' '); }

}  // namespace detail

inline Report to_report(const ShapeEstimate& e) {
  Report r;
  r.kind = "shape";
  const size_t nk = e.radii.empty() ? 0 : e.radii[0].directions.size();
  for (size_t s = 0; s < e.samples.size(); ++s)
    for (size_t ri = 0; ri < e.radii.size(); ++ri)
      for (size_t k = 0; k < nk; ++k)
        r.add("T", static_cast<std::int64_t>(e.base_seed + s),
              "r=" + format_double(e.radii[ri].radius) + ";" + detail::vertex_param("x", e.radii[ri].directions[k].x),
              e.samples[s][ri * nk + k]);
  nlohmann::json radii = nlohmann::json::array();
  for (const auto& at : e.radii) {
    for (size_t k = 0; k < at.directions.size(); ++k) {
      const auto& dir = at.directions[k];
      const std::string p = "r=" + format_double(at.radius) + ";" + detail::vertex_param("x", dir.x);
      r.add("ghat", std::nullopt, p, dir.ghat);
      r.add("ghat_stderr", std::nullopt, p, dir.stderr_);
    }
    radii.push_back({{"radius", at.radius}, {"convexity_flags", at.convexity_flags}});
  }
  r.summary = {{"box", e.box.str()}, {"n_seeds", e.n_seeds}, {"base_seed", e.base_seed}, {"radii", radii}};
  return r;
}

inline Report to_report(const ShapeResidual& s, std::uint64_t base_seed) {
  Report r;
  r.kind = "shape_residual";
  for (size_t ri = 0; ri < s.radii.size(); ++ri) {
    const std::string p = "r=" + format_double(s.radii[ri]);
    for (size_t j = 0; j < s.per_seed[ri].size(); ++j)
      r.add("residual", static_cast<std::int64_t>(base_seed + j), p, s.per_seed[ri][j]);
    r.add("median_residual", std::nullopt, p, s.medians[ri]);
  }
  r.summary = {{"radii", s.radii}, {"medians", s.medians}, {"decreasing", s.decreasing}};
  return r;
}

inline Report to_report(const BusemannVectorEstimate& b, std::optional<std::int64_t> seed) {
  Report r;
  r.kind = "busemann";
  for (size_t i = 0; i < b.rho.size(); ++i) r.add("rho", seed, "i=" + std::to_string(i + 1), b.rho[i]);
  r.add("residual_rms", seed, "", b.residual_rms);
  r.summary = {{"window", b.window.str()}, {"n_points", b.n_points}, {"rho", b.rho}, {"residual_rms", b.residual_rms}};
  return r;
}

inline Report to_report(const CrossingReport& c, std::optional<std::int64_t> seed) {
  Report r;
  r.kind = "crossings";
  for (size_t s = 0; s < c.samples.size(); ++s) {
    for (size_t j = 0; j < c.levels.size(); ++j)
      r.add("count", seed, detail::vertex_param("x", c.samples[s]) + ";alpha=" + format_double(c.levels[j]),
            static_cast<double>(c.counts[s][j]));
    r.add("path_length", seed, detail::vertex_param("x", c.samples[s]), static_cast<double>(c.path_length[s]));
  }
  for (size_t j = 0; j < c.levels.size(); ++j)
    r.add("max_count", seed, "alpha=" + format_double(c.levels[j]), static_cast<double>(c.max_per_level[j]));
  r.summary = {{"n_samples", c.samples.size()}, {"levels", c.levels}, {"max_count", c.max_count}};
  return r;
}

inline Report to_report(const BackwardTail& t, std::optional<std::int64_t> seed) {
  Report r;
  r.kind = "backward";
  for (size_t i = 0; i < t.k.size(); ++i) {
    const std::string p = "k=" + std::to_string(t.k[i]);
    r.add("p_size_ge", seed, p, t.p_size_ge[i]);
    r.add("p_depth_ge", seed, p, t.p_depth_ge[i]);
  }
  r.add("censored_fraction", seed, "", t.censored_fraction);
  r.add("mean_depth", seed, "", t.mean_depth);
  r.summary = {{"window", t.window.str()},         {"n_window", t.n_window},
               {"n_censored", t.n_censored},       {"censored_fraction", t.censored_fraction},
               {"depth_sum", t.depth_sum},         {"depth_tail_sum", t.depth_tail_sum},
               {"monotone", t.monotone}};
  return r;
}

inline Report to_report(const IntersectionRadiusReport& ir, std::optional<std::int64_t> seed) {
  Report r;
  r.kind = "radii";
  for (const auto& e : ir.entries)
    r.add("radius", seed, "level=" + std::to_string(e.level) + ";component=" + std::to_string(e.component),
          static_cast<double>(e.radius));
  nlohmann::json levels = nlohmann::json::array();
  for (const auto& l : ir.levels) {
    const std::string p = "level=" + std::to_string(l.level);
    r.add("mean_radius", seed, p, l.mean);
    r.add("max_radius", seed, p, static_cast<double>(l.max));
    levels.push_back({{"level", l.level}, {"n_components", l.n_components}, {"mean", l.mean}, {"max", l.max}});
  }
  r.summary = {{"levels", levels}};
  return r;
}

inline Report to_report(const MassTransportReport& m, std::optional<std::int64_t> seed) {
  Report r;
  r.kind = "masstransport";
  r.add("total_out", seed, "", static_cast<double>(m.total_out));
  r.add("total_in", seed, "", static_cast<double>(m.total_in));
  r.add("difference", seed, "", static_cast<double>(m.difference));
  r.add("n_components", seed, "", static_cast<double>(m.n_components));
  r.summary = {{"periods", join_coords(m.periods, ' ')}, {"n_vertices", m.n_vertices}, {"mean_out", m.mean_out},
               {"mean_in", m.mean_in}, {"exact", m.exact}};
  return r;
}

/// Concatenates per-seed reports of one kind.
inline Report merge_reports(const std::vector<Report>& parts) {
  Report r;
  nlohmann::json summaries = nlohmann::json::array();
  for (const auto& p : parts) {
    if (r.kind.empty()) r.kind = p.kind;
    r.records.insert(r.records.end(), p.records.begin(), p.records.end());
    summaries.push_back(p.summary);
  }
  r.summary = {{"runs", summaries}};
  return r;
}

}  // namespace fppgeo
