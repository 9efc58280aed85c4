// Acceptance suite: one PASS/FAIL line per criterion. Exit status is nonzero
// when any criterion fails. `acceptance 3 5` runs only criteria 3 and 5.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fppgeo/analysis.hpp"
#include "fppgeo/geodesic_graph.hpp"
#include "fppgeo/geodesics.hpp"
#include "fppgeo/manifest.hpp"
#include "fppgeo/modification.hpp"
#include "oracles.hpp"
#include "strip_fixtures.hpp"

using namespace fppgeo;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}

const IntegerDirection kE1(Vertex{1, 0});

// ---- 1: Dijkstra against Bellman-Ford ---------------------------------------------

Outcome oracle_equivalence() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20240601);
  const std::vector<Vertex> dirs2 = {{1, 0}, {0, 1}, {1, 1}, {1, -1}, {2, 1}, {-1, 2}, {3, -2}};
  const std::vector<Vertex> dirs3 = {{1, 0, 0}, {0, 0, 1}, {1, 1, 1}, {1, -1, 2}, {2, 1, -3}};
  Index instances = 0, mismatches = 0;
  double worst = 0.0;
  auto run = [&](const Box& box, const std::vector<Vertex>& dirs, int n) {
    for (int k = 0; k < n; ++k) {
      const WeightEnvironment env(box.dim(), DistributionSpec::uniform(0, 1), rng());
      const Vertex anchor = box.vertex(static_cast<Index>(rng() % static_cast<std::uint64_t>(box.volume())));
      const IntegerDirection th(dirs[rng() % dirs.size()]);
      const TargetSpec target = (k % 2 == 0) ? TargetSpec::point(anchor) : TargetSpec::lattice_plane(th, th.dot(anchor));
      const DistanceField f = solve(env, box, target, Topology::kOpen);
      const auto ref = oracle::bellman_ford(env, box, [&](const Vertex& v) { return target.contains(v); });
      for (Index i = 0; i < box.volume(); ++i) {
        const double a = f.passage_time(box.vertex(i)), b = ref[static_cast<size_t>(i)];
        const double rel = std::fabs(a - b) / std::max(1.0, std::fabs(b));
        worst = std::max(worst, rel);
        if (!oracle::close_rel(a, b, 1e-12)) ++mismatches;
      }
      ++instances;
    }
  };
  run(Box::from_side(2, 5), dirs2, 1000);
  run(Box::from_side(3, 3), dirs3, 200);
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < 60.0, std::to_string(instances) + " instances, " + std::to_string(mismatches) +
                                              " mismatched vertices, worst rel err " + fmt(worst) + ", " + fmt(secs) + " s"};
}

// ---- 2: forest invariants ---------------------------------------------------------

struct UnionFind {
  std::vector<Index> parent;
  explicit UnionFind(Index n) : parent(static_cast<size_t>(n)) { std::iota(parent.begin(), parent.end(), Index{0}); }
  Index find(Index a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  }
  bool unite(Index a, Index b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[a] = b;
    return true;
  }
};

Outcome forest_invariants() {
  const auto t0 = Clock::now();
  const Box box = Box::from_side(2, 201);
  Index bad_degree = 0, cycles = 0, bad_paths = 0, checked = 0, paths = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const WeightEnvironment env(2, DistributionSpec::uniform(0, 1), seed);
    const DistanceField f = solve(env, box, TargetSpec::lattice_plane(kE1, 80), Topology::kOpen);
    const GeodesicGraph g = build_graph(f);
    UnionFind uf(g.size());
    for (Index i = 0; i < g.size(); ++i) {
      if (g.is_target(i)) continue;
      ++checked;
      const Index o = g.out(i);
      if (o == kNoVertex || l1_distance(box.vertex(i), box.vertex(o)) != 1) {
        ++bad_degree;
        continue;
      }
      if (!uf.unite(i, o)) ++cycles;
    }
    std::mt19937_64 rng(seed);
    for (int k = 0; k < 200; ++k) {
      const Vertex x = box.vertex(static_cast<Index>(rng() % static_cast<std::uint64_t>(box.volume())));
      const auto p = forward_path(g, x);
      double w = 0.0;
      for (size_t j = 0; j + 1 < p.vertices.size(); ++j) w += env.weight_of(p.vertices[j], p.vertices[j + 1]);
      const double err = std::fabs(w - f.passage_time(x));
      worst = std::max(worst, err);
      if (!p.reached_target || kE1.dot(p.vertices.back()) != 80 || err > 1e-9) ++bad_paths;
      ++paths;
    }
  }
  const double secs = seconds_since(t0);
  return {bad_degree == 0 && cycles == 0 && bad_paths == 0 && secs < 120.0,
          std::to_string(checked) + " non-target vertices, " + std::to_string(bad_degree) + " without a unit out-edge, " +
              std::to_string(cycles) + " cycles, " + std::to_string(bad_paths) + "/" + std::to_string(paths) +
              " bad paths (worst |w - T| " + fmt(worst) + "), " + fmt(secs) + " s"};
}

// ---- 3: Busemann algebra ----------------------------------------------------------------

Outcome busemann_algebra() {
  const Box box = Box::from_side(2, 101);
  const WeightEnvironment env(2, DistributionSpec::uniform(0, 1), 303);
  const DistanceField f = solve(env, box, TargetSpec::lattice_plane(kE1, 40), Topology::kOpen);
  const BusemannField B(f);
  std::mt19937_64 rng(3);
  auto draw = [&] { return box.vertex(static_cast<Index>(rng() % static_cast<std::uint64_t>(box.volume()))); };
  double worst_add = 0.0;
  Index antisym = 0;
  for (int k = 0; k < 10000; ++k) {
    const Vertex x = draw(), y = draw(), z = draw();
    worst_add = std::max(worst_add, std::fabs(B(x, y) + B(y, z) - B(x, z)));
    if (B(x, y) != -B(y, x)) ++antisym;
  }
  double worst_excess = -std::numeric_limits<double>::infinity();
  Index bound_violations = 0;
  for (int k = 0; k < 100; ++k) {
    const Vertex y = draw();
    const DistanceField to_y = solve(env, box, TargetSpec::point(y), Topology::kOpen);
    for (int j = 0; j < 10; ++j) {
      const Vertex x = draw();
      const double excess = std::fabs(B(x, y)) - to_y.passage_time(x);
      worst_excess = std::max(worst_excess, excess);
      if (excess > 1e-9) ++bound_violations;
    }
  }
  return {worst_add <= 1e-9 && antisym == 0 && bound_violations == 0,
          "additivity worst " + fmt(worst_add) + " on 10000 triples, " + std::to_string(antisym) +
              " antisymmetry failures, |B| <= T violated on " + std::to_string(bound_violations) +
              "/1000 pairs (max |B| - T = " + fmt(worst_excess) + ")"};
}

// ---- 4: shape bound ---------------------------------------------------------------------

Outcome shape_bound() {
  const auto e1_of = [](const ShapeEstimate& e) -> const ShapeDirection& {
    for (const auto& d : e.radii.front().directions)
      if (d.xi[0] == 1.0 && d.xi[1] == 0.0) return d;
    throw Error(ErrorCode::kRange, "grid has no e1 direction");
  };
  ShapeOptions opts;
  opts.grid_size = 8;
  const WeightEnvironment env(2, DistributionSpec::uniform(0, 1), 4000);
  const std::vector<double> r300 = {300.0};
  const ShapeEstimate est = estimate_shape(env, r300, 50, opts);
  const ShapeDirection& d = e1_of(est);
  // Independent recomputation from the raw samples.
  double sum = 0.0, sq = 0.0;
  const size_t col = static_cast<size_t>(&d - est.radii.front().directions.data());
  for (const auto& s : est.samples) sum += s[col] / 300.0;
  const double mean = sum / 50.0;
  for (const auto& s : est.samples) sq += (s[col] / 300.0 - mean) * (s[col] / 300.0 - mean);
  const double se = std::sqrt(sq / 49.0 / 50.0);
  const bool bound = d.ghat <= 0.5 + 3.0 * d.stderr_;
  const bool consistent = std::fabs(mean - d.ghat) <= 1e-12 && std::fabs(se - d.stderr_) <= 1e-12;

  const std::vector<double> r40 = {40.0};
  ShapeOptions unit_opts;
  unit_opts.grid_size = 64;
  const Box ub = Box::centered(2, safe_box_radius(2, 40.0));
  const ShapeEstimate u = estimate_shape(with_constant_weights(env, ub, 1.0), r40, 3, unit_opts);
  Index unit_bad = 0;
  for (const auto& dir : u.radii.front().directions)
    if (dir.ghat != static_cast<double>(dir.x.l1_norm()) / 40.0 || dir.stderr_ != 0.0) ++unit_bad;

  return {bound && consistent && unit_bad == 0,
          "ghat(e1) = " + fmt(d.ghat) + " +- " + fmt(d.stderr_) + " at r = 300 over 50 seeds (bound 0.5 + 3 se = " +
              fmt(0.5 + 3.0 * d.stderr_) + "), raw-sample recomputation " + (consistent ? "agrees" : "DISAGREES") +
              "; unit weights: " + std::to_string(unit_bad) + "/64 directions differ from the l1 norm"};
}

// ---- 5: backward clusters -----------------------------------------------------------------

// Pilot on seeds 1000..1019 (same geometry): censored fraction mean 0.0379,
// standard error 0.0028, max 0.0652.
constexpr double kCensoredMeanGate = 0.06;
constexpr double kCensoredSeedGate = 0.10;

Outcome backward_clusters() {
  const Box box = Box::from_side(2, 301), window = Box::from_side(2, 101);
  std::vector<double> fractions;
  Index non_monotone = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const WeightEnvironment env(2, DistributionSpec::uniform(0, 1), seed);
    const GeodesicGraph g = build_graph(solve(env, box, TargetSpec::lattice_plane(kE1, 100), Topology::kOpen));
    const BackwardTail t = backward_tail(g, window);
    fractions.push_back(t.censored_fraction);
    // Counts, not ratios: nonincreasing integer sequences.
    if (!std::is_sorted(t.depth_ge.rbegin(), t.depth_ge.rend()) || !std::is_sorted(t.size_ge.rbegin(), t.size_ge.rend()))
      ++non_monotone;
  }
  const double mean = std::accumulate(fractions.begin(), fractions.end(), 0.0) / static_cast<double>(fractions.size());
  const double worst = *std::max_element(fractions.begin(), fractions.end());
  return {mean < kCensoredMeanGate && worst < kCensoredSeedGate && non_monotone == 0,
          "censored fraction mean " + fmt(mean) + " (gate " + fmt(kCensoredMeanGate) + "), max " + fmt(worst) + " (gate " +
              fmt(kCensoredSeedGate) + ") over 20 seeds; " + std::to_string(non_monotone) + " non-monotone tails"};
}

// ---- 6: mass transport on the torus -----------------------------------------------------------

Outcome mass_transport() {
  Index unequal = 0, runs = 0;
  auto one = [&](int dim, Coord L, std::uint64_t seed, const IntegerDirection& th) {
    Vertex periods(dim), lo(dim), hi(dim);
    for (int i = 0; i < dim; ++i) {
      periods[i] = L;
      hi[i] = L - 1;
    }
    const auto env = WeightEnvironment(dim, DistributionSpec::uniform(0, 1), seed).with_torus(periods);
    const auto g = build_graph(solve(env, Box(lo, hi), TargetSpec::lattice_plane(th, 0), Topology::kTorus));
    const auto r = mass_transport_balance(g, th);
    ++runs;
    // Every vertex has exactly one progenitor, so both sums equal the vertex count.
    if (!r.exact || r.total_out != r.total_in || r.total_out != r.n_vertices) ++unequal;
  };
  for (std::uint64_t s = 1; s <= 100; ++s) {
    one(2, 64, s, kE1);
    one(3, 16, s, IntegerDirection(Vertex{1, 0, 0}));
  }
  return {unequal == 0, std::to_string(runs - unequal) + "/" + std::to_string(runs) +
                            " torus instances (64^2 and 16^3, 100 seeds each) with equal integer sums"};
}

// ---- 7: Bezout normalization ----------------------------------------------------------------

/// Breadth-first search over partial sums theta . v, moving by +-theta_i and
/// staying inside [-B, B]. Returns a lattice point on the level, if found.
std::optional<Vertex> search_level(const IntegerDirection& th, Coord level, Coord B) {
  const auto n = static_cast<size_t>(2 * B + 1);
  std::vector<int> step(n, -1);  // signed axis + 1 used to arrive, 0 for the origin
  std::vector<char> seen(n, 0);
  std::vector<Coord> queue = {0};
  seen[static_cast<size_t>(B)] = 1;
  step[static_cast<size_t>(B)] = 0;
  for (size_t h = 0; h < queue.size(); ++h) {
    const Coord s = queue[h];
    for (int i = 0; i < th.dim(); ++i)
      for (int sign : {1, -1}) {
        const Coord t = s + sign * th[i];
        if (t < -B || t > B || seen[static_cast<size_t>(t + B)]) continue;
        seen[static_cast<size_t>(t + B)] = 1;
        step[static_cast<size_t>(t + B)] = sign * (i + 1);
        queue.push_back(t);
      }
  }
  if (level < -B || level > B || !seen[static_cast<size_t>(level + B)]) return std::nullopt;
  Vertex v(th.dim());
  for (Coord s = level; s != 0;) {
    const int st = step[static_cast<size_t>(s + B)];
    const int axis = std::abs(st) - 1, sign = st > 0 ? 1 : -1;
    v[axis] += sign;
    s -= sign * th[axis];
  }
  return v;
}

Outcome bezout() {
  std::mt19937_64 rng(77);
  Index bad_gcd = 0, bad_ratio = 0, missing = 0;
  for (int k = 0; k < 100; ++k) {
    const int d = 2 + static_cast<int>(rng() % 3);
    std::vector<Rational> q(static_cast<size_t>(d));
    bool nonzero = false;
    while (!nonzero) {
      for (auto& c : q) {
        c.num = static_cast<std::int64_t>(rng() % 13) - 6;
        c.den = 1 + static_cast<std::int64_t>(rng() % 6);
        nonzero = nonzero || c.num != 0;
      }
    }
    const IntegerDirection th = normalize_direction(std::span<const Rational>(q));
    Coord g = 0, K = 0;
    for (int i = 0; i < d; ++i) {
      g = std::gcd(g, std::llabs(th[i]));
      K = std::max<Coord>(K, std::llabs(th[i]));
    }
    if (g != 1) ++bad_gcd;
    // Positive multiple of the input: th_i * q_j == th_j * q_i and matching signs.
    for (int i = 0; i < d; ++i) {
      const auto& qi = q[static_cast<size_t>(i)];
      if ((qi.num > 0) != (th[i] > 0) || (qi.num == 0) != (th[i] == 0)) ++bad_ratio;
      for (int j = 0; j < d; ++j) {
        const auto& qj = q[static_cast<size_t>(j)];
        if (th[i] * qj.num * qi.den != th[j] * qi.num * qj.den) ++bad_ratio;
      }
    }
    for (Coord L = -10; L <= 10; ++L) {
      const auto v = search_level(th, L, K + 10);
      if (!v || th.dot(*v) != L) ++missing;
    }
  }
  return {bad_gcd == 0 && bad_ratio == 0 && missing == 0,
          "100 directions (d = 2..4): " + std::to_string(bad_gcd) + " with gcd != 1, " + std::to_string(bad_ratio) +
              " proportionality failures, " + std::to_string(missing) + " empty levels in [-10, 10]"};
}

// ---- 8: modification experiment ------------------------------------------------------------------

Outcome modification() {
  Index fixture_ok = 0;
  const int n_fixtures = 100;
  for (std::uint64_t seed = 0; seed < static_cast<std::uint64_t>(n_fixtures); ++seed) {
    const auto fx = fixture::severing(seed);
    const auto out = run_modification(fx.env, fx.setup, fx.y, fx.xi, ModificationMode::bounded());
    if (out.event.pass && out.lambda == 0.95 && out.severing.severed) ++fixture_ok;
  }

  // Monotone severing: V(lambda) = {z : z.theta <= 0, Gamma_z meets Gamma_xi}
  // must not grow from lambda = 0.6 to 0.95. Fully random Uniform(0,1)
  // environments with the fixture geometry, seeds 0..49 fixed in advance.
  auto violations = [](bool random_env) {
    Index bad = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const auto fx = fixture::severing(seed);
      const WeightEnvironment env = random_env ? WeightEnvironment(2, DistributionSpec::uniform(0, 1), seed) : fx.env;
      const auto lo = run_modification(env, fx.setup, fx.y, fx.xi, ModificationMode::unbounded(0.6));
      const auto hi = run_modification(env, fx.setup, fx.y, fx.xi, ModificationMode::unbounded(0.95));
      const auto vlo = severing_violators(lo.modified, fx.setup.spec, fx.xi);
      const auto vhi = severing_violators(hi.modified, fx.setup.spec, fx.xi);
      const Box& box = fx.setup.box;
      if (!std::includes(vlo.begin(), vlo.end(), vhi.begin(), vhi.end(),
                         [&](const Vertex& a, const Vertex& b) { return box.index(a) < box.index(b); }))
        ++bad;
    }
    return bad;
  };
  const Index random_bad = violations(true);
  const Index fixture_bad = violations(false);

  ScanConfig sc;
  sc.seed_begin = 1;
  sc.seed_end = 21;
  sc.N_list = {8, 12};
  sc.M_rule = {0.25, 2.0};
  sc.M_prime = 3;
  const ScanSummary s = summarize_scan(run_scan(sc));

  return {fixture_ok == n_fixtures && random_bad == 0,
          "fixtures severed " + std::to_string(fixture_ok) + "/" + std::to_string(n_fixtures) +
              "; monotone severing violated on " + std::to_string(random_bad) +
              "/50 random environments (fixture backgrounds: " + std::to_string(fixture_bad) +
              "/50); exploratory scan: event frequency " + fmt(s.event_frequency) + ", conditional severing rate " +
              fmt(s.conditional_severing_rate) + " over " + std::to_string(s.trials) + " trials"};
}

// ---- 9: CLI reproducibility ---------------------------------------------------------------------------

Outcome reproducibility() {
  const fs::path dir = fs::temp_directory_path() / "fppgeo_acceptance_repro";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"shape", "--radii 10,20 --seeds 3 --grid 16"},
      {"graph", "--box 101 --theta 1,0 --alpha 40 --seed 7"},
      {"busemann", "--box 101 --seeds 3"},
      {"backward", "--box 121 --seeds 2"},
      {"crossings", "--box 101 --seeds 2"},
      {"radii", "--box 101 --seeds 2"},
      {"masstransport", "--box 32 --seeds 3"},
      {"modify", "--seeds 3"},
  };
  Index same = 0;
  std::string differing;
  for (const auto& [cmd, args] : commands) {
    std::string bytes[2];
    bool ok = true;
    for (int rep = 0; rep < 2; ++rep) {
      const fs::path out = dir / (cmd + std::to_string(rep) + ".csv");
      const std::string line = std::string("\"") + FPPGEO_TOOL_PATH + "\" " + cmd + " " + args + " --jobs " +
                               std::to_string(rep + 1) + " --out \"" + out.string() + "\" >/dev/null 2>&1";
      ok = ok && std::system(line.c_str()) == 0 && fs::exists(out);
      if (ok) bytes[rep] = read_file(out);
    }
    if (ok && !bytes[0].empty() && bytes[0] == bytes[1]) {
      ++same;
    } else {
      differing += " " + cmd;
    }
  }
  fs::remove_all(dir);
  return {same == static_cast<Index>(commands.size()),
          std::to_string(same) + "/" + std::to_string(commands.size()) +
              " commands byte-identical across two runs (jobs 1 and 2)" + (differing.empty() ? "" : "; differ:" + differing)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"oracle equivalence", oracle_equivalence},
      {"forest invariants", forest_invariants},
      {"Busemann algebra", busemann_algebra},
      {"shape bound", shape_bound},
      {"backward-cluster censoring and tails", backward_clusters},
      {"mass-transport identity", mass_transport},
      {"Bezout normalization", bezout},
      {"modification experiment", modification},
      {"CLI reproducibility", reproducibility},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failed = 0;
  for (size_t k = 0; k < criteria.size(); ++k) {
    const int n = static_cast<int>(k) + 1;
    if (!only.empty() && !only.count(n)) continue;
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << "criterion " << n << " " << (o.pass ? "PASS" : "FAIL") << " [" << criteria[k].first << "] " << o.detail
              << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
