#include "fppgeo/analysis.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

namespace fppgeo {
namespace {

const IntegerDirection kE1(Vertex{1, 0});

WeightEnvironment unit_env(const Box& box) {
  return with_constant_weights(WeightEnvironment(box.dim(), DistributionSpec::uniform(0, 1), 1), box, 1.0);
}

double l1(const std::vector<double>& v) {
  double s = 0.0;
  for (double c : v) s += std::fabs(c);
  return s;
}

TEST(DirectionGrid, AxesAreExactAndVectorsUnit) {
  const auto g2 = direction_grid(2, 64);
  ASSERT_EQ(g2.size(), 64u);
  EXPECT_EQ(g2[0], (std::vector<double>{1.0, 0.0}));
  EXPECT_EQ(g2[16], (std::vector<double>{0.0, 1.0}));
  EXPECT_EQ(g2[48], (std::vector<double>{0.0, -1.0}));
  for (const auto& u : direction_grid(3, 100)) EXPECT_NEAR(u[0] * u[0] + u[1] * u[1] + u[2] * u[2], 1.0, 1e-12);
  EXPECT_THROW(direction_grid(4), Error);
}

TEST(EstimateShape, UnitWeightsGiveL1NormExactly) {
  const double r = 12;
  const Box box = Box::centered(2, safe_box_radius(2, r));
  const auto est = estimate_shape(unit_env(box), std::vector<double>{6, r}, 3);
  ASSERT_EQ(est.radii.size(), 2u);
  for (const auto& at : est.radii)
    for (const auto& dir : at.directions) {
      EXPECT_EQ(dir.ghat, static_cast<double>(dir.x.l1_norm()) / at.radius);
      EXPECT_EQ(dir.stderr_, 0.0);
      EXPECT_NEAR(l1(dir.boundary), 1.0, 1e-15);
    }
}

TEST(EstimateShape, UniformBelowMeanWeightAndSymmetric) {
  const WeightEnvironment env(2, DistributionSpec::uniform(0, 1), 1000);
  const auto est = estimate_shape(env, std::vector<double>{40}, 20);
  const auto& e1 = est.radii[0].directions[0];
  const auto& e2 = est.radii[0].directions[16];
  EXPECT_EQ(e1.x, (Vertex{40, 0}));
  EXPECT_LE(e1.ghat, 0.5 + 3 * e1.stderr_);
  EXPECT_GT(e1.ghat, 0.0);
  EXPECT_LT(std::fabs(e1.ghat - e2.ghat), 3 * std::sqrt(e1.stderr_ * e1.stderr_ + e2.stderr_ * e2.stderr_));
  for (const auto& dir : est.radii[0].directions) EXPECT_GT(dir.ghat, 0.0);
}

TEST(EstimateShape, RadiusBeyondSafeBoxIsRangeError) {
  const WeightEnvironment env(2, DistributionSpec::uniform(0, 1), 1);
  ShapeOptions opts;
  opts.box_radius = 20;
  try {
    estimate_shape(env, std::vector<double>{10}, 1, opts);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kRange);
  }
  ShapeOptions small;
  small.max_volume = 1000;
  EXPECT_THROW(estimate_shape(env, std::vector<double>{50}, 1, small), Error);
  EXPECT_THROW(estimate_shape(env, std::vector<double>{}, 1), Error);
}

TEST(ShapeResidual, UnitWeightsVanish) {
  const Box box = Box::centered(2, safe_box_radius(2, 16));
  const auto res = shape_residual(unit_env(box), {4, 8, 16}, 2);
  for (double m : res.medians) EXPECT_EQ(m, 0.0);
  EXPECT_TRUE(res.decreasing);
}

TEST(ShapeResidual, NeedsThreeRadii) {
  const WeightEnvironment env(2, DistributionSpec::uniform(0, 1), 1);
  EXPECT_THROW(shape_residual(env, {10}, 2), Error);
  EXPECT_THROW(shape_residual(env, {10, 20}, 2), Error);
}

TEST(ShapeResidual, UniformMediansDecrease) {
  const WeightEnvironment env(2, DistributionSpec::uniform(0, 1), 500);
  ShapeOptions opts;
  opts.grid_size = 16;
  const auto res = shape_residual(env, {25, 50, 100}, 12, opts);
  EXPECT_TRUE(res.decreasing) << res.medians[0] << ' ' << res.medians[1] << ' ' << res.medians[2];
}

TEST(BusemannVector, UnitWeightsRecoverDirection) {
  const Box box = Box::centered(2, 40);
  const auto field = solve(unit_env(box), box, TargetSpec::lattice_plane(kE1, 30));
  const auto est = estimate_busemann_vector(field, Box::centered(2, 10));
  EXPECT_NEAR(est.rho[0], 1.0, 1e-12);
  EXPECT_NEAR(est.rho[1], 0.0, 1e-12);
  EXPECT_NEAR(est.residual_rms, 0.0, 1e-12);
  EXPECT_EQ(est.n_points, 21 * 21);
  // Reflected window: B(0,-x) = -x.e1, so the same vector fits.
  const auto refl = estimate_busemann_vector(field, Box(Vertex{-8, -3}, Vertex{2, 5}));
  const auto back = estimate_busemann_vector(field, Box(Vertex{-2, -5}, Vertex{8, 3}));
  EXPECT_NEAR(refl.rho[0], back.rho[0], 1e-12);
  EXPECT_NEAR(refl.rho[1], back.rho[1], 1e-12);
}

TEST(BusemannVector, DegenerateOrMisplacedWindowIsError) {
  const Box box = Box::centered(2, 40);
  const auto field = solve(unit_env(box), box, TargetSpec::lattice_plane(kE1, 30));
  EXPECT_THROW(estimate_busemann_vector(field, Box(Vertex{-5, 0}, Vertex{5, 0})), Error);
  try {
    estimate_busemann_vector(field, Box::centered(2, 35));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kRange);
  }
}

TEST(BusemannVector, UniformFitAlignsWithTheDirection) {
  const Box box = Box::centered(2, 50);
  std::vector<double> along, across;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const WeightEnvironment env(2, DistributionSpec::uniform(0, 1), 300 + seed);
    const auto field = solve(env, box, TargetSpec::lattice_plane(kE1, 34));
    const auto est = estimate_busemann_vector(field, Box::centered(2, 12), 0);
    along.push_back(est.rho[0]);
    across.push_back(est.rho[1]);
  }
  const auto a = summarize(along), c = summarize(across);
  EXPECT_GT(a.mean, 0.0);
  EXPECT_LT(std::fabs(c.mean), 3 * c.stderr_ + 1e-12);
}

TEST(CrossingCounts, UnitWeightsNeverCrossBackAndCountsBoundedByLength) {
  const Box box = Box::centered(2, 10);
  const auto g = build_graph(solve(unit_env(box), box, TargetSpec::lattice_plane(kE1, 6)));
  const auto r = crossing_counts(g, kE1, {0.0, 3.0}, {Vertex{1, 4}, Vertex{3, -2}, Vertex{-7, 0}});
  EXPECT_EQ(r.counts[0][0], 0);
  EXPECT_EQ(r.counts[1][0], 0);
  EXPECT_EQ(r.counts[0][1], 2);  // (1,4) and (2,4)
  EXPECT_EQ(r.counts[2][0], 7);
  for (size_t s = 0; s < r.samples.size(); ++s)
    for (Index c : r.counts[s]) EXPECT_LE(c, r.path_length[s]);
}

TEST(CrossingCounts, MaxCountStableAsBoxDoubles) {
  // Samples at distance 10 behind H(10); levels alpha = -5 and 0.
  Index max_small = 0, max_large = 0;
  std::vector<Vertex> samples;
  for (Coord y = -8; y <= 8; y += 2) samples.push_back(Vertex{0, y});
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const WeightEnvironment env(2, DistributionSpec::uniform(0, 1), 40 + seed);
    for (Coord radius : {20, 40}) {
      const Box box = Box::centered(2, radius);
      const auto g = build_graph(solve(env, box, TargetSpec::lattice_plane(kE1, 10)));
      const auto r = crossing_counts(g, kE1, {-5.0, 0.0}, samples);
      (radius == 20 ? max_small : max_large) = std::max(radius == 20 ? max_small : max_large, r.max_count);
    }
  }
  EXPECT_LE(max_large, 2 * max_small + 2);
}

TEST(BackwardTail, ExactIdentities) {
  const Box box = Box::centered(2, 30);
  const WeightEnvironment env(2, DistributionSpec::uniform(0, 1), 8);
  const auto g = build_graph(solve(env, box, TargetSpec::lattice_plane(kE1, 20)));
  const auto t = backward_tail(g, Box::centered(2, 10));
  EXPECT_EQ(t.n_window, 21 * 21);
  ASSERT_LT(t.n_censored, t.n_window);
  EXPECT_EQ(t.k.front(), 1);
  EXPECT_EQ(t.p_size_ge.front(), 1.0);
  EXPECT_EQ(t.depth_ge.back(), 0);
  EXPECT_EQ(t.depth_tail_sum, t.depth_sum);
  EXPECT_TRUE(t.monotone);
  const auto dir = directedness(g, {Vertex{-5, 0}, Vertex{0, 5}, Vertex{0, -5}});
  EXPECT_EQ(dir.n_paths, 3);
  EXPECT_GT(dir.mean_direction[0], 0.5);
}

TEST(BackwardTail, LeafFixture) {
  const Box box(Vertex{0, 0}, Vertex{4, 2});
  std::vector<Index> out(box.volume(), kNoVertex);
  std::vector<std::uint8_t> tgt(box.volume(), 1);
  out[box.index(Vertex{1, 1})] = box.index(Vertex{2, 1});
  tgt[box.index(Vertex{1, 1})] = 0;
  const auto g = GeodesicGraph::from_successors(box, out, tgt);
  const auto t = backward_tail(g, Box(Vertex{1, 1}, Vertex{3, 1}));
  EXPECT_EQ(t.n_censored, 0);
  EXPECT_EQ(t.k, (std::vector<Index>{1, 2}));
  EXPECT_EQ(t.size_ge, (std::vector<Index>{3, 1}));
  EXPECT_EQ(t.depth_ge, (std::vector<Index>{1, 0}));
  EXPECT_EQ(t.depth_sum, 1);
}

TEST(BackwardTail, CensoringShrinksAsTheBoxGrows) {
  double small = 0.0, large = 0.0;
  const Box window = Box::centered(2, 8);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const WeightEnvironment env(2, DistributionSpec::uniform(0, 1), 70 + seed);
    for (Coord radius : {16, 48}) {
      const Box box = Box::centered(2, radius);
      const auto g = build_graph(solve(env, box, TargetSpec::lattice_plane(kE1, 12)));
      (radius == 16 ? small : large) += backward_tail(g, window).censored_fraction;
    }
  }
  EXPECT_LT(large, small);
}

TEST(IntersectionRadii, MaxPairwiseL1MatchesBruteForce) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<Coord> c(-20, 20);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Vertex> pts;
    for (int k = 0; k < 12; ++k) pts.push_back(Vertex{c(rng), c(rng), c(rng)});
    Coord brute = 0;
    for (const auto& a : pts)
      for (const auto& b : pts) brute = std::max(brute, l1_distance(a, b));
    EXPECT_EQ(max_pairwise_l1(pts), brute);
  }
  EXPECT_EQ(max_pairwise_l1(std::vector<Vertex>{Vertex{3, 4}}), 0);
}

TEST(IntersectionRadii, SingleVertexAndWindowBound) {
  // (0,0) -> (1,0), (0,1) -> (1,1): two components, each meeting level 0 once.
  const Box box(Vertex{0, 0}, Vertex{1, 1});
  const auto g = GeodesicGraph::from_successors(box, {2, 3, kNoVertex, kNoVertex}, {0, 0, 1, 1});
  const auto r = intersection_radii(g, kE1, {0, 1});
  ASSERT_EQ(r.entries.size(), 4u);
  for (const auto& e : r.entries) EXPECT_EQ(e.radius, 0);

  const Box big = Box::centered(2, 20);
  const WeightEnvironment env(2, DistributionSpec::uniform(0, 1), 4);
  const auto gg = build_graph(solve(env, big, TargetSpec::lattice_plane(kE1, 20)));
  const Box window = Box::centered(2, 10);
  const auto rr = intersection_radii(gg, kE1, {-5, 0, 5}, window);
  for (const auto& e : rr.entries) {
    EXPECT_GE(e.radius, 0);
    EXPECT_LE(e.radius, 20);  // diameter of one level inside the window
  }
}

TEST(IntersectionRadii, LevelsPlusAndMinusNAgreeInMean) {
  std::vector<double> plus, minus;
  const Box box = Box::centered(2, 40);
  const Box window = Box::centered(2, 20);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const WeightEnvironment env(2, DistributionSpec::uniform(0, 1), 900 + seed);
    const auto g = build_graph(solve(env, box, TargetSpec::lattice_plane(kE1, 40)));
    const auto r = intersection_radii(g, kE1, {-6, 6}, window);
    for (double v : r.radii_at(6)) plus.push_back(v);
    for (double v : r.radii_at(-6)) minus.push_back(v);
  }
  const auto cmp = compare_means(plus, minus);
  EXPECT_TRUE(cmp.pass) << cmp.difference << " vs " << cmp.pooled_stderr;
}

TEST(MassTransport, RequiresTorus) {
  const Box box = Box::centered(2, 4);
  const auto g = build_graph(solve(unit_env(box), box, TargetSpec::lattice_plane(kE1, 0)));
  EXPECT_THROW(mass_transport_balance(g, kE1), Error);
}

TEST(MassTransport, SingletonAndSingleComponentFixtures) {
  const Box box(Vertex{0, 0}, Vertex{3, 3});
  const Index n = box.volume();
  const auto bare = GeodesicGraph::from_successors(box, std::vector<Index>(n, kNoVertex),
                                                   std::vector<std::uint8_t>(n, 1), Topology::kTorus);
  const auto a = mass_transport_balance(bare, kE1);
  EXPECT_EQ(a.total_out, n);
  EXPECT_EQ(a.total_in, n);
  EXPECT_EQ(a.n_components, n);
  // One chain through every vertex in index order, rooted at the last.
  std::vector<Index> chain(n);
  std::vector<std::uint8_t> tgt(n, 0);
  for (Index i = 0; i + 1 < n; ++i) chain[i] = i + 1;
  chain[n - 1] = kNoVertex;
  tgt[n - 1] = 1;
  const auto one = mass_transport_balance(GeodesicGraph::from_successors(box, chain, tgt, Topology::kTorus), kE1);
  EXPECT_EQ(one.n_components, 1);
  EXPECT_EQ(one.total_out, n);
  EXPECT_EQ(one.total_in, n);
  EXPECT_EQ(one.progenitors, std::vector<Vertex>{Vertex({0, 0})});
}

TEST(MassTransport, RandomTorusBalancesExactly) {
  const IntegerDirection theta(Vertex{1, 2});
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto env = WeightEnvironment(2, DistributionSpec::uniform(0, 1), seed).with_torus(Vertex{16, 16});
    const Box box(Vertex{0, 0}, Vertex{15, 15});
    const auto g = build_graph(solve(env, box, TargetSpec::lattice_plane(theta, 3), Topology::kTorus));
    const auto m = mass_transport_balance(g, theta);
    EXPECT_TRUE(m.exact);
    EXPECT_EQ(m.total_in, box.volume());
    // Progenitors are the precedes-minimal members of their components.
    const auto comp = components(g);
    for (const Vertex& p : m.progenitors)
      for (Index u = 0; u < g.size(); ++u)
        if (comp.label[u] == comp.label[box.index(p)]) {
          EXPECT_TRUE(precedes(p, box.vertex(u), theta));
        }
  }
}

TEST(Reports, CsvJsonAndFormats) {
  Report empty;
  empty.kind = "x";
  std::ostringstream os;
  export_report(os, empty, "csv");
  EXPECT_EQ(os.str(), "metric,seed,param,value\n");
  EXPECT_THROW(export_report(os, empty, "xml"), Error);

  const Box box = Box::centered(2, 12);
  const WeightEnvironment env(2, DistributionSpec::uniform(0, 1), 2);
  const auto g = build_graph(solve(env, box, TargetSpec::lattice_plane(kE1, 12)));
  const Report rep = to_report(backward_tail(g, Box::centered(2, 4)), 2);
  std::ostringstream csv;
  export_report(csv, rep, ExportFormat::kCsv);
  const std::string text = csv.str();
  EXPECT_EQ(static_cast<size_t>(std::count(text.begin(), text.end(), '\n')), rep.records.size() + 1);
  std::ostringstream js;
  export_report(js, rep, ExportFormat::kJson);
  EXPECT_EQ(report_from_json(nlohmann::json::parse(js.str())), rep);
}

}  // namespace
}  // namespace fppgeo
