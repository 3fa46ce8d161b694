#include <gtest/gtest.h>

#include <numbers>
#include <random>
#include <set>

#include "lst/ephemerality.hpp"
#include "lst/error.hpp"
#include "lst/evaluation.hpp"
#include "lst/seed_labels.hpp"
#include "lst/sim_harness.hpp"
#include "oracles.hpp"

using namespace lst;

namespace {

// Checks a DBSCAN labeling against the density-connectivity oracle: core
// points partition exactly like the oracle's components, noise is exactly
// the set of points within eps of no core, and border points join a cluster
// holding a core neighbor.
::testing::AssertionResult matches_oracle(const std::vector<Eigen::Vector4d>& pts, const std::vector<int>& labels,
                                          double eps, std::size_t min_pts) {
  auto d = oracle::brute_density(pts, eps, min_pts);
  std::map<int, int> core_map, core_map_back;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (!d.core[i]) continue;
    if (labels[i] < 0) return ::testing::AssertionFailure() << "core point " << i << " labeled noise";
    auto [it, fresh] = core_map.emplace(d.component[i], labels[i]);
    if (!fresh && it->second != labels[i])
      return ::testing::AssertionFailure() << "core component split at point " << i;
    auto [jt, fresh2] = core_map_back.emplace(labels[i], d.component[i]);
    if (!fresh2 && jt->second != d.component[i])
      return ::testing::AssertionFailure() << "core components merged at point " << i;
  }
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (d.core[i]) continue;
    bool reachable = false;
    bool joined_valid = false;
    for (std::size_t j : d.neighbors[i]) {
      if (!d.core[j]) continue;
      reachable = true;
      if (labels[j] == labels[i]) joined_valid = true;
    }
    if (!reachable && labels[i] != kNoise)
      return ::testing::AssertionFailure() << "point " << i << " should be noise";
    if (reachable && !joined_valid)
      return ::testing::AssertionFailure() << "border point " << i << " joined a cluster without a core neighbor";
  }
  return ::testing::AssertionSuccess();
}

Box3D rect(double l, double w, double yaw) { return {0, 0, 0.75, l, w, 1.5, yaw}; }

PointCloud corners(const Box3D& b) {
  PointCloud pts;
  for (const Vec2& c : bev_corners(b)) {
    pts.push_back({c.x, c.y, 0.0, 0.0});
    pts.push_back({c.x, c.y, 1.5, 0.0});
  }
  return pts;
}

}  // namespace

TEST(Dbscan, SeparatedBlobsAndIsolatedPoint) {
  std::vector<Eigen::Vector4d> pts;
  for (int i = 0; i < 5; ++i) pts.emplace_back(0.1 * i, 0, 0, 0);
  for (int i = 0; i < 5; ++i) pts.emplace_back(10.0 + 0.1 * i, 0, 0, 0);
  pts.emplace_back(-30, 0, 0, 0);
  auto labels = dbscan(pts, {1.0, 3, 5.0});
  EXPECT_EQ(std::set<int>(labels.begin(), labels.begin() + 5), std::set<int>{0});
  EXPECT_EQ(std::set<int>(labels.begin() + 5, labels.begin() + 10), std::set<int>{1});
  EXPECT_EQ(labels.back(), kNoise);
}

TEST(Dbscan, PpDimensionSeparatesColocatedPoints) {
  std::vector<Eigen::Vector4d> pts;
  for (int i = 0; i < 6; ++i) pts.emplace_back(0.1 * i, 0, 0, 0.0);
  for (int i = 0; i < 6; ++i) pts.emplace_back(0.1 * i, 0, 0, 5.0);
  auto labels = dbscan(pts, {1.0, 3, 5.0});
  EXPECT_NE(labels[0], labels[6]);
}

TEST(Dbscan, BorderPointGoesToFirstCluster) {
  // Point 4 is a border point within eps of both cluster A (found first) and B.
  std::vector<Eigen::Vector4d> pts{{0, 0, 0, 0},   {0.1, 0, 0, 0}, {0.2, 0, 0, 0}, {0.3, 0, 0, 0}, {1.2, 0, 0, 0},
                                   {2.1, 0, 0, 0}, {2.2, 0, 0, 0}, {2.3, 0, 0, 0}, {2.4, 0, 0, 0}};
  auto labels = dbscan(pts, {0.95, 4, 0.0});
  EXPECT_EQ(labels[4], labels[0]);
  EXPECT_NE(labels[5], labels[0]);
  EXPECT_NE(labels[5], kNoise);
}

TEST(Dbscan, MatchesDensityOracleOnRandomInstances) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    std::uniform_int_distribution<int> n_dist(20, 200);
    std::uniform_real_distribution<double> u(0.0, 6.0), pp(0.0, 1.0);
    std::vector<Eigen::Vector4d> pts(static_cast<std::size_t>(n_dist(rng)));
    for (auto& p : pts) p = {u(rng), u(rng), u(rng) * 0.3, pp(rng)};
    ClusterParams cp{0.8, 4, 1.0};
    auto labels = dbscan(pts, cp);
    EXPECT_TRUE(matches_oracle(pts, labels, cp.eps, cp.min_pts)) << "trial " << trial;
  }
}

TEST(Dbscan, Deterministic) {
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  std::vector<Eigen::Vector4d> pts(150);
  for (auto& p : pts) p = {u(rng), u(rng), 0.0, 0.0};
  EXPECT_EQ(dbscan(pts, {0.7, 4, 5.0}), dbscan(pts, {0.7, 4, 5.0}));
}

TEST(FitBox, AxisAlignedRectangle) {
  Box3D b = fit_box(corners(rect(4, 2, 0)), 0.0);
  EXPECT_NEAR(b.length, 4.0, 1e-9);
  EXPECT_NEAR(b.width, 2.0, 1e-9);
  EXPECT_NEAR(b.height, 1.5, 1e-9);
  EXPECT_NEAR(b.yaw, 0.0, 1e-9);
  EXPECT_NEAR(b.cz, 0.75, 1e-9);
}

TEST(FitBox, RotatedRectangleRecoversYaw) {
  const double yaw = std::numbers::pi / 6;
  Box3D b = fit_box(corners(rect(4, 2, yaw)), 0.0);
  EXPECT_NEAR(b.length, 4.0, 1e-9);
  EXPECT_NEAR(b.width, 2.0, 1e-9);
  EXPECT_NEAR(b.yaw, yaw, 1e-9);
}

TEST(FitBox, YawInHalfOpenRangeAndLengthAtLeastWidth) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int t = 0; t < 100; ++t) {
    PointCloud pts(30);
    for (auto& p : pts) p = {u(rng) * 2.0, u(rng), u(rng) + 2.0, 0.0};
    Box3D b = fit_box(pts, -1.0);
    EXPECT_GE(b.length, b.width);
    EXPECT_GT(b.yaw, -std::numbers::pi / 2);
    EXPECT_LE(b.yaw, std::numbers::pi / 2);
    for (const Point3& p : pts) EXPECT_TRUE(oracle::inside_cuboid({b.cx, b.cy, b.cz, b.length + 1e-9, b.width + 1e-9, b.height + 1e-9, b.yaw}, p));
  }
}

TEST(FitBox, CollinearFallsBackToPaddedBox) {
  PointCloud line;
  for (int i = 0; i < 5; ++i) line.push_back({static_cast<double>(i), 0.0, 1.0, 0.0});
  Box3D b = fit_box(line, 0.0);
  EXPECT_NEAR(b.length, 4.1, 1e-9);
  EXPECT_NEAR(b.width, 0.1, 1e-9);
  EXPECT_NEAR(b.yaw, 0.0, 1e-9);
}

TEST(GroundMap, FlatPlaneWithBoxOnTop) {
  PointCloud cloud;
  for (int x = -10; x <= 10; ++x)
    for (int y = -10; y <= 10; ++y)
      for (int k = 0; k < 4; ++k) cloud.push_back({x + 0.25 * k, y + 0.1, 0.0, 0.0});
  for (int k = 0; k < 40; ++k) cloud.push_back({1.0 + 0.05 * k, 1.0, 0.5 + 0.025 * k, 0.0});
  GroundMap g = estimate_ground_z(cloud, 1.0);
  for (double x = -9.5; x < 10; x += 0.7)
    for (double y = -9.5; y < 10; y += 0.7) EXPECT_NEAR(g.height_at(x, y), 0.0, 0.05);
}

TEST(GroundMap, SingleCellAndEmpty) {
  GroundMap g = estimate_ground_z({{0.2, 0.2, 2.0, 0}, {0.3, 0.4, 2.0, 0}}, 1.0);
  EXPECT_DOUBLE_EQ(g.height_at(0.25, 0.3), 2.0);
  EXPECT_THROW(estimate_ground_z({}, 1.0), DataError);
}

TEST(GroundMap, TiltedPlaneTracked) {
  PointCloud cloud;
  for (double x = -10; x < 10; x += 0.2)
    for (double y = -10; y < 10; y += 0.2) cloud.push_back({x, y, 0.05 * x + 0.02 * y, 0.0});
  GroundMap g = estimate_ground_z(cloud, 1.0);
  for (std::size_t ix = 0; ix < g.cols(); ++ix)
    for (std::size_t iy = 0; iy < g.rows(); ++iy) {
      const double x = g.cell_center_x(ix), y = g.cell_center_y(iy);
      EXPECT_NEAR(g.cell_height(ix, iy), 0.05 * x + 0.02 * y, 0.1);
    }
}

TEST(GroundMap, EmptyCellsInheritNearest) {
  PointCloud cloud{{0.5, 0.5, 1.0, 0}, {5.5, 0.5, 3.0, 0}};
  GroundMap g(cloud, 1.0);
  EXPECT_DOUBLE_EQ(g.height_at(1.5, 0.5), 1.0);
  EXPECT_DOUBLE_EQ(g.height_at(4.5, 0.5), 3.0);
}

TEST(SeedLabels, SmallClusterRejected) {
  TraversalSet ts;
  ts.sample_id = "000000";
  for (double x = -5; x < 5; x += 0.25)
    for (double y = -5; y < 5; y += 0.25) ts.reference.push_back({x, y, 0.0, 0});
  const std::size_t ground = ts.reference.size();
  for (int k = 0; k < 3; ++k) ts.reference.push_back({0.1 * k, 0.0, 1.0, 0});
  ts.traversals = {ts.reference};
  PPScores pp(ts.reference.size(), 1.0);
  for (std::size_t i = ground; i < pp.size(); ++i) pp[i] = 0.0;
  EXPECT_TRUE(generate_seed_labels(ts, pp, {}, {}).empty());
}

TEST(SeedLabels, FiveSeparatedCarsFound) {
  WorldConfig cfg;
  cfg.n_samples = 1;
  cfg.n_static_objects = 0;
  cfg.n_mobile_objects = 5;
  cfg.rng_seed = 5;
  SimWorld w = gen_world(cfg);
  const SimSample& s = w.samples[0];
  PPScores pp = compute_pp_scores(s.traversals, kDefaultPPRadius);
  auto seeds = generate_seed_labels(s.traversals, pp, {}, {});
  std::size_t found = 0;
  for (const LabeledBox& g : s.gt) {
    bool hit = false;
    for (const LabeledBox& sd : seeds) hit = hit || iou_bev(sd.box, g.box) >= 0.3;
    found += hit;
  }
  EXPECT_GE(found, 4u);
  for (const LabeledBox& sd : seeds) EXPECT_EQ(sd.score, 1.0);
}

TEST(SeedLabels, StaticWorldYieldsNothing) {
  WorldConfig cfg;
  cfg.n_samples = 2;
  cfg.n_mobile_objects = 0;
  SimWorld w = gen_world(cfg);
  for (const SimSample& s : w.samples) {
    PPScores pp = compute_pp_scores(s.traversals, kDefaultPPRadius);
    EXPECT_TRUE(generate_seed_labels(s.traversals, pp, {}, {}).empty());
  }
}

TEST(SeedLabels, SupportAndNoNearDuplicates) {
  WorldConfig cfg;
  cfg.n_samples = 2;
  SimWorld w = gen_world(cfg);
  SeedHeuristics h;
  for (const SimSample& s : w.samples) {
    PPScores pp = compute_pp_scores(s.traversals, kDefaultPPRadius);
    auto seeds = generate_seed_labels(s.traversals, pp, {}, h);
    GroundMap g(s.traversals.reference, h.ground_cell);
    PointCloud above;
    for (std::size_t i : non_ground_indices(s.traversals.reference, g, h.ground_band))
      above.push_back(s.traversals.reference[i]);
    for (std::size_t a = 0; a < seeds.size(); ++a) {
      EXPECT_GE(points_in_box(above, seeds[a].box).size(), h.min_cluster_points);
      for (std::size_t b = a + 1; b < seeds.size(); ++b) EXPECT_LE(iou_bev(seeds[a].box, seeds[b].box), 0.7);
    }
  }
}

TEST(SeedLabels, MismatchedPPIsDataError) {
  TraversalSet ts;
  ts.reference = {{0, 0, 0, 0}};
  EXPECT_THROW(generate_seed_labels(ts, {}, {}, {}), DataError);
}
