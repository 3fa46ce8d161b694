#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lst/ephemerality.hpp"
#include "lst/spatial_index.hpp"
#include "oracles.hpp"

using namespace lst;

namespace {

PointCloud random_cloud(std::mt19937_64& rng, std::size_t n, double extent) {
  std::uniform_real_distribution<double> u(-extent, extent);
  PointCloud c(n);
  for (auto& p : c) p = {u(rng), u(rng), u(rng) * 0.2, 0.0};
  return c;
}

}  // namespace

TEST(VoxelIndex, RadiusSearchMatchesBruteForce) {
  std::mt19937_64 rng(2);
  PointCloud cloud = random_cloud(rng, 800, 3.0);
  VoxelIndex index(cloud, 0.5);
  for (std::size_t q = 0; q < 100; ++q) {
    Eigen::Vector3d c(cloud[q].x, cloud[q].y, cloud[q].z);
    std::vector<std::size_t> expected;
    for (std::size_t i = 0; i < cloud.size(); ++i)
      if ((Eigen::Vector3d(cloud[i].x, cloud[i].y, cloud[i].z) - c).norm() <= 0.5) expected.push_back(i);
    EXPECT_EQ(index.radius_search(c, 0.5), expected);
    EXPECT_EQ(index.radius_count(c, 0.5), expected.size());
  }
}

TEST(VoxelIndex, HandlesNegativeAndLargeCoordinates) {
  PointCloud cloud{{-1000.05, 999.95, -3.0, 0}, {-1000.0, 1000.0, -3.0, 0}, {500, 500, 500, 0}};
  VoxelIndex index(cloud, 0.3);
  EXPECT_EQ(index.radius_count({-1000.0, 1000.0, -3.0}, 0.3), 2u);
}

TEST(NeighborCounts, SelfNeighborhoodAndEmptyRegion) {
  std::mt19937_64 rng(4);
  PointCloud cloud = random_cloud(rng, 300, 5.0);
  for (std::uint32_t c : neighbor_counts(cloud, cloud, 0.3)) EXPECT_GE(c, 1u);
  EXPECT_EQ(neighbor_counts({{100, 100, 0, 0}}, cloud, 0.3), std::vector<std::uint32_t>{0});
}

TEST(NeighborCounts, MatchesBruteForceOracle) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 5; ++trial) {
    PointCloud ref = random_cloud(rng, 500, 3.0);
    PointCloud trav = random_cloud(rng, 500, 3.0);
    EXPECT_EQ(neighbor_counts(ref, trav, 0.3), oracle::brute_neighbor_counts(ref, trav, 0.3));
  }
}

TEST(PersistenceFromCounts, HandComputedEntropies) {
  const std::vector<std::uint32_t> uniform{3, 3, 3, 3}, single{0, 5, 0, 0}, half{1, 1, 0, 0}, none{0, 0, 0};
  EXPECT_NEAR(persistence_from_counts(uniform), 1.0, 1e-12);
  EXPECT_NEAR(persistence_from_counts(single), 0.0, 1e-12);
  EXPECT_NEAR(persistence_from_counts(half), std::log(2.0) / std::log(4.0), 1e-12);
  EXPECT_NEAR(persistence_from_counts(half), 0.5, 1e-12);
  EXPECT_EQ(persistence_from_counts(none), 0.0);
  const std::vector<std::uint32_t> one_hit{4}, one_miss{0};
  EXPECT_EQ(persistence_from_counts(one_hit), 1.0);
  EXPECT_EQ(persistence_from_counts(one_miss), 0.0);
}

TEST(PersistenceFromCounts, BoundedAndScaleInvariant) {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<std::uint32_t> c(0, 6), n(2, 8), k(1, 5);
  for (int i = 0; i < 1000; ++i) {
    std::vector<std::uint32_t> counts(n(rng));
    for (auto& v : counts) v = c(rng);
    const double pp = persistence_from_counts(counts);
    EXPECT_GE(pp, 0.0);
    EXPECT_LE(pp, 1.0 + 1e-12);
    const std::uint32_t s = k(rng);
    std::vector<std::uint32_t> scaled = counts;
    for (auto& v : scaled) v *= s;
    EXPECT_NEAR(pp, persistence_from_counts(scaled), 1e-12);
  }
}

TEST(PersistenceFromCounts, EmptyTraversalNeverRaisesScore) {
  std::mt19937_64 rng(10);
  std::uniform_int_distribution<std::uint32_t> c(0, 6), n(2, 6);
  for (int i = 0; i < 1000; ++i) {
    std::vector<std::uint32_t> counts(n(rng));
    for (auto& v : counts) v = c(rng);
    std::vector<std::uint32_t> extended = counts;
    extended.push_back(0);
    EXPECT_LE(persistence_from_counts(extended), persistence_from_counts(counts) + 1e-12);
  }
}

TEST(ComputePPScores, StaticHighEphemeralZero) {
  TraversalSet ts;
  ts.sample_id = "000000";
  PointCloud wall;
  for (int i = 0; i < 20; ++i) wall.push_back({0.1 * i, 0.0, 0.0, 0.0});
  ts.reference = wall;
  ts.reference.push_back({50.0, 50.0, 0.0, 0.0});  // present only in the reference
  ts.traversals = {wall, wall, wall};
  PPScores pp = compute_pp_scores(ts, 0.3);
  ASSERT_EQ(pp.size(), ts.reference.size());
  for (std::size_t i = 0; i < wall.size(); ++i) EXPECT_NEAR(pp[i], 1.0, 1e-12);
  EXPECT_EQ(pp.back(), 0.0);
}

TEST(ComputePPScores, ParallelEqualsSerial) {
  std::mt19937_64 rng(12);
  TraversalSet ts;
  ts.sample_id = "000001";
  ts.reference = random_cloud(rng, 2000, 5.0);
  for (int k = 0; k < 4; ++k) ts.traversals.push_back(random_cloud(rng, 2000, 5.0));
  EXPECT_EQ(compute_pp_scores(ts, 0.3, 1), compute_pp_scores(ts, 0.3, 4));
}

TEST(ComputePPScores, RejectsBadInput) {
  TraversalSet ts;
  ts.reference = {{0, 0, 0, 0}};
  EXPECT_THROW(compute_pp_scores(ts, 0.3), std::invalid_argument);
  ts.traversals = {{{0, 0, 0, 0}}};
  EXPECT_THROW(compute_pp_scores(ts, 0.0), std::invalid_argument);
}
