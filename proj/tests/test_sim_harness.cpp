#include <gtest/gtest.h>

#include <algorithm>

#include "lst/error.hpp"
#include "lst/seed_labels.hpp"
#include "lst/sim_harness.hpp"
#include "temp_dir.hpp"

using namespace lst;

namespace {

WorldConfig small_world() {
  WorldConfig cfg;
  cfg.n_samples = 2;
  return cfg;
}

}  // namespace

TEST(GenWorld, DeterministicForFixedSeed) {
  SimWorld a = gen_world(small_world());
  SimWorld b = gen_world(small_world());
  ASSERT_EQ(a.samples.size(), b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    EXPECT_EQ(a.samples[i].traversals.reference, b.samples[i].traversals.reference);
    EXPECT_EQ(a.samples[i].traversals.traversals, b.samples[i].traversals.traversals);
    EXPECT_EQ(a.samples[i].gt, b.samples[i].gt);
  }
  WorldConfig other = small_world();
  other.rng_seed = 43;
  EXPECT_NE(gen_world(other).samples[0].traversals.reference, a.samples[0].traversals.reference);
}

TEST(GenWorld, EmptyWorldTraversalsEqualUpToNoise) {
  WorldConfig cfg = small_world();
  cfg.n_static_objects = 0;
  cfg.n_mobile_objects = 0;
  SimWorld w = gen_world(cfg);
  for (const SimSample& s : w.samples) {
    EXPECT_TRUE(s.gt.empty());
    const auto& ref = s.traversals.reference;
    for (const PointCloud& t : s.traversals.traversals) {
      ASSERT_EQ(t.size(), ref.size());
      double worst = 0.0;
      for (std::size_t i = 0; i < t.size(); ++i)
        worst = std::max({worst, std::abs(t[i].x - ref[i].x), std::abs(t[i].y - ref[i].y), std::abs(t[i].z - ref[i].z)});
      EXPECT_LT(worst, 12.0 * cfg.noise_sigma);
    }
  }
}

TEST(GenWorld, GroundTruthFlagsAndSupport) {
  WorldConfig cfg;
  SimWorld w = gen_world(cfg);
  SeedHeuristics h;
  for (const SimSample& s : w.samples) {
    ASSERT_EQ(s.gt.size(), cfg.n_static_objects + cfg.n_mobile_objects);
    ASSERT_EQ(s.mobile.size(), s.gt.size());
    std::size_t mobile = 0;
    for (std::size_t o = 0; o < s.gt.size(); ++o) {
      EXPECT_FALSE(s.gt[o].score.has_value());
      if (!s.mobile[o]) continue;
      ++mobile;
      EXPECT_GE(points_in_box(s.traversals.reference, s.gt[o].box).size(), h.min_cluster_points);
    }
    EXPECT_EQ(mobile, cfg.n_mobile_objects);
    EXPECT_EQ(s.poses.size(), cfg.n_traversals + 1);
    EXPECT_TRUE(s.poses[0].rotation.isIdentity());
  }
  EXPECT_EQ(w.mobile_ground_truth().size(), cfg.n_samples * cfg.n_mobile_objects);
  EXPECT_EQ(w.ground_truth().size(), cfg.n_samples * (cfg.n_mobile_objects + cfg.n_static_objects));
}

TEST(GenWorld, StaticObjectsPersistAcrossTraversals) {
  SimWorld w = gen_world(small_world());
  for (const SimSample& s : w.samples)
    for (std::size_t o = 0; o < s.gt.size(); ++o) {
      if (s.mobile[o]) continue;
      for (const PointCloud& t : s.traversals.traversals)
        EXPECT_GE(points_in_box(t, s.gt[o].box).size(), 10u);
    }
}

TEST(WriteWorld, SensorFramesReloadIntoReferenceFrame) {
  TempDir dir;
  WorldConfig cfg = small_world();
  cfg.n_samples = 1;
  SimWorld w = gen_world(cfg);
  SampleLayout layout(dir.path());
  write_world(layout, w);
  TraversalSet ts = layout.load_traversal_set(sample_id_for(0));
  const SimSample& s = w.samples[0];
  ASSERT_EQ(ts.traversals.size(), s.traversals.traversals.size());
  for (std::size_t k = 0; k < ts.traversals.size(); ++k)
    for (std::size_t i = 0; i < ts.traversals[k].size(); i += 97) {
      EXPECT_NEAR(ts.traversals[k][i].x, s.traversals.traversals[k][i].x, 1e-4);
      EXPECT_NEAR(ts.traversals[k][i].y, s.traversals.traversals[k][i].y, 1e-4);
    }
  EXPECT_EQ(read_label_dir(layout.labels_dir("gt")).size(), s.gt.size());
}

TEST(SimTrain, MemoryCounting) {
  EXPECT_TRUE(sim_train({}, {}).memory.empty());
  LabelSet ls;
  ls.samples["000000"] = {{{0, 0, 0, 4, 2, 1.5, 0}, 0.9}, {{5, 0, 0, 4, 2, 1.5, 0}, 0.7}};
  ls.samples["000001"] = {{{0, 0, 0, 3, 2, 1.5, 0}, 0.6}};
  std::vector<LabeledBox> inserted{{{9, 9, 0, 4, 2, 1.5, 0}, 0.8}};
  SimDetectorModel m = sim_train(ls, inserted);
  EXPECT_EQ(m.memory.size(), 4u);
  EXPECT_EQ(m, sim_train(ls, inserted));
}

TEST(SimDetector, ProbabilityMonotoneInSimilarCount) {
  SimDetectorParams p;
  double prev = detection_probability(0, p);
  for (std::size_t n = 1; n < 1000; ++n) {
    const double cur = detection_probability(n, p);
    EXPECT_GE(cur, prev);
    EXPECT_GE(cur, p.p_min);
    EXPECT_LE(cur, p.p_max);
    prev = cur;
  }

  SimDetectorModel m;
  Box3D car{0, 0, 0.8, 4.2, 1.8, 1.6, 0};
  double last = detection_probability(count_similar(m, car, p.size_tolerance), p);
  for (int i = 0; i < 50; ++i) {
    m.memory.push_back({0, 0, 0, 4.3, 1.85, 1.55, 0});
    const double now = detection_probability(count_similar(m, car, p.size_tolerance), p);
    EXPECT_GE(now, last);
    last = now;
  }
  EXPECT_EQ(count_similar(m, car, p.size_tolerance), 50u);
  EXPECT_EQ(count_similar(m, {0, 0, 0, 10, 3, 3, 0}, p.size_tolerance), 0u);
}

TEST(SimDetector, PerfectDetectorReturnsGt) {
  SimDetectorParams p;
  p.p0 = 1.0;
  p.p_max = 1.0;
  p.eta = 0.0;
  p.fp_per_scene = 0.0;
  p.jitter_sigma = 0.0;
  std::vector<LabeledBox> gt{{{10, 0, 0.8, 4, 2, 1.6, 0.3}, std::nullopt}, {{-5, 7, 0.8, 4.5, 1.9, 1.5, -1.0}, std::nullopt}};
  auto dets = sim_infer({}, gt, p, "000000", 1);
  ASSERT_EQ(dets.size(), gt.size());
  for (std::size_t i = 0; i < gt.size(); ++i) {
    EXPECT_EQ(dets[i].box, gt[i].box);
    ASSERT_TRUE(dets[i].score.has_value());
    EXPECT_GE(*dets[i].score, 0.0);
    EXPECT_LE(*dets[i].score, 1.0);
  }
}

TEST(SimDetector, BlindDetectorOnlyFalsePositives) {
  SimDetectorParams p;
  p.p0 = 0.0;
  p.p_min = 0.0;
  p.eta = 0.0;
  p.fp_per_scene = 6.0;
  std::vector<LabeledBox> gt{{{10, 0, 0.8, 4, 2, 1.6, 0.3}, std::nullopt}};
  auto dets = sim_infer({}, gt, p, "000000", 1);
  for (const auto& d : dets) EXPECT_LT(iou_bev(d.box, gt[0].box), 0.5);
}

TEST(SimDetector, DeterministicAndRoundDependent) {
  SimDetectorParams p;
  std::vector<LabeledBox> gt{{{10, 0, 0.8, 4, 2, 1.6, 0.3}, std::nullopt}, {{20, 3, 0.8, 4, 2, 1.6, 0}, std::nullopt}};
  EXPECT_EQ(sim_infer({}, gt, p, "000001", 1), sim_infer({}, gt, p, "000001", 1));
  EXPECT_NE(sim_infer({}, gt, p, "000001", 1), sim_infer({}, gt, p, "000001", 2));
}

TEST(SimDetector, MoreMemoryNeverLosesDetections) {
  SimDetectorParams p;
  std::vector<LabeledBox> gt;
  for (int i = 0; i < 30; ++i) gt.push_back({{10.0 * i - 150.0, 0, 0.8, 4.2, 1.8, 1.6, 0}, std::nullopt});
  SimDetectorModel small, big;
  for (int i = 0; i < 100; ++i) big.memory.push_back({0, 0, 0, 4.2, 1.8, 1.6, 0});
  auto a = sim_infer(small, gt, p, "000002", 1);
  auto b = sim_infer(big, gt, p, "000002", 1);
  // Per-object and false-positive streams do not depend on memory, so every
  // detection made with less memory is made again with more.
  for (const auto& d : a) EXPECT_NE(std::find(b.begin(), b.end(), d), b.end());
  EXPECT_GT(b.size(), a.size());
}

TEST(SimDetector, TpMedianAboveFpMedian) {
  SimDetectorParams p;
  EXPECT_GT(beta_median(p.tp_alpha, p.tp_beta), beta_median(p.fp_alpha, p.fp_beta));
  EXPECT_NEAR(beta_median(2.0, 2.0), 0.5, 1e-12);
}

TEST(SimConfigs, Validation) {
  WorldConfig w;
  w.noise_sigma = -1.0;
  EXPECT_THROW(w.validate(), ConfigError);
  SimDetectorParams p;
  p.p_min = 0.9;
  p.p_max = 0.1;
  EXPECT_THROW(p.validate(), ConfigError);
  SimDetectorParams q;
  q.tp_alpha = 0.0;
  EXPECT_THROW(q.validate(), ConfigError);
}
