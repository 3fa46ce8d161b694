#include <gtest/gtest.h>

#include <filesystem>
#include <numbers>
#include <random>

#include "lst/error.hpp"
#include "lst/evaluation.hpp"
#include "lst/kitti_io.hpp"
#include "oracles.hpp"

using namespace lst;

namespace {

const std::filesystem::path kFixture = std::filesystem::path(LST_FIXTURE_DIR) / "eval";

LabeledBox at(double x, double y, std::optional<double> score = std::nullopt) {
  return {{x, y, 0.0, 4.0, 2.0, 1.5, 0.0}, score};
}

LabelSet rotated(const LabelSet& ls, double yaw) {
  LabelSet out = ls;
  Pose p = Pose::from_yaw(yaw, Eigen::Vector3d::Zero());
  for (auto& [id, boxes] : out.samples)
    for (auto& b : boxes) b.box = transform_box(b.box, p);
  return out;
}

}  // namespace

TEST(MatchDetections, ExactAllTpAndNoGtAllFp) {
  std::vector<LabeledBox> g{at(10, 0), at(20, 5)};
  std::vector<LabeledBox> d{at(10, 0, 0.5), at(20, 5, 0.6)};
  EXPECT_EQ(match_detections(d, g, 0.5, Metric::kBev), (std::vector<bool>{true, true}));
  EXPECT_EQ(match_detections(d, {}, 0.5, Metric::kBev), (std::vector<bool>{false, false}));
}

TEST(MatchDetections, HigherScoreWinsSharedGt) {
  std::vector<LabeledBox> g{at(10, 0)};
  std::vector<LabeledBox> d{at(10.2, 0, 0.4), at(10.5, 0, 0.9)};
  EXPECT_EQ(match_detections(d, g, 0.25, Metric::kBev), (std::vector<bool>{false, true}));
}

TEST(MatchDetections, TakesHighestIouUnmatchedGt) {
  std::vector<LabeledBox> g{at(10, 0), at(11, 0)};
  std::vector<LabeledBox> d{at(11.1, 0, 0.9)};
  EXPECT_EQ(match_detections(d, g, 0.25, Metric::kBev), std::vector<bool>{true});
  // The single detection should have consumed GT 1, leaving GT 0 for the next.
  std::vector<LabeledBox> d2{at(11.1, 0, 0.9), at(10.4, 0, 0.8)};
  EXPECT_EQ(match_detections(d2, g, 0.5, Metric::kBev), (std::vector<bool>{true, true}));
}

TEST(AveragePrecision, HandComputedCurves) {
  const std::vector<double> scores{0.9, 0.8};
  EXPECT_DOUBLE_EQ(average_precision({true, false}, scores, 2), 0.5);
  EXPECT_DOUBLE_EQ(average_precision({true, true}, scores, 2), 1.0);
  EXPECT_DOUBLE_EQ(average_precision({}, {}, 3), 0.0);
  EXPECT_DOUBLE_EQ(average_precision({}, {}, 0), 1.0);
  const std::vector<double> one{0.5};
  EXPECT_DOUBLE_EQ(average_precision({false}, one, 0), 0.0);
  // FP ranked first: precision 0.5 at full recall.
  const std::vector<double> fp_first{0.2, 0.9};
  EXPECT_DOUBLE_EQ(average_precision({true, false}, fp_first, 1), 0.5);
}

TEST(AveragePrecision, MatchesExhaustiveOracle) {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> n(0, 30), gt(0, 20);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    const int nd = n(rng);
    std::vector<bool> tp;
    std::vector<double> scores;
    std::size_t n_tp = 0;
    for (int i = 0; i < nd; ++i) {
      tp.push_back(u(rng) < 0.6);
      n_tp += tp.back();
      scores.push_back(std::round(u(rng) * 10) / 10);
    }
    const std::size_t num_gt = n_tp + static_cast<std::size_t>(gt(rng));
    std::vector<std::size_t> order(tp.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
    std::vector<std::pair<double, bool>> ranked;
    for (auto i : order) ranked.push_back({scores[i], tp[i]});
    EXPECT_NEAR(average_precision(tp, scores, num_gt), oracle::exhaustive_ap(ranked, num_gt), 1e-12);
  }
}

TEST(AveragePrecision, MonotoneUnderExtremeAdditions) {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<bool> tp;
    std::vector<double> scores;
    for (int i = 0; i < 15; ++i) {
      tp.push_back(u(rng) < 0.5);
      scores.push_back(u(rng));
    }
    const std::size_t num_gt = 20;
    const double base = average_precision(tp, scores, num_gt);
    auto tp_hi = tp;
    auto s_hi = scores;
    tp_hi.push_back(true);
    s_hi.push_back(1.0);
    EXPECT_GE(average_precision(tp_hi, s_hi, num_gt), base - 1e-12);
    auto tp_lo = tp;
    auto s_lo = scores;
    tp_lo.push_back(false);
    s_lo.push_back(0.0);
    EXPECT_LE(average_precision(tp_lo, s_lo, num_gt), base + 1e-12);
  }
}

TEST(Evaluate, BinningConsistency) {
  LabelSet gt, det;
  gt.samples["000000"] = {at(10, 0), at(0, 10)};
  det.samples["000000"] = {at(10, 0, 0.9), at(0, 10, 0.8)};
  EvalReport r = evaluate(det, gt, {});
  for (Metric m : {Metric::kBev, Metric::k3d})
    for (double iou : {0.25, 0.5}) {
      EXPECT_DOUBLE_EQ(r.at(m, iou, {30, 50}).ap, 1.0);
      EXPECT_EQ(r.at(m, iou, {30, 50}).num_gt, 0u);
      EXPECT_DOUBLE_EQ(r.at(m, iou, {50, 80}).ap, 1.0);
      EXPECT_DOUBLE_EQ(r.at(m, iou, {0, 30}).ap, r.at(m, iou, {0, 80}).ap);
    }
  EXPECT_DOUBLE_EQ(r.mean_predicted_objects, 2.0);
}

TEST(Evaluate, HalfOpenBins) {
  LabelSet gt, det;
  gt.samples["000000"] = {at(30, 0)};
  det.samples["000000"] = {at(30, 0, 0.9)};
  EvalReport r = evaluate(det, gt, {});
  EXPECT_EQ(r.at(Metric::kBev, 0.5, {0, 30}).num_gt, 0u);
  EXPECT_EQ(r.at(Metric::kBev, 0.5, {30, 50}).num_gt, 1u);
}

TEST(Evaluate, ShiftedDetectionsScoreZero) {
  LabelSet gt, det;
  gt.samples["000000"] = {at(10, 0), at(40, 0)};
  det.samples["000000"] = {at(10, 100, 0.9), at(40, 100, 0.8)};
  EvalConfig cfg;
  cfg.range_bins = {{0, 30}, {30, 50}, {0, 200}};
  EvalReport r = evaluate(det, gt, cfg);
  for (const EvalRow& row : r.rows) EXPECT_DOUBLE_EQ(row.ap, 0.0);
}

TEST(Evaluate, GtAgainstItselfIsPerfect) {
  std::mt19937_64 rng(23);
  LabelSet gt, det;
  for (int s = 0; s < 3; ++s) {
    const std::string id = "00000" + std::to_string(s);
    for (int i = 0; i < 8; ++i) {
      Box3D b = oracle::random_box(rng, 60.0);
      gt.samples[id].push_back({b, std::nullopt});
      det.samples[id].push_back({b, 1.0});
    }
  }
  EvalReport r = evaluate(det, gt, {});
  for (const EvalRow& row : r.rows)
    if (row.num_gt > 0) EXPECT_DOUBLE_EQ(row.ap, 1.0);
}

TEST(Evaluate, EmptyDetectionsScoreZero) {
  LabelSet gt, det;
  gt.samples["000000"] = {at(10, 0)};
  det.samples["000000"] = {};
  EvalReport r = evaluate(det, gt, {});
  EXPECT_DOUBLE_EQ(r.at(Metric::kBev, 0.5, {0, 80}).ap, 0.0);
}

TEST(Evaluate, RotationInvariant) {
  std::mt19937_64 rng(29);
  LabelSet gt, det;
  for (int s = 0; s < 3; ++s) {
    const std::string id = "00000" + std::to_string(s);
    for (int i = 0; i < 10; ++i) {
      Box3D b = oracle::random_box(rng, 60.0);
      gt.samples[id].push_back({b, std::nullopt});
      Box3D d = b;
      d.cx += 0.5 * (i % 4);
      d.cz += 0.2 * (i % 3);
      det.samples[id].push_back({d, 0.05 * (i + 1) + 0.01 * s});
    }
  }
  EvalReport a = evaluate(det, gt, {});
  for (double yaw : {0.3, 1.7, -2.9}) {
    EvalReport b = evaluate(rotated(det, yaw), rotated(gt, yaw), {});
    for (std::size_t i = 0; i < a.rows.size(); ++i) EXPECT_NEAR(a.rows[i].ap, b.rows[i].ap, 1e-9);
  }
}

TEST(Evaluate, OrphansListed) {
  LabelSet gt, det;
  gt.samples["000000"] = {};
  det.samples["000001"] = {};
  try {
    evaluate(det, gt, {});
    FAIL();
  } catch (const DataError& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("000000"), std::string::npos);
    EXPECT_NE(msg.find("000001"), std::string::npos);
  }
}

TEST(Evaluate, GoldenFixtureByteIdentical) {
  EvalReport r = evaluate(read_label_dir(kFixture / "dets"), read_label_dir(kFixture / "gt"), {});
  EXPECT_EQ(format_report_csv(r), read_text_file(kFixture / "expected_report.csv"));
  EXPECT_NEAR(r.mean_predicted_objects, 8.0 / 3.0, 1e-12);
}

TEST(MatchStats, PrecisionRecallF1) {
  LabelSet gt, det;
  gt.samples["000000"] = {at(10, 0), at(20, 0)};
  det.samples["000000"] = {at(10, 0, 0.9), at(50, 0, 0.8), at(60, 0, 0.7)};
  MatchStats s = match_stats(det, gt, 0.25, Metric::kBev);
  EXPECT_EQ(s.tp, 1u);
  EXPECT_EQ(s.fp, 2u);
  EXPECT_EQ(s.num_gt, 2u);
  EXPECT_DOUBLE_EQ(s.precision(), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(s.recall(), 0.5);
  EXPECT_DOUBLE_EQ(s.f1(), 0.4);
}
