#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lst/filtering.hpp"
#include "lst/geometry.hpp"

namespace lst {

enum class Metric { kBev, k3d };

std::string_view to_string(Metric m);
Metric parse_metric(std::string_view name);

/// Half-open range [lo, hi) on BEV center distance from the sensor origin.
struct RangeBin {
  double lo = 0.0;
  double hi = 80.0;

  bool contains(double d) const { return d >= lo && d < hi; }
  friend bool operator==(const RangeBin&, const RangeBin&) = default;
};

struct EvalConfig {
  std::vector<double> iou_thresholds{0.25, 0.5};
  std::vector<Metric> metrics{Metric::kBev, Metric::k3d};
  std::vector<RangeBin> range_bins{{0, 30}, {30, 50}, {50, 80}, {0, 80}};

  void validate() const;
};

struct EvalRow {
  Metric metric = Metric::kBev;
  double iou = 0.5;
  RangeBin bin;
  double ap = 0.0;
  std::size_t num_gt = 0;
  std::size_t num_det = 0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  std::size_t num_samples = 0;
  double mean_predicted_objects = 0.0;

  /// Throws std::out_of_range if no such row exists.
  const EvalRow& at(Metric m, double iou, RangeBin bin) const;
};

double box_iou(const Box3D& a, const Box3D& b, Metric m);

/// TP flag per detection, in input order. Detections are visited by score
/// descending (ties by index) and each takes the unmatched ground truth with
/// the highest IoU >= threshold (ties by lowest ground-truth index).
std::vector<bool> match_detections(std::span<const LabeledBox> dets, std::span<const LabeledBox> gts,
                                   double iou_threshold, Metric metric);

/// 40-point interpolated AP. Detections are ranked by score descending with
/// ties kept in input order. With no ground truth, AP is 1 when there are no
/// detections and 0 otherwise.
double average_precision(const std::vector<bool>& tp, std::span<const double> scores, std::size_t num_gt);

/// Throws DataError when the two sets cover different sample ids.
EvalReport evaluate(const LabelSet& dets, const LabelSet& gts, const EvalConfig& cfg);

std::string format_report_csv(const EvalReport& report);
void write_report_csv(const EvalReport& report, const std::filesystem::path& path);

/// Unbinned precision/recall at one IoU threshold, pooled over samples.
struct MatchStats {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t num_gt = 0;

  double precision() const;
  double recall() const;
  double f1() const;
};

MatchStats match_stats(const LabelSet& dets, const LabelSet& gts, double iou_threshold, Metric metric);

}  // namespace lst
