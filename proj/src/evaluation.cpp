#include "lst/evaluation.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "lst/error.hpp"

namespace lst {

namespace {

constexpr int kRecallPoints = 40;

}  // namespace

std::string_view to_string(Metric m) { return m == Metric::kBev ? "bev" : "3d"; }

Metric parse_metric(std::string_view name) {
  if (name == "bev") return Metric::kBev;
  if (name == "3d") return Metric::k3d;
  throw ConfigError("unknown metric '" + std::string(name) + "'");
}

void EvalConfig::validate() const {
  for (double t : iou_thresholds)
    if (!(t > 0.0 && t <= 1.0)) throw ConfigError("eval IoU thresholds must be in (0, 1]");
  for (const auto& b : range_bins)
    if (!(b.lo >= 0.0 && b.hi > b.lo)) throw ConfigError("eval range bins must satisfy 0 <= lo < hi");
}

const EvalRow& EvalReport::at(Metric m, double iou, RangeBin bin) const {
  for (const auto& r : rows)
    if (r.metric == m && std::abs(r.iou - iou) < 1e-12 && r.bin == bin) return r;
  throw std::out_of_range("no evaluation row for requested metric/iou/bin");
}

double box_iou(const Box3D& a, const Box3D& b, Metric m) {
  return m == Metric::kBev ? iou_bev(a, b) : iou_3d(a, b);
}

std::vector<bool> match_detections(std::span<const LabeledBox> dets, std::span<const LabeledBox> gts,
                                   double iou_threshold, Metric metric) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].score_or(1.0) > dets[b].score_or(1.0);
  });
  std::vector<bool> tp(dets.size(), false);
  std::vector<bool> taken(gts.size(), false);
  for (std::size_t d : order) {
    double best = -1.0;
    std::size_t best_gt = gts.size();
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (taken[g]) continue;
      const double iou = box_iou(dets[d].box, gts[g].box, metric);
      if (iou >= iou_threshold && iou > best) {
        best = iou;
        best_gt = g;
      }
    }
    if (best_gt < gts.size()) {
      taken[best_gt] = true;
      tp[d] = true;
    }
  }
  return tp;
}

double average_precision(const std::vector<bool>& tp, std::span<const double> scores, std::size_t num_gt) {
  if (tp.size() != scores.size()) throw std::invalid_argument("tp flags and scores differ in length");
  if (num_gt == 0) return tp.empty() ? 1.0 : 0.0;
  std::vector<std::size_t> order(tp.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  // best[k] = max precision over operating points with recall >= k/40.
  std::vector<double> best(kRecallPoints + 1, 0.0);
  std::size_t n_tp = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (tp[order[rank]]) ++n_tp;
    const double precision = static_cast<double>(n_tp) / static_cast<double>(rank + 1);
    // recall >= k/40  <=>  40 * tp >= k * num_gt
    const auto reach = std::min<std::size_t>(kRecallPoints, (kRecallPoints * n_tp) / num_gt);
    for (std::size_t k = 1; k <= reach; ++k) best[k] = std::max(best[k], precision);
  }
  double sum = 0.0;
  for (int k = 1; k <= kRecallPoints; ++k) sum += best[static_cast<std::size_t>(k)];
  return sum / kRecallPoints;
}

EvalReport evaluate(const LabelSet& dets, const LabelSet& gts, const EvalConfig& cfg) {
  cfg.validate();
  std::vector<std::string> orphans;
  for (const auto& [id, _] : dets.samples)
    if (!gts.samples.contains(id)) orphans.push_back(id + " (detections only)");
  for (const auto& [id, _] : gts.samples)
    if (!dets.samples.contains(id)) orphans.push_back(id + " (ground truth only)");
  if (!orphans.empty()) {
    std::string msg = "sample mismatch between detections and ground truth:";
    for (const auto& o : orphans) msg += " " + o;
    throw DataError(msg);
  }

  EvalReport report;
  report.num_samples = gts.samples.size();
  report.mean_predicted_objects =
      report.num_samples == 0 ? 0.0 : static_cast<double>(dets.size()) / static_cast<double>(report.num_samples);

  for (Metric metric : cfg.metrics)
    for (double iou : cfg.iou_thresholds)
      for (const RangeBin& bin : cfg.range_bins) {
        std::vector<bool> flags;
        std::vector<double> scores;
        std::size_t num_gt = 0;
        for (const auto& [id, gt_all] : gts.samples) {
          std::vector<LabeledBox> g;
          std::vector<LabeledBox> d;
          for (const auto& b : gt_all)
            if (bin.contains(b.box.bev_range())) g.push_back(b);
          for (const auto& b : dets.samples.at(id))
            if (bin.contains(b.box.bev_range())) d.push_back(b);
          num_gt += g.size();
          const auto tp = match_detections(d, g, iou, metric);
          for (std::size_t i = 0; i < d.size(); ++i) {
            flags.push_back(tp[i]);
            scores.push_back(d[i].score_or(1.0));
          }
        }
        report.rows.push_back({metric, iou, bin, average_precision(flags, scores, num_gt), num_gt,
                               scores.size()});
      }
  return report;
}

std::string format_report_csv(const EvalReport& report) {
  std::string out = "metric,iou,bin_lo,bin_hi,ap,num_gt,num_det\n";
  for (const auto& r : report.rows)
    out += fmt::format("{},{:.2f},{:g},{:g},{:.6f},{},{}\n", to_string(r.metric), r.iou, r.bin.lo,
                       r.bin.hi, r.ap, r.num_gt, r.num_det);
  return out;
}

void write_report_csv(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write report '" + path.string() + "'");
  f << format_report_csv(report);
}

double MatchStats::precision() const {
  const std::size_t n = tp + fp;
  return n == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(n);
}

double MatchStats::recall() const {
  return num_gt == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(num_gt);
}

double MatchStats::f1() const {
  const double p = precision();
  const double r = recall();
  return p + r <= 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

MatchStats match_stats(const LabelSet& dets, const LabelSet& gts, double iou_threshold, Metric metric) {
  MatchStats s;
  for (const auto& [id, g] : gts.samples) s.num_gt += g.size();
  for (const auto& [id, d] : dets.samples) {
    const auto it = gts.samples.find(id);
    const std::vector<LabeledBox> none;
    const auto& g = it == gts.samples.end() ? none : it->second;
    const auto tp = match_detections(d, g, iou_threshold, metric);
    for (bool t : tp) (t ? s.tp : s.fp)++;
  }
  return s;
}

}  // namespace lst
