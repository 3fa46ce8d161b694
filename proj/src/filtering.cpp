#include "lst/filtering.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "lst/error.hpp"
#include "lst/stats.hpp"

namespace lst {

std::string_view to_string(FilterAlgorithm a) {
  switch (a) {
    case FilterAlgorithm::kFilterPseudoLabels:
      return "filter_pseudo_labels";
    case FilterAlgorithm::kFilterAndKeepStatic:
      return "filter_and_keep_static";
    case FilterAlgorithm::kFilterDataAugmentation:
      return "filter_data_augmentation";
  }
  return "unknown";
}

FilterAlgorithm parse_algorithm(std::string_view name) {
  for (auto a : {FilterAlgorithm::kFilterPseudoLabels, FilterAlgorithm::kFilterAndKeepStatic,
                 FilterAlgorithm::kFilterDataAugmentation})
    if (to_string(a) == name) return a;
  throw ConfigError("unknown filter algorithm '" + std::string(name) + "'");
}

std::size_t LabelSet::size() const {
  std::size_t n = 0;
  for (const auto& [id, boxes] : samples) n += boxes.size();
  return n;
}

std::vector<double> LabelSet::scores() const {
  std::vector<double> out;
  out.reserve(size());
  for (const auto& [id, boxes] : samples)
    for (const auto& b : boxes) out.push_back(b.score_or(1.0));
  return out;
}

void LabelSet::require_scores() const {
  for (const auto& [id, boxes] : samples)
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      const auto& s = boxes[i].score;
      if (!s) throw DataError("sample '" + id + "' box " + std::to_string(i) + " has no score");
      if (!(*s >= 0.0 && *s <= 1.0))
        throw DataError("sample '" + id + "' box " + std::to_string(i) + " score out of [0,1]");
    }
}

void FilterConfig::validate() const {
  if (!(rho >= 0.0 && rho < 1.0)) throw ConfigError("filter.rho must be in [0, 1)");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("filter.alpha must be in [0, 1]");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("filter.gamma must be in [0, 1]");
  if (!(high_threshold >= 0.0 && high_threshold <= 1.0))
    throw ConfigError("filter.high_threshold must be in [0, 1]");
}

double percentile_threshold(std::span<const double> scores, double rho) {
  if (scores.empty()) throw std::invalid_argument("percentile_threshold of an empty score set");
  if (!(rho >= 0.0 && rho < 1.0)) throw std::invalid_argument("rho must be in [0, 1)");
  const auto k = static_cast<std::size_t>(std::floor(rho * static_cast<double>(scores.size()) + 1e-9));
  if (k == 0) return kNoThreshold;
  std::vector<double> sorted(scores.begin(), scores.end());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k - 1), sorted.end());
  return sorted[k - 1];
}

LabelSet filter_by_confidence(const LabelSet& labels, double t) {
  LabelSet out;
  out.round = labels.round;
  for (const auto& [id, boxes] : labels.samples) {
    auto& dst = out.samples[id];
    for (const auto& b : boxes)
      if (b.score_or(1.0) > t) dst.push_back(b);
  }
  return out;
}

bool pp_rejects(const Box3D& box, const ScoredCloud& cloud, double alpha, double gamma) {
  const auto idx = points_in_box(cloud.points, box);
  if (idx.empty()) return true;
  std::vector<double> values;
  values.reserve(idx.size());
  for (std::size_t i : idx) values.push_back(cloud.pp[i]);
  return nearest_rank(std::move(values), alpha) > gamma;
}

namespace {

const ScoredCloud& cloud_for(const SampleClouds& clouds, const std::string& id) {
  const auto it = clouds.find(id);
  if (it == clouds.end()) throw DataError("no PP scores available for sample '" + id + "'");
  if (it->second.pp.size() != it->second.points.size())
    throw DataError("sample '" + id + "': PP score count does not match point count");
  return it->second;
}

}  // namespace

PPSplit filter_by_pp(const LabelSet& labels, const SampleClouds& clouds, double alpha, double gamma) {
  PPSplit out;
  out.kept.round = labels.round;
  out.removed.round = labels.round;
  for (const auto& [id, boxes] : labels.samples) {
    const ScoredCloud& cloud = cloud_for(clouds, id);
    auto& kept = out.kept.samples[id];
    auto& removed = out.removed.samples[id];
    for (const auto& b : boxes) (pp_rejects(b.box, cloud, alpha, gamma) ? removed : kept).push_back(b);
  }
  return out;
}

LabelSet filter_by_pp_keep_static(const LabelSet& labels, const SampleClouds& clouds, double alpha,
                                  double gamma, double high_threshold) {
  LabelSet out;
  out.round = labels.round;
  for (const auto& [id, boxes] : labels.samples) {
    const ScoredCloud& cloud = cloud_for(clouds, id);
    auto& dst = out.samples[id];
    for (const auto& b : boxes)
      if (!pp_rejects(b.box, cloud, alpha, gamma) || b.score_or(1.0) > high_threshold)
        dst.push_back(b);
  }
  return out;
}

RoundArtifacts round_step(const LabelSet& detections, const SampleClouds& clouds,
                          const FilterConfig& cfg) {
  cfg.validate();
  detections.require_scores();
  RoundArtifacts out;
  out.detections = detections.size();
  const std::vector<double> scores = detections.scores();
  out.threshold_used = scores.empty() ? kNoThreshold : percentile_threshold(scores, cfg.rho);

  switch (cfg.algorithm) {
    case FilterAlgorithm::kFilterPseudoLabels: {
      const PPSplit split = filter_by_pp(detections, clouds, cfg.alpha, cfg.gamma);
      out.post_pp = split.kept.size();
      out.pseudo_labels = filter_by_confidence(split.kept, out.threshold_used);
      out.augmentation_labels = out.pseudo_labels;
      break;
    }
    case FilterAlgorithm::kFilterAndKeepStatic: {
      const LabelSet retained =
          filter_by_pp_keep_static(detections, clouds, cfg.alpha, cfg.gamma, cfg.high_threshold);
      const std::size_t strictly_kept = filter_by_pp(detections, clouds, cfg.alpha, cfg.gamma).kept.size();
      out.post_pp = retained.size();
      out.static_retained = retained.size() - strictly_kept;
      out.pseudo_labels = filter_by_confidence(retained, out.threshold_used);
      out.augmentation_labels = out.pseudo_labels;
      break;
    }
    case FilterAlgorithm::kFilterDataAugmentation: {
      PPSplit split = filter_by_pp(detections, clouds, cfg.alpha, cfg.gamma);
      out.post_pp = split.kept.size();
      out.pseudo_labels = std::move(split.kept);
      out.augmentation_labels = filter_by_confidence(out.pseudo_labels, out.threshold_used);
      break;
    }
  }
  out.pseudo_labels.round = detections.round;
  out.augmentation_labels.round = detections.round;
  return out;
}

}  // namespace lst
