#pragma once

#include <cstddef>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lst/ephemerality.hpp"
#include "lst/geometry.hpp"

namespace lst {

/// The three pseudo-label filtering schemes for one self-training round.
enum class FilterAlgorithm {
  kFilterPseudoLabels,      // confidence filter on the pseudo-labels; DB = pseudo-labels
  kFilterAndKeepStatic,     // as above, but confident PP-removed boxes come back first
  kFilterDataAugmentation,  // pseudo-labels untouched; only the DB source is confidence-filtered
};

std::string_view to_string(FilterAlgorithm a);
/// Throws ConfigError for unknown names.
FilterAlgorithm parse_algorithm(std::string_view name);

/// Boxes grouped by sample id. Ordered by id so iteration is deterministic.
struct LabelSet {
  int round = 0;
  std::map<std::string, std::vector<LabeledBox>> samples;

  std::size_t size() const;
  std::vector<double> scores() const;
  /// Throws DataError if any box lacks a score or has one outside [0, 1].
  void require_scores() const;
  friend bool operator==(const LabelSet&, const LabelSet&) = default;
};

struct FilterConfig {
  double rho = 0.2;
  double alpha = 0.2;
  double gamma = 0.5;
  double high_threshold = 0.8;
  FilterAlgorithm algorithm = FilterAlgorithm::kFilterDataAugmentation;

  void validate() const;
};

/// Reference points of one sample with their persistence scores.
struct ScoredCloud {
  PointCloud points;
  PPScores pp;
};
using SampleClouds = std::map<std::string, ScoredCloud>;

/// Sentinel threshold that filters nothing.
inline constexpr double kNoThreshold = -std::numeric_limits<double>::infinity();

/// k-th smallest score with k = floor(rho * n); kNoThreshold when k = 0.
/// Throws std::invalid_argument on an empty set or rho outside [0, 1).
double percentile_threshold(std::span<const double> scores, double rho);

/// Keeps exactly the boxes whose score is strictly greater than t.
LabelSet filter_by_confidence(const LabelSet& labels, double t);

/// True when the box would be dropped by the PP rule: no interior points, or
/// the nearest-rank alpha percentile of interior PP values exceeds gamma.
bool pp_rejects(const Box3D& box, const ScoredCloud& cloud, double alpha, double gamma);

struct PPSplit {
  LabelSet kept;
  LabelSet removed;
};

/// Splits boxes by the PP rule. Throws DataError naming any sample without
/// a scored cloud.
PPSplit filter_by_pp(const LabelSet& labels, const SampleClouds& clouds, double alpha, double gamma);

/// PP-kept boxes plus PP-removed boxes scoring above high_threshold, in the
/// original per-sample order.
LabelSet filter_by_pp_keep_static(const LabelSet& labels, const SampleClouds& clouds, double alpha,
                                  double gamma, double high_threshold);

struct RoundArtifacts {
  LabelSet pseudo_labels;        // B_j
  LabelSet augmentation_labels;  // source of the augmentation database
  double threshold_used = kNoThreshold;
  std::size_t detections = 0;
  std::size_t post_pp = 0;          // boxes surviving the PP stage
  std::size_t static_retained = 0;  // PP-removed boxes brought back by the static rule
};

/// One filtering round. The confidence threshold is pooled over all
/// detections before any PP filtering.
RoundArtifacts round_step(const LabelSet& detections, const SampleClouds& clouds,
                          const FilterConfig& cfg);

}  // namespace lst
