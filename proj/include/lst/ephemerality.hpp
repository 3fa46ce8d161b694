#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lst/geometry.hpp"

namespace lst {

/// A reference scan plus N past traversals of the same place, all expressed
/// in one common frame (the reference sensor frame).
struct TraversalSet {
  std::string sample_id;
  PointCloud reference;
  std::vector<PointCloud> traversals;
};

/// One persistence score per reference point, each in [0, 1].
/// High means static background; low means ephemeral.
using PPScores = std::vector<double>;

inline constexpr double kDefaultPPRadius = 0.3;

/// For each reference point, the number of traversal points within
/// Euclidean distance <= radius.
std::vector<std::uint32_t> neighbor_counts(const PointCloud& reference, const PointCloud& traversal,
                                           double radius);

/// Normalized entropy of one point's per-traversal neighbor counts.
/// Zero total mass scores 0; a single traversal scores 1 when it has any
/// neighbor and 0 otherwise.
double persistence_from_counts(std::span<const std::uint32_t> counts);

/// Persistence score of every reference point against the traversals.
/// The reference itself never contributes counts. Output does not depend on
/// `workers`.
PPScores compute_pp_scores(const TraversalSet& ts, double radius, unsigned workers = 1);

}  // namespace lst
