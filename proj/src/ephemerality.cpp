#include "lst/ephemerality.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "lst/parallel.hpp"
#include "lst/spatial_index.hpp"

namespace lst {

std::vector<std::uint32_t> neighbor_counts(const PointCloud& reference, const PointCloud& traversal,
                                           double radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("neighbor radius must be positive");
  std::vector<std::uint32_t> counts(reference.size(), 0);
  if (traversal.empty()) return counts;
  const VoxelIndex index(traversal, radius);
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const Point3& p = reference[i];
    counts[i] = static_cast<std::uint32_t>(index.radius_count({p.x, p.y, p.z}, radius));
  }
  return counts;
}

double persistence_from_counts(std::span<const std::uint32_t> counts) {
  const std::size_t n = counts.size();
  double total = 0.0;
  for (std::uint32_t c : counts) total += c;
  if (n == 0 || total == 0.0) return 0.0;
  if (n == 1) return 1.0;
  double h = 0.0;
  for (std::uint32_t c : counts) {
    if (c == 0) continue;
    const double q = c / total;
    h -= q * std::log(q);
  }
  return std::clamp(h / std::log(static_cast<double>(n)), 0.0, 1.0);
}

PPScores compute_pp_scores(const TraversalSet& ts, double radius, unsigned workers) {
  if (!(radius > 0.0)) throw std::invalid_argument("pp radius must be positive");
  const std::size_t n_trav = ts.traversals.size();
  const std::size_t n_ref = ts.reference.size();
  if (n_trav == 0) throw std::invalid_argument("traversal set '" + ts.sample_id + "' has no traversals");

  // counts[t * n_ref + i]
  std::vector<std::uint32_t> counts(n_trav * n_ref, 0);
  parallel_for(n_trav, workers, [&](std::size_t t) {
    const auto c = neighbor_counts(ts.reference, ts.traversals[t], radius);
    std::copy(c.begin(), c.end(), counts.begin() + static_cast<std::ptrdiff_t>(t * n_ref));
  });

  PPScores pp(n_ref, 0.0);
  std::vector<std::uint32_t> per_point(n_trav);
  for (std::size_t i = 0; i < n_ref; ++i) {
    for (std::size_t t = 0; t < n_trav; ++t) per_point[t] = counts[t * n_ref + i];
    pp[i] = persistence_from_counts(per_point);
  }
  return pp;
}

}  // namespace lst
