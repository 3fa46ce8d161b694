#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "lst/ephemerality.hpp"
#include "lst/geometry.hpp"

namespace lst {

struct ClusterParams {
  double eps = 1.0;         // meters, in the 4D feature space
  std::size_t min_pts = 10;  // neighborhood size (self included) to be a core point
  double pp_weight = 5.0;    // meters per PP unit for the 4th feature

  void validate() const;
};

/// Cluster acceptance rules applied after DBSCAN.
struct SeedHeuristics {
  std::size_t min_cluster_points = 10;
  double max_bottom_above_ground = 1.0;
  double min_bev_diagonal = 0.5;
  double max_bev_diagonal = 15.0;
  double cluster_pp_percentile = 0.5;
  double cluster_pp_max = 0.3;
  double ground_cell = 1.0;   // BEV cell size for ground estimation
  double ground_band = 0.2;   // points this close above local ground are removed
  double duplicate_iou = 0.7;  // near-duplicate suppression threshold

  void validate() const;
};

inline constexpr int kNoise = -1;

/// Density-based clustering over (x, y, z, weighted PP) features.
/// Returns a cluster id per feature, kNoise for noise. Cluster ids are
/// assigned 0, 1, ... in order of discovery while scanning inputs by index;
/// a border point joins the first cluster that reaches it.
std::vector<int> dbscan(std::span<const Eigen::Vector4d> features, const ClusterParams& params);

/// Minimum-area BEV rectangle of the convex hull, extruded from ground_z up
/// to the highest point. Degenerate (collinear) input falls back to an
/// axis-aligned box padded by 0.05 m on every side.
/// Yaw follows the length axis (length >= width) and lies in (-pi/2, pi/2].
Box3D fit_box(const PointCloud& cluster_points, double ground_z);

/// Per-cell ground height: 5th percentile of point z within each BEV cell.
/// Empty cells take the value of the nearest populated cell.
class GroundMap {
 public:
  GroundMap(const PointCloud& cloud, double cell);

  double height_at(double x, double y) const;
  double cell() const { return cell_; }
  std::size_t cols() const { return nx_; }
  std::size_t rows() const { return ny_; }
  double cell_height(std::size_t ix, std::size_t iy) const { return heights_[iy * nx_ + ix]; }
  double cell_center_x(std::size_t ix) const { return x0_ + (static_cast<double>(ix) + 0.5) * cell_; }
  double cell_center_y(std::size_t iy) const { return y0_ + (static_cast<double>(iy) + 0.5) * cell_; }

 private:
  double cell_;
  double x0_ = 0.0;
  double y0_ = 0.0;
  std::size_t nx_ = 0;
  std::size_t ny_ = 0;
  std::vector<double> heights_;
};

GroundMap estimate_ground_z(const PointCloud& cloud, double grid_cell);

/// Indices of reference points more than `band` above local ground.
std::vector<std::size_t> non_ground_indices(const PointCloud& cloud, const GroundMap& ground,
                                            double band);

/// Seed boxes from PP-scored clusters of the reference scan. Every seed
/// carries score 1.0.
std::vector<LabeledBox> generate_seed_labels(const TraversalSet& ts, const PPScores& pp,
                                             const ClusterParams& cp, const SeedHeuristics& h);

}  // namespace lst
