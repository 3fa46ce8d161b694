#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "lst/geometry.hpp"

namespace lst {

/// Uniform voxel grid over 3D positions. With cell size equal to the query
/// radius, the 27 cells around a query cover every neighbor within radius.
class VoxelIndex {
 public:
  VoxelIndex(std::span<const Eigen::Vector3d> positions, double cell);
  VoxelIndex(const PointCloud& cloud, double cell);

  double cell() const { return cell_; }
  std::size_t size() const { return order_.size(); }

  /// Calls fn(index) for every indexed point in the 27 cells around q.
  template <typename Fn>
  void for_each_candidate(const Eigen::Vector3d& q, Fn&& fn) const {
    const std::int64_t ix = cell_coord(q.x());
    const std::int64_t iy = cell_coord(q.y());
    const std::int64_t iz = cell_coord(q.z());
    for (std::int64_t dx = -1; dx <= 1; ++dx)
      for (std::int64_t dy = -1; dy <= 1; ++dy)
        for (std::int64_t dz = -1; dz <= 1; ++dz) {
          const auto [first, last] = cell_range(pack(ix + dx, iy + dy, iz + dz));
          for (std::size_t k = first; k < last; ++k) fn(order_[k]);
        }
  }

  /// Indices of points within Euclidean distance <= radius of q, ascending.
  /// radius must not exceed the cell size.
  std::vector<std::size_t> radius_search(const Eigen::Vector3d& q, double radius) const;
  std::size_t radius_count(const Eigen::Vector3d& q, double radius) const;

 private:
  struct Cell {
    std::uint64_t key;
    std::size_t first;
    std::size_t last;
  };

  std::int64_t cell_coord(double v) const {
    return static_cast<std::int64_t>(std::floor(v / cell_));
  }
  static std::uint64_t pack(std::int64_t x, std::int64_t y, std::int64_t z);
  std::pair<std::size_t, std::size_t> cell_range(std::uint64_t key) const;
  void build(std::span<const Eigen::Vector3d> positions);

  double cell_;
  std::vector<Eigen::Vector3d> positions_;
  std::vector<std::size_t> order_;
  std::vector<Cell> cells_;
};

}  // namespace lst
