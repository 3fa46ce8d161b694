#include "lst/spatial_index.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace lst {

namespace {

std::vector<Eigen::Vector3d> positions_of(const PointCloud& cloud) {
  std::vector<Eigen::Vector3d> out;
  out.reserve(cloud.size());
  for (const Point3& p : cloud) out.emplace_back(p.x, p.y, p.z);
  return out;
}

}  // namespace

VoxelIndex::VoxelIndex(std::span<const Eigen::Vector3d> positions, double cell) : cell_(cell) {
  build(positions);
}

VoxelIndex::VoxelIndex(const PointCloud& cloud, double cell) : cell_(cell) {
  const auto pos = positions_of(cloud);
  build(pos);
}

std::uint64_t VoxelIndex::pack(std::int64_t x, std::int64_t y, std::int64_t z) {
  // 21 bits per axis, offset so negative coordinates stay ordered.
  constexpr std::int64_t kOffset = 1 << 20;
  constexpr std::uint64_t kMask = (1u << 21) - 1;
  const auto ux = static_cast<std::uint64_t>(x + kOffset) & kMask;
  const auto uy = static_cast<std::uint64_t>(y + kOffset) & kMask;
  const auto uz = static_cast<std::uint64_t>(z + kOffset) & kMask;
  return (ux << 42) | (uy << 21) | uz;
}

void VoxelIndex::build(std::span<const Eigen::Vector3d> positions) {
  if (!(cell_ > 0.0)) throw std::invalid_argument("voxel cell size must be positive");
  positions_.assign(positions.begin(), positions.end());
  std::vector<std::uint64_t> keys(positions_.size());
  for (std::size_t i = 0; i < positions_.size(); ++i) {
    const auto& p = positions_[i];
    keys[i] = pack(cell_coord(p.x()), cell_coord(p.y()), cell_coord(p.z()));
  }
  order_.resize(positions_.size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  std::stable_sort(order_.begin(), order_.end(),
                   [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
  cells_.clear();
  for (std::size_t k = 0; k < order_.size();) {
    const std::uint64_t key = keys[order_[k]];
    std::size_t end = k;
    while (end < order_.size() && keys[order_[end]] == key) ++end;
    cells_.push_back({key, k, end});
    k = end;
  }
}

std::pair<std::size_t, std::size_t> VoxelIndex::cell_range(std::uint64_t key) const {
  const auto it = std::lower_bound(cells_.begin(), cells_.end(), key,
                                   [](const Cell& c, std::uint64_t k) { return c.key < k; });
  if (it == cells_.end() || it->key != key) return {0, 0};
  return {it->first, it->last};
}

std::vector<std::size_t> VoxelIndex::radius_search(const Eigen::Vector3d& q, double radius) const {
  std::vector<std::size_t> out;
  const double r2 = radius * radius;
  for_each_candidate(q, [&](std::size_t i) {
    if ((positions_[i] - q).squaredNorm() <= r2) out.push_back(i);
  });
  std::sort(out.begin(), out.end());
  return out;
}

std::size_t VoxelIndex::radius_count(const Eigen::Vector3d& q, double radius) const {
  std::size_t n = 0;
  const double r2 = radius * radius;
  for_each_candidate(q, [&](std::size_t i) {
    if ((positions_[i] - q).squaredNorm() <= r2) ++n;
  });
  return n;
}

}  // namespace lst
