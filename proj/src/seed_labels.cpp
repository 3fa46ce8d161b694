#include "lst/seed_labels.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "lst/error.hpp"
#include "lst/spatial_index.hpp"
#include "lst/stats.hpp"

namespace lst {

void ClusterParams::validate() const {
  if (!(eps > 0.0)) throw ConfigError("cluster.eps must be > 0");
  if (min_pts < 1) throw ConfigError("cluster.min_pts must be >= 1");
  if (!(pp_weight >= 0.0)) throw ConfigError("cluster.pp_weight must be >= 0");
}

void SeedHeuristics::validate() const {
  if (cluster_pp_percentile < 0.0 || cluster_pp_percentile > 1.0)
    throw ConfigError("seed.cluster_pp_percentile must be in [0, 1]");
  if (min_bev_diagonal > max_bev_diagonal)
    throw ConfigError("seed.min_bev_diagonal must not exceed seed.max_bev_diagonal");
  if (!(ground_cell > 0.0)) throw ConfigError("seed.ground_cell must be > 0");
  if (ground_band < 0.0) throw ConfigError("seed.ground_band must be >= 0");
}

std::vector<int> dbscan(std::span<const Eigen::Vector4d> features, const ClusterParams& params) {
  params.validate();
  constexpr int kUnvisited = -2;
  const std::size_t n = features.size();
  std::vector<int> labels(n, kUnvisited);
  if (n == 0) return labels;

  std::vector<Eigen::Vector3d> xyz;
  xyz.reserve(n);
  for (const auto& f : features) xyz.emplace_back(f.x(), f.y(), f.z());
  // The 4D distance is never below the 3D one, so a 3D grid of cell eps
  // yields a superset of the 4D neighborhood.
  const VoxelIndex index(xyz, params.eps);
  const double eps2 = params.eps * params.eps;

  auto region = [&](std::size_t i, std::vector<std::size_t>& out) {
    out.clear();
    index.for_each_candidate(xyz[i], [&](std::size_t j) {
      if ((features[j] - features[i]).squaredNorm() <= eps2) out.push_back(j);
    });
    std::sort(out.begin(), out.end());
  };

  int next_cluster = 0;
  std::vector<std::size_t> neighbors;
  std::vector<std::size_t> expand;
  std::deque<std::size_t> queue;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] != kUnvisited) continue;
    region(i, neighbors);
    if (neighbors.size() < params.min_pts) {
      labels[i] = kNoise;
      continue;
    }
    const int c = next_cluster++;
    labels[i] = c;
    queue.assign(neighbors.begin(), neighbors.end());
    while (!queue.empty()) {
      const std::size_t q = queue.front();
      queue.pop_front();
      if (labels[q] == kNoise) {
        labels[q] = c;  // border point
        continue;
      }
      if (labels[q] != kUnvisited) continue;
      labels[q] = c;
      region(q, expand);
      if (expand.size() >= params.min_pts) {
        for (std::size_t e : expand)
          if (labels[e] == kUnvisited || labels[e] == kNoise) queue.push_back(e);
      }
    }
  }
  return labels;
}

namespace {

double cross(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Andrew's monotone chain; CCW, no repeated or collinear vertices.
Polygon2 convex_hull(Polygon2 pts) {
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const Vec2& a, const Vec2& b) { return a.x == b.x && a.y == b.y; }),
            pts.end());
  if (pts.size() < 3) return pts;
  Polygon2 hull(2 * pts.size());
  std::size_t k = 0;
  for (const Vec2& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    const Vec2& p = pts[i];
    while (k >= lower && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  hull.resize(k - 1);
  return hull;
}

double half_turn_yaw(double yaw) {
  constexpr double kHalfPi = 0.5 * std::numbers::pi;
  yaw = normalize_angle(yaw);
  if (yaw > kHalfPi) yaw -= std::numbers::pi;
  if (yaw <= -kHalfPi) yaw += std::numbers::pi;
  return yaw;
}

Box3D fallback_box(const PointCloud& pts, double ground_z, double top) {
  constexpr double kPad = 0.05;
  double xmin = std::numeric_limits<double>::infinity();
  double ymin = xmin;
  double xmax = -xmin;
  double ymax = -xmin;
  for (const Point3& p : pts) {
    xmin = std::min(xmin, p.x);
    xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  Box3D b;
  b.cx = 0.5 * (xmin + xmax);
  b.cy = 0.5 * (ymin + ymax);
  b.length = (xmax - xmin) + 2 * kPad;
  b.width = (ymax - ymin) + 2 * kPad;
  b.height = std::max(top - ground_z, kPad);
  b.cz = ground_z + 0.5 * b.height;
  b.yaw = 0.0;
  if (b.width > b.length) {
    std::swap(b.length, b.width);
    b.yaw = 0.5 * std::numbers::pi;
  }
  return b;
}

}  // namespace

Box3D fit_box(const PointCloud& cluster_points, double ground_z) {
  if (cluster_points.empty()) throw std::invalid_argument("fit_box on an empty cluster");
  double top = -std::numeric_limits<double>::infinity();
  Polygon2 bev;
  bev.reserve(cluster_points.size());
  for (const Point3& p : cluster_points) {
    top = std::max(top, p.z);
    bev.push_back({p.x, p.y});
  }
  const Polygon2 hull = convex_hull(std::move(bev));
  if (hull.size() < 3 || polygon_area(hull) < 1e-9) return fallback_box(cluster_points, ground_z, top);

  double best_area = std::numeric_limits<double>::infinity();
  Box3D best;
  for (std::size_t e = 0; e < hull.size(); ++e) {
    const Vec2& a = hull[e];
    const Vec2& b = hull[(e + 1) % hull.size()];
    const double len = std::hypot(b.x - a.x, b.y - a.y);
    if (len <= 0.0) continue;
    const Vec2 u{(b.x - a.x) / len, (b.y - a.y) / len};
    const Vec2 v{-u.y, u.x};
    double umin = std::numeric_limits<double>::infinity();
    double umax = -umin;
    double vmin = umin;
    double vmax = -umin;
    for (const Vec2& p : hull) {
      const double pu = p.x * u.x + p.y * u.y;
      const double pv = p.x * v.x + p.y * v.y;
      umin = std::min(umin, pu);
      umax = std::max(umax, pu);
      vmin = std::min(vmin, pv);
      vmax = std::max(vmax, pv);
    }
    const double area = (umax - umin) * (vmax - vmin);
    if (area < best_area - 1e-12) {
      best_area = area;
      const double cu = 0.5 * (umin + umax);
      const double cv = 0.5 * (vmin + vmax);
      best.cx = cu * u.x + cv * v.x;
      best.cy = cu * u.y + cv * v.y;
      const double eu = umax - umin;
      const double ev = vmax - vmin;
      const double edge_yaw = std::atan2(u.y, u.x);
      if (eu >= ev) {
        best.length = eu;
        best.width = ev;
        best.yaw = half_turn_yaw(edge_yaw);
      } else {
        best.length = ev;
        best.width = eu;
        best.yaw = half_turn_yaw(edge_yaw + 0.5 * std::numbers::pi);
      }
    }
  }
  best.height = std::max(top - ground_z, 0.05);
  best.cz = ground_z + 0.5 * best.height;
  return best;
}

GroundMap::GroundMap(const PointCloud& cloud, double cell) : cell_(cell) {
  if (!(cell > 0.0)) throw std::invalid_argument("ground cell must be positive");
  if (cloud.empty()) throw DataError("ground estimation on an empty cloud");
  double xmax = -std::numeric_limits<double>::infinity();
  double ymax = xmax;
  x0_ = std::numeric_limits<double>::infinity();
  y0_ = x0_;
  for (const Point3& p : cloud) {
    x0_ = std::min(x0_, p.x);
    y0_ = std::min(y0_, p.y);
    xmax = std::max(xmax, p.x);
    ymax = std::max(ymax, p.y);
  }
  nx_ = static_cast<std::size_t>(std::floor((xmax - x0_) / cell_)) + 1;
  ny_ = static_cast<std::size_t>(std::floor((ymax - y0_) / cell_)) + 1;

  std::vector<std::vector<double>> zs(nx_ * ny_);
  for (const Point3& p : cloud) {
    const auto ix = std::min(nx_ - 1, static_cast<std::size_t>((p.x - x0_) / cell_));
    const auto iy = std::min(ny_ - 1, static_cast<std::size_t>((p.y - y0_) / cell_));
    zs[iy * nx_ + ix].push_back(p.z);
  }

  heights_.assign(nx_ * ny_, 0.0);
  std::vector<bool> filled(nx_ * ny_, false);
  std::deque<std::size_t> frontier;
  for (std::size_t k = 0; k < zs.size(); ++k) {
    if (zs[k].empty()) continue;
    heights_[k] = nearest_rank(std::move(zs[k]), 0.05);
    filled[k] = true;
    frontier.push_back(k);
  }
  // Multi-source BFS (8-connected) hands each empty cell the height of the
  // nearest populated cell in chessboard distance.
  while (!frontier.empty()) {
    const std::size_t k = frontier.front();
    frontier.pop_front();
    const auto ix = static_cast<std::int64_t>(k % nx_);
    const auto iy = static_cast<std::int64_t>(k / nx_);
    for (std::int64_t dy = -1; dy <= 1; ++dy)
      for (std::int64_t dx = -1; dx <= 1; ++dx) {
        const std::int64_t jx = ix + dx;
        const std::int64_t jy = iy + dy;
        if (jx < 0 || jy < 0 || jx >= static_cast<std::int64_t>(nx_) ||
            jy >= static_cast<std::int64_t>(ny_))
          continue;
        const auto j = static_cast<std::size_t>(jy) * nx_ + static_cast<std::size_t>(jx);
        if (filled[j]) continue;
        filled[j] = true;
        heights_[j] = heights_[k];
        frontier.push_back(j);
      }
  }
}

double GroundMap::height_at(double x, double y) const {
  const double fx = std::floor((x - x0_) / cell_);
  const double fy = std::floor((y - y0_) / cell_);
  const auto ix = static_cast<std::size_t>(std::clamp(fx, 0.0, static_cast<double>(nx_ - 1)));
  const auto iy = static_cast<std::size_t>(std::clamp(fy, 0.0, static_cast<double>(ny_ - 1)));
  return heights_[iy * nx_ + ix];
}

GroundMap estimate_ground_z(const PointCloud& cloud, double grid_cell) {
  return GroundMap(cloud, grid_cell);
}

std::vector<std::size_t> non_ground_indices(const PointCloud& cloud, const GroundMap& ground,
                                            double band) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Point3& p = cloud[i];
    if (p.z - ground.height_at(p.x, p.y) > band) idx.push_back(i);
  }
  return idx;
}

std::vector<LabeledBox> generate_seed_labels(const TraversalSet& ts, const PPScores& pp,
                                             const ClusterParams& cp, const SeedHeuristics& h) {
  cp.validate();
  h.validate();
  const PointCloud& ref = ts.reference;
  if (pp.size() != ref.size())
    throw DataError("sample '" + ts.sample_id + "': PP score count does not match reference points");
  if (ref.empty()) return {};

  const GroundMap ground(ref, h.ground_cell);
  const std::vector<std::size_t> kept = non_ground_indices(ref, ground, h.ground_band);
  PointCloud above;
  above.reserve(kept.size());
  std::vector<Eigen::Vector4d> features;
  features.reserve(kept.size());
  for (std::size_t i : kept) {
    const Point3& p = ref[i];
    above.push_back(p);
    features.emplace_back(p.x, p.y, p.z, cp.pp_weight * pp[i]);
  }
  const std::vector<int> labels = dbscan(features, cp);
  const int n_clusters = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(std::max(n_clusters, 0)));
  for (std::size_t k = 0; k < labels.size(); ++k)
    if (labels[k] >= 0) members[static_cast<std::size_t>(labels[k])].push_back(k);

  struct Candidate {
    Box3D box;
    std::size_t points;
    std::size_t order;
  };
  std::vector<Candidate> candidates;
  for (std::size_t c = 0; c < members.size(); ++c) {
    const auto& m = members[c];
    if (m.size() < h.min_cluster_points) continue;
    std::vector<double> cluster_pp;
    cluster_pp.reserve(m.size());
    PointCloud pts;
    pts.reserve(m.size());
    double mx = 0.0;
    double my = 0.0;
    double zmin = std::numeric_limits<double>::infinity();
    for (std::size_t k : m) {
      cluster_pp.push_back(pp[kept[k]]);
      pts.push_back(above[k]);
      mx += above[k].x;
      my += above[k].y;
      zmin = std::min(zmin, above[k].z);
    }
    if (nearest_rank(std::move(cluster_pp), h.cluster_pp_percentile) > h.cluster_pp_max) continue;
    mx /= static_cast<double>(m.size());
    my /= static_cast<double>(m.size());
    const double gz = ground.height_at(mx, my);
    if (zmin - gz > h.max_bottom_above_ground) continue;
    const Box3D box = fit_box(pts, gz);
    const double diag = std::hypot(box.length, box.width);
    if (diag < h.min_bev_diagonal || diag > h.max_bev_diagonal) continue;
    const std::size_t inside = points_in_box(above, box).size();
    if (inside < h.min_cluster_points) continue;
    candidates.push_back({box, inside, c});
  }

  std::vector<std::size_t> by_support(candidates.size());
  std::iota(by_support.begin(), by_support.end(), std::size_t{0});
  std::stable_sort(by_support.begin(), by_support.end(), [&](std::size_t a, std::size_t b) {
    return candidates[a].points > candidates[b].points;
  });
  std::vector<bool> keep(candidates.size(), false);
  for (std::size_t a : by_support) {
    bool duplicate = false;
    for (std::size_t b = 0; b < candidates.size() && !duplicate; ++b)
      if (keep[b] && iou_bev(candidates[a].box, candidates[b].box) > h.duplicate_iou) duplicate = true;
    keep[a] = !duplicate;
  }

  std::vector<LabeledBox> out;
  for (std::size_t a = 0; a < candidates.size(); ++a)
    if (keep[a]) out.push_back({candidates[a].box, 1.0});
  return out;
}

}  // namespace lst
