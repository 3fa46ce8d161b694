#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <optional>
#include <vector>

namespace lst {

/// A single LiDAR return. Frame is x-forward, y-left, z-up.
struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double intensity = 0.0;

  friend bool operator==(const Point3&, const Point3&) = default;
};

using PointCloud = std::vector<Point3>;

/// Rigid transform p -> R p + t.
struct Pose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static Pose identity() { return {}; }
  static Pose from_yaw(double yaw, const Eigen::Vector3d& t);

  Pose inverse() const;
  /// (*this) after `rhs`: x -> this(rhs(x)).
  Pose compose(const Pose& rhs) const;
  Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return rotation * p + translation; }

  /// Orthonormal with determinant +1, both within `tol`.
  bool is_rigid(double tol = 1e-6) const;
};

/// Maps an angle into (-pi, pi].
double normalize_angle(double a);

/// Upright cuboid. (cx, cy, cz) is the geometric center; yaw is CCW about +z
/// and measured from +x to the length axis.
struct Box3D {
  double cx = 0.0;
  double cy = 0.0;
  double cz = 0.0;
  double length = 1.0;
  double width = 1.0;
  double height = 1.0;
  double yaw = 0.0;

  double bottom() const { return cz - 0.5 * height; }
  double top() const { return cz + 0.5 * height; }
  double bev_area() const { return length * width; }
  double volume() const { return length * width * height; }
  double bev_range() const;

  friend bool operator==(const Box3D&, const Box3D&) = default;
};

/// Positive dims, finite fields.
bool is_valid(const Box3D& b);

/// Box plus an optional confidence. The class is always "Dynamic".
struct LabeledBox {
  Box3D box;
  std::optional<double> score;

  double score_or(double fallback) const { return score.value_or(fallback); }
  friend bool operator==(const LabeledBox&, const LabeledBox&) = default;
};

inline constexpr const char* kDynamicClass = "Dynamic";

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

using Polygon2 = std::vector<Vec2>;

/// BEV rectangle corners in counter-clockwise order.
std::array<Vec2, 4> bev_corners(const Box3D& b);

/// Signed shoelace area (positive for CCW).
double polygon_area(const Polygon2& poly);

/// Sutherland-Hodgman clip of convex `subject` by convex CCW `clip`.
Polygon2 clip_convex(const Polygon2& subject, const Polygon2& clip);

double bev_intersection_area(const Box3D& a, const Box3D& b);

/// Rotated BEV intersection-over-union.
double iou_bev(const Box3D& a, const Box3D& b);

/// BEV intersection times vertical overlap, over union of volumes.
double iou_3d(const Box3D& a, const Box3D& b);

/// True when p lies inside the closed cuboid.
bool contains(const Box3D& b, const Point3& p);

/// Indices of points inside the closed cuboid, ascending.
std::vector<std::size_t> points_in_box(const PointCloud& cloud, const Box3D& box);

PointCloud apply_pose(const PointCloud& cloud, const Pose& pose);

/// Box moved by a transform whose rotation is a yaw about +z.
/// Non-yaw rotation components are ignored.
Box3D transform_box(const Box3D& b, const Pose& pose);

/// World point -> box-local frame (centered at the box, x along length).
Point3 to_box_frame(const Box3D& b, const Point3& p);
Point3 from_box_frame(const Box3D& b, const Point3& p);

}  // namespace lst
