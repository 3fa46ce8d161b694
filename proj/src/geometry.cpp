#include "lst/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace lst {

namespace {

constexpr double kClipEps = 1e-9;

double cross(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

Vec2 segment_line_intersection(const Vec2& p, const Vec2& q, const Vec2& a, const Vec2& b) {
  // Intersection of segment pq with the infinite line ab.
  const double dp = cross(a, b, p);
  const double dq = cross(a, b, q);
  const double t = dp / (dp - dq);
  return {p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)};
}

}  // namespace

Pose Pose::from_yaw(double yaw, const Eigen::Vector3d& t) {
  Pose p;
  p.rotation = Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  p.translation = t;
  return p;
}

Pose Pose::inverse() const {
  Pose inv;
  inv.rotation = rotation.transpose();
  inv.translation = -(inv.rotation * translation);
  return inv;
}

Pose Pose::compose(const Pose& rhs) const {
  Pose out;
  out.rotation = rotation * rhs.rotation;
  out.translation = rotation * rhs.translation + translation;
  return out;
}

bool Pose::is_rigid(double tol) const {
  if (!rotation.allFinite() || !translation.allFinite()) return false;
  const Eigen::Matrix3d gram = rotation.transpose() * rotation;
  if ((gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > tol) return false;
  return std::abs(rotation.determinant() - 1.0) <= tol;
}

double normalize_angle(double a) {
  constexpr double kPi = std::numbers::pi;
  double r = std::fmod(a + kPi, 2.0 * kPi);
  if (r < 0) r += 2.0 * kPi;
  r -= kPi;
  // fmod maps +pi to -pi; the interval is half-open on the left.
  if (r <= -kPi) r += 2.0 * kPi;
  return r;
}

double Box3D::bev_range() const { return std::hypot(cx, cy); }

bool is_valid(const Box3D& b) {
  const bool finite = std::isfinite(b.cx) && std::isfinite(b.cy) && std::isfinite(b.cz) &&
                      std::isfinite(b.length) && std::isfinite(b.width) &&
                      std::isfinite(b.height) && std::isfinite(b.yaw);
  return finite && b.length > 0 && b.width > 0 && b.height > 0;
}

std::array<Vec2, 4> bev_corners(const Box3D& b) {
  const double c = std::cos(b.yaw);
  const double s = std::sin(b.yaw);
  const double hl = 0.5 * b.length;
  const double hw = 0.5 * b.width;
  const std::array<std::array<double, 2>, 4> local{{{hl, hw}, {-hl, hw}, {-hl, -hw}, {hl, -hw}}};
  std::array<Vec2, 4> out;
  for (std::size_t i = 0; i < 4; ++i) {
    const double lx = local[i][0];
    const double ly = local[i][1];
    out[i] = {b.cx + c * lx - s * ly, b.cy + s * lx + c * ly};
  }
  return out;
}

double polygon_area(const Polygon2& poly) {
  if (poly.size() < 3) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0, n = poly.size(); i < n; ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % n];
    acc += p.x * q.y - q.x * p.y;
  }
  return 0.5 * acc;
}

Polygon2 clip_convex(const Polygon2& subject, const Polygon2& clip) {
  Polygon2 output = subject;
  const std::size_t nc = clip.size();
  for (std::size_t e = 0; e < nc && !output.empty(); ++e) {
    const Vec2& a = clip[e];
    const Vec2& b = clip[(e + 1) % nc];
    Polygon2 input;
    input.swap(output);
    const std::size_t ni = input.size();
    for (std::size_t i = 0; i < ni; ++i) {
      const Vec2& cur = input[i];
      const Vec2& prev = input[(i + ni - 1) % ni];
      const double dc = cross(a, b, cur);
      const double dp = cross(a, b, prev);
      const bool cur_in = dc >= -kClipEps;
      const bool prev_in = dp >= -kClipEps;
      if (cur_in) {
        if (!prev_in) output.push_back(segment_line_intersection(prev, cur, a, b));
        output.push_back(cur);
      } else if (prev_in) {
        output.push_back(segment_line_intersection(prev, cur, a, b));
      }
    }
  }
  return output;
}

double bev_intersection_area(const Box3D& a, const Box3D& b) {
  // Quick reject on circumscribed circles.
  const double ra = 0.5 * std::hypot(a.length, a.width);
  const double rb = 0.5 * std::hypot(b.length, b.width);
  if (std::hypot(a.cx - b.cx, a.cy - b.cy) > ra + rb) return 0.0;
  const auto ca = bev_corners(a);
  const auto cb = bev_corners(b);
  const Polygon2 pa(ca.begin(), ca.end());
  const Polygon2 pb(cb.begin(), cb.end());
  return std::max(0.0, polygon_area(clip_convex(pa, pb)));
}

double iou_bev(const Box3D& a, const Box3D& b) {
  const double inter = bev_intersection_area(a, b);
  if (inter <= 0.0) return 0.0;
  const double uni = a.bev_area() + b.bev_area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double iou_3d(const Box3D& a, const Box3D& b) {
  const double dz = std::min(a.top(), b.top()) - std::max(a.bottom(), b.bottom());
  if (dz <= 0.0) return 0.0;
  const double inter = bev_intersection_area(a, b) * dz;
  if (inter <= 0.0) return 0.0;
  const double uni = a.volume() + b.volume() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

Point3 to_box_frame(const Box3D& b, const Point3& p) {
  const double c = std::cos(b.yaw);
  const double s = std::sin(b.yaw);
  const double dx = p.x - b.cx;
  const double dy = p.y - b.cy;
  return {c * dx + s * dy, -s * dx + c * dy, p.z - b.cz, p.intensity};
}

Point3 from_box_frame(const Box3D& b, const Point3& p) {
  const double c = std::cos(b.yaw);
  const double s = std::sin(b.yaw);
  return {b.cx + c * p.x - s * p.y, b.cy + s * p.x + c * p.y, b.cz + p.z, p.intensity};
}

bool contains(const Box3D& b, const Point3& p) {
  const Point3 l = to_box_frame(b, p);
  return std::abs(l.x) <= 0.5 * b.length && std::abs(l.y) <= 0.5 * b.width &&
         std::abs(l.z) <= 0.5 * b.height;
}

std::vector<std::size_t> points_in_box(const PointCloud& cloud, const Box3D& box) {
  std::vector<std::size_t> idx;
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  const double hl = 0.5 * box.length;
  const double hw = 0.5 * box.width;
  const double hh = 0.5 * box.height;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Point3& p = cloud[i];
    const double dz = p.z - box.cz;
    if (std::abs(dz) > hh) continue;
    const double dx = p.x - box.cx;
    const double dy = p.y - box.cy;
    if (std::abs(c * dx + s * dy) <= hl && std::abs(-s * dx + c * dy) <= hw) idx.push_back(i);
  }
  return idx;
}

PointCloud apply_pose(const PointCloud& cloud, const Pose& pose) {
  PointCloud out;
  out.reserve(cloud.size());
  for (const Point3& p : cloud) {
    const Eigen::Vector3d q = pose.apply(Eigen::Vector3d(p.x, p.y, p.z));
    out.push_back({q.x(), q.y(), q.z(), p.intensity});
  }
  return out;
}

Box3D transform_box(const Box3D& b, const Pose& pose) {
  const Eigen::Vector3d c = pose.apply(Eigen::Vector3d(b.cx, b.cy, b.cz));
  const double dyaw = std::atan2(pose.rotation(1, 0), pose.rotation(0, 0));
  Box3D out = b;
  out.cx = c.x();
  out.cy = c.y();
  out.cz = c.z();
  out.yaw = normalize_angle(b.yaw + dyaw);
  return out;
}

}  // namespace lst
