#include "lst/gt_database.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lst/error.hpp"

namespace lst {

void AugmentConfig::validate() const {
  if (!(flip_probability >= 0.0 && flip_probability <= 1.0))
    throw ConfigError("augment.flip_probability must be in [0, 1]");
  if (!(rotation_range >= 0.0)) throw ConfigError("augment.rotation_range must be >= 0");
  if (!(scale_min > 0.0 && scale_max >= scale_min))
    throw ConfigError("augment.scale range must be positive and ordered");
  if (!(perception_range > 0.0)) throw ConfigError("augment.perception_range must be > 0");
}

GtDatabase build_database(const SamplePoints& samples, const LabelSet& labels) {
  GtDatabase db;
  db.round = labels.round;
  for (const auto& [id, boxes] : labels.samples) {
    if (boxes.empty()) continue;
    const auto it = samples.find(id);
    if (it == samples.end()) throw DataError("no point cloud for labeled sample '" + id + "'");
    const PointCloud& cloud = it->second;
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      const Box3D& box = boxes[i].box;
      const auto idx = points_in_box(cloud, box);
      if (idx.size() < kMinEntryPoints) {
        ++db.skipped;
        continue;
      }
      DbEntry e;
      e.entry_id = id + "_" + std::to_string(i);
      e.source_sample_id = id;
      e.box = box;
      e.score = boxes[i].score_or(1.0);
      e.points.reserve(idx.size());
      for (std::size_t k : idx) e.points.push_back(to_box_frame(box, cloud[k]));
      db.entries.push_back(std::move(e));
    }
  }
  return db;
}

InsertResult sample_insert(const Scene& scene, const GtDatabase& db, const AugmentConfig& cfg, Rng& rng) {
  InsertResult out{scene, {}};
  if (out.scene.labels.size() >= cfg.target_labels_per_sample || db.entries.empty()) return out;

  std::vector<std::size_t> order(db.entries.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);

  for (std::size_t k : order) {
    if (out.scene.labels.size() >= cfg.target_labels_per_sample) break;
    const DbEntry& e = db.entries[k];
    if (e.box.bev_range() > cfg.perception_range) continue;
    const bool collides = std::any_of(out.scene.labels.begin(), out.scene.labels.end(),
                                      [&](const LabeledBox& b) { return iou_bev(b.box, e.box) > 0.0; });
    if (collides) continue;

    PointCloud& pts = out.scene.points;
    std::erase_if(pts, [&](const Point3& p) { return contains(e.box, p); });
    for (const Point3& local : e.points) pts.push_back(from_box_frame(e.box, local));
    out.scene.labels.push_back({e.box, e.score});
    out.inserted_ids.push_back(e.entry_id);
  }
  return out;
}

GlobalTransform draw_global_transform(const AugmentConfig& cfg, Rng& rng) {
  GlobalTransform tf;
  tf.flip = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < cfg.flip_probability;
  tf.rotation = uniform(rng, -cfg.rotation_range, cfg.rotation_range);
  tf.scale = uniform(rng, cfg.scale_min, cfg.scale_max);
  return tf;
}

Scene apply_global_transform(const Scene& scene, const GlobalTransform& tf) {
  const double c = std::cos(tf.rotation);
  const double s = std::sin(tf.rotation);
  auto map_xy = [&](double x, double y) {
    if (tf.flip) y = -y;
    return std::pair{tf.scale * (c * x - s * y), tf.scale * (s * x + c * y)};
  };

  Scene out;
  out.points.reserve(scene.points.size());
  for (const Point3& p : scene.points) {
    const auto [x, y] = map_xy(p.x, p.y);
    out.points.push_back({x, y, tf.scale * p.z, p.intensity});
  }
  out.labels.reserve(scene.labels.size());
  for (const LabeledBox& lb : scene.labels) {
    LabeledBox b = lb;
    const auto [x, y] = map_xy(lb.box.cx, lb.box.cy);
    b.box.cx = x;
    b.box.cy = y;
    b.box.cz = tf.scale * lb.box.cz;
    b.box.length *= tf.scale;
    b.box.width *= tf.scale;
    b.box.height *= tf.scale;
    const double yaw = tf.flip ? -lb.box.yaw : lb.box.yaw;
    b.box.yaw = normalize_angle(yaw + tf.rotation);
    out.labels.push_back(b);
  }
  return out;
}

Scene global_augment(const Scene& scene, const AugmentConfig& cfg, Rng& rng) {
  return apply_global_transform(scene, draw_global_transform(cfg, rng));
}

}  // namespace lst
