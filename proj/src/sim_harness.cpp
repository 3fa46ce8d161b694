#include "lst/sim_harness.hpp"

#include <boost/math/distributions/beta.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "lst/error.hpp"
#include "lst/rng.hpp"

namespace lst {

namespace {

constexpr int kMaxPlacementTries = 200;

Box3D inflate(const Box3D& b, double margin) {
  Box3D out = b;
  out.length += 2 * margin;
  out.width += 2 * margin;
  return out;
}

bool overlaps_any(const Box3D& b, const std::vector<Box3D>& placed, double margin) {
  const Box3D big = inflate(b, margin);
  return std::any_of(placed.begin(), placed.end(),
                     [&](const Box3D& o) { return bev_intersection_area(big, o) > 0.0; });
}

Box3D random_object(Rng& rng, const WorldConfig& cfg) {
  Box3D b;
  b.length = uniform(rng, cfg.length_min, cfg.length_max);
  b.width = uniform(rng, cfg.width_min, cfg.width_max);
  b.height = uniform(rng, cfg.height_min, cfg.height_max);
  const double margin = 2.0 + b.length;
  b.cx = uniform(rng, -0.5 * cfg.area_x + margin, 0.5 * cfg.area_x - margin);
  b.cy = uniform(rng, -0.5 * cfg.area_y + margin, 0.5 * cfg.area_y - margin);
  b.cz = 0.5 * b.height;
  b.yaw = uniform(rng, -std::numbers::pi, std::numbers::pi);
  return b;
}

// Rejection-samples an object with 1 m clearance from everything already
// placed, away from the sensor.
std::optional<Box3D> place(Rng& rng, const WorldConfig& cfg, const std::vector<Box3D>& placed) {
  for (int i = 0; i < kMaxPlacementTries; ++i) {
    const Box3D b = random_object(rng, cfg);
    if (b.bev_range() < 4.0) continue;
    if (!overlaps_any(b, placed, 1.0)) return b;
  }
  return std::nullopt;
}

void add_noise(Point3& p, Rng& rng, double sigma) {
  if (sigma <= 0.0) return;
  std::normal_distribution<double> n(0.0, sigma);
  p.x += n(rng);
  p.y += n(rng);
  p.z += n(rng);
}

void sample_ground(PointCloud& out, Rng& rng, const WorldConfig& cfg) {
  const auto n = static_cast<std::size_t>(cfg.ground_density * cfg.area_x * cfg.area_y);
  for (std::size_t i = 0; i < n; ++i)
    out.push_back({uniform(rng, -0.5 * cfg.area_x, 0.5 * cfg.area_x),
                   uniform(rng, -0.5 * cfg.area_y, 0.5 * cfg.area_y), 0.0, uniform(rng, 0.0, 1.0)});
}

// Points on the long vertical mid-plane of a wall footprint.
void sample_wall(PointCloud& out, Rng& rng, const Box3D& wall, double density, double sigma) {
  const auto n = static_cast<std::size_t>(density * wall.length * wall.height);
  for (std::size_t i = 0; i < n; ++i) {
    Point3 local{uniform(rng, -0.5 * wall.length, 0.5 * wall.length), 0.0,
                 uniform(rng, -0.5 * wall.height, 0.5 * wall.height), uniform(rng, 0.0, 1.0)};
    Point3 p = from_box_frame(wall, local);
    add_noise(p, rng, sigma);
    out.push_back(p);
  }
}

// Points on the four sides and the roof of a box.
void sample_object(PointCloud& out, Rng& rng, const Box3D& b, double density, double sigma) {
  const double hl = 0.5 * b.length;
  const double hw = 0.5 * b.width;
  const double hh = 0.5 * b.height;
  const std::array<double, 5> areas{b.length * b.height, b.length * b.height, b.width * b.height,
                                    b.width * b.height, b.length * b.width};
  for (std::size_t face = 0; face < areas.size(); ++face) {
    const auto n = static_cast<std::size_t>(density * areas[face]);
    for (std::size_t i = 0; i < n; ++i) {
      const double u = uniform(rng, -1.0, 1.0);
      const double v = uniform(rng, -1.0, 1.0);
      Point3 local{0, 0, 0, uniform(rng, 0.0, 1.0)};
      switch (face) {
        case 0: local.x = u * hl; local.y = hw; local.z = v * hh; break;
        case 1: local.x = u * hl; local.y = -hw; local.z = v * hh; break;
        case 2: local.x = hl; local.y = u * hw; local.z = v * hh; break;
        case 3: local.x = -hl; local.y = u * hw; local.z = v * hh; break;
        default: local.x = u * hl; local.y = v * hw; local.z = hh; break;
      }
      Point3 p = from_box_frame(b, local);
      add_noise(p, rng, sigma);
      out.push_back(p);
    }
  }
}

SimSample gen_sample(const WorldConfig& cfg, const std::string& id) {
  Rng layout_rng = make_rng(cfg.rng_seed, "world/layout", id);
  SimSample s;
  s.traversals.sample_id = id;

  std::vector<Box3D> placed;
  for (std::size_t i = 0; i < cfg.n_structures; ++i) {
    for (int t = 0; t < kMaxPlacementTries; ++t) {
      Box3D w;
      w.length = uniform(layout_rng, 5.0, 20.0);
      w.width = 0.3;
      w.height = uniform(layout_rng, 2.0, 5.0);
      w.cx = uniform(layout_rng, -0.5 * cfg.area_x + 0.5 * w.length, 0.5 * cfg.area_x - 0.5 * w.length);
      w.cy = uniform(layout_rng, -0.5 * cfg.area_y + 0.5 * w.length, 0.5 * cfg.area_y - 0.5 * w.length);
      w.cz = 0.5 * w.height;
      w.yaw = uniform(layout_rng, -std::numbers::pi, std::numbers::pi);
      if (w.bev_range() < 6.0 || overlaps_any(w, placed, 1.0)) continue;
      placed.push_back(w);
      s.structures.push_back(w);
      break;
    }
  }
  auto add_objects = [&](std::size_t count, bool mobile) {
    for (std::size_t i = 0; i < count; ++i) {
      const auto b = place(layout_rng, cfg, placed);
      if (!b) continue;
      placed.push_back(*b);
      s.gt.push_back({*b, std::nullopt});
      s.mobile.push_back(mobile);
    }
  };
  add_objects(cfg.n_static_objects, false);
  add_objects(cfg.n_mobile_objects, true);

  // Sensor poses for past traversals; the reference defines the frame.
  s.poses.push_back(Pose::identity());
  for (std::size_t k = 1; k <= cfg.n_traversals; ++k) {
    const double yaw = uniform(layout_rng, -cfg.traversal_yaw, cfg.traversal_yaw);
    const Eigen::Vector3d t(uniform(layout_rng, -cfg.traversal_offset, cfg.traversal_offset),
                            uniform(layout_rng, -cfg.traversal_offset, cfg.traversal_offset), 0.0);
    s.poses.push_back(Pose::from_yaw(yaw, t));
  }

  // Where each mobile object sits in each traversal (nullopt = absent).
  std::vector<std::vector<std::optional<Box3D>>> moved(cfg.n_traversals);
  for (std::size_t k = 0; k < cfg.n_traversals; ++k) {
    std::vector<Box3D> occupied = placed;
    for (std::size_t o = 0; o < s.gt.size(); ++o) {
      std::optional<Box3D> where;
      if (s.mobile[o] && uniform(layout_rng, 0.0, 1.0) < cfg.mobile_reposition_prob) {
        where = place(layout_rng, cfg, occupied);
        if (where) {
          where->length = s.gt[o].box.length;
          where->width = s.gt[o].box.width;
          where->height = s.gt[o].box.height;
          where->cz = 0.5 * where->height;
          occupied.push_back(*where);
        }
      }
      moved[k].push_back(where);
    }
  }

  // Static content is the same surface samples in every traversal; only
  // sensor noise differs between clouds.
  PointCloud static_base;
  {
    Rng rng = make_rng(cfg.rng_seed, "world/static", id);
    sample_ground(static_base, rng, cfg);
    for (const Box3D& w : s.structures) sample_wall(static_base, rng, w, cfg.structure_density, 0.0);
    for (std::size_t o = 0; o < s.gt.size(); ++o)
      if (!s.mobile[o]) sample_object(static_base, rng, s.gt[o].box, cfg.object_density, 0.0);
  }

  auto render = [&](std::size_t k) {
    Rng rng = make_rng(cfg.rng_seed, "world/cloud", id, k);
    PointCloud cloud = static_base;
    for (Point3& p : cloud) add_noise(p, rng, cfg.noise_sigma);
    for (std::size_t o = 0; o < s.gt.size(); ++o) {
      if (!s.mobile[o]) continue;
      if (k == 0) {
        sample_object(cloud, rng, s.gt[o].box, cfg.object_density, cfg.noise_sigma);
      } else if (moved[k - 1][o]) {
        sample_object(cloud, rng, *moved[k - 1][o], cfg.object_density, cfg.noise_sigma);
      }
    }
    return cloud;
  };
  s.traversals.reference = render(0);
  for (std::size_t k = 1; k <= cfg.n_traversals; ++k) s.traversals.traversals.push_back(render(k));
  return s;
}

}  // namespace

void WorldConfig::validate() const {
  if (n_traversals < 1) throw ConfigError("world.n_traversals must be >= 1");
  if (ground_density < 0 || structure_density < 0 || object_density < 0)
    throw ConfigError("world densities must be >= 0");
  if (noise_sigma < 0) throw ConfigError("world.noise_sigma must be >= 0");
  if (!(area_x > 0 && area_y > 0)) throw ConfigError("world area must be positive");
  if (!(length_min > 0 && length_max >= length_min && width_min > 0 && width_max >= width_min &&
        height_min > 0 && height_max >= height_min))
    throw ConfigError("world object dimension ranges must be positive and ordered");
  if (mobile_reposition_prob < 0 || mobile_reposition_prob > 1)
    throw ConfigError("world.mobile_reposition_prob must be in [0, 1]");
}

LabelSet SimWorld::ground_truth() const {
  LabelSet out;
  for (const auto& s : samples) out.samples[s.traversals.sample_id] = s.gt;
  return out;
}

LabelSet SimWorld::mobile_ground_truth() const {
  LabelSet out;
  for (const auto& s : samples) {
    auto& dst = out.samples[s.traversals.sample_id];
    for (std::size_t i = 0; i < s.gt.size(); ++i)
      if (s.mobile[i]) dst.push_back(s.gt[i]);
  }
  return out;
}

std::string sample_id_for(std::size_t index) { return fmt::format("{:06d}", index); }

SimWorld gen_world(const WorldConfig& cfg) {
  cfg.validate();
  SimWorld w;
  for (std::size_t i = 0; i < cfg.n_samples; ++i) w.samples.push_back(gen_sample(cfg, sample_id_for(i)));
  return w;
}

void write_world(const SampleLayout& layout, const SimWorld& world) {
  const LabelSet gt = world.ground_truth();
  const LabelSet gt_mobile = world.mobile_ground_truth();
  for (const SimSample& s : world.samples) {
    const std::string& id = s.traversals.sample_id;
    write_point_bin(layout.points(id), apply_pose(s.traversals.reference, s.poses[0].inverse()));
    for (std::size_t k = 0; k < s.traversals.traversals.size(); ++k)
      write_point_bin(layout.traversal(id, k + 1), apply_pose(s.traversals.traversals[k], s.poses[k + 1].inverse()));
    write_pose_file(layout.poses(id), s.poses);
  }
  write_label_dir(layout.labels_dir("gt"), gt);
  write_label_dir(layout.labels_dir("gt_mobile"), gt_mobile);
}

void SimDetectorParams::validate() const {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob(p0) || !prob(p_min) || !prob(p_max) || p_min > p_max)
    throw ConfigError("detector probabilities must lie in [0, 1] with p_min <= p_max");
  if (!(tp_alpha > 0 && tp_beta > 0 && fp_alpha > 0 && fp_beta > 0))
    throw ConfigError("detector Beta parameters must be > 0");
  if (fp_per_scene < 0 || size_tolerance < 0 || jitter_sigma < 0 || eta < 0)
    throw ConfigError("detector rates and tolerances must be >= 0");
  if (!prob(fp_near_object_fraction)) throw ConfigError("detector.fp_near_object_fraction must be in [0, 1]");
}

SimDetectorModel sim_train(const LabelSet& labels, std::span<const LabeledBox> augmentation_boxes) {
  SimDetectorModel m;
  m.memory.reserve(labels.size() + augmentation_boxes.size());
  for (const auto& [id, boxes] : labels.samples)
    for (const auto& b : boxes) m.memory.push_back(b.box);
  for (const auto& b : augmentation_boxes) m.memory.push_back(b.box);
  return m;
}

std::size_t count_similar(const SimDetectorModel& model, const Box3D& box, double tolerance) {
  auto close = [&](double a, double ref) { return std::abs(a - ref) <= tolerance * ref; };
  return static_cast<std::size_t>(std::count_if(model.memory.begin(), model.memory.end(), [&](const Box3D& m) {
    return close(m.length, box.length) && close(m.width, box.width) && close(m.height, box.height);
  }));
}

double detection_probability(std::size_t n_similar, const SimDetectorParams& params) {
  return std::clamp(params.p0 + params.eta * static_cast<double>(n_similar), params.p_min, params.p_max);
}

std::vector<LabeledBox> sim_infer(const SimDetectorModel& model, std::span<const LabeledBox> scene_gt,
                                  const SimDetectorParams& params, const std::string& sample_id, int round) {
  params.validate();
  std::vector<LabeledBox> out;
  const std::string tp_tag = fmt::format("infer/tp/{}", round);
  for (std::size_t o = 0; o < scene_gt.size(); ++o) {
    const Box3D& gt = scene_gt[o].box;
    Rng rng = make_rng(params.rng_seed, tp_tag, sample_id, o);
    const double u = uniform(rng, 0.0, 1.0);
    const double p = detection_probability(count_similar(model, gt, params.size_tolerance), params);
    if (!(u < p)) continue;
    const double score = sample_beta(rng, params.tp_alpha, params.tp_beta);
    const double spread = 1.0 - score;
    std::normal_distribution<double> pos(0.0, std::max(params.jitter_sigma * spread, 1e-12));
    std::normal_distribution<double> rel(0.0, std::max(0.1 * spread, 1e-12));
    std::normal_distribution<double> rot(0.0, std::max(0.3 * spread, 1e-12));
    Box3D b = gt;
    if (params.jitter_sigma > 0.0) {
      b.cx += pos(rng);
      b.cy += pos(rng);
      b.length = std::max(0.1, b.length * (1.0 + rel(rng)));
      b.width = std::max(0.1, b.width * (1.0 + rel(rng)));
      b.height = std::max(0.1, b.height * (1.0 + rel(rng)));
      b.cz = gt.bottom() + 0.5 * b.height;
      b.yaw = normalize_angle(b.yaw + rot(rng));
    }
    out.push_back({b, score});
  }

  Rng fp_rng = make_rng(params.rng_seed, fmt::format("infer/fp/{}", round), sample_id);
  std::poisson_distribution<int> n_fp(params.fp_per_scene);
  const int count = params.fp_per_scene > 0.0 ? n_fp(fp_rng) : 0;
  for (int i = 0; i < count; ++i) {
    Box3D b;
    b.length = uniform(fp_rng, 1.0, 6.0);
    b.width = uniform(fp_rng, 0.8, 2.5);
    b.height = uniform(fp_rng, 0.8, 2.2);
    b.yaw = uniform(fp_rng, -std::numbers::pi, std::numbers::pi);
    const bool anchored = !scene_gt.empty() && uniform(fp_rng, 0.0, 1.0) < params.fp_near_object_fraction;
    if (anchored) {
      const auto pick = std::uniform_int_distribution<std::size_t>(0, scene_gt.size() - 1)(fp_rng);
      const double dist = uniform(fp_rng, 1.5, 4.0);
      const double dir = uniform(fp_rng, -std::numbers::pi, std::numbers::pi);
      b.cx = scene_gt[pick].box.cx + dist * std::cos(dir);
      b.cy = scene_gt[pick].box.cy + dist * std::sin(dir);
    } else {
      b.cx = uniform(fp_rng, -0.5 * params.area_x, 0.5 * params.area_x);
      b.cy = uniform(fp_rng, -0.5 * params.area_y, 0.5 * params.area_y);
    }
    b.cz = 0.5 * b.height;
    b.yaw = normalize_angle(b.yaw);
    out.push_back({b, sample_beta(fp_rng, params.fp_alpha, params.fp_beta)});
  }
  return out;
}

double beta_median(double a, double b) {
  return boost::math::median(boost::math::beta_distribution<double>(a, b));
}

}  // namespace lst
