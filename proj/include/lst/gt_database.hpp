#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "lst/filtering.hpp"
#include "lst/geometry.hpp"
#include "lst/rng.hpp"

namespace lst {

/// One cropped object. Points are stored in the box-local canonical frame
/// (centered on the box, x along its length axis).
struct DbEntry {
  std::string entry_id;
  std::string source_sample_id;
  Box3D box;
  double score = 1.0;
  PointCloud points;
};

struct GtDatabase {
  std::vector<DbEntry> entries;
  int round = 0;
  std::string manifest;  // path or tag of the filter manifest the source labels came from
  std::size_t skipped = 0;  // source labels with too few interior points
};

inline constexpr std::size_t kMinEntryPoints = 5;

struct AugmentConfig {
  std::size_t target_labels_per_sample = 40;
  double flip_probability = 0.5;
  double rotation_range = 0.78539816339744831;  // +/- radians
  double scale_min = 0.95;
  double scale_max = 1.05;
  double perception_range = 70.0;  // inserted centers farther than this are rejected
  std::uint64_t rng_seed = 0;

  void validate() const;
};

/// Point clouds keyed by sample id (reference scans).
using SamplePoints = std::map<std::string, PointCloud>;

/// One entry per label with at least kMinEntryPoints interior points.
/// Throws DataError when a labeled sample has no point cloud.
GtDatabase build_database(const SamplePoints& samples, const LabelSet& labels);

struct Scene {
  PointCloud points;
  std::vector<LabeledBox> labels;
};

struct InsertResult {
  Scene scene;
  std::vector<std::string> inserted_ids;
};

/// Ground-truth sampling: draws database entries uniformly without
/// replacement and inserts each at its original pose unless it overlaps
/// (BEV IoU > 0) any current box or lies beyond perception range. Scene
/// points inside an accepted box are replaced by the entry's points.
InsertResult sample_insert(const Scene& scene, const GtDatabase& db, const AugmentConfig& cfg, Rng& rng);

struct GlobalTransform {
  bool flip = false;
  double rotation = 0.0;
  double scale = 1.0;
};

/// Draws flip, then rotation, then scale from rng.
GlobalTransform draw_global_transform(const AugmentConfig& cfg, Rng& rng);
Scene apply_global_transform(const Scene& scene, const GlobalTransform& tf);

/// Random flip about the x axis, yaw rotation about the origin and uniform
/// scaling, applied identically to points and boxes.
Scene global_augment(const Scene& scene, const AugmentConfig& cfg, Rng& rng);

}  // namespace lst
