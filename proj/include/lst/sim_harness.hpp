#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lst/ephemerality.hpp"
#include "lst/filtering.hpp"
#include "lst/geometry.hpp"
#include "lst/kitti_io.hpp"

namespace lst {

/// Synthetic multi-traversal world. Static content (ground, walls, parked
/// objects) appears in every traversal; mobile objects appear in the
/// reference scan and are either absent or elsewhere in past traversals.
struct WorldConfig {
  std::size_t n_samples = 8;
  double area_x = 100.0;  // meters, centered on the sensor
  double area_y = 100.0;
  std::size_t n_traversals = 5;
  double ground_density = 8.0;  // points per square meter
  std::size_t n_structures = 10;
  double structure_density = 10.0;
  std::size_t n_static_objects = 6;
  std::size_t n_mobile_objects = 6;
  double length_min = 3.5;
  double length_max = 5.0;
  double width_min = 1.6;
  double width_max = 2.0;
  double height_min = 1.4;
  double height_max = 1.8;
  double object_density = 12.0;  // points per square meter of object surface
  double mobile_reposition_prob = 0.5;
  double noise_sigma = 0.02;
  double traversal_offset = 2.0;  // max sensor translation between traversals, meters
  double traversal_yaw = 0.1;     // max sensor yaw between traversals, radians
  std::uint64_t rng_seed = 42;

  void validate() const;
};

struct SimSample {
  TraversalSet traversals;         // all clouds in the reference frame
  std::vector<Pose> poses;         // reference first; maps sensor frame to reference frame
  std::vector<LabeledBox> gt;      // every object, no scores
  std::vector<bool> mobile;        // parallel to gt
  std::vector<Box3D> structures;   // wall footprints, for diagnostics
};

struct SimWorld {
  std::vector<SimSample> samples;

  LabelSet ground_truth() const;
  LabelSet mobile_ground_truth() const;
};

std::string sample_id_for(std::size_t index);

SimWorld gen_world(const WorldConfig& cfg);

/// Writes points/, poses/, traversals/, gt/ and gt_mobile/ under the layout
/// root. Clouds go to disk in their own sensor frames.
void write_world(const SampleLayout& layout, const SimWorld& world);

struct SimDetectorParams {
  double p0 = 0.3;
  double eta = 0.002;
  double p_min = 0.05;
  double p_max = 0.95;
  double fp_per_scene = 4.0;
  double fp_near_object_fraction = 0.5;
  double tp_alpha = 5.0;
  double tp_beta = 2.0;
  double fp_alpha = 2.0;
  double fp_beta = 5.0;
  double size_tolerance = 0.15;  // relative, per dimension
  double jitter_sigma = 0.6;     // meters at score 0; scaled by (1 - score)
  double area_x = 100.0;         // region for unanchored false positives
  double area_y = 100.0;
  std::uint64_t rng_seed = 42;

  void validate() const;
};

/// The simulated detector only remembers the boxes it was trained on.
struct SimDetectorModel {
  std::vector<Box3D> memory;
  friend bool operator==(const SimDetectorModel&, const SimDetectorModel&) = default;
};

/// Memorizes every training label plus every box inserted by augmentation.
SimDetectorModel sim_train(const LabelSet& labels, std::span<const LabeledBox> augmentation_boxes);

/// Memory boxes whose length, width and height are each within the relative
/// tolerance of `box`.
std::size_t count_similar(const SimDetectorModel& model, const Box3D& box, double tolerance);

/// clamp(p0 + eta * n_similar, p_min, p_max).
double detection_probability(std::size_t n_similar, const SimDetectorParams& params);

/// Simulated detections for one sample. Each ground-truth object and the
/// false-positive process draw from their own streams keyed by
/// (seed, round, sample, object), so raising one object's detection
/// probability never changes what happens to any other object.
std::vector<LabeledBox> sim_infer(const SimDetectorModel& model, std::span<const LabeledBox> scene_gt,
                                  const SimDetectorParams& params, const std::string& sample_id,
                                  int round);

/// Analytic median of Beta(a, b).
double beta_median(double a, double b);

}  // namespace lst
