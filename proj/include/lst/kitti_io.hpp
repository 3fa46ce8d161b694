#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lst/ephemerality.hpp"
#include "lst/filtering.hpp"
#include "lst/geometry.hpp"
#include "lst/gt_database.hpp"

namespace lst {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Point clouds: little-endian float32 (x, y, z, intensity) records.

PointCloud read_point_bin(const fs::path& path);
void write_point_bin(const fs::path& path, const PointCloud& cloud);

/// PP sidecar: one little-endian float32 per point, same order as the cloud.
PPScores read_pp_bin(const fs::path& path);
void write_pp_bin(const fs::path& path, const PPScores& pp);

// ---------------------------------------------------------------------------
// Labels. One object per line:
//   Dynamic 0.00 0 -10.00 -1.00 -1.00 -1.00 -1.00 h w l x y z yaw [score]
// Boxes are in the LiDAR frame (x forward, y left, z up) with (x, y, z) the
// geometric center, not KITTI's camera frame.

std::string format_label_line(const LabeledBox& b);
/// Throws FormatError mentioning `line_no` on a malformed line.
LabeledBox parse_label_line(std::string_view line, std::size_t line_no = 1);

std::vector<LabeledBox> read_label_file(const fs::path& path);
void write_label_file(const fs::path& path, const std::vector<LabeledBox>& labels);

/// Every <id>.txt in `dir`, keyed by file stem.
LabelSet read_label_dir(const fs::path& dir, int round = 0);
/// Writes one file per sample, including empty files for empty samples.
void write_label_dir(const fs::path& dir, const LabelSet& labels);

// ---------------------------------------------------------------------------
// Poses: one row-major 4x4 rigid transform per line.

std::vector<Pose> read_pose_file(const fs::path& path);
void write_pose_file(const fs::path& path, const std::vector<Pose>& poses);

// ---------------------------------------------------------------------------
// Dataset layout.
//   points/<id>.bin            reference scan, in its own sensor frame
//   pp/<id>.bin                PP sidecar for the reference scan
//   poses/<id>.txt             line 0: reference pose, line k: traversal k pose
//   traversals/<id>/<k>.bin    past traversal k (1-based), in its own sensor frame
//   <stage>/<id>.txt           labels (e.g. gt/, gt_mobile/)

/// Zero-padded decimal sample ids only.
bool is_valid_sample_id(std::string_view id);

class SampleLayout {
 public:
  explicit SampleLayout(fs::path root) : root_(std::move(root)) {}

  const fs::path& root() const { return root_; }
  fs::path points_dir() const { return root_ / "points"; }
  fs::path points(std::string_view id) const { return points_dir() / (std::string(id) + ".bin"); }
  fs::path pp(std::string_view id) const { return root_ / "pp" / (std::string(id) + ".bin"); }
  fs::path poses(std::string_view id) const { return root_ / "poses" / (std::string(id) + ".txt"); }
  fs::path traversal_dir(std::string_view id) const { return root_ / "traversals" / std::string(id); }
  fs::path traversal(std::string_view id, std::size_t k) const {
    return traversal_dir(id) / (std::to_string(k) + ".bin");
  }
  fs::path labels_dir(std::string_view stage) const { return root_ / std::string(stage); }
  fs::path labels(std::string_view stage, std::string_view id) const {
    return labels_dir(stage) / (std::string(id) + ".txt");
  }

  /// Sample ids with a reference scan, sorted. Throws DataError if the
  /// points directory is missing or holds an invalid id.
  std::vector<std::string> sample_ids() const;

  /// Reference scan plus traversals, with traversals moved into the
  /// reference sensor frame.
  TraversalSet load_traversal_set(const std::string& id) const;

 private:
  fs::path root_;
};

// ---------------------------------------------------------------------------
// Round directories: rounds/round_<j>/{pseudo_labels/, db/, detections/, manifest.json}

struct RoundPaths {
  fs::path dir;
  fs::path pseudo_labels;
  fs::path db;
  fs::path detections;
  fs::path manifest;
};

RoundPaths round_paths(const fs::path& root, int j);

/// Creates the round directory tree. An existing non-empty round directory
/// is an error unless `force`, in which case it is cleared first.
RoundPaths round_layout(const fs::path& root, int j, bool force = false);

struct RoundManifest {
  int round = 0;
  std::string algorithm;
  double rho = 0.0;
  double alpha = 0.0;
  double gamma = 0.0;
  double high_threshold = 0.0;
  std::optional<double> threshold;  // absent when nothing was filtered
  std::uint64_t seed = 0;
  std::string detector;
  std::size_t detections = 0;
  std::size_t post_pp = 0;
  std::size_t static_retained = 0;
  std::size_t pseudo_labels = 0;
  std::size_t db_source = 0;
  std::size_t db_entries = 0;
  std::size_t db_skipped = 0;
  bool complete = false;
  nlohmann::json audit;  // null when no ground truth was available

  friend bool operator==(const RoundManifest&, const RoundManifest&) = default;
};

nlohmann::json to_json(const RoundManifest& m);
RoundManifest manifest_from_json(const nlohmann::json& j);
void write_manifest(const fs::path& path, const RoundManifest& m);
RoundManifest read_manifest(const fs::path& path);

// ---------------------------------------------------------------------------
// Augmentation database: index.json plus one canonical-frame .bin per entry.

void write_database(const fs::path& dir, const GtDatabase& db);
GtDatabase read_database(const fs::path& dir);

void write_text_file(const fs::path& path, std::string_view text);
std::string read_text_file(const fs::path& path);

}  // namespace lst
