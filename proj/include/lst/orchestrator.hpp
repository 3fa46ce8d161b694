#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lst/config.hpp"
#include "lst/evaluation.hpp"
#include "lst/filtering.hpp"
#include "lst/gt_database.hpp"
#include "lst/kitti_io.hpp"

namespace lst {

struct RunOptions {
  bool force = false;   // clear existing outputs instead of refusing
  bool resume = false;  // skip rounds whose manifest says complete
};

/// Reference scans and their PP sidecars for every sample in the layout.
SampleClouds load_scored_clouds(const SampleLayout& layout);
SamplePoints load_reference_points(const SampleLayout& layout);

/// Gives every id in `ids` an entry (empty when absent). Throws DataError if
/// `labels` names a sample outside `ids`.
LabelSet cover_samples(const LabelSet& labels, const std::vector<std::string>& ids);

/// Writes the synthetic world under cfg.data_root.
void cmd_gen_world(const SelfTrainConfig& cfg, const RunOptions& opts);

struct SeedSummary {
  std::size_t samples = 0;
  std::size_t seeds = 0;
  std::size_t db_entries = 0;
};

/// Round 0: PP sidecars, seed pseudo-labels and the seed database. Every
/// failing sample is collected and reported in one DataError.
SeedSummary cmd_seed_generate(const SelfTrainConfig& cfg, const RunOptions& opts);

/// Rounds 1..max_rounds. Requires a complete round 0.
void cmd_self_train(const SelfTrainConfig& cfg, const RunOptions& opts);

/// Filters one detection directory with cfg.filter and writes
/// out/pseudo_labels, out/db_source and out/manifest.json.
RoundArtifacts cmd_filter(const SelfTrainConfig& cfg, const std::filesystem::path& detections,
                          const std::filesystem::path& out, const RunOptions& opts);

GtDatabase cmd_build_db(const SelfTrainConfig& cfg, const std::filesystem::path& labels,
                        const std::filesystem::path& out, const RunOptions& opts);

/// Writes augmented scenes to out/points and out/labels.
void cmd_augment(const SelfTrainConfig& cfg, const std::filesystem::path& db,
                 const std::filesystem::path& labels, const std::filesystem::path& out,
                 const RunOptions& opts);

EvalReport cmd_eval(const SelfTrainConfig& cfg, const std::filesystem::path& detections,
                    const std::filesystem::path& gt, const std::optional<std::filesystem::path>& out_csv);

/// One CSV row per round directory; rounds without a readable manifest are
/// listed with status "incomplete".
std::string cmd_report(const std::filesystem::path& data_root);

}  // namespace lst
