#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lst/evaluation.hpp"
#include "lst/filtering.hpp"
#include "lst/gt_database.hpp"
#include "lst/seed_labels.hpp"
#include "lst/sim_harness.hpp"

namespace lst {

enum class DetectorMode { kSimulate, kExternal };

struct DetectorConfig {
  DetectorMode mode = DetectorMode::kSimulate;
  // Command templates; placeholders {round} {points_dir} {labels_dir} {db_dir} {out_dir}.
  std::string train_cmd;
  std::string infer_cmd;
  SimDetectorParams sim;
};

struct SelfTrainConfig {
  std::filesystem::path data_root = "data";
  std::uint64_t master_seed = 42;
  unsigned workers = 1;
  int max_rounds = 2;
  double pp_radius = kDefaultPPRadius;
  double audit_iou = 0.25;
  FilterConfig filter;
  AugmentConfig augment;
  ClusterParams cluster;
  SeedHeuristics seed_labels;
  EvalConfig eval;
  DetectorConfig detector;
  WorldConfig world;

  /// Throws ConfigError describing the first invalid field.
  void validate() const;
};

/// Fully expanded JSON form (every default present). Per-module RNG seeds
/// are not serialized; they all follow the master seed.
nlohmann::json to_json(const SelfTrainConfig& cfg);

/// Missing keys take defaults; unknown keys and wrong types are ConfigErrors.
SelfTrainConfig config_from_json(const nlohmann::json& j);

/// Applies one "dotted.key=value" override. The value is parsed as JSON when
/// possible and taken as a string otherwise.
void apply_override(nlohmann::json& j, std::string_view assignment);

/// Defaults, then the optional config file, then overrides in order.
SelfTrainConfig load_config(const std::optional<std::filesystem::path>& file,
                            const std::vector<std::string>& overrides);

/// Replaces {name} placeholders in a command template.
std::string expand_template(std::string_view tmpl,
                            const std::vector<std::pair<std::string, std::string>>& values);

}  // namespace lst
