#include "lst/config.hpp"

#include <fmt/format.h>

#include <fstream>

#include "lst/error.hpp"

namespace lst {
namespace {

using nlohmann::json;

std::string_view mode_name(DetectorMode m) { return m == DetectorMode::kSimulate ? "simulate" : "external"; }

DetectorMode parse_mode(const std::string& s) {
  if (s == "simulate") return DetectorMode::kSimulate;
  if (s == "external") return DetectorMode::kExternal;
  throw ConfigError(fmt::format("detector.mode: unknown mode '{}' (expected simulate or external)", s));
}

// Rejects keys that do not exist in the defaults, so typos fail loudly.
void check_known_keys(const json& given, const json& known, const std::string& prefix) {
  if (!given.is_object()) return;
  if (!known.is_object()) {
    throw ConfigError(fmt::format("{}: expected a value, got an object", prefix));
  }
  for (const auto& [key, value] : given.items()) {
    std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!known.contains(key)) throw ConfigError(fmt::format("unknown config key '{}'", path));
    check_known_keys(value, known.at(key), path);
  }
}

template <typename T>
void read(const json& j, std::string_view section, std::string_view key, T& out) {
  const json& node = section.empty() ? j : j.at(std::string(section));
  try {
    out = node.at(std::string(key)).get<T>();
  } catch (const json::exception& e) {
    std::string path = section.empty() ? std::string(key) : fmt::format("{}.{}", section, key);
    throw ConfigError(fmt::format("config key '{}': {}", path, e.what()));
  }
}

json sim_to_json(const SimDetectorParams& p) {
  return {{"p0", p.p0},
          {"eta", p.eta},
          {"p_min", p.p_min},
          {"p_max", p.p_max},
          {"fp_per_scene", p.fp_per_scene},
          {"fp_near_object_fraction", p.fp_near_object_fraction},
          {"tp_alpha", p.tp_alpha},
          {"tp_beta", p.tp_beta},
          {"fp_alpha", p.fp_alpha},
          {"fp_beta", p.fp_beta},
          {"size_tolerance", p.size_tolerance},
          {"jitter_sigma", p.jitter_sigma},
          {"area_x", p.area_x},
          {"area_y", p.area_y}};
}

json world_to_json(const WorldConfig& w) {
  return {{"n_samples", w.n_samples},
          {"area_x", w.area_x},
          {"area_y", w.area_y},
          {"n_traversals", w.n_traversals},
          {"ground_density", w.ground_density},
          {"n_structures", w.n_structures},
          {"structure_density", w.structure_density},
          {"n_static_objects", w.n_static_objects},
          {"n_mobile_objects", w.n_mobile_objects},
          {"length_min", w.length_min},
          {"length_max", w.length_max},
          {"width_min", w.width_min},
          {"width_max", w.width_max},
          {"height_min", w.height_min},
          {"height_max", w.height_max},
          {"object_density", w.object_density},
          {"mobile_reposition_prob", w.mobile_reposition_prob},
          {"noise_sigma", w.noise_sigma},
          {"traversal_offset", w.traversal_offset},
          {"traversal_yaw", w.traversal_yaw}};
}

}  // namespace

void SelfTrainConfig::validate() const {
  if (data_root.empty()) throw ConfigError("data_root must not be empty");
  if (workers == 0) throw ConfigError("workers must be >= 1");
  if (max_rounds < 0) throw ConfigError("max_rounds must be >= 0");
  if (!(pp_radius > 0.0)) throw ConfigError("pp_radius must be > 0");
  if (!(audit_iou > 0.0 && audit_iou <= 1.0)) throw ConfigError("eval.audit_iou must be in (0, 1]");
  filter.validate();
  augment.validate();
  cluster.validate();
  seed_labels.validate();
  eval.validate();
  world.validate();
  detector.sim.validate();
  if (detector.mode == DetectorMode::kExternal && detector.infer_cmd.empty()) {
    throw ConfigError("detector.infer_cmd is required in external mode");
  }
}

json to_json(const SelfTrainConfig& c) {
  json bins = json::array();
  for (const RangeBin& b : c.eval.range_bins) bins.push_back({b.lo, b.hi});
  json metrics = json::array();
  for (Metric m : c.eval.metrics) metrics.push_back(std::string(to_string(m)));

  return {
      {"data_root", c.data_root.string()},
      {"seed", c.master_seed},
      {"workers", c.workers},
      {"max_rounds", c.max_rounds},
      {"pp_radius", c.pp_radius},
      {"filter",
       {{"algorithm", std::string(to_string(c.filter.algorithm))},
        {"rho", c.filter.rho},
        {"alpha", c.filter.alpha},
        {"gamma", c.filter.gamma},
        {"high_threshold", c.filter.high_threshold}}},
      {"augment",
       {{"target_labels_per_sample", c.augment.target_labels_per_sample},
        {"flip_probability", c.augment.flip_probability},
        {"rotation_range", c.augment.rotation_range},
        {"scale_min", c.augment.scale_min},
        {"scale_max", c.augment.scale_max},
        {"perception_range", c.augment.perception_range}}},
      {"cluster", {{"eps", c.cluster.eps}, {"min_pts", c.cluster.min_pts}, {"pp_weight", c.cluster.pp_weight}}},
      {"seed_labels",
       {{"min_cluster_points", c.seed_labels.min_cluster_points},
        {"max_bottom_above_ground", c.seed_labels.max_bottom_above_ground},
        {"min_bev_diagonal", c.seed_labels.min_bev_diagonal},
        {"max_bev_diagonal", c.seed_labels.max_bev_diagonal},
        {"cluster_pp_percentile", c.seed_labels.cluster_pp_percentile},
        {"cluster_pp_max", c.seed_labels.cluster_pp_max},
        {"ground_cell", c.seed_labels.ground_cell},
        {"ground_band", c.seed_labels.ground_band},
        {"duplicate_iou", c.seed_labels.duplicate_iou}}},
      {"eval",
       {{"iou_thresholds", c.eval.iou_thresholds},
        {"metrics", metrics},
        {"range_bins", bins},
        {"audit_iou", c.audit_iou}}},
      {"detector",
       {{"mode", std::string(mode_name(c.detector.mode))},
        {"train_cmd", c.detector.train_cmd},
        {"infer_cmd", c.detector.infer_cmd},
        {"sim", sim_to_json(c.detector.sim)}}},
      {"world", world_to_json(c.world)},
  };
}

SelfTrainConfig config_from_json(const json& given) {
  if (!given.is_object()) throw ConfigError("config must be a JSON object");
  json j = to_json(SelfTrainConfig{});
  check_known_keys(given, j, "");
  j.merge_patch(given);

  SelfTrainConfig c;
  std::string root;
  read(j, "", "data_root", root);
  c.data_root = root;
  read(j, "", "seed", c.master_seed);
  read(j, "", "workers", c.workers);
  read(j, "", "max_rounds", c.max_rounds);
  read(j, "", "pp_radius", c.pp_radius);

  std::string algorithm;
  read(j, "filter", "algorithm", algorithm);
  c.filter.algorithm = parse_algorithm(algorithm);
  read(j, "filter", "rho", c.filter.rho);
  read(j, "filter", "alpha", c.filter.alpha);
  read(j, "filter", "gamma", c.filter.gamma);
  read(j, "filter", "high_threshold", c.filter.high_threshold);

  read(j, "augment", "target_labels_per_sample", c.augment.target_labels_per_sample);
  read(j, "augment", "flip_probability", c.augment.flip_probability);
  read(j, "augment", "rotation_range", c.augment.rotation_range);
  read(j, "augment", "scale_min", c.augment.scale_min);
  read(j, "augment", "scale_max", c.augment.scale_max);
  read(j, "augment", "perception_range", c.augment.perception_range);

  read(j, "cluster", "eps", c.cluster.eps);
  read(j, "cluster", "min_pts", c.cluster.min_pts);
  read(j, "cluster", "pp_weight", c.cluster.pp_weight);

  auto& h = c.seed_labels;
  read(j, "seed_labels", "min_cluster_points", h.min_cluster_points);
  read(j, "seed_labels", "max_bottom_above_ground", h.max_bottom_above_ground);
  read(j, "seed_labels", "min_bev_diagonal", h.min_bev_diagonal);
  read(j, "seed_labels", "max_bev_diagonal", h.max_bev_diagonal);
  read(j, "seed_labels", "cluster_pp_percentile", h.cluster_pp_percentile);
  read(j, "seed_labels", "cluster_pp_max", h.cluster_pp_max);
  read(j, "seed_labels", "ground_cell", h.ground_cell);
  read(j, "seed_labels", "ground_band", h.ground_band);
  read(j, "seed_labels", "duplicate_iou", h.duplicate_iou);

  read(j, "eval", "iou_thresholds", c.eval.iou_thresholds);
  std::vector<std::string> metrics;
  read(j, "eval", "metrics", metrics);
  c.eval.metrics.clear();
  for (const std::string& m : metrics) c.eval.metrics.push_back(parse_metric(m));
  std::vector<std::vector<double>> bins;
  read(j, "eval", "range_bins", bins);
  c.eval.range_bins.clear();
  for (const auto& b : bins) {
    if (b.size() != 2) throw ConfigError("eval.range_bins entries must be [lo, hi] pairs");
    c.eval.range_bins.push_back({b[0], b[1]});
  }
  read(j, "eval", "audit_iou", c.audit_iou);

  const json& d = j.at("detector");
  std::string mode;
  read(d, "", "mode", mode);
  c.detector.mode = parse_mode(mode);
  read(d, "", "train_cmd", c.detector.train_cmd);
  read(d, "", "infer_cmd", c.detector.infer_cmd);
  auto& s = c.detector.sim;
  read(d, "sim", "p0", s.p0);
  read(d, "sim", "eta", s.eta);
  read(d, "sim", "p_min", s.p_min);
  read(d, "sim", "p_max", s.p_max);
  read(d, "sim", "fp_per_scene", s.fp_per_scene);
  read(d, "sim", "fp_near_object_fraction", s.fp_near_object_fraction);
  read(d, "sim", "tp_alpha", s.tp_alpha);
  read(d, "sim", "tp_beta", s.tp_beta);
  read(d, "sim", "fp_alpha", s.fp_alpha);
  read(d, "sim", "fp_beta", s.fp_beta);
  read(d, "sim", "size_tolerance", s.size_tolerance);
  read(d, "sim", "jitter_sigma", s.jitter_sigma);
  read(d, "sim", "area_x", s.area_x);
  read(d, "sim", "area_y", s.area_y);

  auto& w = c.world;
  read(j, "world", "n_samples", w.n_samples);
  read(j, "world", "area_x", w.area_x);
  read(j, "world", "area_y", w.area_y);
  read(j, "world", "n_traversals", w.n_traversals);
  read(j, "world", "ground_density", w.ground_density);
  read(j, "world", "n_structures", w.n_structures);
  read(j, "world", "structure_density", w.structure_density);
  read(j, "world", "n_static_objects", w.n_static_objects);
  read(j, "world", "n_mobile_objects", w.n_mobile_objects);
  read(j, "world", "length_min", w.length_min);
  read(j, "world", "length_max", w.length_max);
  read(j, "world", "width_min", w.width_min);
  read(j, "world", "width_max", w.width_max);
  read(j, "world", "height_min", w.height_min);
  read(j, "world", "height_max", w.height_max);
  read(j, "world", "object_density", w.object_density);
  read(j, "world", "mobile_reposition_prob", w.mobile_reposition_prob);
  read(j, "world", "noise_sigma", w.noise_sigma);
  read(j, "world", "traversal_offset", w.traversal_offset);
  read(j, "world", "traversal_yaw", w.traversal_yaw);

  c.world.rng_seed = c.master_seed;
  c.detector.sim.rng_seed = c.master_seed;
  c.augment.rng_seed = c.master_seed;

  c.validate();
  return c;
}

void apply_override(json& j, std::string_view assignment) {
  std::size_t eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError(fmt::format("override '{}' is not of the form key=value", assignment));
  }
  std::string key(assignment.substr(0, eq));
  std::string raw(assignment.substr(eq + 1));

  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;

  json* node = &j;
  std::size_t start = 0;
  while (true) {
    std::size_t dot = key.find('.', start);
    std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError(fmt::format("override key '{}' has an empty component", key));
    if (!node->is_object()) *node = json::object();
    if (dot == std::string::npos) {
      // String-valued keys take the raw text, so "infer_cmd=true" stays a command.
      if (node->contains(part) && (*node)[part].is_string() && !value.is_string()) value = raw;
      (*node)[part] = std::move(value);
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

SelfTrainConfig load_config(const std::optional<std::filesystem::path>& file,
                            const std::vector<std::string>& overrides) {
  json j = to_json(SelfTrainConfig{});
  if (file) {
    std::ifstream in(*file);
    if (!in) throw ConfigError(fmt::format("cannot open config file {}", file->string()));
    try {
      json given = json::parse(in);
      if (!given.is_object()) throw ConfigError(fmt::format("config file {}: expected a JSON object", file->string()));
      check_known_keys(given, j, "");
      j.merge_patch(given);
    } catch (const json::exception& e) {
      throw ConfigError(fmt::format("config file {}: {}", file->string(), e.what()));
    }
  }
  for (const std::string& o : overrides) apply_override(j, o);
  return config_from_json(j);
}

std::string expand_template(std::string_view tmpl,
                            const std::vector<std::pair<std::string, std::string>>& values) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    bool replaced = false;
    if (tmpl[i] == '{') {
      for (const auto& [name, value] : values) {
        std::string token = "{" + name + "}";
        if (tmpl.substr(i, token.size()) == token) {
          out += value;
          i += token.size();
          replaced = true;
          break;
        }
      }
    }
    if (!replaced) out += tmpl[i++];
  }
  return out;
}

}  // namespace lst
