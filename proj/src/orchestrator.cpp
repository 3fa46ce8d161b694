#include "lst/orchestrator.hpp"

#include <fmt/format.h>
#include <sys/wait.h>

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <optional>
#include <sstream>

#include "lst/error.hpp"
#include "lst/parallel.hpp"
#include "lst/rng.hpp"
#include "lst/seed_labels.hpp"
#include "lst/sim_harness.hpp"

namespace lst {
namespace {

using nlohmann::json;

std::string_view detector_name(const SelfTrainConfig& cfg) {
  return cfg.detector.mode == DetectorMode::kSimulate ? "simulate" : "external";
}

fs::path rounds_root(const SelfTrainConfig& cfg) { return cfg.data_root; }

void require_empty_or_force(const fs::path& dir, bool force) {
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    if (!force) throw DataError(fmt::format("output '{}' already exists (use --force)", dir.string()));
    fs::remove_all(dir);
  }
}

// Writes the resolved configuration next to the rounds, leaving an identical
// file untouched.
void echo_config(const SelfTrainConfig& cfg) {
  fs::path path = cfg.data_root / "rounds" / "config.json";
  std::string text = to_json(cfg).dump(2) + "\n";
  if (fs::exists(path) && read_text_file(path) == text) return;
  fs::create_directories(path.parent_path());
  write_text_file(path, text);
}

json stats_json(const LabelSet& labels, const LabelSet& gt, const SelfTrainConfig& cfg) {
  MatchStats s = match_stats(labels, gt, cfg.audit_iou, Metric::kBev);
  EvalReport report = evaluate(labels, gt, cfg.eval);
  json ap = json::array();
  for (const EvalRow& r : report.rows) {
    ap.push_back({{"metric", std::string(to_string(r.metric))},
                  {"iou", r.iou},
                  {"bin", {r.bin.lo, r.bin.hi}},
                  {"ap", r.ap},
                  {"num_gt", r.num_gt},
                  {"num_det", r.num_det}});
  }
  return {{"iou", cfg.audit_iou}, {"tp", s.tp},
          {"fp", s.fp},           {"num_gt", s.num_gt},
          {"precision", s.precision()}, {"recall", s.recall()},
          {"f1", s.f1()},         {"ap", ap}};
}

LabelSet database_labels(const GtDatabase& db) {
  LabelSet out;
  out.round = db.round;
  for (const DbEntry& e : db.entries) out.samples[e.source_sample_id].push_back({e.box, e.score});
  return out;
}

// Audit against whatever ground truth exists under the data root.
json audit(const SampleLayout& layout, const std::vector<std::string>& ids, const LabelSet& pseudo,
           const GtDatabase& db, const SelfTrainConfig& cfg) {
  json out = json::object();
  for (std::string_view stage : {"gt", "gt_mobile"}) {
    if (!fs::is_directory(layout.labels_dir(stage))) continue;
    LabelSet gt = cover_samples(read_label_dir(layout.labels_dir(stage)), ids);
    out[std::string(stage)] = {
        {"pseudo_labels", stats_json(cover_samples(pseudo, ids), gt, cfg)},
        {"db", stats_json(cover_samples(database_labels(db), ids), gt, cfg)},
    };
  }
  return out.empty() ? json(nullptr) : out;
}

RoundManifest base_manifest(const SelfTrainConfig& cfg, int round) {
  RoundManifest m;
  m.round = round;
  m.algorithm = std::string(to_string(cfg.filter.algorithm));
  m.rho = cfg.filter.rho;
  m.alpha = cfg.filter.alpha;
  m.gamma = cfg.filter.gamma;
  m.high_threshold = cfg.filter.high_threshold;
  m.seed = cfg.master_seed;
  m.detector = std::string(detector_name(cfg));
  return m;
}

bool round_complete(const RoundPaths& p) {
  if (!fs::exists(p.manifest)) return false;
  try {
    return read_manifest(p.manifest).complete;
  } catch (const std::exception&) {
    return false;
  }
}

// Augments every sample's training scene the way a detector's data pipeline
// would, then memorizes labels and inserted boxes.
SimDetectorModel train_sim_model(const SelfTrainConfig& cfg, const SamplePoints& points,
                                 const std::vector<std::string>& ids, const LabelSet& labels,
                                 const GtDatabase& db, int labels_round) {
  std::vector<std::vector<LabeledBox>> own(ids.size());
  std::vector<std::vector<LabeledBox>> inserted(ids.size());
  const std::string tag = fmt::format("train/{}", labels_round);
  parallel_for(ids.size(), cfg.workers, [&](std::size_t i) {
    const std::string& id = ids[i];
    Scene scene{points.at(id), {}};
    if (auto it = labels.samples.find(id); it != labels.samples.end()) scene.labels = it->second;
    const std::size_t n_own = scene.labels.size();
    Rng rng = make_rng(cfg.master_seed, tag, id);
    InsertResult r = sample_insert(scene, db, cfg.augment, rng);
    Scene aug = global_augment(r.scene, cfg.augment, rng);
    own[i].assign(aug.labels.begin(), aug.labels.begin() + static_cast<std::ptrdiff_t>(n_own));
    inserted[i].assign(aug.labels.begin() + static_cast<std::ptrdiff_t>(n_own), aug.labels.end());
  });
  LabelSet training;
  std::vector<LabeledBox> all_inserted;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    training.samples[ids[i]] = std::move(own[i]);
    all_inserted.insert(all_inserted.end(), inserted[i].begin(), inserted[i].end());
  }
  return sim_train(training, all_inserted);
}

void run_command(const std::string& cmd, std::string_view what) {
  if (cmd.empty()) return;
  int status = std::system(cmd.c_str());
  if (status == -1) throw DetectorError(fmt::format("{} command could not be started: {}", what, cmd));
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    throw DetectorError(fmt::format("{} command failed with status {}: {}", what, code, cmd));
  }
}

bool has_label_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) return false;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".txt") return true;
  return false;
}

std::string audit_field(const json& gt_audit, const char* set, const char* field) {
  if (!gt_audit.is_object() || !gt_audit.contains(set) || !gt_audit[set].contains(field)) return "";
  return fmt::format("{:.6f}", gt_audit[set][field].get<double>());
}

}  // namespace

SampleClouds load_scored_clouds(const SampleLayout& layout) {
  SampleClouds out;
  for (const std::string& id : layout.sample_ids()) {
    if (!fs::exists(layout.pp(id))) {
      throw DataError(fmt::format("sample {}: missing PP sidecar {} (run seed-generate first)", id,
                                  layout.pp(id).string()));
    }
    ScoredCloud sc{read_point_bin(layout.points(id)), read_pp_bin(layout.pp(id))};
    if (sc.points.size() != sc.pp.size()) {
      throw DataError(fmt::format("sample {}: {} points but {} PP values", id, sc.points.size(), sc.pp.size()));
    }
    out.emplace(id, std::move(sc));
  }
  return out;
}

SamplePoints load_reference_points(const SampleLayout& layout) {
  SamplePoints out;
  for (const std::string& id : layout.sample_ids()) out.emplace(id, read_point_bin(layout.points(id)));
  return out;
}

LabelSet cover_samples(const LabelSet& labels, const std::vector<std::string>& ids) {
  LabelSet out;
  out.round = labels.round;
  for (const std::string& id : ids) out.samples[id];
  for (const auto& [id, boxes] : labels.samples) {
    auto it = out.samples.find(id);
    if (it == out.samples.end()) throw DataError(fmt::format("labels reference unknown sample '{}'", id));
    it->second = boxes;
  }
  return out;
}

void cmd_gen_world(const SelfTrainConfig& cfg, const RunOptions& opts) {
  SampleLayout layout(cfg.data_root);
  for (const char* sub : {"points", "pp", "poses", "traversals", "gt", "gt_mobile", "rounds"})
    require_empty_or_force(cfg.data_root / sub, opts.force);
  fs::create_directories(layout.points_dir());
  write_world(layout, gen_world(cfg.world));
}

SeedSummary cmd_seed_generate(const SelfTrainConfig& cfg, const RunOptions& opts) {
  SampleLayout layout(cfg.data_root);
  const std::vector<std::string> ids = layout.sample_ids();
  RoundPaths paths = round_paths(rounds_root(cfg), 0);
  if (opts.resume && round_complete(paths)) {
    RoundManifest m = read_manifest(paths.manifest);
    return {ids.size(), m.pseudo_labels, m.db_entries};
  }
  paths = round_layout(rounds_root(cfg), 0, opts.force || opts.resume);
  echo_config(cfg);

  std::vector<std::vector<LabeledBox>> seeds(ids.size());
  std::vector<PointCloud> refs(ids.size());
  std::vector<std::string> errors(ids.size());
  fs::create_directories(cfg.data_root / "pp");
  parallel_for(ids.size(), cfg.workers, [&](std::size_t i) {
    try {
      TraversalSet ts = layout.load_traversal_set(ids[i]);
      PPScores pp = compute_pp_scores(ts, cfg.pp_radius, 1);
      write_pp_bin(layout.pp(ids[i]), pp);
      seeds[i] = generate_seed_labels(ts, pp, cfg.cluster, cfg.seed_labels);
      refs[i] = std::move(ts.reference);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });

  std::string summary;
  std::size_t failed = 0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (errors[i].empty()) continue;
    ++failed;
    summary += fmt::format("\n  {}: {}", ids[i], errors[i]);
  }
  if (failed > 0) {
    throw DataError(fmt::format("seed generation failed for {} of {} samples:{}", failed, ids.size(), summary));
  }

  LabelSet labels;
  SamplePoints points;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    labels.samples[ids[i]] = std::move(seeds[i]);
    points.emplace(ids[i], std::move(refs[i]));
  }
  write_label_dir(paths.pseudo_labels, labels);
  GtDatabase db = build_database(points, labels);
  db.round = 0;
  db.manifest = "round_0/manifest.json";
  write_database(paths.db, db);

  RoundManifest m = base_manifest(cfg, 0);
  m.algorithm = "seed";
  m.detector = "seed";
  m.detections = labels.size();
  m.post_pp = labels.size();
  m.pseudo_labels = labels.size();
  m.db_source = labels.size();
  m.db_entries = db.entries.size();
  m.db_skipped = db.skipped;
  m.audit = audit(layout, ids, labels, db, cfg);
  m.complete = true;
  write_manifest(paths.manifest, m);
  return {ids.size(), labels.size(), db.entries.size()};
}

void cmd_self_train(const SelfTrainConfig& cfg, const RunOptions& opts) {
  SampleLayout layout(cfg.data_root);
  const fs::path root = rounds_root(cfg);
  if (!round_complete(round_paths(root, 0))) {
    throw DataError(fmt::format("round 0 under '{}' is missing or incomplete (run seed-generate first)",
                                root.string()));
  }
  const std::vector<std::string> ids = layout.sample_ids();
  echo_config(cfg);

  std::optional<SampleClouds> clouds;
  std::optional<SamplePoints> points;
  std::optional<LabelSet> gt;

  for (int j = 1; j <= cfg.max_rounds; ++j) {
    const RoundPaths prev = round_paths(root, j - 1);
    RoundPaths paths = round_paths(root, j);
    if (opts.resume && round_complete(paths)) continue;
    paths = round_layout(root, j, opts.force || opts.resume);

    RoundManifest m = base_manifest(cfg, j);
    write_manifest(paths.manifest, m);

    if (cfg.detector.mode == DetectorMode::kSimulate) {
      if (!points) points = load_reference_points(layout);
      if (!gt) {
        if (!fs::is_directory(layout.labels_dir("gt"))) {
          throw DataError("simulated detector needs ground truth under " + layout.labels_dir("gt").string());
        }
        gt = cover_samples(read_label_dir(layout.labels_dir("gt")), ids);
      }
      LabelSet prev_labels = cover_samples(read_label_dir(prev.pseudo_labels, j - 1), ids);
      GtDatabase prev_db = read_database(prev.db);
      SimDetectorModel model = train_sim_model(cfg, *points, ids, prev_labels, prev_db, j - 1);

      std::vector<std::vector<LabeledBox>> dets(ids.size());
      parallel_for(ids.size(), cfg.workers, [&](std::size_t i) {
        dets[i] = sim_infer(model, gt->samples.at(ids[i]), cfg.detector.sim, ids[i], j);
      });
      LabelSet out;
      out.round = j;
      for (std::size_t i = 0; i < ids.size(); ++i) out.samples[ids[i]] = std::move(dets[i]);
      write_label_dir(paths.detections, out);
    } else {
      const std::vector<std::pair<std::string, std::string>> values{
          {"round", std::to_string(j - 1)},
          {"points_dir", layout.points_dir().string()},
          {"labels_dir", prev.pseudo_labels.string()},
          {"db_dir", prev.db.string()},
          {"out_dir", paths.detections.string()},
      };
      run_command(expand_template(cfg.detector.train_cmd, values), "train");
      run_command(expand_template(cfg.detector.infer_cmd, values), "infer");
      if (!ids.empty() && !has_label_files(paths.detections)) {
        throw DetectorError(fmt::format("infer command wrote no label files to {}", paths.detections.string()));
      }
    }

    LabelSet detections = cover_samples(read_label_dir(paths.detections, j), ids);
    if (!clouds) clouds = load_scored_clouds(layout);
    RoundArtifacts art = round_step(detections, *clouds, cfg.filter);
    write_label_dir(paths.pseudo_labels, art.pseudo_labels);

    if (!points) points = load_reference_points(layout);
    GtDatabase db = build_database(*points, art.augmentation_labels);
    db.round = j;
    db.manifest = fmt::format("round_{}/manifest.json", j);
    write_database(paths.db, db);

    if (art.threshold_used != kNoThreshold) m.threshold = art.threshold_used;
    m.detections = art.detections;
    m.post_pp = art.post_pp;
    m.static_retained = art.static_retained;
    m.pseudo_labels = art.pseudo_labels.size();
    m.db_source = art.augmentation_labels.size();
    m.db_entries = db.entries.size();
    m.db_skipped = db.skipped;
    m.audit = audit(layout, ids, art.pseudo_labels, db, cfg);
    m.complete = true;
    write_manifest(paths.manifest, m);
  }
}

RoundArtifacts cmd_filter(const SelfTrainConfig& cfg, const fs::path& detections, const fs::path& out,
                          const RunOptions& opts) {
  SampleLayout layout(cfg.data_root);
  const std::vector<std::string> ids = layout.sample_ids();
  require_empty_or_force(out, opts.force);
  LabelSet dets = cover_samples(read_label_dir(detections), ids);
  RoundArtifacts art = round_step(dets, load_scored_clouds(layout), cfg.filter);
  write_label_dir(out / "pseudo_labels", art.pseudo_labels);
  write_label_dir(out / "db_source", art.augmentation_labels);
  RoundManifest m = base_manifest(cfg, dets.round);
  if (art.threshold_used != kNoThreshold) m.threshold = art.threshold_used;
  m.detector = "files";
  m.detections = art.detections;
  m.post_pp = art.post_pp;
  m.static_retained = art.static_retained;
  m.pseudo_labels = art.pseudo_labels.size();
  m.db_source = art.augmentation_labels.size();
  m.complete = true;
  write_manifest(out / "manifest.json", m);
  return art;
}

GtDatabase cmd_build_db(const SelfTrainConfig& cfg, const fs::path& labels, const fs::path& out,
                        const RunOptions& opts) {
  SampleLayout layout(cfg.data_root);
  require_empty_or_force(out, opts.force);
  GtDatabase db = build_database(load_reference_points(layout), read_label_dir(labels));
  db.manifest = labels.string();
  write_database(out, db);
  return db;
}

void cmd_augment(const SelfTrainConfig& cfg, const fs::path& db_dir, const fs::path& labels,
                 const fs::path& out, const RunOptions& opts) {
  SampleLayout layout(cfg.data_root);
  const std::vector<std::string> ids = layout.sample_ids();
  require_empty_or_force(out, opts.force);
  const GtDatabase db = read_database(db_dir);
  const LabelSet base = cover_samples(read_label_dir(labels), ids);
  fs::create_directories(out / "points");
  fs::create_directories(out / "labels");
  parallel_for(ids.size(), cfg.workers, [&](std::size_t i) {
    const std::string& id = ids[i];
    Scene scene{read_point_bin(layout.points(id)), base.samples.at(id)};
    Rng rng = make_rng(cfg.master_seed, "augment", id);
    Scene aug = global_augment(sample_insert(scene, db, cfg.augment, rng).scene, cfg.augment, rng);
    write_point_bin(out / "points" / (id + ".bin"), aug.points);
    write_label_file(out / "labels" / (id + ".txt"), aug.labels);
  });
}

EvalReport cmd_eval(const SelfTrainConfig& cfg, const fs::path& detections, const fs::path& gt,
                    const std::optional<fs::path>& out_csv) {
  EvalReport report = evaluate(read_label_dir(detections), read_label_dir(gt), cfg.eval);
  if (out_csv) write_report_csv(report, *out_csv);
  return report;
}

std::string cmd_report(const fs::path& data_root) {
  const fs::path dir = data_root / "rounds";
  if (!fs::is_directory(dir)) throw DataError(fmt::format("no rounds directory under '{}'", data_root.string()));

  std::vector<int> rounds;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_directory()) continue;
    std::string name = e.path().filename().string();
    if (!name.starts_with("round_")) continue;
    int j = 0;
    auto [ptr, ec] = std::from_chars(name.data() + 6, name.data() + name.size(), j);
    if (ec == std::errc() && ptr == name.data() + name.size()) rounds.push_back(j);
  }
  std::sort(rounds.begin(), rounds.end());

  std::string csv =
      "round,status,algorithm,rho,threshold,detections,post_pp,static_retained,pseudo_labels,db_source,"
      "db_entries,pl_precision,pl_recall,pl_f1,db_precision,db_recall,db_f1\n";
  for (int j : rounds) {
    const RoundPaths p = round_paths(data_root, j);
    std::optional<RoundManifest> m;
    try {
      if (fs::exists(p.manifest)) m = read_manifest(p.manifest);
    } catch (const std::exception&) {
      m.reset();
    }
    if (!m || !m->complete) {
      csv += fmt::format("{},incomplete,{},,,,,,,,,,,,,,\n", j, m ? m->algorithm : "");
      continue;
    }
    const json& a = m->audit.is_object() && m->audit.contains("gt") ? m->audit["gt"] : json();
    csv += fmt::format("{},complete,{},{:g},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", j, m->algorithm, m->rho,
                       m->threshold ? fmt::format("{:.6f}", *m->threshold) : "", m->detections, m->post_pp,
                       m->static_retained, m->pseudo_labels, m->db_source, m->db_entries,
                       audit_field(a, "pseudo_labels", "precision"), audit_field(a, "pseudo_labels", "recall"),
                       audit_field(a, "pseudo_labels", "f1"), audit_field(a, "db", "precision"),
                       audit_field(a, "db", "recall"), audit_field(a, "db", "f1"));
  }
  return csv;
}

}  // namespace lst
