#include <CLI11.hpp>
#include <fmt/format.h>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "lst/error.hpp"
#include "lst/orchestrator.hpp"

namespace {

enum ExitCode { kOk = 0, kConfig = 2, kData = 3, kDetector = 4, kInternal = 1 };

struct Common {
  std::string config;
  std::vector<std::string> sets;
  bool force = false;
  bool resume = false;
  std::optional<unsigned> workers;
  std::optional<std::uint64_t> seed;
  std::string data_root;

  lst::SelfTrainConfig load() const {
    std::vector<std::string> overrides = sets;
    if (!data_root.empty()) overrides.push_back("data_root=" + nlohmann::json(data_root).dump());
    if (workers) overrides.push_back(fmt::format("workers={}", *workers));
    if (seed) overrides.push_back(fmt::format("seed={}", *seed));
    std::optional<std::filesystem::path> file;
    if (!config.empty()) file = config;
    return lst::load_config(file, overrides);
  }
  lst::RunOptions options() const { return {force, resume}; }
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "JSON config file");
  sub->add_option("--set", c.sets, "Override a config key, e.g. --set filter.rho=0.3")->take_all();
  sub->add_option("--data-root", c.data_root, "Dataset root (overrides data_root)");
  sub->add_option("--workers", c.workers, "Worker threads");
  sub->add_option("--seed", c.seed, "Master RNG seed");
  sub->add_flag("--force", c.force, "Replace existing outputs");
  sub->add_flag("--resume", c.resume, "Skip rounds that already completed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Persistence-filtered self-training for mobile-object detection"};
  app.require_subcommand(1);

  Common common;
  std::string detections, gt, labels, db, out;

  auto* gen = app.add_subcommand("gen-world", "Generate a synthetic multi-traversal dataset");
  auto* seed = app.add_subcommand("seed-generate", "Compute PP scores and round-0 seed labels");
  auto* train = app.add_subcommand("self-train", "Run self-training rounds 1..max_rounds");
  auto* filter = app.add_subcommand("filter", "Filter one detection directory");
  filter->add_option("--detections", detections, "Detection label directory")->required();
  filter->add_option("--out", out, "Output directory")->required();
  auto* build_db = app.add_subcommand("build-db", "Build an augmentation database from labels");
  build_db->add_option("--labels", labels, "Label directory")->required();
  build_db->add_option("--out", out, "Output directory")->required();
  auto* augment = app.add_subcommand("augment", "Write augmented training scenes");
  augment->add_option("--db", db, "Database directory")->required();
  augment->add_option("--labels", labels, "Label directory")->required();
  augment->add_option("--out", out, "Output directory")->required();
  auto* eval = app.add_subcommand("eval", "Evaluate detections against ground truth");
  eval->add_option("--detections", detections, "Detection label directory")->required();
  eval->add_option("--gt", gt, "Ground-truth label directory")->required();
  eval->add_option("--out", out, "CSV output path (stdout when omitted)");
  auto* report = app.add_subcommand("report", "Summarize rounds as CSV");
  report->add_option("--out", out, "CSV output path (stdout when omitted)");

  for (CLI::App* sub : {gen, seed, train, filter, build_db, augment, eval, report}) add_common(sub, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    lst::SelfTrainConfig cfg = common.load();
    lst::RunOptions opts = common.options();
    if (gen->parsed()) {
      lst::cmd_gen_world(cfg, opts);
      fmt::print("wrote {} samples to {}\n", cfg.world.n_samples, cfg.data_root.string());
    } else if (seed->parsed()) {
      lst::SeedSummary s = lst::cmd_seed_generate(cfg, opts);
      fmt::print("samples {} seeds {} db_entries {}\n", s.samples, s.seeds, s.db_entries);
    } else if (train->parsed()) {
      lst::cmd_self_train(cfg, opts);
      std::cout << lst::cmd_report(cfg.data_root);
    } else if (filter->parsed()) {
      lst::RoundArtifacts a = lst::cmd_filter(cfg, detections, out, opts);
      fmt::print("detections {} post_pp {} pseudo_labels {} db_source {}\n", a.detections, a.post_pp,
                 a.pseudo_labels.size(), a.augmentation_labels.size());
    } else if (build_db->parsed()) {
      lst::GtDatabase d = lst::cmd_build_db(cfg, labels, out, opts);
      fmt::print("entries {} skipped {}\n", d.entries.size(), d.skipped);
    } else if (augment->parsed()) {
      lst::cmd_augment(cfg, db, labels, out, opts);
    } else if (eval->parsed()) {
      std::optional<std::filesystem::path> csv;
      if (!out.empty()) csv = out;
      lst::EvalReport r = lst::cmd_eval(cfg, detections, gt, csv);
      if (!csv) std::cout << lst::format_report_csv(r);
      fmt::print(stderr, "mean predicted objects per sample: {:.3f}\n", r.mean_predicted_objects);
    } else if (report->parsed()) {
      std::string csv = lst::cmd_report(cfg.data_root);
      if (out.empty()) std::cout << csv;
      else lst::write_text_file(out, csv);
    }
    return kOk;
  } catch (const lst::ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kConfig;
  } catch (const lst::DetectorError& e) {
    fmt::print(stderr, "detector error: {}\n", e.what());
    return kDetector;
  } catch (const lst::DataError& e) {
    fmt::print(stderr, "data error: {}\n", e.what());
    return kData;
  } catch (const lst::FormatError& e) {
    fmt::print(stderr, "format error: {}\n", e.what());
    return kData;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kInternal;
  }
}
