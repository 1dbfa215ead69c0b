// anythreat: synthesize activity logs, build community datasets, and run the
// oversampling / class-decomposition experiment matrix.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "anythreat/runner.hpp"

namespace fs = std::filesystem;
using namespace anythreat;

namespace {

int cmd_synth(const std::string& out_dir, std::uint64_t seed, const std::string& config_path) {
  SynthConfig cfg;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw ConfigError("config: cannot open " + config_path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError("config: " + config_path + ": " + e.what());
    }
    cfg = runner_detail::parse_synth(j, "");
  }
  if (seed != 0) cfg.seed = seed;
  const GroundTruth truth = generate(cfg, out_dir);
  std::printf("wrote %s: %zu users, %zu insiders\n", out_dir.c_str(), cfg.n_users,
              truth.insiders.size());
  return 0;
}

void write_dataset_csv(const CommunityDataset& d, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  std::vector<std::string> header = {"user", "slot", "label", "threat_id"};
  header.insert(header.end(), d.schema.names.begin(), d.schema.names.end());
  write_csv_row(out, header);
  for (const auto& inst : d.instances) {
    std::vector<std::string> row = {inst.user, std::to_string(inst.slot),
                                    inst.label == Label::Anomalous ? "Anomalous" : "Normal",
                                    inst.threat_id.value_or("")};
    for (const double v : inst.x) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.10g", v);
      row.push_back(buf);
    }
    write_csv_row(out, row);
  }
}

int cmd_ingest(const std::string& log_dir, std::vector<std::string> communities,
               const std::string& out_dir, double slot_hours) {
  const auto roles = load_roles((fs::path(log_dir) / "roles.csv").string());
  const auto truth = load_ground_truth((fs::path(log_dir) / "insiders.csv").string());
  const auto parsed = parse_logs(log_paths(log_dir));
  std::printf("parsed %zu events (%zu rows skipped)\n", parsed.events.size(),
              parsed.skipped_rows);

  if (communities.empty()) {
    std::set<std::string> distinct;
    for (const auto& [user, role] : roles) distinct.insert(role);
    communities.assign(distinct.begin(), distinct.end());
  }
  fs::create_directories(out_dir);
  for (const auto& community : communities) {
    const CommunityDataset d = build_dataset(parsed.events, roles, community, truth, slot_hours);
    const auto [majority, minority] = split_by_label(d);
    const fs::path path = fs::path(out_dir) / (community + "_dataset.csv");
    write_dataset_csv(d, path);
    std::printf("%s: %zu instances (M=%zu, I=%zu) -> %s\n", community.c_str(),
                d.instances.size(), majority.size(), minority.size(), path.c_str());
  }
  return 0;
}

int cmd_run(const std::string& config_path, const std::string& out_dir, std::uint64_t seed,
            std::size_t jobs, const std::string& community, bool save_models) {
  RunConfig cfg = load_run_config(config_path);
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  if (seed != 0) cfg.seed = seed;
  if (jobs != 0) cfg.jobs = jobs;
  if (!community.empty()) cfg.communities = {community};
  if (save_models) cfg.save_models = true;

  const RunResult result = run(cfg);
  std::printf("results: %s\n", result.results_path.string().c_str());
  for (const auto& p : result.table_paths) std::printf("table:   %s\n", p.string().c_str());
  return 0;
}

int cmd_report(const std::string& results_path, const std::string& out_dir) {
  std::ifstream in(results_path);
  if (!in) throw ConfigError("config: cannot open " + results_path);
  nlohmann::json results;
  try {
    in >> results;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config: " + results_path + ": " + e.what());
  }
  fs::create_directories(out_dir);
  for (const auto& [name, content] : render_tables(results)) {
    const fs::path p = fs::path(out_dir) / name;
    std::ofstream out(p);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << content;
    std::printf("table:   %s\n", p.string().c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"insider-threat detection pipeline: synthetic logs, community datasets,\n"
               "selective minority oversampling, class decomposition, and evaluation"};
  app.require_subcommand(1);

  std::string synth_out, synth_config;
  std::string ingest_logs, ingest_out = "out";
  std::string run_config, run_out, run_community;
  std::string report_results, report_out = "out";
  std::uint64_t seed = 0;
  std::size_t jobs = 0;
  double slot_hours = 4.0;
  bool save_models = false;
  std::vector<std::string> ingest_communities;

  auto* synth = app.add_subcommand("synth", "generate seeded activity logs with planted insiders");
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--seed", seed, "RNG seed override");
  synth->add_option("--config", synth_config, "generator config (JSON)");

  auto* ingest = app.add_subcommand("ingest", "build community datasets from activity logs");
  ingest->add_option("--logs", ingest_logs, "directory with the activity logs")->required();
  ingest->add_option("--community", ingest_communities, "community roles (default: all)");
  ingest->add_option("--out", ingest_out, "output directory");
  ingest->add_option("--slot-hours", slot_hours, "session slot length in hours");

  auto* run_cmd = app.add_subcommand("run", "run the experiment matrix from a config file");
  run_cmd->add_option("--config", run_config, "run config (JSON)")->required();
  run_cmd->add_option("--out", run_out, "output directory override");
  run_cmd->add_option("--seed", seed, "global seed override");
  run_cmd->add_option("--jobs", jobs, "parallel experiments");
  run_cmd->add_option("--community", run_community, "restrict to one community");
  run_cmd->add_flag("--save-models", save_models, "persist trained model blobs");

  auto* report = app.add_subcommand("report", "re-render report tables from results.json");
  report->add_option("--results", report_results, "results.json path")->required();
  report->add_option("--out", report_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (synth->parsed()) return cmd_synth(synth_out, seed, synth_config);
    if (ingest->parsed()) return cmd_ingest(ingest_logs, ingest_communities, ingest_out, slot_hours);
    if (run_cmd->parsed())
      return cmd_run(run_config, run_out, seed, jobs, run_community, save_models);
    if (report->parsed()) return cmd_report(report_results, report_out);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
