#pragma once

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "anythreat/evaluate.hpp"
#include "anythreat/ingest.hpp"
#include "anythreat/synth.hpp"

namespace anythreat {

// ---------------------------------------------------------------------------
// Logging: ANYTHREAT_LOG = quiet | warn (default) | info | debug
// ---------------------------------------------------------------------------

inline int log_level() {
  static const int level = [] {
    const char* env = std::getenv("ANYTHREAT_LOG");
    if (!env) return 1;
    const std::string v(env);
    if (v == "quiet") return 0;
    if (v == "info") return 2;
    if (v == "debug") return 3;
    return 1;
  }();
  return level;
}

inline void log_info(const std::string& msg) {
  if (log_level() >= 2) std::cerr << "[info] " << msg << '\n';
}

inline void log_warn(const std::string& msg) {
  if (log_level() >= 1) std::cerr << "[warn] " << msg << '\n';
}

inline void log_debug(const std::string& msg) {
  if (log_level() >= 3) std::cerr << "[debug] " << msg << '\n';
}

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

struct GridConfig {
  std::vector<double> perc_over = {200.0, 300.0, 400.0};
  std::vector<std::size_t> k = {2, 4, 6};
  double tau = 10.0;
};

/// A config parse or validation failure; the CLI maps it to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::uint64_t seed = 42;
  std::string out_dir = "out";
  std::size_t jobs = 1;
  std::optional<SynthConfig> synth_cfg;   // exactly one of synth_cfg/log_dir
  std::optional<std::string> log_dir;
  SchemaMap schema_map;
  std::vector<std::string> communities;   // empty = every role in roles.csv
  std::vector<Variant> variants{all_variants().begin(), all_variants().end()};
  std::vector<ClassifierSpec> classifiers;
  GridConfig grid;
  FeatureConfig features;
  double slot_hours = 4.0;
  std::size_t k_smote = 5;
  std::optional<double> perc_under;
  bool save_models = false;

  RunConfig() {
    ClassifierSpec knn;
    knn.kind = ClassifierKind::knn;
    knn.k = 5;
    ClassifierSpec forest;
    forest.kind = ClassifierKind::random_forest;
    forest.n_trees = 100;
    ClassifierSpec linear;
    linear.kind = ClassifierKind::linear;
    classifiers = {knn, forest, linear};
  }

  void validate() const {
    if (synth_cfg.has_value() == log_dir.has_value())
      throw ConfigError("config: exactly one of data.synth and data.logs is required");
    if (classifiers.empty()) throw ConfigError("config: classifiers must not be empty");
    if (variants.empty()) throw ConfigError("config: variants must not be empty");
    if (grid.perc_over.empty() || grid.k.empty())
      throw ConfigError("config: grid.perc_over and grid.k must not be empty");
    for (const double po : grid.perc_over) {
      if (po <= 0.0) throw ConfigError("config: grid.perc_over values must be positive");
    }
    for (const std::size_t k : grid.k) {
      if (k < 1) throw ConfigError("config: grid.k values must be >= 1");
    }
    if (grid.tau < 0.0 || grid.tau > 100.0)
      throw ConfigError("config: grid.tau must lie in [0, 100]");
    if (jobs < 1) throw ConfigError("config: jobs must be >= 1");
    // the tuned-grid defaults are a reference point, not a straitjacket
    const GridConfig reference;
    if (grid.perc_over != reference.perc_over || grid.k != reference.k ||
        grid.tau != reference.tau) {
      log_info("grid differs from the tuned defaults (perc_over {200,300,400}, k {2,4,6}, tau 10)");
    }
  }
};

namespace runner_detail {

template <class T>
T get_field(const nlohmann::json& j, const std::string& field, const std::string& context) {
  if (!j.contains(field)) throw ConfigError("config: missing field " + context + field);
  try {
    return j.at(field).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config: bad value for " + context + field + ": " + e.what());
  }
}

template <class T>
T get_or(const nlohmann::json& j, const std::string& field, T fallback,
         const std::string& context) {
  if (!j.contains(field)) return fallback;
  try {
    return j.at(field).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config: bad value for " + context + field + ": " + e.what());
  }
}

inline ClassifierSpec parse_classifier(const nlohmann::json& j, const std::string& context) {
  ClassifierSpec spec;
  const std::string kind = get_field<std::string>(j, "kind", context);
  if (kind == "knn") {
    spec.kind = ClassifierKind::knn;
    spec.k = get_or<std::size_t>(j, "k", 5, context);
  } else if (kind == "random_forest") {
    spec.kind = ClassifierKind::random_forest;
    spec.n_trees = get_or<std::size_t>(j, "n_trees", 100, context);
    spec.max_depth = get_or<std::size_t>(j, "max_depth", 0, context);
    spec.features_per_split = get_or<std::size_t>(j, "features_per_split", 0, context);
  } else if (kind == "linear") {
    spec.kind = ClassifierKind::linear;
    spec.learning_rate = get_or<double>(j, "learning_rate", 0.1, context);
    spec.epochs = get_or<std::size_t>(j, "epochs", 200, context);
    spec.l2 = get_or<double>(j, "l2", 1e-4, context);
  } else {
    throw ConfigError("config: unknown classifier kind '" + kind + "' at " + context);
  }
  spec.validate();
  return spec;
}

inline SynthConfig parse_synth(const nlohmann::json& j, const std::string& context) {
  SynthConfig cfg;
  cfg.n_users = get_or<std::size_t>(j, "n_users", cfg.n_users, context);
  cfg.n_insiders = get_or<std::size_t>(j, "n_insiders", cfg.n_insiders, context);
  cfg.days = get_or<std::size_t>(j, "days", cfg.days, context);
  cfg.seed = get_or<std::uint64_t>(j, "seed", cfg.seed, context);
  if (j.contains("scenarios")) cfg.scenarios = get_field<std::vector<std::string>>(j, "scenarios", context);
  if (j.contains("roles")) {
    cfg.roles.clear();
    for (const auto& r : j.at("roles")) {
      cfg.roles.push_back({get_field<std::string>(r, "name", context + "roles."),
                           get_field<double>(r, "proportion", context + "roles.")});
    }
  }
  if (j.contains("noise")) {
    for (const auto& [key, value] : j.at("noise").items()) {
      if (!cfg.noise.count(key))
        throw ConfigError("config: unknown noise rate '" + key + "' at " + context + "noise");
      cfg.noise[key] = value.get<double>();
    }
  }
  if (j.contains("start")) {
    const auto t = parse_timestamp(get_field<std::string>(j, "start", context));
    if (!t) throw ConfigError("config: bad start timestamp at " + context + "start");
    cfg.start = *t;
  }
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

}  // namespace runner_detail

inline RunConfig parse_run_config(const nlohmann::json& j) {
  using namespace runner_detail;
  RunConfig cfg;
  cfg.seed = get_or<std::uint64_t>(j, "seed", cfg.seed, "");
  cfg.out_dir = get_or<std::string>(j, "out_dir", cfg.out_dir, "");
  cfg.jobs = get_or<std::size_t>(j, "jobs", cfg.jobs, "");
  cfg.slot_hours = get_or<double>(j, "slot_hours", cfg.slot_hours, "");
  cfg.save_models = get_or<bool>(j, "save_models", false, "");

  const auto& data = j.contains("data") ? j.at("data") : nlohmann::json::object();
  if (data.contains("synth")) cfg.synth_cfg = parse_synth(data.at("synth"), "data.synth.");
  if (data.contains("logs")) {
    const auto& logs = data.at("logs");
    cfg.log_dir = get_field<std::string>(logs, "dir", "data.logs.");
    if (logs.contains("schema_map")) {
      for (const auto& [key, value] : logs.at("schema_map").items()) {
        cfg.schema_map.rename[key] = value.get<std::string>();
      }
    }
  }

  if (j.contains("communities"))
    cfg.communities = get_field<std::vector<std::string>>(j, "communities", "");

  if (j.contains("variants")) {
    cfg.variants.clear();
    for (const auto& v : j.at("variants")) {
      try {
        cfg.variants.push_back(parse_variant(v.get<std::string>()));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: variants: ") + e.what());
      }
    }
  }

  if (j.contains("classifiers")) {
    cfg.classifiers.clear();
    std::size_t at = 0;
    for (const auto& c : j.at("classifiers")) {
      cfg.classifiers.push_back(
          parse_classifier(c, "classifiers[" + std::to_string(at++) + "]."));
    }
  }

  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    cfg.grid.perc_over = get_or<std::vector<double>>(g, "perc_over", cfg.grid.perc_over, "grid.");
    cfg.grid.k = get_or<std::vector<std::size_t>>(g, "k", cfg.grid.k, "grid.");
    cfg.grid.tau = get_or<double>(g, "tau", cfg.grid.tau, "grid.");
  }

  if (j.contains("features")) {
    const auto& f = j.at("features");
    cfg.features.work_start_hour = get_or<int>(f, "work_start_hour", 8, "features.");
    cfg.features.work_end_hour = get_or<int>(f, "work_end_hour", 17, "features.");
    cfg.features.org_domain = get_or<std::string>(f, "org_domain", "corp.com", "features.");
    cfg.features.sensitive_extensions = get_or<std::vector<std::string>>(
        f, "sensitive_extensions", cfg.features.sensitive_extensions, "features.");
    cfg.features.job_sites =
        get_or<std::vector<std::string>>(f, "job_sites", cfg.features.job_sites, "features.");
    cfg.features.leak_sites =
        get_or<std::vector<std::string>>(f, "leak_sites", cfg.features.leak_sites, "features.");
  }

  cfg.k_smote = get_or<std::size_t>(j, "k_smote", cfg.k_smote, "");
  if (j.contains("perc_under")) cfg.perc_under = j.at("perc_under").get<double>();

  cfg.validate();
  return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config: " + path + ": " + e.what());
  }
  return parse_run_config(j);
}

// ---------------------------------------------------------------------------
// Experiment matrix
// ---------------------------------------------------------------------------

/// One cell of the matrix. Variants ignore grid axes they do not use, so the
/// unused axes are stored as nulls and each distinct cell runs exactly once.
struct ExperimentCell {
  std::string community;
  Variant variant = Variant::default_;
  ClassifierSpec classifier;
  std::optional<double> perc_over;
  std::optional<std::size_t> k;
  double tau = 10.0;

  std::string id() const {
    std::string out = community + "/" + variant_name(variant) + "/" + classifier.id();
    if (perc_over) out += "/po" + std::to_string(static_cast<long long>(*perc_over));
    if (k) out += "/k" + std::to_string(*k);
    return out;
  }
};

struct ExperimentOutcome {
  ExperimentCell cell;
  bool ok = false;
  std::string error;
  EvalReport report;
};

inline std::vector<ExperimentCell> enumerate_experiments(const RunConfig& cfg,
                                                         const std::string& community) {
  std::vector<ExperimentCell> cells;
  for (const Variant variant : cfg.variants) {
    std::vector<std::pair<std::optional<double>, std::optional<std::size_t>>> points;
    if (!uses_oversampling(variant)) {
      points.push_back({std::nullopt, std::nullopt});
    } else if (!decomposes_majority(variant) && !decomposes_minority(variant)) {
      for (const double po : cfg.grid.perc_over) points.push_back({po, std::nullopt});
    } else {
      for (const double po : cfg.grid.perc_over) {
        for (const std::size_t k : cfg.grid.k) points.push_back({po, k});
      }
    }
    for (const auto& [po, k] : points) {
      for (const auto& classifier : cfg.classifiers) {
        ExperimentCell cell;
        cell.community = community;
        cell.variant = variant;
        cell.classifier = classifier;
        cell.perc_over = po;
        cell.k = k;
        cell.tau = cfg.grid.tau;
        cells.push_back(std::move(cell));
      }
    }
  }
  return cells;
}

inline ExperimentSpec to_experiment_spec(const ExperimentCell& cell, const RunConfig& cfg) {
  ExperimentSpec spec;
  spec.variant = cell.variant;
  spec.classifier = cell.classifier;
  if (cell.perc_over) {
    spec.amotre_cfg.perc_over = *cell.perc_over;
    spec.smote_cfg.perc_over = *cell.perc_over;
  }
  spec.amotre_cfg.tau = cell.tau;
  spec.smote_cfg.k_smote = cfg.k_smote;
  spec.smote_cfg.perc_under = cfg.perc_under;
  if (cell.k) {
    spec.k_majority = *cell.k;
    spec.k_minority = *cell.k;
  }
  // one fold split per community: every variant is scored on the same folds
  spec.fold_seed = derive_seed(cfg.seed, cell.community + "/folds");
  spec.seed = derive_seed(cfg.seed, cell.id());
  return spec;
}

// ---------------------------------------------------------------------------
// Results document and report tables
// ---------------------------------------------------------------------------

namespace runner_detail {

inline nlohmann::json measures_json(const Measures& m) {
  return {{"p", m.p},   {"p_t", m.p_t}, {"tp_t", m.tp_t}, {"fn_t", m.fn_t},
          {"fp", m.fp}, {"tn", m.tn},   {"f1", m.f1}};
}

inline nlohmann::json outcome_json(const ExperimentOutcome& o) {
  nlohmann::json j;
  j["variant"] = variant_name(o.cell.variant);
  j["classifier"] = o.cell.classifier.id();
  j["perc_over"] = o.cell.perc_over ? nlohmann::json(*o.cell.perc_over) : nlohmann::json();
  j["k"] = o.cell.k ? nlohmann::json(*o.cell.k) : nlohmann::json();
  j["tau"] = uses_amotre(o.cell.variant) ? nlohmann::json(o.cell.tau) : nlohmann::json();
  if (o.ok) {
    j["aggregate"] = measures_json(o.report.aggregate);
    nlohmann::json folds = nlohmann::json::array();
    for (const auto& fold : o.report.per_fold) folds.push_back(measures_json(fold));
    j["folds"] = folds;
  } else {
    j["aggregate"] = nullptr;
    j["folds"] = nullptr;
    j["error"] = o.error;
  }
  return j;
}

inline std::string format_f1(double f1) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%.4f", f1);
  return buf;
}

}  // namespace runner_detail

/// Renders the three per-community report tables from the results document.
/// Both `run` and `report` go through this function, so re-rendering from
/// the machine-readable file reproduces the tables byte for byte.
inline std::map<std::string, std::string> render_tables(const nlohmann::json& results) {
  std::map<std::string, std::string> files;

  for (const auto& [community, body] : results.at("communities").items()) {
    const auto& experiments = body.at("experiments");

    // collect variant order as first-seen and classifier order from config
    std::vector<std::string> variant_order;
    std::vector<std::string> classifier_order;
    for (const auto& e : experiments) {
      const std::string v = e.at("variant");
      if (std::find(variant_order.begin(), variant_order.end(), v) == variant_order.end())
        variant_order.push_back(v);
      const std::string c = e.at("classifier");
      if (std::find(classifier_order.begin(), classifier_order.end(), c) ==
          classifier_order.end())
        classifier_order.push_back(c);
    }

    // Table of the maximum TP_T per variant with the classifiers achieving it
    std::ostringstream max_tp;
    max_tp << "variant,tp_t,p_t,classifiers\n";
    for (const auto& v : variant_order) {
      long best = -1;
      long p_t = 0;
      std::vector<std::string> who;
      for (const auto& e : experiments) {
        if (e.at("variant") != v || e.at("aggregate").is_null()) continue;
        const long tp = e.at("aggregate").at("tp_t").get<long>();
        if (tp > best) {
          best = tp;
          p_t = e.at("aggregate").at("p_t").get<long>();
          who.clear();
        }
        if (tp == best) {
          const std::string c = e.at("classifier");
          if (std::find(who.begin(), who.end(), c) == who.end()) who.push_back(c);
        }
      }
      max_tp << v << ',' << (best < 0 ? "" : std::to_string(best)) << ','
             << (best < 0 ? "" : std::to_string(p_t)) << ',' << '"';
      for (std::size_t i = 0; i < who.size(); ++i) max_tp << (i ? ";" : "") << who[i];
      max_tp << '"' << '\n';
    }
    files[community + "_max_tp.csv"] = max_tp.str();

    // Table of the minimum FP per variant
    std::ostringstream min_fp;
    min_fp << "variant,fp,classifiers\n";
    for (const auto& v : variant_order) {
      long best = -1;
      std::vector<std::string> who;
      for (const auto& e : experiments) {
        if (e.at("variant") != v || e.at("aggregate").is_null()) continue;
        const long fp = e.at("aggregate").at("fp").get<long>();
        if (best < 0 || fp < best) {
          best = fp;
          who.clear();
        }
        if (fp == best) {
          const std::string c = e.at("classifier");
          if (std::find(who.begin(), who.end(), c) == who.end()) who.push_back(c);
        }
      }
      min_fp << v << ',' << (best < 0 ? "" : std::to_string(best)) << ',' << '"';
      for (std::size_t i = 0; i < who.size(); ++i) min_fp << (i ? ";" : "") << who[i];
      min_fp << '"' << '\n';
    }
    files[community + "_min_fp.csv"] = min_fp.str();

    // Full F1 matrix at the canonical grid point (the first grid values)
    std::ostringstream f1;
    f1 << "variant";
    for (const auto& c : classifier_order) f1 << ',' << c;
    f1 << '\n';
    for (const auto& v : variant_order) {
      f1 << v;
      for (const auto& c : classifier_order) {
        std::string cell;
        for (const auto& e : experiments) {
          if (e.at("variant") != v || e.at("classifier") != c) continue;
          if (!e.at("canonical").get<bool>()) continue;
          if (!e.at("aggregate").is_null())
            cell = runner_detail::format_f1(e.at("aggregate").at("f1").get<double>());
          break;
        }
        f1 << ',' << cell;
      }
      f1 << '\n';
    }
    files[community + "_f1.csv"] = f1.str();
  }
  return files;
}

struct RunResult {
  nlohmann::json results;
  std::filesystem::path results_path;
  std::vector<std::filesystem::path> table_paths;
};

/// Executes the configured experiment matrix end to end and writes
/// results.json plus the per-community report tables under out_dir.
inline RunResult run(const RunConfig& cfg) {
  cfg.validate();
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);

  // data: either generate into out_dir/data or point at existing logs
  std::string data_dir;
  GroundTruth truth;
  if (cfg.synth_cfg) {
    data_dir = (fs::path(cfg.out_dir) / "data").string();
    log_info("generating synthetic logs into " + data_dir);
    truth = generate(*cfg.synth_cfg, data_dir);
  } else {
    data_dir = *cfg.log_dir;
    truth = load_ground_truth((fs::path(data_dir) / "insiders.csv").string());
  }
  const auto roles = load_roles((fs::path(data_dir) / "roles.csv").string());
  const auto parsed = parse_logs(log_paths(data_dir), cfg.schema_map);
  log_info("parsed " + std::to_string(parsed.events.size()) + " events (" +
           std::to_string(parsed.skipped_rows) + " rows skipped)");

  std::vector<std::string> communities = cfg.communities;
  if (communities.empty()) {
    std::set<std::string> distinct;
    for (const auto& [user, role] : roles) distinct.insert(role);
    communities.assign(distinct.begin(), distinct.end());
  }

  nlohmann::json results;
  results["seed"] = cfg.seed;
  results["communities"] = nlohmann::json::object();

  std::map<std::string, std::map<std::string, std::array<double, 2>>>
      fold_tp;  // variant -> community/classifier -> per-fold tp_t of the best cell
  std::map<std::string, std::map<std::string, long>> best_tp;  // for best-cell selection

  for (const auto& community : communities) {
    const CommunityDataset dataset =
        build_dataset(parsed.events, roles, community, truth, cfg.slot_hours, cfg.features);
    const auto [majority, minority] = split_by_label(dataset);
    log_info(community + ": " + std::to_string(dataset.instances.size()) + " instances, M=" +
             std::to_string(majority.size()) + ", I=" + std::to_string(minority.size()));

    auto cells = enumerate_experiments(cfg, community);
    std::vector<ExperimentOutcome> outcomes(cells.size());

    std::atomic<std::size_t> next{0};
    const std::size_t workers = std::min(cfg.jobs, cells.size());
    auto work = [&]() {
      for (;;) {
        const std::size_t at = next.fetch_add(1);
        if (at >= cells.size()) return;
        ExperimentOutcome& out = outcomes[at];
        out.cell = cells[at];
        try {
          const ExperimentSpec spec = to_experiment_spec(cells[at], cfg);
          out.report = run_experiment(spec, dataset);
          out.ok = true;
          log_debug(cells[at].id() + ": tp_t=" + std::to_string(out.report.aggregate.tp_t) +
                    " fp=" + std::to_string(out.report.aggregate.fp));
        } catch (const std::exception& e) {
          out.ok = false;
          out.error = e.what();
          log_warn(cells[at].id() + " failed: " + out.error);
        }
      }
    };
    if (workers <= 1) {
      work();
    } else {
      std::vector<std::thread> pool;
      for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
      for (auto& t : pool) t.join();
    }

    // canonical grid point = first perc_over and first k of the grid
    const double canon_po = cfg.grid.perc_over.front();
    const std::size_t canon_k = cfg.grid.k.front();

    nlohmann::json body;
    body["instances"] = dataset.instances.size();
    body["majority"] = majority.size();
    body["minority"] = minority.size();
    std::set<std::string> threat_ids;
    for (const auto& inst : minority) threat_ids.insert(*inst.threat_id);
    body["p_t"] = threat_ids.size();

    nlohmann::json records = nlohmann::json::array();
    for (const auto& out : outcomes) {
      nlohmann::json j = runner_detail::outcome_json(out);
      const bool canonical = (!out.cell.perc_over || *out.cell.perc_over == canon_po) &&
                             (!out.cell.k || *out.cell.k == canon_k);
      j["canonical"] = canonical;
      records.push_back(std::move(j));

      if (out.ok) {
        const std::string vkey = variant_name(out.cell.variant);
        const std::string pkey = community + "/" + out.cell.classifier.id();
        auto& best = best_tp[vkey];
        const long tp = static_cast<long>(out.report.aggregate.tp_t);
        const auto it = best.find(pkey);
        if (it == best.end() || tp > it->second) {
          best[pkey] = tp;
          fold_tp[vkey][pkey] = {static_cast<double>(out.report.per_fold[0].tp_t),
                                 static_cast<double>(out.report.per_fold[1].tp_t)};
        }
      }
    }
    body["experiments"] = std::move(records);

    if (cfg.save_models) {
      // retrain the canonical default cell per classifier and persist blobs
      fs::create_directories(fs::path(cfg.out_dir) / "models");
      for (const auto& classifier : cfg.classifiers) {
        ExperimentCell cell;
        cell.community = community;
        cell.classifier = classifier;
        const ExperimentSpec spec = to_experiment_spec(cell, cfg);
        LabelSpace space;
        std::vector<Instance> instances = dataset.instances;
        const auto labels = effective_labels(instances, false, 1, false, 1, space);
        ClassifierSpec cls = spec.classifier;
        cls.seed = derive_seed(spec.seed, "model-cache");
        const Model model =
            train(cls, feature_matrix(instances), labels, dataset.schema.fingerprint());
        std::ofstream blob(fs::path(cfg.out_dir) / "models" /
                               (community + "_" + classifier.id() + ".bin"),
                           std::ios::binary);
        save_model(model, blob);
      }
    }

    results["communities"][community] = std::move(body);
  }

  // Wilcoxon: Default against the strongest oversampling/decomposition
  // variant, paired per (community, classifier, fold) on TP_T
  {
    nlohmann::json w;
    std::string best_variant;
    long best_total = -1;
    for (const auto& [vkey, per_pair] : best_tp) {
      if (vkey == variant_name(Variant::default_)) continue;
      long total = 0;
      for (const auto& [pkey, tp] : per_pair) total += tp;
      if (total > best_total) {
        best_total = total;
        best_variant = vkey;
      }
    }
    w["baseline"] = variant_name(Variant::default_);
    w["best_variant"] = best_variant.empty() ? nlohmann::json() : nlohmann::json(best_variant);
    w["p_value"] = nullptr;
    if (!best_variant.empty() && fold_tp.count(variant_name(Variant::default_))) {
      std::vector<double> x, y;
      for (const auto& [pkey, folds] : fold_tp[best_variant]) {
        const auto& base = fold_tp[variant_name(Variant::default_)];
        const auto it = base.find(pkey);
        if (it == base.end()) continue;
        for (int f = 0; f < 2; ++f) {
          x.push_back(folds[f]);
          y.push_back(it->second[f]);
        }
      }
      w["pairs"] = x.size();
      try {
        w["p_value"] = wilcoxon_signed_rank(x, y);
      } catch (const std::invalid_argument& e) {
        w["reason"] = e.what();
      }
    } else {
      w["reason"] = "baseline or comparison variant missing from the matrix";
    }
    results["wilcoxon_tp_t"] = std::move(w);
  }

  RunResult out;
  out.results = std::move(results);
  out.results_path = fs::path(cfg.out_dir) / "results.json";
  {
    std::ofstream f(out.results_path);
    if (!f) throw std::runtime_error("cannot write " + out.results_path.string());
    f << out.results.dump(2) << '\n';
  }
  for (const auto& [name, content] : render_tables(out.results)) {
    const fs::path p = fs::path(cfg.out_dir) / name;
    std::ofstream f(p);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    f << content;
    out.table_paths.push_back(p);
  }
  return out;
}

}  // namespace anythreat
