#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "anythreat/synth.hpp"

using namespace anythreat;

namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  explicit TempDir(const char* tag) {
    path = fs::temp_directory_path() /
           (std::string("anythreat_synth_") + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

SynthConfig small_cfg() {
  SynthConfig cfg;
  cfg.n_users = 24;
  cfg.n_insiders = 4;
  cfg.days = 30;
  cfg.seed = 42;
  return cfg;
}

}  // namespace

TEST_CASE("generation is byte-identical under a fixed seed") {
  TempDir a("a"), b("b"), c("c");
  const SynthConfig cfg = small_cfg();
  generate(cfg, a.path.string());
  generate(cfg, b.path.string());

  const char* files[] = {"logon.csv", "device.csv", "file.csv", "http.csv",
                         "email.csv", "roles.csv",  "insiders.csv", "manifest.json"};
  for (const char* f : files) {
    INFO(f);
    REQUIRE(fs::exists(a.path / f));
    CHECK(slurp(a.path / f) == slurp(b.path / f));
  }

  SynthConfig other = cfg;
  other.seed = 43;
  generate(other, c.path.string());
  CHECK(slurp(a.path / "logon.csv") != slurp(c.path / "logon.csv"));
}

TEST_CASE("no insiders means an empty ground truth and an all-normal dataset") {
  TempDir dir("none");
  SynthConfig cfg = small_cfg();
  cfg.n_insiders = 0;
  const GroundTruth truth = generate(cfg, dir.path.string());
  CHECK(truth.insiders.empty());

  const auto parsed = parse_logs(log_paths(dir.path.string()));
  const auto roles = load_roles((dir.path / "roles.csv").string());
  const auto d = build_dataset(parsed.events, roles, "itadmin", truth);
  const auto [majority, minority] = split_by_label(d);
  CHECK(minority.empty());
  CHECK(majority.size() == d.instances.size());
}

TEST_CASE("scenario subsets carry through to the ground truth") {
  TempDir dir("s23");
  SynthConfig cfg;
  cfg.n_users = 80;
  cfg.n_insiders = 12;
  cfg.days = 40;
  cfg.scenarios = {"s2", "s3"};
  cfg.seed = 7;
  const GroundTruth truth = generate(cfg, dir.path.string());
  CHECK(truth.insiders.size() == 12);
  for (const auto& [user, w] : truth.insiders) {
    CHECK((w.scenario == "s2" || w.scenario == "s3"));
    CHECK(w.start <= w.end);
  }
}

TEST_CASE("generated corpus ingests with healthy imbalance and threat coverage") {
  TempDir dir("shape");
  SynthConfig cfg;  // defaults: 80 users, 12 insiders, 60 days
  const GroundTruth truth = generate(cfg, dir.path.string());
  REQUIRE(truth.insiders.size() == 12);

  const auto parsed = parse_logs(log_paths(dir.path.string()));
  const auto roles = load_roles((dir.path / "roles.csv").string());
  const auto loaded = load_ground_truth((dir.path / "insiders.csv").string());
  REQUIRE(loaded.insiders.size() == truth.insiders.size());

  const CommunityDataset d = build_dataset(parsed.events, roles, "itadmin", loaded);
  const auto [majority, minority] = split_by_label(d);
  REQUIRE(!minority.empty());

  // every insider contributes at least 3 anomalous instances
  std::map<std::string, std::size_t> per_threat;
  for (const auto& inst : minority) ++per_threat[*inst.threat_id];
  CHECK(per_threat.size() == 12);
  for (const auto& [user, count] : per_threat) {
    INFO(user);
    CHECK(count >= 3);
  }

  // class imbalance in the target band
  const double ratio =
      static_cast<double>(minority.size()) / static_cast<double>(majority.size());
  INFO("imbalance " << ratio);
  CHECK(ratio >= 0.02);
  CHECK(ratio <= 0.15);
}
