#include <catch2/catch_amalgamated.hpp>

#include "anythreat/datamodel.hpp"
#include "anythreat/rng.hpp"

using namespace anythreat;

namespace {

FeatureSchema schema1() {
  FeatureSchema s;
  s.names = {"f0"};
  s.groups = {FeatureGroup::frequency};
  return s;
}

Instance make(double v, Label label, const std::string& user = "u") {
  Instance inst;
  inst.user = user;
  inst.x = {v};
  inst.label = label;
  if (label == Label::Anomalous) inst.threat_id = user;
  return inst;
}

CommunityDataset column_dataset(const std::vector<double>& col) {
  CommunityDataset d;
  d.role = "test";
  d.schema = schema1();
  for (const double v : col) d.instances.push_back(make(v, Label::Normal));
  return d;
}

}  // namespace

TEST_CASE("split_by_label partitions by label and preserves order") {
  CommunityDataset d;
  d.role = "com-I";
  d.schema = schema1();
  for (int i = 0; i < 2964; ++i) d.instances.push_back(make(i, Label::Normal));
  for (int i = 0; i < 132; ++i) d.instances.push_back(make(i, Label::Anomalous, "t" + std::to_string(i)));
  Rng rng(7);
  rng.shuffle(d.instances);

  const auto [majority, minority] = split_by_label(d);
  CHECK(majority.size() == 2964);
  CHECK(minority.size() == 132);
  CHECK(majority.size() + minority.size() == d.instances.size());

  // order within each side matches dataset order
  std::size_t mi = 0, ii = 0;
  for (const auto& inst : d.instances) {
    if (inst.label == Label::Normal) {
      CHECK(majority[mi++].x == inst.x);
    } else {
      CHECK(minority[ii++].x == inst.x);
    }
  }
}

TEST_CASE("split_by_label degenerate datasets") {
  CommunityDataset empty;
  empty.schema = schema1();
  const auto [m0, i0] = split_by_label(empty);
  CHECK(m0.empty());
  CHECK(i0.empty());

  CommunityDataset all_normal = column_dataset({1, 2, 3});
  const auto [m1, i1] = split_by_label(all_normal);
  CHECK(m1.size() == 3);
  CHECK(i1.empty());
}

TEST_CASE("normalize maps columns to [0,1] by min-max") {
  auto d = normalize(column_dataset({0, 5, 10}));
  CHECK(d.instances[0].x[0] == 0.0);
  CHECK(d.instances[1].x[0] == 0.5);
  CHECK(d.instances[2].x[0] == 1.0);
  CHECK(d.normalized);
  CHECK(d.feature_min[0] == 0.0);
  CHECK(d.feature_max[0] == 10.0);

  auto c = normalize(column_dataset({3, 3, 3}));
  for (const auto& inst : c.instances) CHECK(inst.x[0] == 0.0);

  auto h = normalize(column_dataset({2, 4, 8}));
  CHECK(h.instances[0].x[0] == 0.0);
  CHECK(h.instances[1].x[0] == Catch::Approx(1.0 / 3.0).margin(1e-15));
  CHECK(h.instances[2].x[0] == 1.0);
}

TEST_CASE("normalize is idempotent and order preserving") {
  Rng rng(42);
  std::vector<double> col;
  for (int i = 0; i < 50; ++i) col.push_back(rng.next_unit() * 100.0 - 20.0);
  const auto once = normalize(column_dataset(col));
  const auto twice = normalize(once);
  for (std::size_t i = 0; i < col.size(); ++i) {
    CHECK(once.instances[i].x[0] == twice.instances[i].x[0]);
    CHECK(once.instances[i].x[0] >= 0.0);
    CHECK(once.instances[i].x[0] <= 1.0);
  }
  for (std::size_t a = 0; a < col.size(); ++a) {
    for (std::size_t b = 0; b < col.size(); ++b) {
      if (col[a] < col[b]) CHECK(once.instances[a].x[0] <= once.instances[b].x[0]);
    }
  }
}

TEST_CASE("dataset validation rejects inconsistent threat attribution") {
  CommunityDataset d = column_dataset({1, 2});
  d.instances[0].label = Label::Anomalous;  // no threat_id attached
  CHECK_THROWS_AS(d.validate(), std::invalid_argument);

  d.instances[0].threat_id = "t1";
  CHECK_NOTHROW(d.validate());

  d.instances[1].threat_id = "t2";  // Normal with threat_id
  CHECK_THROWS_AS(d.validate(), std::invalid_argument);
}

TEST_CASE("schema validation") {
  FeatureSchema s;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s.names = {"a", "a"};
  s.groups = {FeatureGroup::frequency, FeatureGroup::time};
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s.names = {"a", "b"};
  CHECK_NOTHROW(s.validate());
  FeatureSchema t = s;
  CHECK(s.fingerprint() == t.fingerprint());
  t.names[1] = "c";
  CHECK(s.fingerprint() != t.fingerprint());
}
