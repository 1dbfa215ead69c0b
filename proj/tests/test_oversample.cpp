#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "anythreat/oversample.hpp"
#include "anythreat/rng.hpp"

using namespace anythreat;

namespace {

struct ScriptedRng {
  std::vector<double> units;
  std::size_t at = 0;
  double next_unit() { return units.at(at++); }
};

Instance inst(std::vector<double> x, Label label = Label::Anomalous,
              const std::string& user = "u1") {
  Instance out;
  out.user = user;
  out.x = std::move(x);
  out.label = label;
  if (label == Label::Anomalous) out.threat_id = user;
  return out;
}

std::vector<Instance> blob(Rng& rng, std::size_t n, double cx, double cy, double spread,
                           Label label) {
  std::vector<Instance> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(inst({cx + spread * (rng.next_unit() - 0.5), cy + spread * (rng.next_unit() - 0.5)},
                       label, "u" + std::to_string(i)));
  }
  return out;
}

}  // namespace

TEST_CASE("per_feature_neighbors basic geometry") {
  std::vector<Instance> majority = {inst({0.2}, Label::Normal), inst({0.9}, Label::Normal)};

  auto nb = per_feature_neighbors(0.5, majority, 0);
  REQUIRE(nb.pos.has_value());
  REQUIRE(nb.neg.has_value());
  CHECK(*nb.pos == Catch::Approx(0.4));
  CHECK(*nb.neg == Catch::Approx(0.3));

  nb = per_feature_neighbors(0.1, majority, 0);
  REQUIRE(nb.pos.has_value());
  CHECK_FALSE(nb.neg.has_value());
  CHECK(*nb.pos == Catch::Approx(0.1));

  nb = per_feature_neighbors(0.9, majority, 0);  // tie counts as positive side
  REQUIRE(nb.pos.has_value());
  CHECK(*nb.pos == 0.0);
  REQUIRE(nb.neg.has_value());
  CHECK(*nb.neg == Catch::Approx(0.7));
}

TEST_CASE("generate_sample reproduces the worked clamp trace") {
  // only a negative neighbour at distance 0.5; scripted draws force dirS=-1
  // and a step of 0.12, so the raw value -0.02 clamps to min_f
  const Instance parent = inst({0.1});
  const std::vector<Instance> majority = {inst({-0.4}, Label::Normal)};
  AmotreConfig cfg;
  ScriptedRng rng{{0.9, 0.8}};
  SampleTrace trace;
  const Instance s = generate_sample(parent, majority, cfg, rng, {0.05}, &trace);

  CHECK(trace.features[0].which == NeighborCase::only_neg);
  CHECK(trace.features[0].dir == -1);
  CHECK(trace.features[0].lambda == Catch::Approx(0.3));
  CHECK(trace.features[0].dist == Catch::Approx(0.5));
  CHECK(trace.features[0].raw == Catch::Approx(-0.02));
  CHECK(s.x[0] == Catch::Approx(0.05));
  CHECK(s.label == Label::Anomalous);
  CHECK(s.synthetic);
  CHECK(s.threat_id == parent.threat_id);
}

TEST_CASE("generate_sample respects the lambda/dirS case table") {
  // f0: parent below all majority -> only_pos; f1: above all -> only_neg;
  // f2: majority on both sides -> both
  const Instance parent = inst({0.1, 0.9, 0.5});
  std::vector<Instance> majority = {
      inst({0.4, 0.2, 0.3}, Label::Normal),
      inst({0.7, 0.5, 0.8}, Label::Normal),
  };
  AmotreConfig cfg;
  const std::vector<double> clamp_min = {0.1, 0.9, 0.5};

  Rng rng(derive_seed(1, "case-table"));
  int plus[3] = {0, 0, 0};
  const int n = 10000;
  for (int it = 0; it < n; ++it) {
    SampleTrace trace;
    const Instance s = generate_sample(parent, majority, cfg, rng, clamp_min, &trace);

    // only_pos: pos dist 0.3; toward (dir=+1) allows 0.3*0.3, away allows 1.0*0.3
    CHECK(trace.features[0].which == NeighborCase::only_pos);
    if (trace.features[0].dir > 0) {
      CHECK(s.x[0] >= 0.1);
      CHECK(s.x[0] <= 0.1 + 0.3 * 0.3);
      ++plus[0];
    } else {
      CHECK(s.x[0] <= 0.1);
      CHECK(s.x[0] >= 0.1 - 1.0 * 0.3);
    }

    // only_neg: neg dist 0.4
    CHECK(trace.features[1].which == NeighborCase::only_neg);
    if (trace.features[1].dir > 0) {
      CHECK(s.x[1] >= 0.9);
      CHECK(s.x[1] <= 0.9 + 1.0 * 0.4);
      ++plus[1];
    } else {
      CHECK(s.x[1] >= 0.9 - 0.3 * 0.4);
      CHECK(s.x[1] <= 0.9);
    }

    // both: pos dist 0.3, neg dist 0.2, lambda always 0.3
    CHECK(trace.features[2].which == NeighborCase::both);
    if (trace.features[2].dir > 0) {
      CHECK(s.x[2] - 0.5 <= 0.3 * 0.3);
      CHECK(s.x[2] >= 0.5);
      ++plus[2];
    } else {
      CHECK(0.5 - s.x[2] <= 0.3 * 0.2);
      CHECK(s.x[2] <= 0.5);
    }

    for (const double v : s.x) CHECK(v >= 0.0);
  }

  CHECK(std::abs(plus[0] / double(n) - 0.2) < 0.02);
  CHECK(std::abs(plus[1] / double(n) - 0.8) < 0.02);
  CHECK(std::abs(plus[2] / double(n) - 0.5) < 0.02);
}

TEST_CASE("peculiarity computes Eq.1 and flags trappers") {
  Rng rng(77);
  // majority blob at origin; minority: deep-in-blob point + far cluster + extreme outlier
  auto majority = blob(rng, 150, 0.5, 0.5, 0.4, Label::Normal);
  std::vector<Instance> minority;
  minority.push_back(inst({0.5, 0.5}, Label::Anomalous, "deep"));
  for (int i = 0; i < 6; ++i) {
    minority.push_back(inst({3.0 + 0.01 * rng.next_unit(), 3.0 + 0.01 * rng.next_unit()},
                            Label::Anomalous, "cluster"));
  }
  minority.push_back(inst({100.0, -80.0}, Label::Anomalous, "extreme"));

  const auto res = peculiarity(minority, majority, 10.0);

  for (const auto& row : res.table.rows) {
    CHECK(row.p == Catch::Approx(row.perclof_m * row.perclof_i / 1e4));
    CHECK(row.trapper == (row.perclof_m < 10.0));
  }
  // the extreme outlier tops both rankings, giving p = 1
  const auto& extreme = res.table.rows.back();
  CHECK(extreme.perclof_m == 100);
  CHECK(extreme.perclof_i == 100);
  CHECK(extreme.p == 1.0);

  // survivors = exactly the non-trappers, order preserved
  std::size_t si = 0;
  for (std::size_t t = 0; t < res.table.rows.size(); ++t) {
    if (!res.table.rows[t].trapper) {
      REQUIRE(si < res.survivor_index.size());
      CHECK(res.survivor_index[si] == t);
      ++si;
    }
  }
  CHECK(si == res.survivors.size());
}

TEST_CASE("peculiarity errors when everything is a trapper") {
  Rng rng(3);
  auto majority = blob(rng, 80, 0.5, 0.5, 0.5, Label::Normal);
  std::vector<Instance> minority = {inst({0.5, 0.5}), inst({0.49, 0.51})};
  CHECK_THROWS_AS(peculiarity(minority, majority, 100.0), std::runtime_error);
  CHECK_NOTHROW(peculiarity(minority, majority, 0.0));
}

TEST_CASE("amotre produces exactly numS samples and is seed stable") {
  Rng rng(11);
  auto majority = blob(rng, 120, 0.3, 0.3, 0.3, Label::Normal);
  auto minority = blob(rng, 25, 2.0, 2.0, 0.8, Label::Anomalous);

  AmotreConfig cfg;
  cfg.perc_over = 200.0;
  cfg.seed = 99;
  const auto a = amotre(minority, majority, cfg);
  const auto b = amotre(minority, majority, cfg);

  CHECK(a.samples.size() == 2 * a.survivors.size());
  REQUIRE(a.samples.size() == b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(a.samples[i].x == b.samples[i].x);  // bit identical
    CHECK(a.sample_parent[i] == b.sample_parent[i]);
  }

  cfg.seed = 100;
  const auto c = amotre(minority, majority, cfg);
  bool any_different = c.samples.size() != a.samples.size();
  for (std::size_t i = 0; !any_different && i < a.samples.size(); ++i) {
    any_different = a.samples[i].x != c.samples[i].x;
  }
  CHECK(any_different);

  for (const auto& s : a.samples) {
    CHECK(s.synthetic);
    CHECK(s.label == Label::Anomalous);
    for (const double v : s.x) CHECK(v >= 0.0);
  }

  // minority_out is I_r followed by I_s
  const auto out = a.minority_out();
  CHECK(out.size() == a.survivors.size() + a.samples.size());
}

TEST_CASE("amo-na (removal disabled) equals amotre at tau = 0") {
  Rng rng(21);
  auto majority = blob(rng, 100, 0.4, 0.4, 0.4, Label::Normal);
  auto minority = blob(rng, 12, 1.5, 1.5, 1.0, Label::Anomalous);
  minority.push_back(inst({0.4, 0.4}, Label::Anomalous, "embedded"));

  AmotreConfig na;
  na.remove_trappers = false;
  na.tau = 10.0;
  na.seed = 5;
  AmotreConfig zero;
  zero.remove_trappers = true;
  zero.tau = 0.0;
  zero.seed = 5;

  const auto a = amotre(minority, majority, na);
  const auto b = amotre(minority, majority, zero);
  CHECK(a.survivors.size() == minority.size());
  REQUIRE(a.samples.size() == b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(a.samples[i].x == b.samples[i].x);
  }
}

TEST_CASE("selection rate tracks peculiarity within 0.02") {
  const std::vector<double> p = {1.0, 0.25, 0.6, 0.04, 0.0};
  Rng rng(17);
  std::vector<int> hits(p.size(), 0);
  const int rounds = 20000;
  for (int r = 0; r < rounds; ++r) {
    for (const std::size_t t : oversample_detail::select_round(p, rng)) ++hits[t];
  }
  for (std::size_t t = 0; t < p.size(); ++t) {
    CHECK(std::abs(hits[t] / double(rounds) - p[t]) < 0.02);
  }
}

TEST_CASE("deterministic selection fills numS in perc_over/100 rounds") {
  // with p = 1 everywhere each round selects every survivor once
  const std::vector<double> p(50, 1.0);
  Rng rng(1);
  std::size_t generated = 0;
  std::size_t rounds = 0;
  const std::size_t num_s = static_cast<std::size_t>(200.0 / 100.0 * 50);
  while (generated < num_s) {
    ++rounds;
    generated += oversample_detail::select_round(p, rng).size();
  }
  CHECK(num_s == 100);
  CHECK(rounds == 2);
}

TEST_CASE("smote counts, segment membership, and degenerate segment") {
  Rng rng(31);
  auto minority = blob(rng, 132, 1.0, 1.0, 0.6, Label::Anomalous);

  SmoteConfig cfg;
  cfg.perc_over = 200.0;
  cfg.seed = 4;
  const auto res = smote(minority, cfg);
  CHECK(res.samples.size() == 264);

  // every sample lies on a segment joining its parent and one of the
  // parent's k nearest minority neighbours (recomputed here by full sort)
  const auto xi = feature_matrix(minority);
  for (std::size_t s = 0; s < res.samples.size(); ++s) {
    const std::size_t parent = res.sample_parent[s];
    std::vector<std::pair<double, std::size_t>> order;
    for (std::size_t j = 0; j < xi.size(); ++j) {
      if (j == parent) continue;
      double d2 = 0.0;
      for (std::size_t f = 0; f < xi[j].size(); ++f) {
        d2 += (xi[j][f] - xi[parent][f]) * (xi[j][f] - xi[parent][f]);
      }
      order.emplace_back(d2, j);
    }
    std::sort(order.begin(), order.end());

    double best = 1e300;
    for (std::size_t r = 0; r < cfg.k_smote; ++r) {
      const auto& nx = xi[order[r].second];
      const auto& px = xi[parent];
      // distance from sample to segment px -> nx
      double dot = 0.0, len2 = 0.0;
      for (std::size_t f = 0; f < px.size(); ++f) {
        dot += (res.samples[s].x[f] - px[f]) * (nx[f] - px[f]);
        len2 += (nx[f] - px[f]) * (nx[f] - px[f]);
      }
      const double tt = len2 > 0 ? std::clamp(dot / len2, 0.0, 1.0) : 0.0;
      double d2 = 0.0;
      for (std::size_t f = 0; f < px.size(); ++f) {
        const double proj = px[f] + tt * (nx[f] - px[f]);
        d2 += (res.samples[s].x[f] - proj) * (res.samples[s].x[f] - proj);
      }
      best = std::min(best, std::sqrt(d2));
    }
    CHECK(best < 1e-9);
  }

  // identical parent and neighbours: the sample degenerates to the parent
  std::vector<Instance> dup(7, inst({0.3, 0.7}));
  SmoteConfig small;
  small.perc_over = 100.0;
  small.k_smote = 5;
  const auto res2 = smote(dup, small);
  for (const auto& s : res2.samples) {
    CHECK(s.x[0] == Catch::Approx(0.3));
    CHECK(s.x[1] == Catch::Approx(0.7));
  }

  SmoteConfig bad;
  bad.k_smote = 200;
  CHECK_THROWS_AS(smote(minority, bad), std::invalid_argument);
}

TEST_CASE("smote undersampling keeps the documented count") {
  Rng rng(8);
  auto majority = blob(rng, 500, 0.5, 0.5, 0.4, Label::Normal);

  const auto kept = smote_undersample(majority, 60, 300.0, 7);
  CHECK(kept.size() == 180);

  const auto again = smote_undersample(majority, 60, 300.0, 7);
  for (std::size_t i = 0; i < kept.size(); ++i) CHECK(kept[i].x == again[i].x);

  // exact-size request returns M itself (order preserved by construction)
  const auto all = smote_undersample(majority, 500, 100.0, 9);
  REQUIRE(all.size() == majority.size());
  for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i].x == majority[i].x);

  CHECK_THROWS_AS(smote_undersample(majority, 501, 100.0, 1), std::invalid_argument);
}
