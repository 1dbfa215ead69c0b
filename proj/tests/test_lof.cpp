#include <catch2/catch_amalgamated.hpp>

#include "anythreat/lof.hpp"
#include "anythreat/rng.hpp"
#include "oracles.hpp"

using namespace anythreat;

namespace {

Matrix random_points(Rng& rng, std::size_t n, std::size_t m, double scale = 1.0) {
  Matrix pts(n, Point(m));
  for (auto& p : pts) {
    for (auto& v : p) v = rng.next_unit() * scale;
  }
  return pts;
}

}  // namespace

TEST_CASE("lof matches the brute-force oracle on randomized fixtures") {
  Rng rng(20260810);
  for (int rep = 0; rep < 25; ++rep) {
    const std::size_t n = 10 + rng.below(191);  // up to 200
    const std::size_t m = 1 + rng.below(10);
    const std::size_t k = 1 + rng.below(std::min<std::size_t>(n - 1, 15));
    const Matrix ref = random_points(rng, n, m);

    // fresh queries
    const Matrix queries = random_points(rng, 20, m);
    const auto got = lof_scores(ref, queries, k, false);
    const auto want = oracle::brute_lof(ref, queries, k, false);
    for (std::size_t i = 0; i < queries.size(); ++i) {
      CHECK(got[i] == Catch::Approx(want[i]).margin(1e-9));
    }

    // the reference population against itself
    const auto got_self = lof_scores(ref, ref, k, true);
    const auto want_self = oracle::brute_lof(ref, ref, k, true);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(got_self[i] == Catch::Approx(want_self[i]).margin(1e-9));
    }
  }
}

TEST_CASE("lof of an interior point of a uniform grid is near 1") {
  Matrix grid;
  for (int i = 0; i < 10; ++i) grid.push_back({static_cast<double>(i)});
  const auto s = lof_scores(grid, {{4.5}}, 3, false);
  CHECK(s[0] == Catch::Approx(1.0).margin(0.15));
}

TEST_CASE("lof of a query coincident with identical reference points is 1") {
  Matrix ref = {{2.0, 2.0}, {2.0, 2.0}, {2.0, 2.0}, {9.0, 9.0}};
  const auto s = lof_scores(ref, {{2.0, 2.0}}, 3, false);
  CHECK(s[0] == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("far isolated query scores well above a tight cluster") {
  const Matrix cluster = {{0.0, 0.0}, {0.1, 0.0}, {0.0, 0.1}, {0.1, 0.1}, {0.05, 0.05}};
  const auto s = lof_scores(cluster, {{5.0, 5.0}}, 3, false);
  CHECK(s[0] > 2.0);
  const auto check = oracle::brute_lof(cluster, {{5.0, 5.0}}, 3, false);
  CHECK(s[0] == Catch::Approx(check[0]).margin(1e-9));
}

TEST_CASE("lof_scores validates k") {
  const Matrix ref = {{0.0}, {1.0}, {2.0}};
  CHECK_THROWS_AS(lof_scores(ref, ref, 0, true), std::invalid_argument);
  CHECK_THROWS_AS(lof_scores(ref, ref, 3, true), std::invalid_argument);
  CHECK_NOTHROW(lof_scores(ref, ref, 2, true));
  CHECK_NOTHROW(lof_scores(ref, {{0.5}}, 3, false));
  CHECK_THROWS_AS(lof_scores(ref, {{0.5}}, 4, false), std::invalid_argument);
}

TEST_CASE("k thumb rules round half up") {
  CHECK(lof_k_for_majority(99) == 10);   // sqrt(100)
  CHECK(lof_k_for_majority(2963) == 54); // sqrt(2964) = 54.44
  CHECK(lof_k_for_minority(132) == 11);  // sqrt(132) = 11.489
  CHECK(lof_k_for_minority(2) == 1);
}

TEST_CASE("lof_m of a minority point inside a dense majority cluster is low") {
  Rng rng(99);
  Matrix majority;
  for (int i = 0; i < 99; ++i) {
    majority.push_back({rng.next_unit() * 0.2, rng.next_unit() * 0.2});
  }
  const Matrix embedded = {{0.1, 0.1}};
  const Matrix faraway = {{5.0, 5.0}};

  const auto lof_in = lof_m_scores(embedded, majority);
  const auto lof_out = lof_m_scores(faraway, majority);
  const auto refs = majority_reference_scores(majority);

  CHECK(lof_in[0] == Catch::Approx(1.0).margin(0.25));  // near the cluster baseline
  CHECK(percentile_rank(lof_out[0], refs) == 100);      // top of the majority population
  CHECK(lof_out[0] > 2.0);
  CHECK(lof_in[0] < lof_out[0]);
}

TEST_CASE("lof_i handles coincident minority pair") {
  const Matrix two = {{1.0, 1.0}, {1.0, 1.0}};
  const auto s = lof_i_scores(two);  // k = round(sqrt(2)) = 1
  CHECK(s[0] == Catch::Approx(1.0).margin(1e-12));
  CHECK(s[1] == Catch::Approx(1.0).margin(1e-12));

  CHECK_THROWS_AS(lof_i_scores({{1.0}}), std::invalid_argument);
}

TEST_CASE("an extreme minority outlier gets the maximum lof_i") {
  Matrix minority = {{0.0, 0.0}, {0.1, 0.1}, {0.2, 0.0}, {0.0, 0.2}, {8.0, 8.0}};
  const auto s = lof_i_scores(minority);
  std::size_t argmax = 0;
  for (std::size_t i = 1; i < s.size(); ++i) {
    if (s[i] > s[argmax]) argmax = i;
  }
  CHECK(argmax == 4);
}

TEST_CASE("percentile rank matches the worked cases") {
  std::vector<double> refs;
  for (int i = 0; i < 100; ++i) refs.push_back(static_cast<double>(i));  // 0..99
  CHECK(percentile_rank(1000.0, refs) == 100);
  CHECK(percentile_rank(70.0, refs) == 70);  // exceeds exactly 70 of 100
  CHECK(percentile_rank(-5.0, refs) == 0);
}

TEST_CASE("percentile rank is monotone in score") {
  Rng rng(5);
  std::vector<double> refs;
  for (int i = 0; i < 57; ++i) refs.push_back(rng.next_unit());
  double prev = -1.0;
  int prev_rank = 0;
  for (int step = 0; step <= 40; ++step) {
    const double score = -0.2 + 1.4 * step / 40.0;
    const int rank = percentile_rank(score, refs);
    if (prev >= -1.0) {
      CHECK(rank >= prev_rank);
    }
    prev = score;
    prev_rank = rank;
  }
}

TEST_CASE("the three outlierness regimes separate as expected") {
  Rng rng(1234);
  // majority: dense blob around origin
  Matrix majority;
  for (int i = 0; i < 120; ++i) {
    majority.push_back({rng.next_unit(), rng.next_unit()});
  }
  // minority: a far tight cluster, one extreme isolated point, one embedded point
  Matrix minority;
  for (int i = 0; i < 8; ++i) {
    minority.push_back({6.0 + 0.02 * rng.next_unit(), 6.0 + 0.02 * rng.next_unit()});
  }
  minority.push_back({40.0, -30.0});     // extreme outlier
  minority.push_back({0.5, 0.5});        // inside the majority blob

  const auto lof_m = lof_m_scores(minority, majority);
  const auto lof_i = lof_i_scores(minority);
  const auto m_refs = majority_reference_scores(majority);

  std::vector<int> perc_m, perc_i;
  for (std::size_t t = 0; t < minority.size(); ++t) {
    perc_m.push_back(percentile_rank(lof_m[t], m_refs));
    std::vector<double> others;
    for (std::size_t u = 0; u < minority.size(); ++u) {
      if (u != t) others.push_back(lof_i[u]);
    }
    perc_i.push_back(percentile_rank(lof_i[t], others));
  }

  // far minority cluster: stands out against M, ordinary among I
  for (int t = 0; t < 8; ++t) {
    CHECK(perc_m[t] >= 90);
    CHECK(lof_i[t] < lof_i[8]);  // dense among its own class, unlike the extreme point
  }
  CHECK(lof_i[8] > 5.0);
  // extreme outlier: stands out against both
  CHECK(perc_m[8] == 100);
  CHECK(perc_i[8] == 100);
  // embedded point: lower against M than every point that left the blob
  for (int t = 0; t < 9; ++t) CHECK(lof_m[9] < lof_m[t]);
}
