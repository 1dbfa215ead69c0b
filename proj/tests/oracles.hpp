#pragma once

// Test-only reference implementations. These stay independent of the library
// code paths they check: everything here is computed from first principles
// with full pairwise tables and plain sorts.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

namespace oracle {

using Point = std::vector<double>;
using Matrix = std::vector<Point>;

inline double dist(const Point& a, const Point& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

// Brute-force LOF: k nearest by (distance, index), reachability
// reach(q,o) = max(kdist(o), d(q,o)) with zero distances floored at 1e-12,
// lrd = 1/mean reach, lof = mean lrd(o)/lrd(q).
struct BruteLof {
  Matrix ref;
  std::size_t k = 1;
  std::vector<std::vector<std::size_t>> ref_nn;
  std::vector<double> kdist;
  std::vector<double> lrd;

  BruteLof(Matrix reference, std::size_t kk) : ref(std::move(reference)), k(kk) {
    const std::size_t n = ref.size();
    ref_nn.resize(n);
    kdist.assign(n, 0.0);
    lrd.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      ref_nn[i] = neighbors(ref[i], static_cast<std::ptrdiff_t>(i));
      kdist[i] = dist(ref[i], ref[ref_nn[i].back()]);
    }
    for (std::size_t i = 0; i < n; ++i) {
      lrd[i] = 1.0 / mean_reach(ref[i], ref_nn[i]);
    }
  }

  std::vector<std::size_t> neighbors(const Point& q, std::ptrdiff_t exclude) const {
    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t j = 0; j < ref.size(); ++j) {
      if (static_cast<std::ptrdiff_t>(j) == exclude) continue;
      all.emplace_back(dist(q, ref[j]), j);
    }
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> out;
    for (std::size_t r = 0; r < k && r < all.size(); ++r) out.push_back(all[r].second);
    return out;
  }

  double mean_reach(const Point& q, const std::vector<std::size_t>& nn) const {
    double sum = 0.0;
    for (const std::size_t o : nn) {
      double reach = std::max(kdist[o], dist(q, ref[o]));
      if (reach == 0.0) reach = 1e-12;
      sum += reach;
    }
    return sum / static_cast<double>(nn.size());
  }

  double score(const Point& q, std::ptrdiff_t exclude) const {
    const auto nn = neighbors(q, exclude);
    const double lrd_q = 1.0 / mean_reach(q, nn);
    double ratio = 0.0;
    for (const std::size_t o : nn) ratio += lrd[o] / lrd_q;
    return ratio / static_cast<double>(nn.size());
  }
};

inline std::vector<double> brute_lof(const Matrix& reference, const Matrix& queries,
                                     std::size_t k, bool self_exclude) {
  BruteLof model(reference, k);
  std::vector<double> out;
  out.reserve(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    out.push_back(model.score(queries[i], self_exclude ? static_cast<std::ptrdiff_t>(i) : -1));
  }
  return out;
}

// Exhaustive two-sided Wilcoxon signed-rank p-value over all 2^n sign
// assignments of the observed absolute ranks.
inline double brute_wilcoxon(const std::vector<double>& diffs) {
  std::vector<double> mags;
  for (const double d : diffs) {
    if (d != 0.0) mags.push_back(std::fabs(d));
  }
  const std::size_t n = mags.size();
  if (n == 0) return 1.0;
  // average ranks with ties
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return mags[a] < mags[b]; });
  std::vector<double> rank(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && mags[order[j + 1]] == mags[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t t = i; t <= j; ++t) rank[order[t]] = avg;
    i = j + 1;
  }
  double w_obs = 0.0;
  std::size_t keep = 0;
  for (const double d : diffs) {
    if (d == 0.0) continue;
    if (d > 0.0) w_obs += rank[keep];
    ++keep;
  }
  const std::uint64_t total = 1ULL << n;
  std::uint64_t le = 0;
  std::uint64_t ge = 0;
  for (std::uint64_t mask = 0; mask < total; ++mask) {
    double w = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
      if (mask & (1ULL << b)) w += rank[b];
    }
    if (w <= w_obs + 1e-12) ++le;
    if (w >= w_obs - 1e-12) ++ge;
  }
  const double p = 2.0 * std::min(static_cast<double>(le), static_cast<double>(ge)) /
                   static_cast<double>(total);
  return std::min(1.0, p);
}

}  // namespace oracle
