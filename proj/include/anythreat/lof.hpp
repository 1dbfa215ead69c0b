#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace anythreat {

using Point = std::vector<double>;
using Matrix = std::vector<Point>;

/// Reachability distances of exactly zero (duplicate points) are floored at
/// this constant before inverting, so local densities stay finite.
inline constexpr double kZeroReachFloor = 1e-12;

namespace lof_detail {

inline double sq_distance(const Point& a, const Point& b) {
  double s = 0.0;
  for (std::size_t f = 0; f < a.size(); ++f) {
    const double d = a[f] - b[f];
    s += d * d;
  }
  return s;
}

inline double distance(const Point& a, const Point& b) { return std::sqrt(sq_distance(a, b)); }

struct Neighborhood {
  std::vector<std::size_t> idx;
  std::vector<double> dist;
};

/// k nearest points of `ref` to `q`, ties broken by lower reference index.
/// `exclude` skips one reference position (-1 for none).
inline Neighborhood k_nearest(const Matrix& ref, const Point& q, std::size_t k,
                              std::ptrdiff_t exclude) {
  std::vector<std::pair<double, std::size_t>> order;
  order.reserve(ref.size());
  for (std::size_t i = 0; i < ref.size(); ++i) {
    if (static_cast<std::ptrdiff_t>(i) == exclude) continue;
    order.emplace_back(distance(q, ref[i]), i);
  }
  const std::size_t take = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take),
                    order.end());
  Neighborhood out;
  out.idx.reserve(take);
  out.dist.reserve(take);
  for (std::size_t r = 0; r < take; ++r) {
    out.dist.push_back(order[r].first);
    out.idx.push_back(order[r].second);
  }
  return out;
}

inline double mean_reachability(const Neighborhood& nn, const std::vector<double>& kdist) {
  double sum = 0.0;
  for (std::size_t j = 0; j < nn.idx.size(); ++j) {
    double reach = std::max(kdist[nn.idx[j]], nn.dist[j]);
    if (reach == 0.0) reach = kZeroReachFloor;
    sum += reach;
  }
  return sum / static_cast<double>(nn.idx.size());
}

struct ReferenceDensity {
  std::vector<Neighborhood> nn;   // per reference point, self excluded
  std::vector<double> kdist;      // distance to the k-th neighbour
  std::vector<double> lrd;        // local reachability density
};

inline ReferenceDensity reference_density(const Matrix& ref, std::size_t k) {
  ReferenceDensity rd;
  const std::size_t n = ref.size();
  rd.nn.resize(n);
  rd.kdist.assign(n, 0.0);
  rd.lrd.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    rd.nn[i] = k_nearest(ref, ref[i], k, static_cast<std::ptrdiff_t>(i));
    rd.kdist[i] = rd.nn[i].dist.empty() ? 0.0 : rd.nn[i].dist.back();
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (rd.nn[i].idx.empty()) {
      rd.lrd[i] = 1.0;  // lone reference point, densities are undefined
      continue;
    }
    rd.lrd[i] = 1.0 / mean_reachability(rd.nn[i], rd.kdist);
  }
  return rd;
}

inline double lof_of_query(const Matrix& ref, const ReferenceDensity& rd, const Point& q,
                           std::size_t k, std::ptrdiff_t exclude) {
  const Neighborhood nn = k_nearest(ref, q, k, exclude);
  if (nn.idx.empty()) return 1.0;
  const double lrd_q = 1.0 / mean_reachability(nn, rd.kdist);
  double ratio = 0.0;
  for (const std::size_t o : nn.idx) ratio += rd.lrd[o] / lrd_q;
  return ratio / static_cast<double>(nn.idx.size());
}

}  // namespace lof_detail

/// Local Outlier Factor of each query against a reference population.
///
/// lof(q) is the mean of lrd(o)/lrd(q) over q's k nearest reference
/// neighbours o, where reach_k(q,o) = max(k-distance(o), d(q,o)) and
/// lrd = 1 / mean reachability. Distances are Euclidean; neighbour ties are
/// broken by lower reference index.
///
/// With self_exclude, query i is taken to be reference i and is never its own
/// neighbour; callers pass the same list for both arguments.
inline std::vector<double> lof_scores(const Matrix& reference, const Matrix& queries,
                                      std::size_t k, bool self_exclude) {
  if (k == 0) throw std::invalid_argument("lof_scores: k must be positive");
  const std::size_t available = reference.size() - (self_exclude ? 1u : 0u);
  if (reference.empty() || k > available)
    throw std::invalid_argument("lof_scores: k exceeds available reference points");
  if (self_exclude && queries.size() > reference.size())
    throw std::invalid_argument("lof_scores: self_exclude requires queries within reference");

  const auto rd = lof_detail::reference_density(reference, k);
  std::vector<double> out;
  out.reserve(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const std::ptrdiff_t exclude = self_exclude ? static_cast<std::ptrdiff_t>(i) : -1;
    out.push_back(lof_detail::lof_of_query(reference, rd, queries[i], k, exclude));
  }
  return out;
}

/// Neighbourhood size for scoring minority instances against the majority
/// class: round(sqrt(1 + card(M))), half away from zero.
inline std::size_t lof_k_for_majority(std::size_t card_m) {
  return static_cast<std::size_t>(std::llround(std::sqrt(1.0 + static_cast<double>(card_m))));
}

/// Neighbourhood size for scoring minority instances against each other:
/// round(sqrt(card(I))).
inline std::size_t lof_k_for_minority(std::size_t card_i) {
  return static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(card_i))));
}

/// LOF of each minority point with respect to the majority class only.
inline std::vector<double> lof_m_scores(const Matrix& minority, const Matrix& majority) {
  if (majority.empty()) throw std::invalid_argument("lof_m_scores: majority is empty");
  return lof_scores(majority, minority, lof_k_for_majority(majority.size()), false);
}

/// LOF of each minority point with respect to the other minority points.
inline std::vector<double> lof_i_scores(const Matrix& minority) {
  if (minority.size() < 2) throw std::invalid_argument("lof_i_scores: needs at least 2 points");
  return lof_scores(minority, minority, lof_k_for_minority(minority.size()), true);
}

/// LOF of every majority point against the majority class itself (self
/// excluded, same k as lof_m_scores). This is the reference population that
/// minority scores are ranked against. k is clamped when the class is too
/// small to supply round(sqrt(1+card(M))) neighbours.
inline std::vector<double> majority_reference_scores(const Matrix& majority) {
  if (majority.empty()) throw std::invalid_argument("majority_reference_scores: empty input");
  if (majority.size() == 1) return {1.0};
  const std::size_t k = std::min(lof_k_for_majority(majority.size()), majority.size() - 1);
  return lof_scores(majority, majority, k, true);
}

/// Percentile rank of a score within a reference population:
/// round(100 * |{r : r < score}| / |reference|). Strictly-less counting.
inline int percentile_rank(double score, const std::vector<double>& reference_scores) {
  if (reference_scores.empty())
    throw std::invalid_argument("percentile_rank: empty reference scores");
  std::size_t less = 0;
  for (const double r : reference_scores) {
    if (r < score) ++less;
  }
  return static_cast<int>(std::llround(100.0 * static_cast<double>(less) /
                                       static_cast<double>(reference_scores.size())));
}

}  // namespace anythreat
