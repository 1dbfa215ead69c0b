#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "anythreat/datamodel.hpp"
#include "anythreat/lof.hpp"
#include "anythreat/rng.hpp"

namespace anythreat {

struct Decomposition {
  std::size_t k = 0;
  std::vector<int> assignments;          // per point, 0..k-1
  Matrix centroids;
  double inertia = 0.0;                  // sum of squared distances to assigned centroids
  std::vector<double> inertia_history;   // recorded after every assignment pass
};

namespace kmeans_detail {

inline std::size_t nearest_centroid(const Point& p, const Matrix& centroids) {
  std::size_t best = 0;
  double best_d = lof_detail::sq_distance(p, centroids[0]);
  for (std::size_t c = 1; c < centroids.size(); ++c) {
    const double d = lof_detail::sq_distance(p, centroids[c]);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

/// k-means++ seeding: D^2-weighted picks after a uniform first choice.
inline Matrix plus_plus_init(const Matrix& points, std::size_t k, Rng& rng) {
  Matrix centroids;
  centroids.push_back(points[rng.below(points.size())]);
  std::vector<double> d2(points.size());
  while (centroids.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      double best = lof_detail::sq_distance(points[i], centroids[0]);
      for (std::size_t c = 1; c < centroids.size(); ++c) {
        best = std::min(best, lof_detail::sq_distance(points[i], centroids[c]));
      }
      d2[i] = best;
      total += best;
    }
    std::size_t pick;
    if (total <= 0.0) {
      pick = rng.below(points.size());
    } else {
      double u = draw_uniform(rng, 0.0, total);
      pick = points.size() - 1;
      for (std::size_t i = 0; i < points.size(); ++i) {
        u -= d2[i];
        if (u < 0.0) {
          pick = i;
          break;
        }
      }
    }
    centroids.push_back(points[pick]);
  }
  return centroids;
}

}  // namespace kmeans_detail

/// Lloyd's algorithm from k-means++ seeds, deterministic under a fixed seed.
/// An emptied cluster is re-seeded at the point farthest from its assigned
/// centroid. Iterates until the largest centroid movement drops below tol or
/// max_iter passes complete.
inline Decomposition kmeans(const Matrix& points, std::size_t k, std::uint64_t seed,
                            std::size_t max_iter = 100, double tol = 1e-6) {
  if (points.empty()) throw std::invalid_argument("kmeans: no points");
  if (k < 1 || k > points.size())
    throw std::invalid_argument("kmeans: k must be in [1, |points|]");

  Rng rng(derive_seed(seed, "kmeans"));
  Decomposition out;
  out.k = k;
  out.centroids = kmeans_detail::plus_plus_init(points, k, rng);
  out.assignments.assign(points.size(), 0);
  const std::size_t m = points.front().size();

  auto assign_all = [&]() {
    out.inertia = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      out.assignments[i] = static_cast<int>(kmeans_detail::nearest_centroid(points[i], out.centroids));
      out.inertia += lof_detail::sq_distance(points[i], out.centroids[out.assignments[i]]);
    }
  };

  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    assign_all();

    // re-seed any empty cluster at the farthest point, then reassign
    for (;;) {
      std::vector<std::size_t> count(k, 0);
      for (const int a : out.assignments) ++count[static_cast<std::size_t>(a)];
      std::size_t empty = k;
      for (std::size_t c = 0; c < k; ++c) {
        if (count[c] == 0) {
          empty = c;
          break;
        }
      }
      if (empty == k) break;
      std::size_t farthest = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < points.size(); ++i) {
        const double d = lof_detail::sq_distance(points[i], out.centroids[out.assignments[i]]);
        if (d > far_d) {
          far_d = d;
          farthest = i;
        }
      }
      out.centroids[empty] = points[farthest];
      assign_all();
    }
    out.inertia_history.push_back(out.inertia);

    // update step
    Matrix next(k, Point(m, 0.0));
    std::vector<double> count(k, 0.0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto c = static_cast<std::size_t>(out.assignments[i]);
      count[c] += 1.0;
      for (std::size_t f = 0; f < m; ++f) next[c][f] += points[i][f];
    }
    double movement = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      if (count[c] == 0.0) continue;  // cannot happen after re-seeding
      for (std::size_t f = 0; f < m; ++f) next[c][f] /= count[c];
      movement = std::max(movement, lof_detail::distance(next[c], out.centroids[c]));
      out.centroids[c] = std::move(next[c]);
    }
    if (movement < tol) break;
  }

  assign_all();
  if (!out.inertia_history.empty() && out.inertia < out.inertia_history.back()) {
    out.inertia_history.push_back(out.inertia);
  }
  return out;
}

/// Clusters the instances of one class in place, writing cluster indices into
/// Instance::subclass. Instances of the other class are untouched.
inline Decomposition assign_subclasses(std::vector<Instance>& instances, Label which,
                                       std::size_t k, std::uint64_t seed) {
  Matrix points;
  std::vector<std::size_t> where;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    if (instances[i].label == which) {
      points.push_back(instances[i].x);
      where.push_back(i);
    }
  }
  const Decomposition d = kmeans(points, k, seed);
  for (std::size_t j = 0; j < where.size(); ++j) {
    instances[where[j]].subclass = d.assignments[j];
  }
  return d;
}

/// Breaks the majority class label into k cluster labels; the minority class
/// is untouched, so a binary problem becomes a (k+1)-class problem.
inline CommunityDataset decompose_majority(CommunityDataset d, std::size_t k,
                                           std::uint64_t seed) {
  if (!d.normalized) throw std::invalid_argument("decompose_majority: dataset not normalized");
  assign_subclasses(d.instances, Label::Normal, k, seed);
  return d;
}

/// Breaks the (already oversampled) minority class into k cluster labels.
/// The subclass-to-class mapping is positional, so predictions fold back to
/// the binary labels.
inline CommunityDataset decompose_minority(CommunityDataset d, std::size_t k,
                                           std::uint64_t seed) {
  if (!d.normalized) throw std::invalid_argument("decompose_minority: dataset not normalized");
  assign_subclasses(d.instances, Label::Anomalous, k, seed);
  return d;
}

/// Training-label layout for a possibly decomposed training set.
///
/// Labels 0..n_majority_labels-1 belong to the Normal class, the rest to the
/// Anomalous class; fold_back() recovers the parent class of a prediction.
struct LabelSpace {
  std::size_t n_majority_labels = 1;
  std::size_t n_minority_labels = 1;

  std::size_t size() const { return n_majority_labels + n_minority_labels; }

  Label fold_back(int effective) const {
    return static_cast<std::size_t>(effective) < n_majority_labels ? Label::Normal
                                                                   : Label::Anomalous;
  }
};

/// The effective training label of an instance: its subclass index when the
/// owning class was decomposed, else the class itself.
inline std::vector<int> effective_labels(const std::vector<Instance>& instances, bool cd_majority,
                                         std::size_t k_majority, bool cd_minority,
                                         std::size_t k_minority, LabelSpace& space) {
  space.n_majority_labels = cd_majority ? k_majority : 1;
  space.n_minority_labels = cd_minority ? k_minority : 1;
  std::vector<int> out;
  out.reserve(instances.size());
  for (const auto& inst : instances) {
    if (inst.label == Label::Normal) {
      const int sub = cd_majority ? inst.subclass.value() : 0;
      out.push_back(sub);
    } else {
      const int sub = cd_minority ? inst.subclass.value() : 0;
      out.push_back(static_cast<int>(space.n_majority_labels) + sub);
    }
  }
  return out;
}

}  // namespace anythreat
