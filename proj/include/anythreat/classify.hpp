#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "anythreat/datamodel.hpp"
#include "anythreat/lof.hpp"
#include "anythreat/rng.hpp"

namespace anythreat {

enum class ClassifierKind { knn, random_forest, linear };

inline const char* classifier_kind_name(ClassifierKind k) {
  switch (k) {
    case ClassifierKind::knn: return "knn";
    case ClassifierKind::random_forest: return "random_forest";
    case ClassifierKind::linear: return "linear";
  }
  return "?";
}

struct ClassifierSpec {
  ClassifierKind kind = ClassifierKind::knn;
  // knn
  std::size_t k = 5;
  // random forest
  std::size_t n_trees = 100;
  std::size_t max_depth = 0;           // 0 = unlimited
  std::size_t features_per_split = 0;  // 0 = floor(sqrt(m))
  // linear (one-vs-rest logistic regression)
  double learning_rate = 0.1;
  std::size_t epochs = 200;
  double l2 = 1e-4;

  std::uint64_t seed = 0;

  void validate() const {
    if (kind == ClassifierKind::knn && k < 1)
      throw std::invalid_argument("classifier: knn k must be >= 1");
    if (kind == ClassifierKind::random_forest && n_trees < 1)
      throw std::invalid_argument("classifier: forest needs >= 1 tree");
    if (kind == ClassifierKind::linear &&
        (learning_rate <= 0.0 || epochs < 1 || l2 < 0.0))
      throw std::invalid_argument("classifier: bad linear hyperparameters");
  }

  /// Stable identifier used in reports and experiment records.
  std::string id() const {
    switch (kind) {
      case ClassifierKind::knn: return "knn" + std::to_string(k);
      case ClassifierKind::random_forest: return "rf" + std::to_string(n_trees);
      case ClassifierKind::linear: return "linear";
    }
    return "?";
  }
};

namespace classify_detail {

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  int leaf_label = -1;
};

struct Tree {
  std::vector<TreeNode> nodes;

  int predict(const Point& x) const {
    int at = 0;
    while (nodes[at].feature >= 0) {
      at = x[static_cast<std::size_t>(nodes[at].feature)] <= nodes[at].threshold
               ? nodes[at].left
               : nodes[at].right;
    }
    return nodes[at].leaf_label;
  }
};

}  // namespace classify_detail

/// Trained classifier. The stored schema fingerprint makes predict refuse
/// feature vectors produced under another schema.
struct Model {
  ClassifierKind kind = ClassifierKind::knn;
  std::uint64_t schema_fingerprint = 0;
  std::size_t m = 0;
  std::vector<int> labels;  // sorted distinct training labels

  // knn
  Matrix train_x;
  std::vector<int> train_y;
  std::size_t knn_k = 5;

  // forest
  std::vector<classify_detail::Tree> trees;

  // linear: per label, m weights then a bias term
  std::vector<std::vector<double>> weights;

  // training diagnostics
  std::vector<std::size_t> bootstrap_sizes;          // per tree
  std::vector<std::size_t> split_candidate_counts;   // per evaluated split
  std::vector<double> loss_history;                  // per linear epoch
};

namespace classify_detail {

inline std::vector<int> distinct_sorted(const std::vector<int>& y) {
  std::vector<int> out = y;
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

/// Majority label with ties going to the lowest label value.
inline int majority_label(const std::vector<std::size_t>& counts, const std::vector<int>& labels) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < counts.size(); ++i) {
    if (counts[i] > counts[best]) best = i;
  }
  return labels[best];
}

inline double gini(const std::vector<std::size_t>& counts, double total) {
  double g = 1.0;
  for (const std::size_t c : counts) {
    const double p = static_cast<double>(c) / total;
    g -= p * p;
  }
  return g;
}

struct ForestBuilder {
  const Matrix& x;
  const std::vector<int>& y;           // label indices 0..L-1
  std::size_t n_labels;
  std::size_t max_depth;
  std::size_t candidates_per_split;
  Rng rng;
  Tree tree;
  std::vector<std::size_t>* candidate_log;

  int build(std::vector<std::size_t>& idx, std::size_t depth) {
    std::vector<std::size_t> counts(n_labels, 0);
    for (const std::size_t i : idx) ++counts[static_cast<std::size_t>(y[i])];
    const int node_id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();

    const bool pure =
        std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }) <= 1;
    if (pure || idx.size() < 2 || (max_depth > 0 && depth >= max_depth)) {
      tree.nodes[node_id].leaf_label = majority_index(counts);
      return node_id;
    }

    // sample candidate features without replacement
    const std::size_t m = x.front().size();
    std::vector<std::size_t> features(m);
    for (std::size_t f = 0; f < m; ++f) features[f] = f;
    for (std::size_t c = 0; c < candidates_per_split && c + 1 < m; ++c) {
      const std::size_t j = c + static_cast<std::size_t>(rng.below(m - c));
      std::swap(features[c], features[j]);
    }
    features.resize(std::min(candidates_per_split, m));
    if (candidate_log) candidate_log->push_back(features.size());

    double best_score = 1e300;
    int best_feature = -1;
    double best_threshold = 0.0;
    const double total = static_cast<double>(idx.size());

    std::vector<std::pair<double, int>> column(idx.size());
    for (std::size_t f_at = 0; f_at < features.size(); ++f_at) {
      const std::size_t f = features[f_at];
      for (std::size_t i = 0; i < idx.size(); ++i) {
        column[i] = {x[idx[i]][f], y[idx[i]]};
      }
      std::sort(column.begin(), column.end());

      std::vector<std::size_t> left(n_labels, 0);
      std::vector<std::size_t> right = counts;
      for (std::size_t i = 0; i + 1 < column.size(); ++i) {
        ++left[static_cast<std::size_t>(column[i].second)];
        --right[static_cast<std::size_t>(column[i].second)];
        if (column[i].first == column[i + 1].first) continue;
        const double nl = static_cast<double>(i + 1);
        const double nr = total - nl;
        const double score = (nl * gini(left, nl) + nr * gini(right, nr)) / total;
        const double threshold = column[i].first + 0.5 * (column[i + 1].first - column[i].first);
        if (score + 1e-15 < best_score ||
            (std::abs(score - best_score) <= 1e-15 &&
             (best_feature < 0 || static_cast<int>(f) < best_feature))) {
          best_score = score;
          best_feature = static_cast<int>(f);
          best_threshold = threshold;
        }
      }
    }

    if (best_feature < 0) {  // all candidate columns constant
      tree.nodes[node_id].leaf_label = majority_index(counts);
      return node_id;
    }

    std::vector<std::size_t> li, ri;
    for (const std::size_t i : idx) {
      (x[i][static_cast<std::size_t>(best_feature)] <= best_threshold ? li : ri).push_back(i);
    }
    if (li.empty() || ri.empty()) {
      tree.nodes[node_id].leaf_label = majority_index(counts);
      return node_id;
    }

    tree.nodes[node_id].feature = best_feature;
    tree.nodes[node_id].threshold = best_threshold;
    const int l = build(li, depth + 1);
    tree.nodes[node_id].left = l;
    const int r = build(ri, depth + 1);
    tree.nodes[node_id].right = r;
    return node_id;
  }

  static int majority_index(const std::vector<std::size_t>& counts) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < counts.size(); ++i) {
      if (counts[i] > counts[best]) best = i;
    }
    return static_cast<int>(best);
  }
};

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

/// Mean cross-entropy of one binary subproblem plus its L2 penalty.
inline double logistic_loss(const Matrix& x, const std::vector<char>& target,
                            const std::vector<double>& w, double l2) {
  const std::size_t n = x.size();
  const std::size_t m = x.front().size();
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double z = w[m];
    for (std::size_t f = 0; f < m; ++f) z += w[f] * x[i][f];
    const double p = sigmoid(z);
    const double eps = 1e-12;
    loss += target[i] ? -std::log(p + eps) : -std::log(1.0 - p + eps);
  }
  loss /= static_cast<double>(n);
  double reg = 0.0;
  for (std::size_t f = 0; f < m; ++f) reg += w[f] * w[f];
  return loss + 0.5 * l2 * reg;
}

}  // namespace classify_detail

/// Trains a classifier on feature vectors with effective (possibly subclass)
/// labels. Training is deterministic for a fixed spec and seed.
inline Model train(const ClassifierSpec& spec, const Matrix& x, const std::vector<int>& y,
                   std::uint64_t schema_fingerprint) {
  spec.validate();
  if (x.empty() || x.size() != y.size())
    throw std::invalid_argument("train: empty training set or label mismatch");

  Model model;
  model.kind = spec.kind;
  model.schema_fingerprint = schema_fingerprint;
  model.m = x.front().size();
  model.labels = classify_detail::distinct_sorted(y);
  if (model.labels.size() < 2)
    throw std::invalid_argument("train: training set has a single label");

  // map labels to dense indices
  std::vector<int> yi(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    yi[i] = static_cast<int>(
        std::lower_bound(model.labels.begin(), model.labels.end(), y[i]) - model.labels.begin());
  }

  switch (spec.kind) {
    case ClassifierKind::knn: {
      model.train_x = x;
      model.train_y = yi;
      model.knn_k = spec.k;
      break;
    }
    case ClassifierKind::random_forest: {
      const std::size_t n = x.size();
      const std::size_t per_split =
          spec.features_per_split > 0
              ? spec.features_per_split
              : std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(
                                             static_cast<double>(model.m)))));
      for (std::size_t t = 0; t < spec.n_trees; ++t) {
        classify_detail::ForestBuilder builder{
            x,
            yi,
            model.labels.size(),
            spec.max_depth,
            per_split,
            Rng(derive_seed(spec.seed, "tree/" + std::to_string(t))),
            {},
            &model.split_candidate_counts};
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = builder.rng.below(n);
        model.bootstrap_sizes.push_back(idx.size());
        builder.build(idx, 0);
        // leaves hold label indices; translate to label values at predict time
        model.trees.push_back(std::move(builder.tree));
      }
      break;
    }
    case ClassifierKind::linear: {
      const std::size_t n = x.size();
      const std::size_t m = model.m;
      model.weights.assign(model.labels.size(), std::vector<double>(m + 1, 0.0));
      std::vector<std::vector<char>> targets(model.labels.size(), std::vector<char>(n, 0));
      for (std::size_t i = 0; i < n; ++i) targets[static_cast<std::size_t>(yi[i])][i] = 1;

      std::vector<double> class_loss(model.labels.size());
      for (std::size_t c = 0; c < model.labels.size(); ++c) {
        class_loss[c] =
            classify_detail::logistic_loss(x, targets[c], model.weights[c], spec.l2);
      }

      for (std::size_t epoch = 0; epoch < spec.epochs; ++epoch) {
        for (std::size_t c = 0; c < model.labels.size(); ++c) {
          auto& w = model.weights[c];
          std::vector<double> grad(m + 1, 0.0);
          for (std::size_t i = 0; i < n; ++i) {
            double z = w[m];
            for (std::size_t f = 0; f < m; ++f) z += w[f] * x[i][f];
            const double err = classify_detail::sigmoid(z) - (targets[c][i] ? 1.0 : 0.0);
            for (std::size_t f = 0; f < m; ++f) grad[f] += err * x[i][f];
            grad[m] += err;
          }
          for (std::size_t f = 0; f <= m; ++f) grad[f] /= static_cast<double>(n);
          for (std::size_t f = 0; f < m; ++f) grad[f] += spec.l2 * w[f];

          // halving line search keeps the per-epoch loss non-increasing
          double step = spec.learning_rate;
          std::vector<double> trial(m + 1);
          for (int halve = 0; halve < 40; ++halve) {
            for (std::size_t f = 0; f <= m; ++f) trial[f] = w[f] - step * grad[f];
            const double trial_loss =
                classify_detail::logistic_loss(x, targets[c], trial, spec.l2);
            if (trial_loss <= class_loss[c]) {
              w = trial;
              class_loss[c] = trial_loss;
              break;
            }
            step *= 0.5;
          }
        }
        double total = 0.0;
        for (const double l : class_loss) total += l;
        model.loss_history.push_back(total);
      }
      break;
    }
  }
  return model;
}

/// Predicts the effective label of one feature vector. Ties in votes or
/// scores resolve to the lowest label value.
inline int predict(const Model& model, const Point& x, std::uint64_t schema_fingerprint) {
  if (schema_fingerprint != model.schema_fingerprint)
    throw std::invalid_argument("predict: schema fingerprint mismatch");
  if (x.size() != model.m) throw std::invalid_argument("predict: feature count mismatch");

  switch (model.kind) {
    case ClassifierKind::knn: {
      const auto nn = lof_detail::k_nearest(model.train_x, x,
                                            std::min(model.knn_k, model.train_x.size()), -1);
      std::vector<std::size_t> votes(model.labels.size(), 0);
      for (const std::size_t i : nn.idx) ++votes[static_cast<std::size_t>(model.train_y[i])];
      return model.labels[classify_detail::ForestBuilder::majority_index(votes)];
    }
    case ClassifierKind::random_forest: {
      std::vector<std::size_t> votes(model.labels.size(), 0);
      for (const auto& tree : model.trees) ++votes[static_cast<std::size_t>(tree.predict(x))];
      return model.labels[classify_detail::ForestBuilder::majority_index(votes)];
    }
    case ClassifierKind::linear: {
      std::size_t best = 0;
      double best_score = -1e300;
      for (std::size_t c = 0; c < model.weights.size(); ++c) {
        double z = model.weights[c][model.m];
        for (std::size_t f = 0; f < model.m; ++f) z += model.weights[c][f] * x[f];
        if (z > best_score) {
          best_score = z;
          best = c;
        }
      }
      return model.labels[best];
    }
  }
  throw std::logic_error("predict: unknown classifier kind");
}

// ---------------------------------------------------------------------------
// Model blob (de)serialization.
//
// Layout, little-endian:
//   magic "ATMD" | u32 version (1) | u8 kind | u64 schema fingerprint |
//   u64 m | u64 label count | i32 labels... | kind payload
// Payloads: knn -> u64 k, u64 n, n*(m f64 + i32); forest -> u64 tree count,
// per tree u64 node count and nodes as (i32 feature, f64 threshold, i32 left,
// i32 right, i32 leaf); linear -> u64 class count, per class (m+1) f64.
// ---------------------------------------------------------------------------

namespace classify_detail {

template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("model blob: truncated");
  return v;
}

}  // namespace classify_detail

inline void save_model(const Model& model, std::ostream& os) {
  using classify_detail::put;
  os.write("ATMD", 4);
  put<std::uint32_t>(os, 1);
  put<std::uint8_t>(os, static_cast<std::uint8_t>(model.kind));
  put<std::uint64_t>(os, model.schema_fingerprint);
  put<std::uint64_t>(os, model.m);
  put<std::uint64_t>(os, model.labels.size());
  for (const int l : model.labels) put<std::int32_t>(os, l);

  switch (model.kind) {
    case ClassifierKind::knn: {
      put<std::uint64_t>(os, model.knn_k);
      put<std::uint64_t>(os, model.train_x.size());
      for (std::size_t i = 0; i < model.train_x.size(); ++i) {
        for (const double v : model.train_x[i]) put<double>(os, v);
        put<std::int32_t>(os, model.train_y[i]);
      }
      break;
    }
    case ClassifierKind::random_forest: {
      put<std::uint64_t>(os, model.trees.size());
      for (const auto& tree : model.trees) {
        put<std::uint64_t>(os, tree.nodes.size());
        for (const auto& n : tree.nodes) {
          put<std::int32_t>(os, n.feature);
          put<double>(os, n.threshold);
          put<std::int32_t>(os, n.left);
          put<std::int32_t>(os, n.right);
          put<std::int32_t>(os, n.leaf_label);
        }
      }
      break;
    }
    case ClassifierKind::linear: {
      put<std::uint64_t>(os, model.weights.size());
      for (const auto& w : model.weights) {
        for (const double v : w) put<double>(os, v);
      }
      break;
    }
  }
}

inline Model load_model(std::istream& is) {
  using classify_detail::get;
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "ATMD", 4) != 0)
    throw std::runtime_error("model blob: bad magic");
  const auto version = get<std::uint32_t>(is);
  if (version != 1) throw std::runtime_error("model blob: unsupported version");

  Model model;
  model.kind = static_cast<ClassifierKind>(get<std::uint8_t>(is));
  model.schema_fingerprint = get<std::uint64_t>(is);
  model.m = get<std::uint64_t>(is);
  const auto n_labels = get<std::uint64_t>(is);
  model.labels.resize(n_labels);
  for (auto& l : model.labels) l = get<std::int32_t>(is);

  switch (model.kind) {
    case ClassifierKind::knn: {
      model.knn_k = get<std::uint64_t>(is);
      const auto n = get<std::uint64_t>(is);
      model.train_x.assign(n, Point(model.m));
      model.train_y.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        for (auto& v : model.train_x[i]) v = get<double>(is);
        model.train_y[i] = get<std::int32_t>(is);
      }
      break;
    }
    case ClassifierKind::random_forest: {
      const auto n_trees = get<std::uint64_t>(is);
      model.trees.resize(n_trees);
      for (auto& tree : model.trees) {
        tree.nodes.resize(get<std::uint64_t>(is));
        for (auto& n : tree.nodes) {
          n.feature = get<std::int32_t>(is);
          n.threshold = get<double>(is);
          n.left = get<std::int32_t>(is);
          n.right = get<std::int32_t>(is);
          n.leaf_label = get<std::int32_t>(is);
        }
      }
      break;
    }
    case ClassifierKind::linear: {
      const auto n_classes = get<std::uint64_t>(is);
      model.weights.assign(n_classes, std::vector<double>(model.m + 1));
      for (auto& w : model.weights) {
        for (auto& v : w) v = get<double>(is);
      }
      break;
    }
    default:
      throw std::runtime_error("model blob: unknown classifier kind");
  }
  return model;
}

}  // namespace anythreat
