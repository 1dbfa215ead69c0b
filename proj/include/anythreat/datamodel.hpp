#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace anythreat {

enum class FeatureGroup { frequency, time, boolean, attribute, other };

enum class Label { Normal, Anomalous };

/// Ordered feature identifiers plus the group tag of each feature.
struct FeatureSchema {
  std::vector<std::string> names;
  std::vector<FeatureGroup> groups;

  std::size_t size() const { return names.size(); }

  void validate() const {
    if (names.empty()) throw std::invalid_argument("schema: needs at least one feature");
    if (names.size() != groups.size())
      throw std::invalid_argument("schema: names/groups size mismatch");
    std::unordered_set<std::string> seen;
    for (const auto& n : names) {
      if (!seen.insert(n).second)
        throw std::invalid_argument("schema: duplicate feature name '" + n + "'");
    }
  }

  /// FNV-1a over the feature names; models refuse inputs from another schema.
  std::uint64_t fingerprint() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& n : names) {
      for (const char c : n) {
        h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
        h *= 0x100000001b3ULL;
      }
      h ^= 0x1f;  // name separator
      h *= 0x100000001b3ULL;
    }
    return h;
  }
};

/// One (user, session-slot) feature vector.
struct Instance {
  std::int64_t slot = 0;
  std::string user;
  std::vector<double> x;
  Label label = Label::Normal;
  std::optional<std::string> threat_id;  // present iff label == Anomalous
  std::optional<int> subclass;           // cluster label from class decomposition
  bool synthetic = false;                // true for oversampler output, never valid as test data
};

/// All instances of one role community plus feature metadata.
struct CommunityDataset {
  std::string role;
  FeatureSchema schema;
  std::vector<Instance> instances;
  double slot_hours = 4.0;
  bool normalized = false;
  // Per-feature normalization parameters, retained by normalize().
  std::vector<double> feature_min;
  std::vector<double> feature_max;

  void validate() const {
    schema.validate();
    for (const auto& inst : instances) {
      if (inst.x.size() != schema.size())
        throw std::invalid_argument("dataset: instance width does not match schema");
      if ((inst.label == Label::Anomalous) != inst.threat_id.has_value())
        throw std::invalid_argument("dataset: threat_id must be present iff label is Anomalous");
    }
  }
};

/// Splits instances into (majority = Normal, minority = Anomalous), each in
/// input order. Either side may be empty.
inline std::pair<std::vector<Instance>, std::vector<Instance>> split_by_label(
    const std::vector<Instance>& instances) {
  std::vector<Instance> majority;
  std::vector<Instance> minority;
  for (const auto& inst : instances) {
    (inst.label == Label::Normal ? majority : minority).push_back(inst);
  }
  return {std::move(majority), std::move(minority)};
}

inline std::pair<std::vector<Instance>, std::vector<Instance>> split_by_label(
    const CommunityDataset& d) {
  return split_by_label(d.instances);
}

/// Min-max scales every feature to [0, 1] over the whole dataset and records
/// the per-feature (min, max) used. Zero-range features map to 0, keeping
/// booleans that never fire at the absent pole. Already-normalized input is
/// returned unchanged, which makes the operation idempotent.
inline CommunityDataset normalize(CommunityDataset d) {
  if (d.normalized) return d;
  const std::size_t m = d.schema.size();
  d.feature_min.assign(m, 0.0);
  d.feature_max.assign(m, 0.0);
  if (!d.instances.empty()) {
    for (std::size_t f = 0; f < m; ++f) {
      double lo = d.instances.front().x[f];
      double hi = lo;
      for (const auto& inst : d.instances) {
        lo = std::min(lo, inst.x[f]);
        hi = std::max(hi, inst.x[f]);
      }
      d.feature_min[f] = lo;
      d.feature_max[f] = hi;
    }
    for (auto& inst : d.instances) {
      for (std::size_t f = 0; f < m; ++f) {
        const double range = d.feature_max[f] - d.feature_min[f];
        inst.x[f] = range > 0.0 ? (inst.x[f] - d.feature_min[f]) / range : 0.0;
      }
    }
  }
  d.normalized = true;
  return d;
}

/// Feature matrix view helpers used by the numeric modules.
inline std::vector<std::vector<double>> feature_matrix(const std::vector<Instance>& instances) {
  std::vector<std::vector<double>> rows;
  rows.reserve(instances.size());
  for (const auto& inst : instances) rows.push_back(inst.x);
  return rows;
}

}  // namespace anythreat
