#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "anythreat/datamodel.hpp"
#include "anythreat/lof.hpp"
#include "anythreat/rng.hpp"

namespace anythreat {

/// Parameters of the selective oversampler. Defaults follow the tuned values
/// of the evaluation grid.
struct AmotreConfig {
  double perc_over = 200.0;      // percentage of artificial samples over card(I_r)
  double tau = 10.0;             // survival threshold on perclof_M
  bool remove_trappers = true;   // false runs the oversampler without the removal step
  double prob_plus_only_pos = 0.2;
  double prob_plus_both = 0.5;
  double prob_plus_only_neg = 0.8;
  double lambda_toward = 0.3;    // moving toward an existing neighbour
  double lambda_away = 1.0;      // moving into open space
  std::size_t max_rounds = 100000;
  std::uint64_t seed = 0;

  void validate() const {
    if (perc_over <= 0.0) throw std::invalid_argument("amotre: perc_over must be positive");
    if (tau < 0.0 || tau > 100.0) throw std::invalid_argument("amotre: tau must be in [0,100]");
    for (const double p : {prob_plus_only_pos, prob_plus_both, prob_plus_only_neg}) {
      if (p <= 0.0 || p >= 1.0) throw std::invalid_argument("amotre: prob+ must be in (0,1)");
    }
    for (const double l : {lambda_toward, lambda_away}) {
      if (l <= 0.0 || l > 1.0) throw std::invalid_argument("amotre: lambda must be in (0,1]");
    }
    if (max_rounds == 0) throw std::invalid_argument("amotre: max_rounds must be positive");
  }
};

struct SmoteConfig {
  double perc_over = 200.0;
  std::size_t k_smote = 5;
  std::optional<double> perc_under;  // disabled by default
  std::uint64_t seed = 0;

  void validate() const {
    if (perc_over <= 0.0) throw std::invalid_argument("smote: perc_over must be positive");
    if (k_smote < 1) throw std::invalid_argument("smote: k_smote must be >= 1");
    if (perc_under && *perc_under <= 0.0)
      throw std::invalid_argument("smote: perc_under must be positive");
  }
};

/// Per-minority-instance outlierness bookkeeping, aligned with the minority
/// input order.
struct PeculiarityRow {
  double lof_m = 0.0;
  double lof_i = 0.0;
  int perclof_m = 0;
  int perclof_i = 0;
  double p = 0.0;  // Eq. 1 selection probability, meaningful for survivors
  bool trapper = false;
};

struct PeculiarityTable {
  std::vector<PeculiarityRow> rows;
};

struct PeculiarityResult {
  PeculiarityTable table;
  std::vector<Instance> survivors;           // I_r, in minority order
  std::vector<std::size_t> survivor_index;   // position of each survivor in the input
};

/// Scores every minority instance against both classes, flags trappers
/// (perclof_M < tau) and removes them, and attaches the Eq. 1 selection
/// probability p = (perclof_M * perclof_I) / 10^4 to each row.
inline PeculiarityResult peculiarity(const std::vector<Instance>& minority,
                                     const std::vector<Instance>& majority, double tau,
                                     bool remove_trappers = true) {
  if (minority.size() < 2) throw std::invalid_argument("peculiarity: card(I) must be >= 2");
  if (majority.empty()) throw std::invalid_argument("peculiarity: card(M) must be >= 1");

  const Matrix xi = feature_matrix(minority);
  const Matrix xm = feature_matrix(majority);

  const std::vector<double> lof_m = lof_m_scores(xi, xm);
  const std::vector<double> lof_i = lof_i_scores(xi);
  const std::vector<double> m_refs = majority_reference_scores(xm);

  PeculiarityResult out;
  out.table.rows.resize(minority.size());
  for (std::size_t t = 0; t < minority.size(); ++t) {
    auto& row = out.table.rows[t];
    row.lof_m = lof_m[t];
    row.lof_i = lof_i[t];
    row.perclof_m = percentile_rank(lof_m[t], m_refs);
    std::vector<double> others;
    others.reserve(minority.size() - 1);
    for (std::size_t u = 0; u < minority.size(); ++u) {
      if (u != t) others.push_back(lof_i[u]);
    }
    row.perclof_i = percentile_rank(lof_i[t], others);
    row.p = static_cast<double>(row.perclof_m) * static_cast<double>(row.perclof_i) / 1e4;
    row.trapper = row.perclof_m < tau;
  }

  for (std::size_t t = 0; t < minority.size(); ++t) {
    if (remove_trappers && out.table.rows[t].trapper) continue;
    out.survivors.push_back(minority[t]);
    out.survivor_index.push_back(t);
  }
  if (out.survivors.empty())
    throw std::runtime_error("peculiarity: all minority instances are trappers");
  return out;
}

/// Distances from a feature value to the closest majority value at or above
/// it (pos) and strictly below it (neg). A tie counts as a positive-side
/// neighbour at distance zero.
struct FeatureNeighbors {
  std::optional<double> pos;
  std::optional<double> neg;
};

inline FeatureNeighbors feature_neighbors(double a, const std::vector<double>& values) {
  FeatureNeighbors out;
  for (const double v : values) {
    if (v >= a) {
      const double d = v - a;
      if (!out.pos || d < *out.pos) out.pos = d;
    } else {
      const double d = a - v;
      if (!out.neg || d < *out.neg) out.neg = d;
    }
  }
  return out;
}

inline FeatureNeighbors per_feature_neighbors(double a_f, const std::vector<Instance>& majority,
                                              std::size_t f) {
  if (majority.empty()) throw std::invalid_argument("per_feature_neighbors: majority is empty");
  std::vector<double> column;
  column.reserve(majority.size());
  for (const auto& inst : majority) column.push_back(inst.x[f]);
  return feature_neighbors(a_f, column);
}

enum class NeighborCase { only_pos, only_neg, both };

/// Per-feature draw record, kept for diagnostics and tests.
struct FeatureDraw {
  NeighborCase which = NeighborCase::both;
  int dir = +1;        // dirS
  double dist = 0.0;   // distN, magnitude in the chosen direction
  double lambda = 0.0;
  double raw = 0.0;    // value before the non-negativity clamp
  double value = 0.0;
};

struct SampleTrace {
  std::vector<FeatureDraw> features;
};

namespace oversample_detail {

/// Majority feature values transposed to columns, so neighbour search scans
/// one contiguous array per feature.
inline std::vector<std::vector<double>> feature_columns(const std::vector<Instance>& majority,
                                                        std::size_t m) {
  std::vector<std::vector<double>> cols(m);
  for (auto& c : cols) c.reserve(majority.size());
  for (const auto& inst : majority) {
    for (std::size_t f = 0; f < m; ++f) cols[f].push_back(inst.x[f]);
  }
  return cols;
}

}  // namespace oversample_detail

/// Generates one artificial instance for a parent minority instance.
///
/// Each feature is sampled independently: the direction dirS is drawn with
/// P(+1) = prob+ chosen by which majority neighbours exist on the feature
/// axis, the step is uniform in [0, lambda * distN), and a negative result is
/// clamped to clamp_min[f] (the minimum of the feature among the minority
/// instances being oversampled). Consumes exactly two unit draws per feature:
/// first the direction, then the step.
template <class R>
Instance generate_sample(const Instance& parent,
                         const std::vector<std::vector<double>>& majority_columns,
                         const AmotreConfig& cfg, R& rng, const std::vector<double>& clamp_min,
                         SampleTrace* trace = nullptr) {
  const std::size_t m = parent.x.size();
  Instance sample;
  sample.slot = parent.slot;
  sample.user = parent.user;
  sample.label = Label::Anomalous;
  sample.threat_id = parent.threat_id;
  sample.synthetic = true;
  sample.x.resize(m);
  if (trace) trace->features.resize(m);

  for (std::size_t f = 0; f < m; ++f) {
    const double a = parent.x[f];
    const FeatureNeighbors nb = feature_neighbors(a, majority_columns[f]);

    FeatureDraw draw;
    double prob_plus = cfg.prob_plus_both;
    if (nb.pos && !nb.neg) {
      draw.which = NeighborCase::only_pos;
      prob_plus = cfg.prob_plus_only_pos;
    } else if (!nb.pos && nb.neg) {
      draw.which = NeighborCase::only_neg;
      prob_plus = cfg.prob_plus_only_neg;
    } else {
      draw.which = NeighborCase::both;
    }

    draw.dir = draw_bernoulli(rng, prob_plus) ? +1 : -1;

    bool toward_neighbor = false;
    switch (draw.which) {
      case NeighborCase::both:
        draw.dist = draw.dir > 0 ? *nb.pos : *nb.neg;
        toward_neighbor = true;  // either way a neighbour sits in the chosen direction
        break;
      case NeighborCase::only_pos:
        draw.dist = *nb.pos;
        toward_neighbor = draw.dir > 0;
        break;
      case NeighborCase::only_neg:
        draw.dist = *nb.neg;
        toward_neighbor = draw.dir < 0;
        break;
    }
    draw.lambda = toward_neighbor ? cfg.lambda_toward : cfg.lambda_away;

    const double step = draw_uniform(rng, 0.0, draw.lambda * draw.dist);
    draw.raw = a + draw.dir * step;
    draw.value = draw.raw < 0.0 ? clamp_min[f] : draw.raw;
    sample.x[f] = draw.value;
    if (trace) trace->features[f] = draw;
  }
  return sample;
}

template <class R>
Instance generate_sample(const Instance& parent, const std::vector<Instance>& majority,
                         const AmotreConfig& cfg, R& rng, const std::vector<double>& clamp_min,
                         SampleTrace* trace = nullptr) {
  const auto columns = oversample_detail::feature_columns(majority, parent.x.size());
  return generate_sample(parent, columns, cfg, rng, clamp_min, trace);
}

namespace oversample_detail {

/// One selection round: every survivor is an independent Bernoulli(p) trial,
/// drawn in input order.
template <class R>
std::vector<std::size_t> select_round(const std::vector<double>& p, R& rng) {
  std::vector<std::size_t> chosen;
  for (std::size_t t = 0; t < p.size(); ++t) {
    if (draw_bernoulli(rng, p[t])) chosen.push_back(t);
  }
  return chosen;
}

/// Roulette-wheel pick proportional to the weights; uniform when all weights
/// vanish. Used only by the round-cap fallback.
template <class R>
std::size_t select_weighted(const std::vector<double>& weights, double total, R& rng) {
  if (total <= 0.0) return static_cast<std::size_t>(rng.below(weights.size()));
  double u = draw_uniform(rng, 0.0, total);
  for (std::size_t t = 0; t < weights.size(); ++t) {
    u -= weights[t];
    if (u < 0.0) return t;
  }
  return weights.size() - 1;
}

inline std::vector<double> minority_feature_minima(const std::vector<Instance>& instances,
                                                   std::size_t m) {
  std::vector<double> mins(m, 0.0);
  for (std::size_t f = 0; f < m; ++f) {
    double lo = instances.front().x[f];
    for (const auto& inst : instances) lo = std::min(lo, inst.x[f]);
    mins[f] = lo;
  }
  return mins;
}

}  // namespace oversample_detail

struct AmotreResult {
  std::vector<Instance> samples;              // I_s, exactly numS instances
  std::vector<std::size_t> sample_parent;     // survivor index that produced each sample
  PeculiarityTable table;
  std::vector<Instance> survivors;            // I_r
  std::vector<std::size_t> survivor_index;
  std::size_t rounds_used = 0;
  bool fallback_used = false;

  /// The minority set handed to downstream stages: I_r followed by I_s.
  std::vector<Instance> minority_out() const {
    std::vector<Instance> out = survivors;
    out.insert(out.end(), samples.begin(), samples.end());
    return out;
  }
};

/// The full oversampler: peculiarity scoring, trapper removal, then rounds of
/// Bernoulli-selected sample generation until numS = floor(perc_over/100 *
/// card(I_r)) samples exist. The final round's overflow is truncated so the
/// count is exact. If the round cap is hit first (possible when every p is
/// tiny), the remaining samples are drawn by a weighted pick proportional to
/// p instead of Bernoulli rejection, so the call never aborts.
inline AmotreResult amotre(const std::vector<Instance>& minority,
                           const std::vector<Instance>& majority, const AmotreConfig& cfg) {
  cfg.validate();
  auto pec = peculiarity(minority, majority, cfg.tau, cfg.remove_trappers);

  AmotreResult out;
  out.table = std::move(pec.table);
  out.survivors = std::move(pec.survivors);
  out.survivor_index = std::move(pec.survivor_index);

  const std::size_t m = out.survivors.front().x.size();
  const auto columns = oversample_detail::feature_columns(majority, m);
  const auto clamp_min = oversample_detail::minority_feature_minima(out.survivors, m);

  std::vector<double> p;
  p.reserve(out.survivors.size());
  for (const std::size_t t : out.survivor_index) p.push_back(out.table.rows[t].p);

  const std::size_t num_s = static_cast<std::size_t>(
      std::floor(cfg.perc_over / 100.0 * static_cast<double>(out.survivors.size())));

  Rng rng(derive_seed(cfg.seed, "amotre"));
  while (out.samples.size() < num_s && out.rounds_used < cfg.max_rounds) {
    ++out.rounds_used;
    for (const std::size_t t : oversample_detail::select_round(p, rng)) {
      out.samples.push_back(
          generate_sample(out.survivors[t], columns, cfg, rng, clamp_min, nullptr));
      out.sample_parent.push_back(t);
    }
  }
  if (out.samples.size() < num_s) {
    out.fallback_used = true;
    double total = 0.0;
    for (const double w : p) total += w;
    while (out.samples.size() < num_s) {
      const std::size_t t = oversample_detail::select_weighted(p, total, rng);
      out.samples.push_back(
          generate_sample(out.survivors[t], columns, cfg, rng, clamp_min, nullptr));
      out.sample_parent.push_back(t);
    }
  }
  out.samples.resize(num_s);
  out.sample_parent.resize(num_s);
  return out;
}

struct SmoteResult {
  std::vector<Instance> samples;
  std::vector<std::size_t> sample_parent;
};

/// Classic SMOTE: each minority instance spawns perc_over/100 samples, each
/// placed uniformly on the segment to one of its k_smote nearest minority
/// neighbours (Euclidean over all features).
inline SmoteResult smote(const std::vector<Instance>& minority, const SmoteConfig& cfg) {
  cfg.validate();
  if (minority.size() <= cfg.k_smote)
    throw std::invalid_argument("smote: card(I) must exceed k_smote");

  const Matrix xi = feature_matrix(minority);
  const std::size_t reps = static_cast<std::size_t>(std::floor(cfg.perc_over / 100.0));

  SmoteResult out;
  Rng rng(derive_seed(cfg.seed, "smote"));
  for (std::size_t i = 0; i < minority.size(); ++i) {
    const auto nn =
        lof_detail::k_nearest(xi, xi[i], cfg.k_smote, static_cast<std::ptrdiff_t>(i));
    for (std::size_t r = 0; r < reps; ++r) {
      const std::size_t pick = nn.idx[rng.below(nn.idx.size())];
      const double u = rng.next_unit();
      Instance sample = minority[i];
      sample.synthetic = true;
      sample.subclass.reset();
      for (std::size_t f = 0; f < sample.x.size(); ++f) {
        sample.x[f] = xi[i][f] + u * (xi[pick][f] - xi[i][f]);
      }
      out.samples.push_back(std::move(sample));
      out.sample_parent.push_back(i);
    }
  }
  return out;
}

/// Random undersampling companion: keeps a uniform subset of the majority of
/// size (perc_under/100) * n_added, in dataset order.
inline std::vector<Instance> smote_undersample(const std::vector<Instance>& majority,
                                               std::size_t n_added, double perc_under,
                                               std::uint64_t seed) {
  const std::size_t keep =
      static_cast<std::size_t>(std::floor(perc_under / 100.0 * static_cast<double>(n_added)));
  if (keep > majority.size())
    throw std::invalid_argument("smote_undersample: requested size exceeds card(M)");
  std::vector<std::size_t> idx(majority.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng(derive_seed(seed, "undersample"));
  rng.shuffle(idx);
  idx.resize(keep);
  std::sort(idx.begin(), idx.end());
  std::vector<Instance> out;
  out.reserve(keep);
  for (const std::size_t i : idx) out.push_back(majority[i]);
  return out;
}

}  // namespace anythreat
