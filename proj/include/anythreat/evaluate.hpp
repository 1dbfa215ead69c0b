#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "anythreat/classify.hpp"
#include "anythreat/datamodel.hpp"
#include "anythreat/decompose.hpp"
#include "anythreat/oversample.hpp"
#include "anythreat/rng.hpp"

namespace anythreat {

/// The refined measure set. Positives are counted at two granularities:
/// P and FP/TN per instance, P_T/TP_T/FN_T per threat (a threat is detected
/// once any of its anomalous instances is predicted anomalous).
struct Measures {
  std::size_t p = 0;
  std::size_t p_t = 0;
  std::size_t tp_t = 0;
  std::size_t fn_t = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  double f1 = 0.0;
};

/// Computes the refined measures from aligned test instances and binary
/// predictions. F1 combines precision TP_T/(TP_T+FP) and recall
/// TP_T/(TP_T+FN_T); a run that detects no threat scores 0.
inline Measures measures(const std::vector<Instance>& test, const std::vector<Label>& predicted) {
  if (test.size() != predicted.size())
    throw std::invalid_argument("measures: prediction count mismatch");

  Measures out;
  std::set<std::string> threats;
  std::set<std::string> detected;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (test[i].label == Label::Anomalous) {
      ++out.p;
      threats.insert(test[i].threat_id.value());
      if (predicted[i] == Label::Anomalous) detected.insert(test[i].threat_id.value());
    } else {
      if (predicted[i] == Label::Anomalous) {
        ++out.fp;
      } else {
        ++out.tn;
      }
    }
  }
  out.p_t = threats.size();
  out.tp_t = detected.size();
  out.fn_t = out.p_t - out.tp_t;
  if (out.tp_t > 0) {
    const double prec = static_cast<double>(out.tp_t) / static_cast<double>(out.tp_t + out.fp);
    const double rec = static_cast<double>(out.tp_t) / static_cast<double>(out.p_t);
    out.f1 = 2.0 * prec * rec / (prec + rec);
  }
  return out;
}

/// Index sets of a stratified-by-class random half split; every instance
/// lands in exactly one fold.
struct FoldSplit {
  std::vector<std::size_t> fold_a;
  std::vector<std::size_t> fold_b;
};

inline FoldSplit split_2fold(const CommunityDataset& d, std::uint64_t seed) {
  std::vector<std::size_t> normal;
  std::vector<std::size_t> anomalous;
  for (std::size_t i = 0; i < d.instances.size(); ++i) {
    (d.instances[i].label == Label::Normal ? normal : anomalous).push_back(i);
  }
  if (normal.size() < 2 || anomalous.size() < 2)
    throw std::invalid_argument("split_2fold: each class needs at least 2 instances");

  FoldSplit out;
  Rng rng(derive_seed(seed, "folds"));
  for (auto* cls : {&normal, &anomalous}) {
    rng.shuffle(*cls);
    const std::size_t half = (cls->size() + 1) / 2;
    for (std::size_t i = 0; i < cls->size(); ++i) {
      (i < half ? out.fold_a : out.fold_b).push_back((*cls)[i]);
    }
  }
  std::sort(out.fold_a.begin(), out.fold_a.end());
  std::sort(out.fold_b.begin(), out.fold_b.end());
  return out;
}

enum class Variant {
  default_,
  smote,
  cd_m_smote,
  cd_mi_smote,
  amo_na,
  amotre,
  cd_m_amotre,
  cd_mi_amotre,
};

inline const std::array<Variant, 8>& all_variants() {
  static const std::array<Variant, 8> v = {
      Variant::default_,   Variant::smote,  Variant::cd_m_smote,  Variant::cd_mi_smote,
      Variant::amo_na,     Variant::amotre, Variant::cd_m_amotre, Variant::cd_mi_amotre,
  };
  return v;
}

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::default_: return "default";
    case Variant::smote: return "smote";
    case Variant::cd_m_smote: return "cd_m_smote";
    case Variant::cd_mi_smote: return "cd_mi_smote";
    case Variant::amo_na: return "amo_na";
    case Variant::amotre: return "amotre";
    case Variant::cd_m_amotre: return "cd_m_amotre";
    case Variant::cd_mi_amotre: return "cd_mi_amotre";
  }
  return "?";
}

inline Variant parse_variant(const std::string& name) {
  for (const Variant v : all_variants()) {
    if (name == variant_name(v)) return v;
  }
  throw std::invalid_argument("unknown experiment variant '" + name + "'");
}

inline bool uses_smote(Variant v) {
  return v == Variant::smote || v == Variant::cd_m_smote || v == Variant::cd_mi_smote;
}
inline bool uses_amotre(Variant v) {
  return v == Variant::amo_na || v == Variant::amotre || v == Variant::cd_m_amotre ||
         v == Variant::cd_mi_amotre;
}
inline bool uses_oversampling(Variant v) { return v != Variant::default_; }
inline bool decomposes_majority(Variant v) {
  return v == Variant::cd_m_smote || v == Variant::cd_mi_smote || v == Variant::cd_m_amotre ||
         v == Variant::cd_mi_amotre;
}
inline bool decomposes_minority(Variant v) {
  return v == Variant::cd_mi_smote || v == Variant::cd_mi_amotre;
}

/// One cell of the experiment matrix.
struct ExperimentSpec {
  Variant variant = Variant::default_;
  ClassifierSpec classifier;
  AmotreConfig amotre_cfg;
  SmoteConfig smote_cfg;
  std::size_t k_majority = 2;
  std::size_t k_minority = 2;
  std::uint64_t fold_seed = 0;
  std::uint64_t seed = 0;

  void validate() const {
    classifier.validate();
    amotre_cfg.validate();
    smote_cfg.validate();
    if (decomposes_minority(variant) && !uses_oversampling(variant))
      throw std::invalid_argument("experiment: minority decomposition requires oversampling");
  }
};

struct EvalReport {
  Measures aggregate;
  std::vector<Measures> per_fold;
  ExperimentSpec experiment;
};

/// Runs one experiment under 2-fold cross validation: oversampling and class
/// decomposition are applied to the training half only, the classifier is
/// trained on effective labels, subclass predictions fold back to binary,
/// and the measures are computed once over the concatenated test predictions
/// of both folds (plus per fold).
inline EvalReport run_experiment(const ExperimentSpec& spec, const CommunityDataset& dataset) {
  spec.validate();
  if (!dataset.normalized) throw std::invalid_argument("run_experiment: dataset not normalized");

  const FoldSplit folds = split_2fold(dataset, spec.fold_seed);
  const std::uint64_t fp = dataset.schema.fingerprint();

  EvalReport report;
  report.experiment = spec;

  std::vector<Instance> all_test;
  std::vector<Label> all_pred;

  int fold_no = 0;
  for (const auto& [train_idx, test_idx] :
       {std::pair{folds.fold_a, folds.fold_b}, std::pair{folds.fold_b, folds.fold_a}}) {
    const std::string fold_tag = "fold" + std::to_string(fold_no++);

    std::vector<Instance> training;
    training.reserve(train_idx.size());
    for (const std::size_t i : train_idx) training.push_back(dataset.instances[i]);

    std::vector<Instance> test;
    test.reserve(test_idx.size());
    for (const std::size_t i : test_idx) {
      const Instance& inst = dataset.instances[i];
      if (inst.synthetic)
        throw std::logic_error("run_experiment: synthetic instance reached a test fold");
      test.push_back(inst);
    }

    auto [majority, minority] = split_by_label(training);

    // oversampling acts on the training minority only
    if (uses_smote(spec.variant)) {
      SmoteConfig cfg = spec.smote_cfg;
      cfg.seed = derive_seed(spec.seed, fold_tag + "/smote");
      auto res = smote(minority, cfg);
      if (cfg.perc_under) {
        majority = smote_undersample(majority, res.samples.size(), *cfg.perc_under,
                                     derive_seed(spec.seed, fold_tag + "/under"));
      }
      minority.insert(minority.end(), res.samples.begin(), res.samples.end());
    } else if (uses_amotre(spec.variant)) {
      AmotreConfig cfg = spec.amotre_cfg;
      cfg.remove_trappers = spec.variant != Variant::amo_na;
      cfg.seed = derive_seed(spec.seed, fold_tag + "/amotre");
      minority = amotre(minority, majority, cfg).minority_out();
    }

    std::vector<Instance> effective = std::move(majority);
    effective.insert(effective.end(), minority.begin(), minority.end());

    if (decomposes_majority(spec.variant)) {
      assign_subclasses(effective, Label::Normal, spec.k_majority,
                        derive_seed(spec.seed, fold_tag + "/cd_m"));
    }
    if (decomposes_minority(spec.variant)) {
      assign_subclasses(effective, Label::Anomalous, spec.k_minority,
                        derive_seed(spec.seed, fold_tag + "/cd_i"));
    }

    LabelSpace space;
    const std::vector<int> labels =
        effective_labels(effective, decomposes_majority(spec.variant), spec.k_majority,
                         decomposes_minority(spec.variant), spec.k_minority, space);

    ClassifierSpec cls = spec.classifier;
    cls.seed = derive_seed(spec.seed, fold_tag + "/classifier");
    const Model model = train(cls, feature_matrix(effective), labels, fp);

    std::vector<Label> fold_pred;
    fold_pred.reserve(test.size());
    for (const auto& inst : test) {
      fold_pred.push_back(space.fold_back(predict(model, inst.x, fp)));
    }

    report.per_fold.push_back(measures(test, fold_pred));
    all_test.insert(all_test.end(), test.begin(), test.end());
    all_pred.insert(all_pred.end(), fold_pred.begin(), fold_pred.end());
  }

  report.aggregate = measures(all_test, all_pred);
  return report;
}

// ---------------------------------------------------------------------------
// Wilcoxon signed-rank test
// ---------------------------------------------------------------------------

namespace wilcoxon_detail {

/// Exact two-sided p-value by dynamic programming over the doubled ranks
/// (doubling makes tied average ranks integral). The null distribution is
/// conditional on the observed |d| ranks.
inline double exact_p(const std::vector<double>& ranks, double w_plus) {
  std::vector<std::size_t> doubled;
  std::size_t max_sum = 0;
  for (const double r : ranks) {
    const auto d = static_cast<std::size_t>(std::llround(2.0 * r));
    doubled.push_back(d);
    max_sum += d;
  }
  std::vector<double> count(max_sum + 1, 0.0);
  count[0] = 1.0;
  for (const std::size_t d : doubled) {
    for (std::size_t s = max_sum + 1; s-- > d;) {
      count[s] += count[s - d];
    }
  }
  const auto w2 = static_cast<std::size_t>(std::llround(2.0 * w_plus));
  double le = 0.0;
  double ge = 0.0;
  double total = 0.0;
  for (std::size_t s = 0; s <= max_sum; ++s) {
    total += count[s];
    if (s <= w2) le += count[s];
    if (s >= w2) ge += count[s];
  }
  return std::min(1.0, 2.0 * std::min(le, ge) / total);
}

}  // namespace wilcoxon_detail

/// Two-sided Wilcoxon signed-rank test on paired samples. Zero differences
/// are dropped; if none remain the samples are indistinguishable and p = 1.
/// Exact enumeration for n <= 25, normal approximation with tie correction
/// beyond that (no continuity correction).
inline double wilcoxon_signed_rank(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("wilcoxon: length mismatch");

  std::vector<double> diffs;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    if (d != 0.0) diffs.push_back(d);
  }
  if (diffs.empty()) return 1.0;
  const std::size_t n = diffs.size();
  if (n < 5)
    throw std::invalid_argument("wilcoxon: needs >= 5 non-zero differences, got " +
                                std::to_string(n));

  // average ranks of |d| with ties
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::fabs(diffs[a]) < std::fabs(diffs[b]);
  });
  std::vector<double> rank(n, 0.0);
  std::vector<std::size_t> tie_sizes;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && std::fabs(diffs[order[j + 1]]) == std::fabs(diffs[order[i]])) ++j;
    const double avg = (static_cast<double>(i + j)) / 2.0 + 1.0;
    for (std::size_t t = i; t <= j; ++t) rank[order[t]] = avg;
    if (j > i) tie_sizes.push_back(j - i + 1);
    i = j + 1;
  }

  double w_plus = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    if (diffs[t] > 0.0) w_plus += rank[t];
  }

  if (n <= 25) {
    return wilcoxon_detail::exact_p(rank, w_plus);
  }

  const double nn = static_cast<double>(n);
  const double mean = nn * (nn + 1.0) / 4.0;
  double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0;
  for (const std::size_t t : tie_sizes) {
    const double tt = static_cast<double>(t);
    var -= (tt * tt * tt - tt) / 48.0;
  }
  const double z = (w_plus - mean) / std::sqrt(var);
  return std::min(1.0, std::erfc(std::fabs(z) / std::sqrt(2.0)));
}

}  // namespace anythreat
