#pragma once

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pfacts/core.hpp"

namespace pfacts {

struct LabelScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;  // gold count
  std::size_t predicted = 0;
  std::size_t true_positive = 0;
};

inline Error length_mismatch(std::size_t a, std::size_t b) {
  return Error(ErrorCategory::kData, "LengthMismatch",
               "gold has " + std::to_string(a) + " items, pred has " + std::to_string(b));
}

// Scores for every label in gold ∪ pred. P + R = 0 gives F1 = 0.
template <typename Label>
std::map<Label, LabelScore> f1_per_label(std::span<const Label> gold,
                                         std::span<const Label> pred) {
  if (gold.size() != pred.size()) throw length_mismatch(gold.size(), pred.size());
  std::map<Label, LabelScore> scores;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    ++scores[gold[i]].support;
    ++scores[pred[i]].predicted;
    if (gold[i] == pred[i]) ++scores[gold[i]].true_positive;
  }
  for (auto& [label, s] : scores) {
    const double tp = static_cast<double>(s.true_positive);
    s.precision = s.predicted ? tp / static_cast<double>(s.predicted) : 0.0;
    s.recall = s.support ? tp / static_cast<double>(s.support) : 0.0;
    const double denom = s.precision + s.recall;
    s.f1 = denom > 0.0 ? 2.0 * s.precision * s.recall / denom : 0.0;
  }
  return scores;
}

template <typename Label>
double macro_f1(std::span<const Label> gold, std::span<const Label> pred) {
  if (gold.size() != pred.size()) throw length_mismatch(gold.size(), pred.size());
  if (gold.empty()) {
    throw Error(ErrorCategory::kData, "EmptyInput", "macro F1 of an empty evaluation");
  }
  const auto scores = f1_per_label(gold, pred);
  double total = 0.0;
  for (const auto& [label, s] : scores) total += s.f1;
  return total / static_cast<double>(scores.size());
}

template <typename Label>
double macro_f1(const std::vector<Label>& gold, const std::vector<Label>& pred) {
  return macro_f1(std::span<const Label>(gold), std::span<const Label>(pred));
}

using LabelKey = std::pair<std::string, std::string>;  // (category, label)

struct MetricsReport {
  std::vector<std::string> categories;  // display order
  std::map<LabelKey, double> per_label_f1;
  std::map<LabelKey, std::size_t> support;
  std::map<std::string, double> per_category_macro_f1;
  double overall_macro_f1 = 0.0;
};

// Per-category label columns: gold[c][i] / pred[c][i] are label indices into
// label_space[c]; a negative gold entry skips that (category, item) pair.
MetricsReport evaluate(const std::vector<std::string>& categories,
                       const std::vector<std::vector<std::string>>& label_space,
                       const std::vector<std::vector<int>>& gold,
                       const std::vector<std::vector<int>>& pred);

MetricsReport evaluate(const std::vector<LabelSet>& gold, const std::vector<LabelSet>& pred);

// Every (dimension, label) pair is its own label type; macro-F1 over all of
// them jointly. This is not the mean of the per-dimension macro-F1s.
double pooled_overall_f1(const std::vector<LabelSet>& gold,
                         const std::vector<LabelSet>& pred);

struct Stat {
  double mean = 0.0;
  double std = 0.0;  // sample (n - 1) standard deviation, 0 when n == 1
  std::size_t n = 0;
};

struct SeedSummary {
  std::vector<std::string> categories;
  std::map<LabelKey, Stat> per_label_f1;
  std::map<LabelKey, Stat> support;
  std::map<std::string, Stat> per_category_macro_f1;
  Stat overall_macro_f1;
  std::size_t reports = 0;
  bool degenerate = false;  // a single report: std is not meaningful
};

Stat mean_std(std::span<const double> values);

// Reports must share their category set (SchemaMismatch otherwise).
// Per-label entries are aggregated over the reports in which they appear.
SeedSummary aggregate_seeds(const std::vector<MetricsReport>& reports);

// "79.4±2.5" from fractions in [0, 1].
std::string format_pct(const Stat& s);
// Human-readable tables followed by `key=value` lines.
std::string format_report(const MetricsReport& report);
std::string format_summary(const SeedSummary& summary);

}  // namespace pfacts
