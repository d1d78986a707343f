#include "pfacts/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

namespace pfacts {

MetricsReport evaluate(const std::vector<std::string>& categories,
                       const std::vector<std::vector<std::string>>& label_space,
                       const std::vector<std::vector<int>>& gold,
                       const std::vector<std::vector<int>>& pred) {
  const auto num_cat = categories.size();
  if (label_space.size() != num_cat || gold.size() != num_cat || pred.size() != num_cat) {
    throw Error(ErrorCategory::kSchema, "SchemaMismatch",
                "category count differs between label space, gold and pred");
  }
  MetricsReport report;
  report.categories = categories;
  std::vector<int> pooled_gold;
  std::vector<int> pooled_pred;
  constexpr int kStride = 1 << 16;
  for (std::size_t c = 0; c < num_cat; ++c) {
    if (gold[c].size() != pred[c].size()) {
      throw length_mismatch(gold[c].size(), pred[c].size());
    }
    std::vector<int> g;
    std::vector<int> p;
    for (std::size_t i = 0; i < gold[c].size(); ++i) {
      if (gold[c][i] < 0) continue;
      for (int v : {gold[c][i], pred[c][i]}) {
        if (v < 0 || static_cast<std::size_t>(v) >= label_space[c].size()) {
          throw Error(ErrorCategory::kData, "LabelOutOfRange",
                      "label " + std::to_string(v) + " out of range for " + categories[c]);
        }
      }
      g.push_back(gold[c][i]);
      p.push_back(pred[c][i]);
      pooled_gold.push_back(static_cast<int>(c) * kStride + gold[c][i]);
      pooled_pred.push_back(static_cast<int>(c) * kStride + pred[c][i]);
    }
    if (g.empty()) continue;
    const auto scores = f1_per_label(std::span<const int>(g), std::span<const int>(p));
    double total = 0.0;
    for (const auto& [label, s] : scores) {
      const LabelKey key{categories[c], label_space[c][static_cast<std::size_t>(label)]};
      report.per_label_f1[key] = s.f1;
      report.support[key] = s.support;
      total += s.f1;
    }
    report.per_category_macro_f1[categories[c]] = total / static_cast<double>(scores.size());
  }
  if (pooled_gold.empty()) {
    throw Error(ErrorCategory::kData, "EmptyInput", "nothing to evaluate");
  }
  report.overall_macro_f1 = macro_f1(pooled_gold, pooled_pred);
  return report;
}

namespace {

std::vector<std::vector<int>> columns(const std::vector<LabelSet>& sets) {
  std::vector<std::vector<int>> cols(kNumDimensions);
  for (const auto& s : sets) {
    for (std::size_t d = 0; d < kNumDimensions; ++d) {
      cols[d].push_back(s.index(kAllDimensions[d]));
    }
  }
  return cols;
}

}  // namespace

MetricsReport evaluate(const std::vector<LabelSet>& gold, const std::vector<LabelSet>& pred) {
  if (gold.size() != pred.size()) throw length_mismatch(gold.size(), pred.size());
  return evaluate(taxonomy_dimension_names(), taxonomy_label_space(), columns(gold),
                  columns(pred));
}

double pooled_overall_f1(const std::vector<LabelSet>& gold,
                         const std::vector<LabelSet>& pred) {
  if (gold.size() != pred.size()) throw length_mismatch(gold.size(), pred.size());
  std::vector<std::pair<int, int>> g;
  std::vector<std::pair<int, int>> p;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    for (std::size_t d = 0; d < kNumDimensions; ++d) {
      const auto dim = kAllDimensions[d];
      g.emplace_back(static_cast<int>(d), gold[i].index(dim));
      p.emplace_back(static_cast<int>(d), pred[i].index(dim));
    }
  }
  return macro_f1(g, p);
}

Stat mean_std(std::span<const double> values) {
  Stat s;
  s.n = values.size();
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(s.n - 1));
  }
  return s;
}

SeedSummary aggregate_seeds(const std::vector<MetricsReport>& reports) {
  if (reports.empty()) {
    throw Error(ErrorCategory::kData, "EmptyInput", "no reports to aggregate");
  }
  const auto schema = [](const MetricsReport& r) {
    return std::set<std::string>(r.categories.begin(), r.categories.end());
  };
  const auto reference = schema(reports.front());
  for (const auto& r : reports) {
    if (schema(r) != reference) {
      throw Error(ErrorCategory::kSchema, "SchemaMismatch",
                  "reports cover different categories");
    }
  }

  // Values are collected in sorted-key maps and aggregated after sorting,
  // so the result does not depend on report order.
  std::map<LabelKey, std::vector<double>> label_f1;
  std::map<LabelKey, std::vector<double>> support;
  std::map<std::string, std::vector<double>> category_f1;
  std::vector<double> overall;
  for (const auto& r : reports) {
    for (const auto& [k, v] : r.per_label_f1) label_f1[k].push_back(v);
    for (const auto& [k, v] : r.support) support[k].push_back(static_cast<double>(v));
    for (const auto& [k, v] : r.per_category_macro_f1) category_f1[k].push_back(v);
    overall.push_back(r.overall_macro_f1);
  }
  auto stat = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return mean_std(v);
  };

  SeedSummary out;
  out.categories = reports.front().categories;
  out.reports = reports.size();
  out.degenerate = reports.size() == 1;
  for (auto& [k, v] : label_f1) out.per_label_f1[k] = stat(v);
  for (auto& [k, v] : support) out.support[k] = stat(v);
  for (auto& [k, v] : category_f1) out.per_category_macro_f1[k] = stat(v);
  out.overall_macro_f1 = stat(overall);
  return out;
}

namespace {

std::string category_key(const std::string& name) {
  for (auto dim : kAllDimensions) {
    if (dimension_name(dim) == name) return std::string(dimension_key(dim));
  }
  return name;
}

std::string pct(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(1) << 100.0 * v;
  return os.str();
}

}  // namespace

std::string format_pct(const Stat& s) { return pct(s.mean) + "±" + pct(s.std); }

std::string format_report(const MetricsReport& report) {
  SeedSummary single = aggregate_seeds({report});
  return format_summary(single);
}

std::string format_summary(const SeedSummary& summary) {
  std::ostringstream os;
  const bool with_std = !summary.degenerate;
  auto cell = [&](const Stat& s) { return with_std ? format_pct(s) : pct(s.mean); };

  os << "Macro F1 (%) over " << summary.reports << " run(s)"
     << (summary.degenerate ? " [single run: no std]" : "") << "\n";
  os << std::left << std::setw(22) << "Category" << "F1\n";
  for (const auto& c : summary.categories) {
    auto it = summary.per_category_macro_f1.find(c);
    if (it == summary.per_category_macro_f1.end()) continue;
    os << std::setw(22) << c << cell(it->second) << "\n";
  }
  os << std::setw(22) << "Overall (pooled)" << cell(summary.overall_macro_f1) << "\n\n";

  os << std::setw(22) << "Category" << std::setw(24) << "Label" << std::setw(10)
     << "Support" << "F1\n";
  for (const auto& c : summary.categories) {
    for (const auto& [key, f1] : summary.per_label_f1) {
      if (key.first != c) continue;
      const auto sup = summary.support.at(key);
      std::ostringstream s;
      s << std::fixed << std::setprecision(0) << sup.mean;
      os << std::setw(22) << c << std::setw(24) << key.second << std::setw(10) << s.str()
         << cell(f1) << "\n";
    }
  }
  os << "\n";
  os << "runs=" << summary.reports << "\n";
  os << "f1.overall=" << cell(summary.overall_macro_f1) << "\n";
  for (const auto& c : summary.categories) {
    auto it = summary.per_category_macro_f1.find(c);
    if (it == summary.per_category_macro_f1.end()) continue;
    os << "f1." << category_key(c) << "=" << cell(it->second) << "\n";
  }
  for (const auto& c : summary.categories) {
    for (const auto& [key, f1] : summary.per_label_f1) {
      if (key.first != c) continue;
      std::ostringstream s;
      s << std::fixed << std::setprecision(1) << summary.support.at(key).mean;
      os << "f1." << category_key(c) << "." << key.second << "=" << cell(f1) << "\n";
      os << "support." << category_key(c) << "." << key.second << "=" << s.str() << "\n";
    }
  }
  return os.str();
}

}  // namespace pfacts
