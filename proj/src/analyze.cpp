#include "pfacts/analyze.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <unordered_set>

namespace pfacts {

namespace {

Error schema_mismatch(const std::string& msg) {
  return Error(ErrorCategory::kSchema, "SchemaMismatch", msg);
}

Stat sorted_stat(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  return mean_std(values);
}

std::string fmt1(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(1) << v;
  return os.str();
}

std::string fmt_stat(const Stat& s) {
  if (s.n == 0) return "-";
  return fmt1(s.mean) + "±" + fmt1(s.std);
}

// Rows of `table` whose mask entry is true.
PredictionTable select_rows(const PredictionTable& table, const std::vector<bool>& keep) {
  PredictionTable out;
  out.categories = table.categories;
  out.label_space = table.label_space;
  for (std::size_t i = 0; i < table.rows(); ++i) {
    if (!keep[i]) continue;
    out.ids.push_back(table.ids[i]);
    out.labels.push_back(table.labels[i]);
    out.confidence.push_back(table.confidence[i]);
  }
  return out;
}

}  // namespace

std::vector<PredictionTable> predict_corpus(const std::vector<MultiHeadModel>& models,
                                            const EmbeddingMatrix& embeddings) {
  if (models.empty()) throw Error(ErrorCategory::kData, "EmptyInput", "no models given");
  const auto& ref = models.front();
  for (const auto& m : models) {
    if (m.dim != ref.dim || m.category_names != ref.category_names ||
        m.label_space != ref.label_space) {
      throw schema_mismatch("seed models differ in dimension or label space");
    }
  }
  if (embeddings.dim() != ref.dim) {
    throw schema_mismatch("embedding dimension " + std::to_string(embeddings.dim()) +
                          " does not match model dimension " + std::to_string(ref.dim));
  }
  const Eigen::MatrixXd x = embeddings.to_double();
  std::vector<PredictionTable> tables;
  tables.reserve(models.size());
  for (const auto& m : models) {
    PredictionTable t;
    t.categories = m.category_names;
    t.label_space = m.label_space;
    t.ids = embeddings.ids();
    for (auto& p : predict(m, x)) {
      t.labels.push_back(std::move(p.labels));
      t.confidence.push_back(std::move(p.confidence));
    }
    tables.push_back(std::move(t));
  }
  return tables;
}

std::vector<std::vector<double>> label_shares(const PredictionTable& table) {
  std::vector<std::vector<double>> shares;
  const double n = static_cast<double>(table.rows());
  for (std::size_t c = 0; c < table.categories.size(); ++c) {
    std::vector<double> counts(table.label_space[c].size(), 0.0);
    for (const auto& row : table.labels) counts[static_cast<std::size_t>(row[c])] += 1.0;
    for (auto& v : counts) v = n > 0 ? 100.0 * v / n : 0.0;
    shares.push_back(std::move(counts));
  }
  return shares;
}

const DistributionCell& DistributionReport::cell(const std::string& category,
                                                 const std::string& label) const {
  for (std::size_t c = 0; c < categories.size(); ++c) {
    if (categories[c] != category) continue;
    for (std::size_t l = 0; l < label_space[c].size(); ++l) {
      if (label_space[c][l] == label) return cells[c][l];
    }
  }
  throw Error(ErrorCategory::kData, "UnknownLabel", "no cell " + category + "/" + label);
}

DistributionReport aggregate_distribution(const std::vector<PredictionTable>& tables) {
  if (tables.empty()) throw Error(ErrorCategory::kData, "EmptyTables", "no prediction tables");
  const auto& ref = tables.front();
  if (ref.rows() == 0) throw Error(ErrorCategory::kData, "EmptyTables", "tables have no rows");
  for (const auto& t : tables) {
    if (t.categories != ref.categories || t.label_space != ref.label_space ||
        t.rows() != ref.rows()) {
      throw schema_mismatch("prediction tables differ in schema or row count");
    }
  }
  DistributionReport report;
  report.categories = ref.categories;
  report.label_space = ref.label_space;
  report.corpus_size = ref.rows();
  report.seeds = tables.size();

  std::vector<std::vector<std::vector<double>>> all_shares;
  for (const auto& t : tables) all_shares.push_back(label_shares(t));

  for (std::size_t c = 0; c < ref.categories.size(); ++c) {
    std::vector<DistributionCell> row;
    for (std::size_t l = 0; l < ref.label_space[c].size(); ++l) {
      std::vector<double> shares;
      std::vector<double> confs;
      for (std::size_t s = 0; s < tables.size(); ++s) {
        shares.push_back(all_shares[s][c][l]);
        double sum = 0.0;
        std::size_t hits = 0;
        for (std::size_t i = 0; i < tables[s].rows(); ++i) {
          if (tables[s].labels[i][c] != static_cast<int>(l)) continue;
          sum += tables[s].confidence[i][c];
          ++hits;
        }
        if (hits > 0) confs.push_back(100.0 * sum / static_cast<double>(hits));
      }
      row.push_back({sorted_stat(std::move(shares)), sorted_stat(std::move(confs))});
    }
    report.cells.push_back(std::move(row));
  }
  return report;
}

LeakageResult leakage_audit(const std::vector<FactRecord>& train_facts,
                            const std::vector<FactRecord>& corpus,
                            const std::vector<PredictionTable>& tables) {
  for (const auto& t : tables) {
    if (t.rows() != corpus.size()) {
      throw schema_mismatch("prediction tables are not aligned with the corpus");
    }
  }
  std::unordered_set<std::string_view> seen;
  for (const auto& f : train_facts) seen.insert(trim(f.text));
  std::vector<bool> keep(corpus.size(), true);
  LeakageResult result;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (seen.count(trim(corpus[i].text)) != 0) {
      keep[i] = false;
      ++result.overlap_count;
    }
  }
  result.overlap_fraction =
      corpus.empty() ? 0.0
                     : static_cast<double>(result.overlap_count) /
                           static_cast<double>(corpus.size());
  result.full = aggregate_distribution(tables);

  if (result.overlap_count == corpus.size()) {
    result.flagged = true;
    result.note = "every corpus fact overlaps the training set; no held-out distribution";
    return result;
  }
  std::vector<PredictionTable> held;
  for (const auto& t : tables) held.push_back(select_rows(t, keep));
  result.held_out = aggregate_distribution(held);

  for (std::size_t c = 0; c < result.full.categories.size(); ++c) {
    std::vector<double> row;
    for (std::size_t l = 0; l < result.full.label_space[c].size(); ++l) {
      const double d =
          result.held_out->cells[c][l].share.mean - result.full.cells[c][l].share.mean;
      row.push_back(d);
      result.max_abs_shift = std::max(result.max_abs_shift, std::abs(d));
    }
    result.shift.push_back(std::move(row));
  }
  return result;
}

std::string format_distribution(const DistributionReport& report, const std::string& title) {
  std::ostringstream os;
  os << title << " (N=" << report.corpus_size << ", " << report.seeds << " seed models)\n";
  os << std::left << std::setw(20) << "Class" << std::setw(22) << "Label" << std::setw(14)
     << "Share %" << "Conf. %\n";
  for (std::size_t c = 0; c < report.categories.size(); ++c) {
    for (std::size_t l = 0; l < report.label_space[c].size(); ++l) {
      const auto& cell = report.cells[c][l];
      os << std::setw(20) << (l == 0 ? report.categories[c] : "") << std::setw(22)
         << report.label_space[c][l] << std::setw(14) << fmt_stat(cell.share)
         << fmt_stat(cell.confidence) << "\n";
    }
  }
  os << "\n";
  os << "dist.n=" << report.corpus_size << "\n";
  os << "dist.seeds=" << report.seeds << "\n";
  for (std::size_t c = 0; c < report.categories.size(); ++c) {
    std::string key = report.categories[c];
    if (auto dim = dimension_from_key(key)) {
      key = std::string(dimension_key(*dim));
    } else {
      for (auto d : kAllDimensions) {
        if (dimension_name(d) == key) key = std::string(dimension_key(d));
      }
    }
    for (std::size_t l = 0; l < report.label_space[c].size(); ++l) {
      const auto& cell = report.cells[c][l];
      const auto prefix = "dist." + key + "." + report.label_space[c][l];
      os << prefix << ".share=" << fmt_stat(cell.share) << "\n";
      os << prefix << ".confidence=" << fmt_stat(cell.confidence) << "\n";
    }
  }
  return os.str();
}

std::string format_leakage(const LeakageResult& result) {
  std::ostringstream os;
  os << "leakage.overlap_count=" << result.overlap_count << "\n";
  os << "leakage.overlap_fraction=" << std::fixed << std::setprecision(6)
     << result.overlap_fraction << "\n";
  os << "leakage.flagged=" << (result.flagged ? "true" : "false") << "\n";
  if (!result.note.empty()) os << "leakage.note=" << result.note << "\n";
  if (!result.flagged) {
    os << "leakage.max_abs_shift_pp=" << std::setprecision(4) << result.max_abs_shift << "\n";
  }
  return os.str();
}

}  // namespace pfacts
