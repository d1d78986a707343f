#pragma once

// Label distribution of an external fact corpus as predicted by several
// seed models, and the training-overlap (leakage) audit.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pfacts/core.hpp"
#include "pfacts/embed.hpp"
#include "pfacts/metrics.hpp"
#include "pfacts/model.hpp"

namespace pfacts {

// Predictions of one seed model, rows aligned with the embedding ids.
struct PredictionTable {
  std::vector<std::string> categories;
  std::vector<std::vector<std::string>> label_space;
  std::vector<std::string> ids;
  std::vector<std::vector<int>> labels;         // [fact][category]
  std::vector<std::vector<double>> confidence;  // [fact][category]

  std::size_t rows() const { return ids.size(); }
};

// All models must agree on dim, category names and label spaces
// (SchemaMismatch otherwise).
std::vector<PredictionTable> predict_corpus(const std::vector<MultiHeadModel>& models,
                                            const EmbeddingMatrix& embeddings);

// Percent of rows per label, one vector per category.
std::vector<std::vector<double>> label_shares(const PredictionTable& table);

struct DistributionCell {
  Stat share;       // percent
  Stat confidence;  // percent; over seeds where the label was predicted
};

struct DistributionReport {
  std::vector<std::string> categories;
  std::vector<std::vector<std::string>> label_space;
  std::vector<std::vector<DistributionCell>> cells;  // [category][label]
  std::size_t corpus_size = 0;
  std::size_t seeds = 0;

  const DistributionCell& cell(const std::string& category, const std::string& label) const;
};

// Throws EmptyTables for no tables or tables without rows, SchemaMismatch
// when tables disagree on schema or row count.
DistributionReport aggregate_distribution(const std::vector<PredictionTable>& tables);

struct LeakageResult {
  std::size_t overlap_count = 0;
  double overlap_fraction = 0.0;
  DistributionReport full;
  std::optional<DistributionReport> held_out;
  std::vector<std::vector<double>> shift;  // held-out minus full share mean, pp
  double max_abs_shift = 0.0;
  bool flagged = false;  // every corpus fact overlaps; no held-out report
  std::string note;
};

// Overlap is trimmed exact text equality. Tables must be aligned with
// `corpus` row for row.
LeakageResult leakage_audit(const std::vector<FactRecord>& train_facts,
                            const std::vector<FactRecord>& corpus,
                            const std::vector<PredictionTable>& tables);

std::string format_distribution(const DistributionReport& report, const std::string& title);
std::string format_leakage(const LeakageResult& result);

}  // namespace pfacts
