#pragma once

// TF-IDF features and class-balanced multinomial logistic regression, one
// classifier per taxonomy dimension.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "pfacts/core.hpp"
#include "pfacts/metrics.hpp"

namespace pfacts {

using SparseRows = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct TfidfConfig {
  std::size_t min_df = 2;       // absolute document count
  double max_df = 0.95;         // fraction of documents
  std::size_t max_features = 10000;
  bool sublinear_tf = true;
  bool strip_accents = true;
};

// Lowercased, accent-folded (NFKD without combining marks) tokens split on
// runs of non-alphanumeric code points.
std::vector<std::string> tokenize(std::string_view text, bool strip_accents = true);

struct TfidfVocab {
  std::vector<std::string> terms;  // sorted
  std::vector<std::size_t> df;
  std::vector<double> idf;         // ln((1 + N) / (1 + df)) + 1
  std::size_t documents = 0;
  TfidfConfig config;

  std::size_t size() const { return terms.size(); }
};

// Unigrams and bigrams. Terms failing min_df / max_df are dropped, then the
// max_features most frequent remain (ties broken lexicographically).
// Throws EmptyVocabulary when nothing survives.
TfidfVocab tfidf_fit(const std::vector<std::string>& corpus, const TfidfConfig& config = {});

// tf = 1 + ln(count) (sublinear) or count; entries tf * idf; non-empty rows
// scaled to unit L2 norm. Unknown terms are ignored.
SparseRows tfidf_transform(const TfidfVocab& vocab, const std::vector<std::string>& texts);

struct LogRegConfig {
  bool class_balanced = true;
  std::uint64_t seed = 42;
  std::size_t epochs = 500;
  double learning_rate = 0.5;
  double l2 = 1e-4;
  std::size_t batch_size = 64;
  double tol = 1e-7;  // stop once the epoch loss changes by less
};

struct LinearModel {
  enum class Status { kOk, kSingleClass };

  Eigen::MatrixXd weights;  // classes x features
  Eigen::VectorXd bias;
  Status status = Status::kOk;
  std::vector<double> loss_history;  // full objective after each epoch
};

// n / (k * count(y_i)) with k the number of classes present in y.
std::vector<double> class_balanced_weights(const std::vector<int>& y);

// Weighted mean cross-entropy plus (l2 / 2) * ||W||^2.
double logreg_objective(const LinearModel& model, const SparseRows& x, const std::vector<int>& y,
                        const std::vector<double>& sample_weights, double l2);

// Labels are indices in [0, num_classes). A single distinct label yields a
// constant predictor with status kSingleClass.
LinearModel logreg_train(const SparseRows& x, const std::vector<int>& y,
                         std::size_t num_classes, const LogRegConfig& config = {});

std::vector<int> logreg_predict(const LinearModel& model, const SparseRows& x);

struct BaselineModel {
  TfidfVocab vocab;
  std::vector<LinearModel> heads;  // one per taxonomy dimension
};

BaselineModel baseline_train(const std::vector<std::string>& texts,
                             const std::vector<LabelSet>& labels,
                             const TfidfConfig& tfidf = {}, const LogRegConfig& logreg = {});

std::vector<LabelSet> baseline_predict(const BaselineModel& model,
                                       const std::vector<std::string>& texts);

// Per-dimension argmax predictions scored with the full metrics report.
MetricsReport baseline_eval(const std::vector<LinearModel>& heads, const SparseRows& x,
                            const std::vector<LabelSet>& gold);

}  // namespace pfacts
