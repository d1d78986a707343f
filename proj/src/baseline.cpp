#include "pfacts/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <unordered_map>

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include "pfacts/rng.hpp"

namespace pfacts {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

std::vector<std::string> tokenize(std::string_view text, bool strip_accents) {
  icu::UnicodeString s = icu::UnicodeString::fromUTF8(
      icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  if (strip_accents) {
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* nfkd = icu::Normalizer2::getNFKDInstance(status);
    if (U_FAILURE(status)) {
      throw Error(ErrorCategory::kData, "UnicodeError", u_errorName(status));
    }
    s = nfkd->normalize(s, status);
    if (U_FAILURE(status)) {
      throw Error(ErrorCategory::kData, "UnicodeError", u_errorName(status));
    }
  }
  std::vector<std::string> tokens;
  icu::UnicodeString current;
  auto flush = [&] {
    if (current.isEmpty()) return;
    std::string utf8;
    current.toUTF8String(utf8);
    tokens.push_back(std::move(utf8));
    current.remove();
  };
  for (int32_t i = 0; i < s.length();) {
    const UChar32 c = s.char32At(i);
    i += U16_LENGTH(c);
    if (strip_accents && u_getCombiningClass(c) != 0) continue;
    if (u_isalnum(c)) {
      current.append(u_tolower(c));
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

namespace {

std::vector<std::string> ngrams(std::string_view text, bool strip_accents) {
  auto tokens = tokenize(text, strip_accents);
  std::vector<std::string> out = tokens;
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
    out.push_back(tokens[i] + " " + tokens[i + 1]);
  }
  return out;
}

}  // namespace

TfidfVocab tfidf_fit(const std::vector<std::string>& corpus, const TfidfConfig& config) {
  if (corpus.empty()) throw Error(ErrorCategory::kData, "EmptyInput", "empty corpus");
  std::unordered_map<std::string, std::size_t> df;
  for (const auto& doc : corpus) {
    auto grams = ngrams(doc, config.strip_accents);
    std::sort(grams.begin(), grams.end());
    grams.erase(std::unique(grams.begin(), grams.end()), grams.end());
    for (auto& g : grams) ++df[std::move(g)];
  }
  const double n = static_cast<double>(corpus.size());
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [term, count] : df) {
    if (count < config.min_df) continue;
    if (static_cast<double>(count) / n > config.max_df) continue;
    kept.emplace_back(term, count);
  }
  if (kept.empty()) {
    throw Error(ErrorCategory::kData, "EmptyVocabulary",
                "no term satisfies min_df/max_df; lower min_df or raise max_df");
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (kept.size() > config.max_features) kept.resize(config.max_features);
  std::sort(kept.begin(), kept.end());

  TfidfVocab vocab;
  vocab.config = config;
  vocab.documents = corpus.size();
  for (auto& [term, count] : kept) {
    vocab.terms.push_back(term);
    vocab.df.push_back(count);
    vocab.idf.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(count))) + 1.0);
  }
  return vocab;
}

SparseRows tfidf_transform(const TfidfVocab& vocab, const std::vector<std::string>& texts) {
  std::unordered_map<std::string_view, Index> index;
  for (std::size_t i = 0; i < vocab.terms.size(); ++i) {
    index.emplace(vocab.terms[i], static_cast<Index>(i));
  }
  std::vector<Eigen::Triplet<double>> triplets;
  for (std::size_t row = 0; row < texts.size(); ++row) {
    std::map<Index, double> counts;
    for (const auto& g : ngrams(texts[row], vocab.config.strip_accents)) {
      if (auto it = index.find(g); it != index.end()) counts[it->second] += 1.0;
    }
    double norm_sq = 0.0;
    for (auto& [col, value] : counts) {
      const double tf = vocab.config.sublinear_tf ? 1.0 + std::log(value) : value;
      value = tf * vocab.idf[static_cast<std::size_t>(col)];
      norm_sq += value * value;
    }
    const double norm = std::sqrt(norm_sq);
    for (const auto& [col, value] : counts) {
      triplets.emplace_back(static_cast<Index>(row), col, value / norm);
    }
  }
  SparseRows x(static_cast<Index>(texts.size()), static_cast<Index>(vocab.size()));
  x.setFromTriplets(triplets.begin(), triplets.end());
  return x;
}

std::vector<double> class_balanced_weights(const std::vector<int>& y) {
  std::map<int, double> counts;
  for (int label : y) counts[label] += 1.0;
  const double n = static_cast<double>(y.size());
  const double k = static_cast<double>(counts.size());
  std::vector<double> w;
  w.reserve(y.size());
  for (int label : y) w.push_back(n / (k * counts[label]));
  return w;
}

namespace {

VectorXd row_logits(const LinearModel& model, const SparseRows& x, Index row) {
  VectorXd logits = model.bias;
  for (SparseRows::InnerIterator it(x, row); it; ++it) {
    logits += model.weights.col(it.col()) * it.value();
  }
  return logits;
}

// Softmax in place; returns log-sum-exp of the input.
double softmax(VectorXd& v) {
  const double m = v.maxCoeff();
  v = (v.array() - m).exp();
  const double s = v.sum();
  v /= s;
  return m + std::log(s);
}

}  // namespace

double logreg_objective(const LinearModel& model, const SparseRows& x, const std::vector<int>& y,
                        const std::vector<double>& sample_weights, double l2) {
  double total = 0.0;
  for (Index i = 0; i < x.rows(); ++i) {
    VectorXd logits = row_logits(model, x, i);
    const double target = logits(y[static_cast<std::size_t>(i)]);
    const double lse = softmax(logits);
    total += sample_weights[static_cast<std::size_t>(i)] * (lse - target);
  }
  const double n = x.rows() > 0 ? static_cast<double>(x.rows()) : 1.0;
  return total / n + 0.5 * l2 * model.weights.squaredNorm();
}

LinearModel logreg_train(const SparseRows& x, const std::vector<int>& y, std::size_t num_classes,
                         const LogRegConfig& config) {
  if (static_cast<std::size_t>(x.rows()) != y.size()) {
    throw Error(ErrorCategory::kData, "LengthMismatch", "feature rows and labels differ in count");
  }
  if (y.empty()) throw Error(ErrorCategory::kData, "EmptyInput", "no training examples");
  for (int label : y) {
    if (label < 0 || static_cast<std::size_t>(label) >= num_classes) {
      throw Error(ErrorCategory::kData, "LabelOutOfRange", "label out of range");
    }
  }
  if (config.batch_size == 0) {
    throw Error(ErrorCategory::kConfig, "BadBatchSize", "batch_size must be positive");
  }
  LinearModel model;
  const auto k = static_cast<Index>(num_classes);
  model.weights = MatrixXd::Zero(k, x.cols());
  model.bias = VectorXd::Zero(k);

  if (std::set<int>(y.begin(), y.end()).size() == 1) {
    model.status = LinearModel::Status::kSingleClass;
    model.bias(y.front()) = 1.0;
    return model;
  }

  const std::vector<double> weights =
      config.class_balanced ? class_balanced_weights(y) : std::vector<double>(y.size(), 1.0);
  Rng rng(config.seed);
  std::vector<std::size_t> order(y.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  double previous = logreg_objective(model, x, y, weights, config.l2);

  MatrixXd grad_w(k, x.cols());
  VectorXd grad_b(k);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const auto end = std::min(order.size(), start + config.batch_size);
      const double inv = 1.0 / static_cast<double>(end - start);
      grad_w.setZero();
      grad_b.setZero();
      for (std::size_t b = start; b < end; ++b) {
        const auto i = static_cast<Index>(order[b]);
        VectorXd p = row_logits(model, x, i);
        softmax(p);
        p(y[order[b]]) -= 1.0;
        p *= weights[order[b]] * inv;
        grad_b += p;
        for (SparseRows::InnerIterator it(x, i); it; ++it) {
          grad_w.col(it.col()) += p * it.value();
        }
      }
      grad_w += config.l2 * model.weights;
      model.weights -= config.learning_rate * grad_w;
      model.bias -= config.learning_rate * grad_b;
    }
    const double current = logreg_objective(model, x, y, weights, config.l2);
    model.loss_history.push_back(current);
    if (!std::isfinite(current)) {
      throw Error(ErrorCategory::kNumeric, "NonFiniteLoss", "logistic regression diverged");
    }
    if (std::abs(previous - current) < config.tol) break;
    previous = current;
  }
  return model;
}

std::vector<int> logreg_predict(const LinearModel& model, const SparseRows& x) {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(x.rows()));
  for (Index i = 0; i < x.rows(); ++i) {
    const VectorXd logits = row_logits(model, x, i);
    Index best = 0;
    for (Index j = 1; j < logits.size(); ++j) {
      if (logits(j) > logits(best)) best = j;
    }
    out.push_back(static_cast<int>(best));
  }
  return out;
}

BaselineModel baseline_train(const std::vector<std::string>& texts,
                             const std::vector<LabelSet>& labels, const TfidfConfig& tfidf,
                             const LogRegConfig& logreg) {
  if (texts.size() != labels.size()) {
    throw Error(ErrorCategory::kData, "LengthMismatch", "texts and labels differ in count");
  }
  BaselineModel model;
  model.vocab = tfidf_fit(texts, tfidf);
  const SparseRows x = tfidf_transform(model.vocab, texts);
  for (auto dim : kAllDimensions) {
    std::vector<int> y;
    y.reserve(labels.size());
    for (const auto& l : labels) y.push_back(l.index(dim));
    model.heads.push_back(logreg_train(x, y, label_count(dim), logreg));
  }
  return model;
}

std::vector<LabelSet> baseline_predict(const BaselineModel& model,
                                       const std::vector<std::string>& texts) {
  const SparseRows x = tfidf_transform(model.vocab, texts);
  std::vector<LabelSet> out(texts.size());
  for (std::size_t d = 0; d < kNumDimensions; ++d) {
    const auto pred = logreg_predict(model.heads.at(d), x);
    for (std::size_t i = 0; i < pred.size(); ++i) out[i].set_index(kAllDimensions[d], pred[i]);
  }
  return out;
}

MetricsReport baseline_eval(const std::vector<LinearModel>& heads, const SparseRows& x,
                            const std::vector<LabelSet>& gold) {
  if (heads.size() != kNumDimensions) {
    throw Error(ErrorCategory::kSchema, "SchemaMismatch", "need one model per dimension");
  }
  if (static_cast<std::size_t>(x.rows()) != gold.size()) {
    throw length_mismatch(gold.size(), static_cast<std::size_t>(x.rows()));
  }
  std::vector<LabelSet> pred(gold.size());
  for (std::size_t d = 0; d < kNumDimensions; ++d) {
    const auto p = logreg_predict(heads[d], x);
    for (std::size_t i = 0; i < p.size(); ++i) pred[i].set_index(kAllDimensions[d], p[i]);
  }
  return evaluate(gold, pred);
}

}  // namespace pfacts
