#pragma once

// Multi-head classifier over frozen text embeddings.
//
// Every category c owns an independent two-layer head
//
//   z_c = dropout(h)
//   a_c = tanh(W1_c z_c + b1_c)
//   l_c = W2_c dropout(a_c) + b2_c
//
// trained on the masked, weighted cross-entropy
//
//   L = (1/|V|) * sum_c w_c * [y_c >= 0] * CE(l_c, y_c),
//
// where V is the set of unmasked categories and L = 0 when V is empty.
// Dropout is inverted (scaled by 1/(1-p) at train time, identity at eval).

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pfacts/core.hpp"
#include "pfacts/dataio.hpp"
#include "pfacts/embed.hpp"
#include "pfacts/rng.hpp"

namespace pfacts {

struct HeadParams {
  Eigen::MatrixXd w1;  // hidden x dim
  Eigen::VectorXd b1;  // hidden
  Eigen::MatrixXd w2;  // labels x hidden
  Eigen::VectorXd b2;  // labels

  static HeadParams zeros(std::size_t dim, std::size_t hidden, std::size_t labels);
  // Applies `fn(a, b)` to matching tensors of two heads of equal shape.
  template <typename Fn>
  static void zip(HeadParams& a, const HeadParams& b, Fn&& fn) {
    fn(a.w1, b.w1);
    fn(a.b1, b.b1);
    fn(a.w2, b.w2);
    fn(a.b2, b.b2);
  }
  bool all_finite() const;
};

using Gradients = std::vector<HeadParams>;

// Label index per category, or kMask when the category carries no target.
using TargetVector = std::vector<int>;
inline constexpr int kMask = -1;

using Logits = std::vector<Eigen::VectorXd>;

struct MultiHeadModel {
  std::size_t dim = 0;
  std::size_t hidden = 0;
  double dropout_rate = 0.1;
  std::vector<std::string> category_names;
  std::vector<std::vector<std::string>> label_space;
  std::vector<double> category_weights;
  // Optional per-label CE weights; empty, or one vector per category.
  std::vector<Eigen::VectorXd> label_weights;
  std::vector<HeadParams> heads;

  // W entries ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero. `hidden` of
  // zero means hidden = dim.
  static MultiHeadModel create(std::size_t dim, std::size_t hidden,
                               std::vector<std::string> category_names,
                               std::vector<std::vector<std::string>> label_space,
                               std::uint64_t seed, double dropout_rate = 0.1);
  // All seven taxonomy heads, label counts 9, 4, 3, 3, 2, 6, 3.
  static MultiHeadModel create_taxonomy(std::size_t dim, std::uint64_t seed,
                                        double dropout_rate = 0.1);

  std::size_t num_categories() const { return heads.size(); }
  std::size_t num_labels(std::size_t c) const { return label_space[c].size(); }
  bool is_taxonomy() const;
};

// Per-example forward pass. `rng` is required when train_mode is set.
Logits forward(const MultiHeadModel& model, const Eigen::VectorXd& h,
               bool train_mode = false, Rng* rng = nullptr);

// The objective above for a single example.
double loss(const MultiHeadModel& model, const Logits& logits,
            const TargetVector& target);

// Exact gradients of loss(forward(h)) with dropout disabled.
Gradients backward(const MultiHeadModel& model, const Eigen::VectorXd& h,
                   const TargetVector& target);

// Mean per-example loss over the rows of `x` and its gradient. With a
// non-null `rng` dropout masks are drawn per example and per head.
double batch_loss_and_gradients(const MultiHeadModel& model, const Eigen::MatrixXd& x,
                                const std::vector<TargetVector>& targets,
                                Gradients* grads, Rng* rng = nullptr);

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 64;
  std::size_t max_epochs = 10;
  std::size_t patience = 3;
  std::uint64_t seed = 42;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.01;
  // Inverse-frequency CE weights per label, computed on the training split.
  bool per_label_weights = false;

  void check() const;
};

struct AdamState {
  std::vector<HeadParams> m;
  std::vector<HeadParams> v;
  std::uint64_t step = 0;

  static AdamState zeros_like(const std::vector<HeadParams>& params);
};

// Bias-corrected Adam with decoupled weight decay:
//   p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * p)
void adamw_step(AdamState& state, std::vector<HeadParams>& params,
                const Gradients& grads, const TrainConfig& config);

struct TrainData {
  Eigen::MatrixXd x;  // one row per example
  std::vector<TargetVector> y;
};

struct EpochRecord {
  std::size_t epoch = 0;       // 1-based
  double train_loss = 0.0;     // eval-mode loss over the full training set
  double val_macro_f1 = 0.0;   // pooled over all categories
};

struct TrainResult {
  MultiHeadModel model;  // best-epoch snapshot
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;  // 0 when no epoch ran
};

TrainResult train(MultiHeadModel model, const TrainData& train_data,
                  const TrainData& val_data, const TrainConfig& config);

// Targets for the taxonomy heads; excluded or unlabeled facts are fully
// masked.
TargetVector taxonomy_target(const FactRecord& fact);
TrainData make_train_data(const EmbeddingMatrix& embeddings,
                          const std::vector<FactRecord>& facts,
                          const std::vector<std::string>& ids);

TrainResult train(const MultiHeadModel& model, const EmbeddingMatrix& embeddings,
                  const std::vector<FactRecord>& facts, const SplitAssignment& split,
                  const TrainConfig& config);

// Pooled macro-F1 of the model on `data` (masked targets are skipped).
double pooled_macro_f1(const MultiHeadModel& model, const TrainData& data);

struct Prediction {
  std::vector<int> labels;          // argmax per category, lowest index on ties
  std::vector<double> confidence;   // max softmax probability per category
  std::vector<Eigen::VectorXd> probabilities;
};

Prediction predict(const MultiHeadModel& model, const Eigen::VectorXd& h);
std::vector<Prediction> predict(const MultiHeadModel& model, const Eigen::MatrixXd& x);
// Requires a taxonomy model. Heads are not reconciled with each other.
LabelSet to_labelset(const MultiHeadModel& model, const Prediction& prediction);

// Checkpoint layout, little-endian:
//   u32 magic 'PFMH' (0x484d4650), u32 version (1), u32 dim, u32 hidden,
//   f64 dropout, u32 C,
//   C times: str name, f64 weight, u32 n_c, n_c times str label,
//            u32 has_label_weights, [n_c f64]
//   C times: W1 (hidden x dim, row-major), b1, W2 (n_c x hidden,
//            row-major), b2, all f64.
// `str` is a u32 byte length followed by UTF-8 bytes.
inline constexpr std::uint32_t kCheckpointMagic = 0x484d4650;
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_model(const std::filesystem::path& path, const MultiHeadModel& model);
MultiHeadModel load_model(const std::filesystem::path& path);

}  // namespace pfacts
