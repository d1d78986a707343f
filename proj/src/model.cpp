#include "pfacts/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "pfacts/binio.hpp"
#include "pfacts/metrics.hpp"

namespace pfacts {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

Error model_error(const char* kind, const std::string& message) {
  return Error(ErrorCategory::kModel, kind, message);
}

void check_input(const MultiHeadModel& model, Index cols) {
  if (static_cast<std::size_t>(cols) != model.dim) {
    throw model_error("DimensionMismatch", "input has dimension " + std::to_string(cols) +
                                               ", model expects " +
                                               std::to_string(model.dim));
  }
}

void check_target(const MultiHeadModel& model, const TargetVector& target) {
  if (target.size() != model.num_categories()) {
    throw model_error("DimensionMismatch", "target has " + std::to_string(target.size()) +
                                               " categories, model has " +
                                               std::to_string(model.num_categories()));
  }
  for (std::size_t c = 0; c < target.size(); ++c) {
    if (target[c] != kMask &&
        (target[c] < 0 || static_cast<std::size_t>(target[c]) >= model.num_labels(c))) {
      throw Error(ErrorCategory::kData, "LabelOutOfRange",
                  "target " + std::to_string(target[c]) + " out of range for category " +
                      model.category_names[c]);
    }
  }
}

double label_weight(const MultiHeadModel& model, std::size_t c, int y) {
  return model.label_weights.empty() ? 1.0 : model.label_weights[c](y);
}

double log_sum_exp(const VectorXd& v) {
  const double m = v.maxCoeff();
  return m + std::log((v.array() - m).exp().sum());
}

// Inverted-dropout keep mask, already scaled by 1/(1-p).
MatrixXd dropout_mask(Index rows, Index cols, double p, Rng& rng) {
  MatrixXd mask(rows, cols);
  const double scale = 1.0 / (1.0 - p);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) mask(i, j) = rng.uniform() < p ? 0.0 : scale;
  }
  return mask;
}

}  // namespace

HeadParams HeadParams::zeros(std::size_t dim, std::size_t hidden, std::size_t labels) {
  const auto d = static_cast<Index>(dim);
  const auto h = static_cast<Index>(hidden);
  const auto n = static_cast<Index>(labels);
  return {MatrixXd::Zero(h, d), VectorXd::Zero(h), MatrixXd::Zero(n, h), VectorXd::Zero(n)};
}

bool HeadParams::all_finite() const {
  return w1.allFinite() && b1.allFinite() && w2.allFinite() && b2.allFinite();
}

MultiHeadModel MultiHeadModel::create(std::size_t dim, std::size_t hidden,
                                      std::vector<std::string> category_names,
                                      std::vector<std::vector<std::string>> label_space,
                                      std::uint64_t seed, double dropout_rate) {
  if (dim == 0) throw model_error("DimensionMismatch", "dim must be positive");
  if (category_names.size() != label_space.size() || category_names.empty()) {
    throw model_error("SchemaMismatch", "need one label list per category");
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw Error(ErrorCategory::kConfig, "BadDropout", "dropout must lie in [0, 1)");
  }
  MultiHeadModel model;
  model.dim = dim;
  model.hidden = hidden == 0 ? dim : hidden;
  model.dropout_rate = dropout_rate;
  model.category_names = std::move(category_names);
  model.label_space = std::move(label_space);
  model.category_weights.assign(model.category_names.size(), 1.0);

  Rng rng(seed);
  auto fill = [&](MatrixXd& w) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(w.cols()));
    for (Index i = 0; i < w.rows(); ++i) {
      for (Index j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform(-bound, bound);
    }
  };
  for (const auto& labels : model.label_space) {
    if (labels.empty()) throw model_error("SchemaMismatch", "category without labels");
    auto head = HeadParams::zeros(model.dim, model.hidden, labels.size());
    fill(head.w1);
    fill(head.w2);
    model.heads.push_back(std::move(head));
  }
  return model;
}

MultiHeadModel MultiHeadModel::create_taxonomy(std::size_t dim, std::uint64_t seed,
                                               double dropout_rate) {
  return create(dim, dim, taxonomy_dimension_names(), taxonomy_label_space(), seed,
                dropout_rate);
}

bool MultiHeadModel::is_taxonomy() const {
  return category_names == taxonomy_dimension_names() &&
         label_space == taxonomy_label_space();
}

Logits forward(const MultiHeadModel& model, const VectorXd& h, bool train_mode, Rng* rng) {
  check_input(model, h.size());
  if (train_mode && rng == nullptr) {
    throw model_error("MissingRng", "train-mode forward needs a random generator");
  }
  const bool drop = train_mode && model.dropout_rate > 0.0;
  Logits logits;
  logits.reserve(model.num_categories());
  for (const auto& head : model.heads) {
    VectorXd z = h;
    if (drop) z = z.cwiseProduct(dropout_mask(h.size(), 1, model.dropout_rate, *rng));
    VectorXd a = (head.w1 * z + head.b1).array().tanh();
    if (drop) a = a.cwiseProduct(dropout_mask(a.size(), 1, model.dropout_rate, *rng));
    logits.push_back(head.w2 * a + head.b2);
  }
  return logits;
}

double loss(const MultiHeadModel& model, const Logits& logits, const TargetVector& target) {
  check_target(model, target);
  if (logits.size() != model.num_categories()) {
    throw model_error("DimensionMismatch", "logit count differs from category count");
  }
  double total = 0.0;
  std::size_t valid = 0;
  for (std::size_t c = 0; c < logits.size(); ++c) {
    if (static_cast<std::size_t>(logits[c].size()) != model.num_labels(c)) {
      throw model_error("DimensionMismatch", "logit size differs from label count");
    }
    if (target[c] == kMask) continue;
    ++valid;
    const double ce = log_sum_exp(logits[c]) - logits[c](target[c]);
    total += model.category_weights[c] * label_weight(model, c, target[c]) * ce;
  }
  return valid == 0 ? 0.0 : total / static_cast<double>(valid);
}

double batch_loss_and_gradients(const MultiHeadModel& model, const MatrixXd& x,
                                const std::vector<TargetVector>& targets, Gradients* grads,
                                Rng* rng) {
  check_input(model, x.cols());
  const Index batch = x.rows();
  if (static_cast<std::size_t>(batch) != targets.size()) {
    throw model_error("DimensionMismatch", "rows and targets differ in count");
  }
  for (const auto& t : targets) check_target(model, t);
  const bool drop = rng != nullptr && model.dropout_rate > 0.0;

  // Per-example 1/|V_i|; rows with no valid category contribute nothing.
  VectorXd inv_valid = VectorXd::Zero(batch);
  for (Index i = 0; i < batch; ++i) {
    const auto& t = targets[static_cast<std::size_t>(i)];
    const auto v = std::count_if(t.begin(), t.end(), [](int y) { return y != kMask; });
    if (v > 0) inv_valid(i) = 1.0 / static_cast<double>(v);
  }
  const double inv_batch = batch > 0 ? 1.0 / static_cast<double>(batch) : 0.0;

  if (grads) {
    grads->clear();
    for (std::size_t c = 0; c < model.num_categories(); ++c) {
      grads->push_back(HeadParams::zeros(model.dim, model.hidden, model.num_labels(c)));
    }
  }

  double total = 0.0;
  for (std::size_t c = 0; c < model.num_categories(); ++c) {
    const auto& head = model.heads[c];
    MatrixXd in_mask;
    MatrixXd hid_mask;
    MatrixXd z = x;
    if (drop) {
      in_mask = dropout_mask(batch, x.cols(), model.dropout_rate, *rng);
      z = z.cwiseProduct(in_mask);
    }
    MatrixXd a = ((z * head.w1.transpose()).rowwise() + head.b1.transpose()).array().tanh();
    MatrixXd u = a;
    if (drop) {
      hid_mask = dropout_mask(batch, a.cols(), model.dropout_rate, *rng);
      u = u.cwiseProduct(hid_mask);
    }
    MatrixXd logits = (u * head.w2.transpose()).rowwise() + head.b2.transpose();

    // dL/dlogits, one row per example.
    MatrixXd g = MatrixXd::Zero(batch, logits.cols());
    bool any = false;
    for (Index i = 0; i < batch; ++i) {
      const int y = targets[static_cast<std::size_t>(i)][c];
      if (y == kMask) continue;
      any = true;
      const VectorXd row = logits.row(i).transpose();
      const double lse = log_sum_exp(row);
      const double scale = model.category_weights[c] * label_weight(model, c, y) *
                           inv_valid(i) * inv_batch;
      total += scale * (lse - row(y));
      g.row(i) = ((row.array() - lse).exp() * scale).transpose();
      g(i, y) -= scale;
    }
    if (!grads || !any) continue;

    auto& out = (*grads)[c];
    out.w2 = g.transpose() * u;
    out.b2 = g.colwise().sum().transpose();
    MatrixXd du = g * head.w2;
    if (drop) du = du.cwiseProduct(hid_mask);
    MatrixXd da = du.array() * (1.0 - a.array().square());
    out.w1 = da.transpose() * z;
    out.b1 = da.colwise().sum().transpose();
  }
  return total;
}

Gradients backward(const MultiHeadModel& model, const VectorXd& h, const TargetVector& target) {
  Gradients grads;
  MatrixXd x = h.transpose();
  batch_loss_and_gradients(model, x, {target}, &grads, nullptr);
  return grads;
}

void TrainConfig::check() const {
  auto bad = [](const std::string& m) {
    return Error(ErrorCategory::kConfig, "BadTrainConfig", m);
  };
  if (!(learning_rate >= 0.0)) throw bad("learning_rate must be non-negative");
  if (batch_size == 0) throw bad("batch_size must be positive");
  if (max_epochs == 0) throw bad("max_epochs must be positive");
  if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0)) throw bad("adam_beta1 must lie in (0, 1)");
  if (!(adam_beta2 > 0.0 && adam_beta2 < 1.0)) throw bad("adam_beta2 must lie in (0, 1)");
  if (!(adam_eps > 0.0)) throw bad("adam_eps must be positive");
  if (!(weight_decay >= 0.0)) throw bad("weight_decay must be non-negative");
}

AdamState AdamState::zeros_like(const std::vector<HeadParams>& params) {
  AdamState state;
  for (const auto& p : params) {
    auto z = HeadParams::zeros(static_cast<std::size_t>(p.w1.cols()),
                               static_cast<std::size_t>(p.w1.rows()),
                               static_cast<std::size_t>(p.w2.rows()));
    state.m.push_back(z);
    state.v.push_back(std::move(z));
  }
  return state;
}

void adamw_step(AdamState& state, std::vector<HeadParams>& params, const Gradients& grads,
                const TrainConfig& config) {
  if (state.m.size() != params.size() || grads.size() != params.size()) {
    throw model_error("DimensionMismatch", "optimizer state does not match parameters");
  }
  ++state.step;
  const double b1 = config.adam_beta1;
  const double b2 = config.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  const double lr = config.learning_rate;
  const double eps = config.adam_eps;
  const double wd = config.weight_decay;

  auto update = [&](auto& p, auto& m, auto& v, const auto& g) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    p.array() -= lr * ((m.array() / c1) / ((v.array() / c2).sqrt() + eps) + wd * p.array());
  };
  for (std::size_t c = 0; c < params.size(); ++c) {
    auto& p = params[c];
    auto& m = state.m[c];
    auto& v = state.v[c];
    const auto& g = grads[c];
    update(p.w1, m.w1, v.w1, g.w1);
    update(p.b1, m.b1, v.b1, g.b1);
    update(p.w2, m.w2, v.w2, g.w2);
    update(p.b2, m.b2, v.b2, g.b2);
  }
}

Prediction predict(const MultiHeadModel& model, const VectorXd& h) {
  const auto logits = forward(model, h, false, nullptr);
  Prediction out;
  for (const auto& l : logits) {
    const double lse = log_sum_exp(l);
    VectorXd probs = (l.array() - lse).exp();
    Index best = 0;
    for (Index j = 1; j < l.size(); ++j) {
      if (l(j) > l(best)) best = j;
    }
    out.labels.push_back(static_cast<int>(best));
    out.confidence.push_back(probs(best));
    out.probabilities.push_back(std::move(probs));
  }
  return out;
}

std::vector<Prediction> predict(const MultiHeadModel& model, const MatrixXd& x) {
  check_input(model, x.cols());
  std::vector<Prediction> out;
  out.reserve(static_cast<std::size_t>(x.rows()));
  for (Index i = 0; i < x.rows(); ++i) out.push_back(predict(model, VectorXd(x.row(i).transpose())));
  return out;
}

LabelSet to_labelset(const MultiHeadModel& model, const Prediction& prediction) {
  if (!model.is_taxonomy()) {
    throw model_error("SchemaMismatch", "model heads do not match the fact taxonomy");
  }
  LabelSet labels;
  for (std::size_t d = 0; d < kNumDimensions; ++d) {
    labels.set_index(kAllDimensions[d], prediction.labels[d]);
  }
  return labels;
}

double pooled_macro_f1(const MultiHeadModel& model, const TrainData& data) {
  const auto preds = predict(model, data.x);
  std::vector<std::vector<int>> gold(model.num_categories());
  std::vector<std::vector<int>> pred(model.num_categories());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    for (std::size_t c = 0; c < model.num_categories(); ++c) {
      gold[c].push_back(data.y[i][c]);
      pred[c].push_back(preds[i].labels[c]);
    }
  }
  return evaluate(model.category_names, model.label_space, gold, pred).overall_macro_f1;
}

namespace {

double full_loss(const MultiHeadModel& model, const TrainData& data) {
  return batch_loss_and_gradients(model, data.x, data.y, nullptr, nullptr);
}

// Balanced weights n / (k * count) over the k labels present in training.
std::vector<VectorXd> inverse_frequency_weights(const MultiHeadModel& model,
                                                const TrainData& data) {
  std::vector<VectorXd> weights;
  for (std::size_t c = 0; c < model.num_categories(); ++c) {
    VectorXd counts = VectorXd::Zero(static_cast<Index>(model.num_labels(c)));
    for (const auto& t : data.y) {
      if (t[c] != kMask) counts(t[c]) += 1.0;
    }
    const double n = counts.sum();
    const double present = static_cast<double>((counts.array() > 0.0).count());
    VectorXd w = VectorXd::Ones(counts.size());
    for (Index j = 0; j < counts.size(); ++j) {
      if (counts(j) > 0.0) w(j) = n / (present * counts(j));
    }
    weights.push_back(std::move(w));
  }
  return weights;
}

}  // namespace

TrainResult train(MultiHeadModel model, const TrainData& train_data, const TrainData& val_data,
                  const TrainConfig& config) {
  config.check();
  if (train_data.y.empty() || val_data.y.empty()) {
    throw Error(ErrorCategory::kData, "EmptySplit", "training and validation splits must be non-empty");
  }
  if (static_cast<std::size_t>(train_data.x.rows()) != train_data.y.size() ||
      static_cast<std::size_t>(val_data.x.rows()) != val_data.y.size()) {
    throw model_error("DimensionMismatch", "embedding rows and targets differ in count");
  }
  if (config.per_label_weights) model.label_weights = inverse_frequency_weights(model, train_data);

  Rng rng(config.seed);
  AdamState state = AdamState::zeros_like(model.heads);
  TrainResult result;
  result.model = model;
  double best_f1 = -1.0;
  std::size_t stale = 0;

  const auto n = train_data.y.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Gradients grads;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const auto end = std::min(n, start + config.batch_size);
      MatrixXd xb(static_cast<Index>(end - start), train_data.x.cols());
      std::vector<TargetVector> yb;
      for (std::size_t k = start; k < end; ++k) {
        xb.row(static_cast<Index>(k - start)) = train_data.x.row(static_cast<Index>(order[k]));
        yb.push_back(train_data.y[order[k]]);
      }
      const double batch_loss = batch_loss_and_gradients(model, xb, yb, &grads, &rng);
      if (!std::isfinite(batch_loss)) {
        std::ostringstream os;
        os << "non-finite loss " << batch_loss << " at epoch " << epoch << ", batch starting at "
           << start << " (lr=" << config.learning_rate << ")";
        throw Error(ErrorCategory::kNumeric, "NonFiniteLoss", os.str());
      }
      adamw_step(state, model.heads, grads, config);
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = full_loss(model, train_data);
    record.val_macro_f1 = pooled_macro_f1(model, val_data);
    result.history.push_back(record);
    if (!std::isfinite(record.train_loss)) {
      throw Error(ErrorCategory::kNumeric, "NonFiniteLoss",
                  "non-finite training loss after epoch " + std::to_string(epoch));
    }
    if (record.val_macro_f1 > best_f1) {
      best_f1 = record.val_macro_f1;
      result.model = model;
      result.best_epoch = epoch;
      stale = 0;
    } else if (++stale >= config.patience) {
      break;
    }
  }
  return result;
}

TargetVector taxonomy_target(const FactRecord& fact) {
  TargetVector target(kNumDimensions, kMask);
  if (!fact.labels || fact.excluded) return target;
  for (std::size_t d = 0; d < kNumDimensions; ++d) {
    target[d] = fact.labels->index(kAllDimensions[d]);
  }
  return target;
}

TrainData make_train_data(const EmbeddingMatrix& embeddings,
                          const std::vector<FactRecord>& facts,
                          const std::vector<std::string>& ids) {
  std::unordered_map<std::string_view, const FactRecord*> by_id;
  for (const auto& f : facts) by_id.emplace(f.id, &f);
  TrainData data;
  data.x = embeddings.gather(ids);
  for (const auto& id : ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) {
      throw Error(ErrorCategory::kData, "MissingId", "no fact with id '" + id + "'");
    }
    data.y.push_back(taxonomy_target(*it->second));
  }
  return data;
}

TrainResult train(const MultiHeadModel& model, const EmbeddingMatrix& embeddings,
                  const std::vector<FactRecord>& facts, const SplitAssignment& split,
                  const TrainConfig& config) {
  return train(model, make_train_data(embeddings, facts, split.train),
               make_train_data(embeddings, facts, split.val), config);
}

void save_model(const std::filesystem::path& path, const MultiHeadModel& model) {
  ByteWriter w;
  w.u32(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(model.dim));
  w.u32(static_cast<std::uint32_t>(model.hidden));
  w.f64(model.dropout_rate);
  w.u32(static_cast<std::uint32_t>(model.num_categories()));
  for (std::size_t c = 0; c < model.num_categories(); ++c) {
    w.str(model.category_names[c]);
    w.f64(model.category_weights[c]);
    w.u32(static_cast<std::uint32_t>(model.num_labels(c)));
    for (const auto& label : model.label_space[c]) w.str(label);
    const bool has = !model.label_weights.empty();
    w.u32(has ? 1 : 0);
    if (has) {
      for (Index j = 0; j < model.label_weights[c].size(); ++j) w.f64(model.label_weights[c](j));
    }
  }
  auto put_matrix = [&](const MatrixXd& m) {
    for (Index i = 0; i < m.rows(); ++i) {
      for (Index j = 0; j < m.cols(); ++j) w.f64(m(i, j));
    }
  };
  for (const auto& head : model.heads) {
    put_matrix(head.w1);
    put_matrix(head.b1);
    put_matrix(head.w2);
    put_matrix(head.b2);
  }
  w.save(path);
}

MultiHeadModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCategory::kIo, "FileNotFound", "cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  ByteReader r(bytes);
  if (bytes.size() < 8 || r.u32() != kCheckpointMagic) {
    throw model_error("BadMagic", path.string() + " is not a model checkpoint");
  }
  if (const auto version = r.u32(); version != kCheckpointVersion) {
    throw model_error("BadMagic", "unsupported checkpoint version " + std::to_string(version));
  }
  MultiHeadModel model;
  model.dim = r.u32();
  model.hidden = r.u32();
  model.dropout_rate = r.f64();
  const auto num_cat = r.u32();
  bool any_label_weights = false;
  std::vector<VectorXd> label_weights;
  for (std::uint32_t c = 0; c < num_cat; ++c) {
    model.category_names.push_back(r.str());
    model.category_weights.push_back(r.f64());
    const auto n = r.u32();
    std::vector<std::string> labels;
    for (std::uint32_t j = 0; j < n; ++j) labels.push_back(r.str());
    model.label_space.push_back(std::move(labels));
    VectorXd lw = VectorXd::Ones(n);
    if (r.u32() != 0) {
      any_label_weights = true;
      for (std::uint32_t j = 0; j < n; ++j) lw(j) = r.f64();
    }
    label_weights.push_back(std::move(lw));
  }
  if (any_label_weights) model.label_weights = std::move(label_weights);
  auto get_matrix = [&](auto& m) {
    for (Index i = 0; i < m.rows(); ++i) {
      for (Index j = 0; j < m.cols(); ++j) m(i, j) = r.f64();
    }
  };
  for (std::uint32_t c = 0; c < num_cat; ++c) {
    auto head = HeadParams::zeros(model.dim, model.hidden, model.num_labels(c));
    get_matrix(head.w1);
    get_matrix(head.b1);
    get_matrix(head.w2);
    get_matrix(head.b2);
    if (!head.all_finite()) throw model_error("NonFiniteValue", "checkpoint has non-finite weights");
    model.heads.push_back(std::move(head));
  }
  if (r.remaining() != 0) throw model_error("TrailingBytes", "unexpected data after parameters");
  return model;
}

}  // namespace pfacts
