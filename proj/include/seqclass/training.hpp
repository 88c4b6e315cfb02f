// SPDX-License-Identifier: Apache-2.0
/**
 * @file   training.hpp
 * @brief  Cross-entropy losses, hand-derived backpropagation through time,
 *         finite-difference gradient check, SGD and the epoch loop.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "seqclass/encoding.hpp"
#include "seqclass/errors.hpp"
#include "seqclass/model.hpp"
#include "seqclass/numerics.hpp"

namespace seqclass {

inline constexpr double probability_floor = 1e-12;

inline double clamp_probability(double p) {
  return std::clamp(p, probability_floor, 1.0 - probability_floor);
}

/// Binary cross-entropy, p clamped to [1e-12, 1 - 1e-12].
inline double bce_loss(double p, int y) {
  if (y != 0 && y != 1)
    throw LabelError("bce_loss: label must be 0 or 1, got " +
                     std::to_string(y));
  // Exact predictions short-circuit so that p == y gives exactly 0.
  if (static_cast<double>(y) == p)
    return 0.0;
  const double q = clamp_probability(p);
  return y == 1 ? -std::log(q) : -std::log1p(-q);
}

/// Categorical cross-entropy -ln p[y], entries clamped as in bce_loss.
inline double cce_loss(const Matrix &p, int y) {
  if (y < 0 || static_cast<std::size_t>(y) >= p.size())
    throw LabelError("cce_loss: class " + std::to_string(y) +
                     " out of range for " + std::to_string(p.size()) +
                     " classes");
  const double py = p[static_cast<std::size_t>(y)];
  if (py == 1.0)
    return 0.0;
  return -std::log(clamp_probability(py));
}

inline double sample_loss(const Matrix &probabilities, HeadKind kind, int y) {
  return kind == HeadKind::binary ? bce_loss(probabilities[0], y)
                                  : cce_loss(probabilities, y);
}

/// Optional per-class loss weights; empty means every class weighs 1.
using ClassWeights = std::vector<double>;

inline double class_weight(const ClassWeights &w, int y) {
  if (w.empty())
    return 1.0;
  if (y < 0 || static_cast<std::size_t>(y) >= w.size())
    throw LabelError("no class weight for class " + std::to_string(y));
  return w[static_cast<std::size_t>(y)];
}

struct BackwardResult {
  Gradients gradients;
  double mean_loss = 0.0;
};

namespace detail {

inline Matrix row_of(const Matrix &m, std::size_t r) {
  const auto v = m.row_values(r);
  return Matrix::row(std::vector<double>(v.begin(), v.end()));
}

inline void add_to_row(Matrix &m, std::size_t r, const Matrix &v) {
  auto dst = m.row_values(r);
  for (std::size_t i = 0; i < dst.size(); ++i)
    dst[i] += v[i];
}

inline void check_cache(const ForwardCache &c, const EncodedSequence &seq,
                        const ModelParams &model) {
  if (c.sequence != seq)
    throw ConsistencyError("forward cache was produced for another sequence");
  if (c.cell != model.cell_kind())
    throw ConsistencyError("forward cache cell kind differs from model");
  if (c.hidden.size() != seq.size() + 1 ||
      c.hidden.back().cols() != model.hidden_dim())
    throw ConsistencyError("forward cache hidden states do not match model");
  if (c.inputs.cols() != model.embedding_dim())
    throw ConsistencyError("forward cache embedding width differs from model");
  if (c.cell == CellKind::lstm && c.memory.size() != seq.size() + 1)
    throw ConsistencyError("forward cache is missing LSTM cell states");
}

inline void backward_rnn(const ForwardCache &c, const RnnParams &p,
                         Matrix dh, RnnParams &g, Matrix &d_embedding) {
  for (std::size_t t = c.sequence.size(); t-- > 0;) {
    const Matrix &h = c.hidden[t + 1];
    Matrix da = dh;
    for (std::size_t i = 0; i < da.size(); ++i)
      da[i] *= 1.0 - h[i] * h[i];
    const Matrix x = row_of(c.inputs, t);
    g.w += matmul_tn(x, da);
    g.p += matmul_tn(c.hidden[t], da);
    g.b += da;
    add_to_row(d_embedding, c.sequence[t], matmul_nt(da, p.w));
    dh = matmul_nt(da, p.p);
  }
}

inline void backward_lstm(const ForwardCache &c, const LstmParams &p,
                          Matrix dh, LstmParams &g, Matrix &d_embedding) {
  const std::size_t hidden = dh.cols();
  Matrix dm(1, hidden);
  for (std::size_t t = c.sequence.size(); t-- > 0;) {
    const Matrix &ig = c.input_gate[t];
    const Matrix &fg = c.forget_gate[t];
    const Matrix &og = c.output_gate[t];
    const Matrix &m1 = c.candidate[t];
    const Matrix &tm = c.tanh_memory[t];
    const Matrix &m_prev = c.memory[t];
    const Matrix &h_prev = c.hidden[t];

    Matrix dz_ig(1, hidden), dz_fg(1, hidden), dz_og(1, hidden),
        dz_m(1, hidden), dm_prev(1, hidden);
    for (std::size_t i = 0; i < hidden; ++i) {
      const double d_og = dh[i] * tm[i];
      const double dm_i = dm[i] + dh[i] * og[i] * (1.0 - tm[i] * tm[i]);
      const double d_fg = dm_i * m_prev[i];
      const double d_ig = dm_i * m1[i];
      const double d_m1 = dm_i * ig[i];
      dm_prev[i] = dm_i * fg[i];
      dz_ig[i] = d_ig * ig[i] * (1.0 - ig[i]);
      dz_fg[i] = d_fg * fg[i] * (1.0 - fg[i]);
      dz_og[i] = d_og * og[i] * (1.0 - og[i]);
      dz_m[i] = d_m1 * (1.0 - m1[i] * m1[i]);
    }

    const Matrix x = row_of(c.inputs, t);
    Matrix dx(1, x.cols());
    Matrix dh_prev(1, hidden);
    auto accumulate = [&](const Matrix &dz, const Matrix &w, const Matrix &pm,
                          Matrix &gw, Matrix &gp, Matrix &gb) {
      gw += matmul_tn(x, dz);
      gp += matmul_tn(h_prev, dz);
      gb += dz;
      dx += matmul_nt(dz, w);
      dh_prev += matmul_nt(dz, pm);
    };
    auto gate = [&](const Matrix &dz, const GateParams &gp, GateParams &gg) {
      accumulate(dz, gp.w, gp.p, gg.w, gg.p, gg.b);
      gg.q += hadamard(dz, m_prev);
      dm_prev += hadamard(dz, gp.q);
    };
    gate(dz_ig, p.input_gate, g.input_gate);
    gate(dz_fg, p.forget_gate, g.forget_gate);
    gate(dz_og, p.output_gate, g.output_gate);
    accumulate(dz_m, p.candidate.w, p.candidate.p, g.candidate.w,
               g.candidate.p, g.candidate.b);

    add_to_row(d_embedding, c.sequence[t], dx);
    dh = std::move(dh_prev);
    dm = std::move(dm_prev);
  }
}

} // namespace detail

/// Exact gradients of the (optionally class-weighted) mean loss over the
/// batch, unrolled through every timestep. `caches[i]` must come from
/// forward(batch.sequences[i], model, ...).
inline BackwardResult backward_bptt(const EncodedDataset &batch,
                                    const ModelParams &model,
                                    const std::vector<ForwardCache> &caches,
                                    const ClassWeights &weights = {}) {
  if (batch.sequences.size() != batch.labels.size())
    throw ConsistencyError("batch has " + std::to_string(batch.rows()) +
                           " sequences but " +
                           std::to_string(batch.labels.size()) + " labels");
  if (caches.size() != batch.rows())
    throw ConsistencyError("batch has " + std::to_string(batch.rows()) +
                           " rows but " + std::to_string(caches.size()) +
                           " forward caches");
  if (batch.empty())
    throw EmptyInputError("backward_bptt: empty batch");

  BackwardResult out{zeros_like(model), 0.0};
  Gradients &g = out.gradients;
  const double scale = 1.0 / static_cast<double>(batch.rows());
  const std::size_t k_out = model.head.w_out.cols();

  for (std::size_t n = 0; n < batch.rows(); ++n) {
    const ForwardCache &c = caches[n];
    detail::check_cache(c, batch.sequences[n], model);
    const int y = batch.labels[n];
    const double w = class_weight(weights, y);
    out.mean_loss += w * sample_loss(c.probabilities, model.head.kind, y);

    // Cross-entropy through sigmoid / softmax: dL/dlogits = p - onehot(y).
    Matrix dlogits = c.probabilities;
    if (model.head.kind == HeadKind::binary) {
      dlogits[0] -= static_cast<double>(y);
    } else {
      if (y < 0 || static_cast<std::size_t>(y) >= k_out)
        throw LabelError("label " + std::to_string(y) + " out of range");
      dlogits[static_cast<std::size_t>(y)] -= 1.0;
    }
    dlogits *= w * scale;

    g.head.w_out += matmul_tn(c.features, dlogits);
    g.head.b_out += dlogits;
    Matrix dh = hadamard(matmul_nt(dlogits, model.head.w_out), c.dropout_mask);

    if (const auto *rnn = std::get_if<RnnParams>(&model.cell))
      detail::backward_rnn(c, *rnn, std::move(dh), std::get<RnnParams>(g.cell),
                           g.embedding.weights);
    else
      detail::backward_lstm(c, std::get<LstmParams>(model.cell), std::move(dh),
                            std::get<LstmParams>(g.cell), g.embedding.weights);
  }
  out.mean_loss *= scale;
  return out;
}

inline double gradient_norm(const Gradients &g) {
  double s = 0.0;
  for_each_tensor(g, [&](std::string_view, const Matrix &m) {
    s += sum_of_squares(m);
  });
  return std::sqrt(s);
}

/// Rescales g so its global L2 norm is at most max_norm. Returns the norm
/// before clipping.
inline double clip_gradients(Gradients &g, double max_norm) {
  const double norm = gradient_norm(g);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for_each_tensor(g, [&](std::string_view, Matrix &m) { m *= s; });
  }
  return norm;
}

inline void apply_sgd(ModelParams &model, const Gradients &grads, double lr) {
  auto params = tensor_list(model);
  auto deltas = tensor_list(grads);
  if (params.size() != deltas.size())
    throw ShapeError("sgd: model has " + std::to_string(params.size()) +
                     " tensors, gradients have " +
                     std::to_string(deltas.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix &p = *params[i].second;
    const Matrix &d = *deltas[i].second;
    if (params[i].first != deltas[i].first || !p.same_shape(d))
      throw ShapeError("sgd: tensor " + params[i].first + " is " + p.shape() +
                       ", gradient " + deltas[i].first + " is " + d.shape());
  }
  if (lr == 0.0)
    return;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto pv = params[i].second->values();
    auto dv = deltas[i].second->values();
    for (std::size_t j = 0; j < pv.size(); ++j)
      pv[j] -= lr * dv[j];
  }
}

inline ModelParams sgd_update(ModelParams model, const Gradients &grads,
                              double lr) {
  apply_sgd(model, grads, lr);
  return model;
}

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_tensor;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t entries_checked = 0;
};

/// Loss of one sample with dropout disabled.
inline double deterministic_loss(const ModelParams &model,
                                 const EncodedSequence &seq, int label) {
  Rng unused(0);
  const auto r = forward(seq, model, unused, /*training=*/false);
  return sample_loss(r.probabilities, model.head.kind, label);
}

/// Compares every analytic gradient entry with the central difference
/// (L(+eps) - L(-eps)) / 2eps. Relative error is |a - n| / max(|a|, |n|, 1e-8).
inline GradCheckResult grad_check(const ModelParams &model,
                                  const EncodedSequence &seq, int label,
                                  double eps = 1e-5) {
  if (!(eps > 0.0) || !std::isfinite(eps))
    throw ParameterError("grad_check: eps must be positive and finite");
  if (model.dropout_rate != 0.0)
    throw ParameterError("grad_check: dropout must be disabled (rate 0)");
  check_model(model);

  Rng unused(0);
  EncodedDataset batch;
  batch.max_len = seq.size();
  batch.sequences = {seq};
  batch.labels = {label};
  std::vector<ForwardCache> caches{forward(seq, model, unused, false).cache};
  const Gradients analytic = backward_bptt(batch, model, caches).gradients;

  GradCheckResult result;
  ModelParams probe = model;
  auto params = tensor_list(probe);
  auto grads = tensor_list(analytic);
  for (std::size_t ti = 0; ti < params.size(); ++ti) {
    auto values = params[ti].second->values();
    const auto expected = grads[ti].second->values();
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double saved = values[j];
      values[j] = saved + eps;
      const double up = deterministic_loss(probe, seq, label);
      values[j] = saved - eps;
      const double down = deterministic_loss(probe, seq, label);
      values[j] = saved;

      const double numeric = (up - down) / (2.0 * eps);
      const double a = expected[j];
      const double rel = std::abs(a - numeric) /
                         std::max({std::abs(a), std::abs(numeric), 1e-8});
      ++result.entries_checked;
      if (rel > result.max_relative_error) {
        result.max_relative_error = rel;
        result.worst_tensor = params[ti].first;
        result.worst_index = j;
        result.analytic = a;
        result.numeric = numeric;
      }
    }
  }
  return result;
}

struct TrainConfig {
  std::size_t embedding_dim = 512;
  std::optional<std::size_t> hidden_dim; // defaults to embedding_dim
  double learning_rate = 0.01;
  double dropout_rate = 0.1;
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  std::size_t max_len = 35;
  CellKind cell = CellKind::lstm;
  std::size_t classes = 2; // 2 = sigmoid head, k > 2 = softmax head
  std::uint64_t seed = 0;
  std::optional<std::size_t> top_words;
  double clip_norm = 5.0; // <= 0 disables clipping
  ClassWeights class_weights;

  std::size_t effective_hidden_dim() const {
    return hidden_dim.value_or(embedding_dim);
  }

  void validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
      throw ParameterError("learning rate must be finite and >= 0");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
      throw ParameterError("dropout rate must be in [0, 1)");
    if (epochs < 1)
      throw ParameterError("epochs must be >= 1");
    if (batch_size < 1)
      throw ParameterError("batch size must be >= 1");
    if (max_len < 1)
      throw ParameterError("max_len must be >= 1");
    if (embedding_dim < 1 || effective_hidden_dim() < 1)
      throw ParameterError("embedding and hidden dims must be >= 1");
    if (classes < 2)
      throw ParameterError("need at least 2 classes");
    if (!class_weights.empty() && class_weights.size() != classes)
      throw ParameterError("class weights must list one weight per class");
  }
};

struct EpochRecord {
  std::size_t epoch = 0; // 1-based
  double train_loss = 0.0;
  double valid_loss = 0.0;
  double valid_accuracy = 0.0;
};

using TrainHistory = std::vector<EpochRecord>;

struct TrainResult {
  ModelParams model;
  TrainHistory history;
  std::size_t best_epoch = 0;
};

inline std::vector<int> predict_all(const ModelParams &model,
                                    const EncodedDataset &data,
                                    double threshold = 0.5) {
  std::vector<int> preds;
  preds.reserve(data.rows());
  Rng unused(0);
  for (const auto &seq : data.sequences)
    preds.push_back(predict_class(
        forward(seq, model, unused, false).probabilities, model.head.kind,
        threshold));
  return preds;
}

struct DatasetScore {
  double loss = 0.0;
  double accuracy = 0.0;
};

/// Mean loss and accuracy in inference mode.
inline DatasetScore score_dataset(const ModelParams &model,
                                  const EncodedDataset &data,
                                  double threshold = 0.5) {
  if (data.empty())
    throw EmptyInputError("score_dataset: empty dataset");
  DatasetScore s;
  Rng unused(0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.rows(); ++i) {
    const auto p = forward(data.sequences[i], model, unused, false).probabilities;
    s.loss += sample_loss(p, model.head.kind, data.labels[i]);
    correct += predict_class(p, model.head.kind, threshold) == data.labels[i];
  }
  s.loss /= static_cast<double>(data.rows());
  s.accuracy = static_cast<double>(correct) / static_cast<double>(data.rows());
  return s;
}

inline void check_labels(const EncodedDataset &data, std::size_t classes,
                         const char *which) {
  for (int y : data.labels)
    if (y < 0 || static_cast<std::size_t>(y) >= classes)
      throw LabelError(std::string(which) + " label " + std::to_string(y) +
                       " outside [0, " + std::to_string(classes) + ")");
}

/// Shuffled minibatch SGD. Returns the parameters of the epoch with the
/// lowest validation loss (training-set loss when `valid` is empty).
inline TrainResult train(const EncodedDataset &train_set,
                         const EncodedDataset &valid, const TrainConfig &config,
                         std::size_t vocab_size) {
  config.validate();
  if (train_set.empty())
    throw EmptyInputError("train: empty training set");
  if (train_set.max_len != config.max_len ||
      (!valid.empty() && valid.max_len != config.max_len))
    throw ConsistencyError("datasets are not encoded at max_len " +
                           std::to_string(config.max_len));
  check_labels(train_set, config.classes, "training");
  check_labels(valid, config.classes, "validation");

  Rng rng(config.seed);
  ModelShape shape;
  shape.vocab_size = vocab_size;
  shape.embedding_dim = config.embedding_dim;
  shape.hidden_dim = config.effective_hidden_dim();
  shape.cell = config.cell;
  shape.classes = config.classes;
  shape.dropout_rate = config.dropout_rate;
  ModelParams model = init_model(shape, rng);

  const EncodedDataset &selection = valid.empty() ? train_set : valid;
  TrainResult result;
  double best_loss = std::numeric_limits<double>::infinity();

  std::vector<std::size_t> order(train_set.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      EncodedDataset batch;
      batch.max_len = train_set.max_len;
      std::vector<ForwardCache> caches;
      for (std::size_t i = start; i < end; ++i) {
        const std::size_t r = order[i];
        batch.sequences.push_back(train_set.sequences[r]);
        batch.labels.push_back(train_set.labels[r]);
        caches.push_back(
            forward(train_set.sequences[r], model, rng, true).cache);
      }
      auto [grads, mean_loss] =
          backward_bptt(batch, model, caches, config.class_weights);
      loss_sum += mean_loss * static_cast<double>(end - start);
      clip_gradients(grads, config.clip_norm);
      apply_sgd(model, grads, config.learning_rate);
    }

    const DatasetScore score = score_dataset(model, selection);
    result.history.push_back({epoch,
                              loss_sum / static_cast<double>(order.size()),
                              score.loss, score.accuracy});
    if (score.loss < best_loss || result.best_epoch == 0) {
      best_loss = score.loss;
      result.best_epoch = epoch;
      result.model = model;
    }
  }
  return result;
}

} // namespace seqclass
