// SPDX-License-Identifier: Apache-2.0
/**
 * @file   model.hpp
 * @brief  Forward computation: embedding lookup, Elman RNN and peephole LSTM
 *         cells, inverted dropout and the sigmoid / softmax classifier head.
 *
 * LSTM transition, with q_* acting elementwise on the previous cell state:
 *
 *   ig = sigmoid(x W_ig + h' P_ig + m' (.) q_ig + b_ig)
 *   fg = sigmoid(x W_fg + h' P_fg + m' (.) q_fg + b_fg)
 *   og = sigmoid(x W_og + h' P_og + m' (.) q_og + b_og)
 *   m1 = tanh(x W_m + h' P_m + b_m)
 *   m  = fg (.) m' + ig (.) m1
 *   h  = og (.) tanh(m)
 *
 * The output gate peeks at the previous cell state m', not at m.
 */

#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "seqclass/encoding.hpp"
#include "seqclass/errors.hpp"
#include "seqclass/numerics.hpp"

namespace seqclass {

enum class CellKind { rnn, lstm };
enum class HeadKind { binary, multiclass };

inline std::string_view to_string(CellKind k) {
  return k == CellKind::rnn ? "rnn" : "lstm";
}
inline std::string_view to_string(HeadKind k) {
  return k == HeadKind::binary ? "binary" : "multiclass";
}

struct EmbeddingParams {
  Matrix weights; // vocab_size x embedding_dim
};

struct RnnParams {
  Matrix w; // embedding_dim x hidden_dim
  Matrix p; // hidden_dim x hidden_dim
  Matrix b; // 1 x hidden_dim
};

struct GateParams {
  Matrix w; // embedding_dim x hidden_dim
  Matrix p; // hidden_dim x hidden_dim
  Matrix q; // 1 x hidden_dim, peephole
  Matrix b; // 1 x hidden_dim
};

struct CandidateParams {
  Matrix w;
  Matrix p;
  Matrix b;
};

struct LstmParams {
  GateParams input_gate;
  GateParams forget_gate;
  GateParams output_gate;
  CandidateParams candidate;
};

using CellParams = std::variant<RnnParams, LstmParams>;

struct HeadParams {
  Matrix w_out; // hidden_dim x k_out
  Matrix b_out; // 1 x k_out
  HeadKind kind = HeadKind::binary;

  /// Number of classes predicted (2 for the sigmoid head).
  std::size_t classes() const {
    return kind == HeadKind::binary ? 2 : w_out.cols();
  }
};

struct ModelParams {
  EmbeddingParams embedding;
  CellParams cell;
  HeadParams head;
  double dropout_rate = 0.0;

  CellKind cell_kind() const {
    return std::holds_alternative<RnnParams>(cell) ? CellKind::rnn
                                                   : CellKind::lstm;
  }
  std::size_t vocab_size() const { return embedding.weights.rows(); }
  std::size_t embedding_dim() const { return embedding.weights.cols(); }
  std::size_t hidden_dim() const { return head.w_out.rows(); }
  std::size_t classes() const { return head.classes(); }
};

/// Shape-matched gradient storage for a ModelParams.
struct Gradients {
  EmbeddingParams embedding;
  CellParams cell;
  HeadParams head;
};

/// Calls fn(name, tensor) for every parameter tensor in a fixed order. Works
/// on ModelParams and Gradients, const or not.
template <typename Params, typename Fn>
void for_each_tensor(Params &params, Fn &&fn) {
  fn(std::string_view("embedding"), params.embedding.weights);
  std::visit(
      [&](auto &cell) {
        using Cell = std::remove_cvref_t<decltype(cell)>;
        if constexpr (std::is_same_v<Cell, RnnParams>) {
          fn(std::string_view("rnn.w"), cell.w);
          fn(std::string_view("rnn.p"), cell.p);
          fn(std::string_view("rnn.b"), cell.b);
        } else {
          auto gate = [&](auto &g, std::string_view suffix) {
            const std::string s(suffix);
            fn(std::string_view("lstm.w_" + s), g.w);
            fn(std::string_view("lstm.p_" + s), g.p);
            fn(std::string_view("lstm.q_" + s), g.q);
            fn(std::string_view("lstm.b_" + s), g.b);
          };
          gate(cell.input_gate, "ig");
          gate(cell.forget_gate, "fg");
          gate(cell.output_gate, "og");
          fn(std::string_view("lstm.w_m"), cell.candidate.w);
          fn(std::string_view("lstm.p_m"), cell.candidate.p);
          fn(std::string_view("lstm.b_m"), cell.candidate.b);
        }
      },
      params.cell);
  fn(std::string_view("head.w_out"), params.head.w_out);
  fn(std::string_view("head.b_out"), params.head.b_out);
}

/// Pointers to every tensor, in for_each_tensor order.
template <typename Params> auto tensor_list(Params &params) {
  using Ptr = std::conditional_t<std::is_const_v<Params>, const Matrix *,
                                 Matrix *>;
  std::vector<std::pair<std::string, Ptr>> out;
  for_each_tensor(params, [&](std::string_view name, auto &m) {
    out.emplace_back(std::string(name), &m);
  });
  return out;
}

inline Gradients zeros_like(const ModelParams &model) {
  Gradients g{model.embedding, model.cell, model.head};
  for_each_tensor(g, [](std::string_view, Matrix &m) { m.fill(0.0); });
  return g;
}

/// Validates mutual consistency of all tensor shapes.
inline void check_model(const ModelParams &model) {
  const std::size_t e = model.embedding_dim();
  const std::size_t h = model.hidden_dim();
  auto expect = [](const Matrix &m, std::size_t r, std::size_t c,
                   std::string_view name) {
    if (m.rows() != r || m.cols() != c)
      throw ShapeError(std::string(name) + " is " + m.shape() + ", expected " +
                       Matrix::shape_string(r, c));
  };
  if (model.vocab_size() == 0 || e == 0 || h == 0)
    throw ShapeError("model has empty embedding or head");
  if (!(model.dropout_rate >= 0.0 && model.dropout_rate < 1.0))
    throw ParameterError("dropout rate must be in [0, 1)");
  std::visit(
      [&](const auto &cell) {
        using Cell = std::remove_cvref_t<decltype(cell)>;
        if constexpr (std::is_same_v<Cell, RnnParams>) {
          expect(cell.w, e, h, "rnn.w");
          expect(cell.p, h, h, "rnn.p");
          expect(cell.b, 1, h, "rnn.b");
        } else {
          for (const auto *g :
               {&cell.input_gate, &cell.forget_gate, &cell.output_gate}) {
            expect(g->w, e, h, "lstm gate w");
            expect(g->p, h, h, "lstm gate p");
            expect(g->q, 1, h, "lstm gate q");
            expect(g->b, 1, h, "lstm gate b");
          }
          expect(cell.candidate.w, e, h, "lstm.w_m");
          expect(cell.candidate.p, h, h, "lstm.p_m");
          expect(cell.candidate.b, 1, h, "lstm.b_m");
        }
      },
      model.cell);
  const std::size_t k_out =
      model.head.kind == HeadKind::binary ? 1 : model.head.w_out.cols();
  if (model.head.kind == HeadKind::binary && model.head.w_out.cols() != 1)
    throw ShapeError("binary head must have a single output column");
  if (model.head.kind == HeadKind::multiclass && k_out < 2)
    throw ShapeError("multiclass head needs at least 2 outputs");
  expect(model.head.b_out, 1, k_out, "head.b_out");
}

/// Architecture description used to allocate and initialize a model.
struct ModelShape {
  std::size_t vocab_size = 1;
  std::size_t embedding_dim = 512;
  std::size_t hidden_dim = 512;
  CellKind cell = CellKind::lstm;
  std::size_t classes = 2; // 2 selects the sigmoid head, >2 softmax
  double dropout_rate = 0.1;
};

namespace detail {

inline Matrix glorot(std::size_t rows, std::size_t cols, Rng &rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (auto &v : m.values())
    v = rng.uniform(-limit, limit);
  return m;
}

} // namespace detail

/// Weights uniform in +-sqrt(6 / (fan_in + fan_out)), peephole vectors
/// treated as 1 x hidden, biases zero. Draw order is fixed so a seed
/// fully determines the model.
inline ModelParams init_model(const ModelShape &shape, Rng &rng) {
  if (shape.vocab_size == 0 || shape.embedding_dim == 0 ||
      shape.hidden_dim == 0)
    throw ParameterError("init_model: dimensions must be positive");
  if (shape.classes < 2)
    throw ParameterError("init_model: need at least 2 classes");
  if (!(shape.dropout_rate >= 0.0 && shape.dropout_rate < 1.0))
    throw ParameterError("init_model: dropout rate must be in [0, 1)");

  const std::size_t e = shape.embedding_dim;
  const std::size_t h = shape.hidden_dim;
  ModelParams model;
  model.dropout_rate = shape.dropout_rate;
  model.embedding.weights = detail::glorot(shape.vocab_size, e, rng);
  if (shape.cell == CellKind::rnn) {
    RnnParams cell;
    cell.w = detail::glorot(e, h, rng);
    cell.p = detail::glorot(h, h, rng);
    cell.b = Matrix(1, h);
    model.cell = std::move(cell);
  } else {
    LstmParams cell;
    for (auto *g : {&cell.input_gate, &cell.forget_gate, &cell.output_gate}) {
      g->w = detail::glorot(e, h, rng);
      g->p = detail::glorot(h, h, rng);
      g->q = detail::glorot(1, h, rng);
      g->b = Matrix(1, h);
    }
    cell.candidate.w = detail::glorot(e, h, rng);
    cell.candidate.p = detail::glorot(h, h, rng);
    cell.candidate.b = Matrix(1, h);
    model.cell = std::move(cell);
  }
  const std::size_t k_out = shape.classes == 2 ? 1 : shape.classes;
  model.head.kind =
      shape.classes == 2 ? HeadKind::binary : HeadKind::multiclass;
  model.head.w_out = detail::glorot(h, k_out, rng);
  model.head.b_out = Matrix(1, k_out);
  return model;
}

/// Row t of the result is row seq[t] of the embedding matrix, which equals
/// one_hot(seq) * weights.
inline Matrix embed(const EncodedSequence &seq, const EmbeddingParams &e) {
  if (seq.empty())
    throw ShapeError("embed: empty sequence");
  const std::size_t dim = e.weights.cols();
  Matrix out(seq.size(), dim);
  for (std::size_t t = 0; t < seq.size(); ++t) {
    if (seq[t] >= e.weights.rows())
      throw IndexError("embed: position " + std::to_string(t) + " has index " +
                       std::to_string(seq[t]) + ", vocabulary size is " +
                       std::to_string(e.weights.rows()));
    const auto src = e.weights.row_values(seq[t]);
    std::copy(src.begin(), src.end(), out.row_values(t).begin());
  }
  return out;
}

namespace detail {

inline Matrix affine(const Matrix &x, const Matrix &w, const Matrix &h_prev,
                     const Matrix &p, const Matrix &b) {
  Matrix z = matmul(x, w);
  z += matmul(h_prev, p);
  z += b;
  return z;
}

inline void require_row(const Matrix &v, std::size_t n, const char *what) {
  if (v.rows() != 1 || v.cols() != n)
    throw ShapeError(std::string(what) + " is " + v.shape() + ", expected " +
                     Matrix::shape_string(1, n));
}

} // namespace detail

/// h_t = tanh(x_t W + h_{t-1} P + b). The first step takes h_prev = 0.
inline Matrix rnn_step(const Matrix &x_t, const Matrix &h_prev,
                       const RnnParams &p) {
  detail::require_row(x_t, p.w.rows(), "rnn_step x_t");
  detail::require_row(h_prev, p.p.rows(), "rnn_step h_prev");
  return tanh_act(detail::affine(x_t, p.w, h_prev, p.p, p.b));
}

struct LstmStep {
  Matrix h;
  Matrix m;
  // Intermediate activations, retained for backpropagation.
  Matrix input_gate;
  Matrix forget_gate;
  Matrix output_gate;
  Matrix candidate;
  Matrix tanh_m;
};

inline LstmStep lstm_step(const Matrix &x_t, const Matrix &h_prev,
                          const Matrix &m_prev, const LstmParams &p) {
  const std::size_t hidden = p.candidate.p.rows();
  detail::require_row(x_t, p.candidate.w.rows(), "lstm_step x_t");
  detail::require_row(h_prev, hidden, "lstm_step h_prev");
  detail::require_row(m_prev, hidden, "lstm_step m_prev");

  auto gate = [&](const GateParams &g) {
    Matrix z = detail::affine(x_t, g.w, h_prev, g.p, g.b);
    z += hadamard(m_prev, g.q);
    return sigmoid(z);
  };

  LstmStep s;
  s.input_gate = gate(p.input_gate);
  s.forget_gate = gate(p.forget_gate);
  s.output_gate = gate(p.output_gate);
  s.candidate = tanh_act(detail::affine(x_t, p.candidate.w, h_prev,
                                        p.candidate.p, p.candidate.b));
  s.m = hadamard(s.forget_gate, m_prev) + hadamard(s.input_gate, s.candidate);
  s.tanh_m = tanh_act(s.m);
  s.h = hadamard(s.output_gate, s.tanh_m);

#ifndef NDEBUG
  for (const Matrix *g : {&s.input_gate, &s.forget_gate, &s.output_gate})
    for (double v : g->values())
      assert(v >= 0.0 && v <= 1.0);
  for (double v : s.h.values())
    assert(v >= -1.0 && v <= 1.0);
#endif
  return s;
}

/// Inverted-dropout scale mask: each entry is 0 with probability `rate`,
/// otherwise 1 / (1 - rate).
inline Matrix dropout_mask(std::size_t rows, std::size_t cols, double rate,
                           Rng &rng) {
  if (!(rate >= 0.0 && rate < 1.0))
    throw ParameterError("dropout rate must be in [0, 1), got " +
                         std::to_string(rate));
  Matrix mask(rows, cols, 1.0);
  if (rate == 0.0)
    return mask;
  const double keep_scale = 1.0 / (1.0 - rate);
  for (auto &v : mask.values())
    v = rng.uniform() < rate ? 0.0 : keep_scale;
  return mask;
}

inline Matrix dropout(const Matrix &x, double rate, Rng &rng, bool training) {
  if (!(rate >= 0.0 && rate < 1.0))
    throw ParameterError("dropout rate must be in [0, 1), got " +
                         std::to_string(rate));
  if (!training || rate == 0.0)
    return x;
  return hadamard(x, dropout_mask(x.rows(), x.cols(), rate, rng));
}

/// Everything backward_bptt needs from a forward pass.
struct ForwardCache {
  CellKind cell = CellKind::lstm;
  EncodedSequence sequence;
  Matrix inputs;              // max_len x embedding_dim
  std::vector<Matrix> hidden; // max_len + 1 entries, hidden[0] = 0
  std::vector<Matrix> memory; // LSTM only, max_len + 1 entries
  std::vector<Matrix> input_gate, forget_gate, output_gate, candidate,
      tanh_memory;            // LSTM only, max_len entries
  Matrix dropout_mask;        // 1 x hidden_dim
  Matrix features;            // final hidden state after dropout
  Matrix probabilities;       // 1 x 1 (binary) or 1 x k
};

struct ForwardResult {
  Matrix probabilities;
  ForwardCache cache;
};

/// Head activation applied to logits.
inline Matrix head_activation(const Matrix &logits, HeadKind kind) {
  return kind == HeadKind::binary ? sigmoid(logits) : softmax(logits);
}

/// Embeds, runs the cell over every step from a zero state, applies dropout
/// to the final hidden state and then the head. The rng is only consumed in
/// training mode with a nonzero dropout rate.
inline ForwardResult forward(const EncodedSequence &seq,
                             const ModelParams &model, Rng &rng,
                             bool training) {
  const std::size_t hidden = model.hidden_dim();
  ForwardResult result;
  ForwardCache &c = result.cache;
  c.cell = model.cell_kind();
  c.sequence = seq;
  c.inputs = embed(seq, model.embedding);
  c.hidden.reserve(seq.size() + 1);
  c.hidden.emplace_back(1, hidden);

  if (const auto *rnn = std::get_if<RnnParams>(&model.cell)) {
    for (std::size_t t = 0; t < seq.size(); ++t) {
      const Matrix x = Matrix::row(std::vector<double>(
          c.inputs.row_values(t).begin(), c.inputs.row_values(t).end()));
      c.hidden.push_back(rnn_step(x, c.hidden.back(), *rnn));
    }
  } else {
    const auto &lstm = std::get<LstmParams>(model.cell);
    c.memory.reserve(seq.size() + 1);
    c.memory.emplace_back(1, hidden);
    for (std::size_t t = 0; t < seq.size(); ++t) {
      const Matrix x = Matrix::row(std::vector<double>(
          c.inputs.row_values(t).begin(), c.inputs.row_values(t).end()));
      LstmStep s = lstm_step(x, c.hidden.back(), c.memory.back(), lstm);
      c.hidden.push_back(std::move(s.h));
      c.memory.push_back(std::move(s.m));
      c.input_gate.push_back(std::move(s.input_gate));
      c.forget_gate.push_back(std::move(s.forget_gate));
      c.output_gate.push_back(std::move(s.output_gate));
      c.candidate.push_back(std::move(s.candidate));
      c.tanh_memory.push_back(std::move(s.tanh_m));
    }
  }

  c.dropout_mask = training ? dropout_mask(1, hidden, model.dropout_rate, rng)
                            : Matrix(1, hidden, 1.0);
  c.features = hadamard(c.hidden.back(), c.dropout_mask);
  Matrix logits = matmul(c.features, model.head.w_out);
  logits += model.head.b_out;
  c.probabilities = head_activation(logits, model.head.kind);
  result.probabilities = c.probabilities;
  return result;
}

/// Class decision from head output. The sigmoid head predicts class 1 when
/// p >= threshold.
inline int predict_class(const Matrix &probabilities, HeadKind kind,
                         double threshold = 0.5) {
  if (kind == HeadKind::binary)
    return probabilities[0] >= threshold ? 1 : 0;
  return static_cast<int>(argmax(probabilities));
}

/// Per-class probability vector (length = classes) from head output.
inline std::vector<double> class_probabilities(const Matrix &probabilities,
                                               HeadKind kind) {
  if (kind == HeadKind::binary)
    return {1.0 - probabilities[0], probabilities[0]};
  return {probabilities.values().begin(), probabilities.values().end()};
}

} // namespace seqclass
