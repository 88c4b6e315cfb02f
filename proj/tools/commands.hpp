// SPDX-License-Identifier: Apache-2.0
/**
 * @file   commands.hpp
 * @brief  Implementations of the seqclass subcommands, independent of flag
 *         parsing so they can be driven directly from tests.
 *
 * Exit codes: 0 success, 1 usage/config, 2 I/O, 3 data format,
 * 4 schema mismatch, 5 gradient check above tolerance.
 */

#pragma once

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "seqclass/seqclass.hpp"

namespace seqclass::cli {

enum ExitCode : int {
  exit_ok = 0,
  exit_usage = 1,
  exit_io = 2,
  exit_data = 3,
  exit_schema = 4,
  exit_check_failed = 5,
};

inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
  case ErrorKind::parameter:
    return exit_usage;
  case ErrorKind::io:
    return exit_io;
  case ErrorKind::schema_mismatch:
    return exit_schema;
  default:
    return exit_data;
  }
}

/// Runs `body`, translating library errors into exit codes and messages.
template <typename Body> int guarded(std::ostream &err, Body &&body) {
  try {
    return body();
  } catch (const Error &e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::bad_alloc &) {
    err << "error: out of memory\n";
    return exit_data;
  }
}

struct TrainOptions {
  std::string train_path;
  std::string valid_path;
  std::string out_path;
  std::string history_path;
  bool discard_long = true;
  TrainConfig config;
};

struct Prepared {
  Vocabulary vocab;
  EncodedDataset train;
  EncodedDataset valid;
};

inline Prepared prepare_data(const TrainOptions &o) {
  const auto train_records = load_tsv(o.train_path, o.config.classes);
  const auto valid_records = load_tsv(o.valid_path, o.config.classes);
  if (train_records.empty())
    throw EmptyInputError("training file " + o.train_path + " has no records");
  Prepared p;
  p.vocab = build_vocabulary(train_records, o.config.top_words);
  p.train = encode_dataset(train_records, p.vocab, o.config.max_len,
                           o.discard_long);
  p.valid = encode_dataset(valid_records, p.vocab, o.config.max_len, false);
  if (p.train.empty())
    throw EmptyInputError("every training record exceeds max_len " +
                          std::to_string(o.config.max_len));
  return p;
}

inline void write_text_file(const std::string &path,
                            const std::string &content) {
  std::ofstream os(path, std::ios::binary);
  if (!os)
    throw IoError("cannot write " + path);
  os << content;
  if (!os.flush())
    throw IoError("write failed for " + path);
}

inline int run_train(const TrainOptions &o, std::ostream &out,
                     std::ostream &err) {
  return guarded(err, [&] {
    o.config.validate();
    const Prepared p = prepare_data(o);
    const TrainResult r = train(p.train, p.valid, o.config, p.vocab.size());

    save_model({r.model, p.vocab, o.config.max_len}, o.out_path);
    if (!o.history_path.empty()) {
      std::ostringstream hs;
      write_history(hs, r.history);
      write_text_file(o.history_path, hs.str());
    }
    const auto &best = r.history[r.best_epoch - 1];
    out << "train records: " << p.train.rows() << " (x" << p.train.cols()
        << "), valid records: " << p.valid.rows()
        << ", vocabulary: " << p.vocab.size() << '\n';
    out << "best epoch " << r.best_epoch << ": valid_loss=" << best.valid_loss
        << " valid_acc=" << best.valid_accuracy << '\n';
    out << "model written to " << o.out_path << '\n';
    return exit_ok;
  });
}

struct EvalOptions {
  std::string model_path;
  std::string data_path;
  std::optional<std::set<std::size_t>> subset;
  std::size_t positive_class = 1;
  double threshold = 0.5;
  std::optional<std::size_t> classes;
  std::optional<std::size_t> max_len;
};

inline void check_schema(const ModelBundle &b, std::optional<std::size_t> classes,
                         std::optional<std::size_t> max_len) {
  const std::string tag = " (model format " + std::string(model_version) + ")";
  if (classes && *classes != b.model.classes())
    throw SchemaMismatchError("model predicts " +
                              std::to_string(b.model.classes()) +
                              " classes, --classes is " +
                              std::to_string(*classes) + tag);
  if (max_len && *max_len != b.max_len)
    throw SchemaMismatchError("model max_len is " + std::to_string(b.max_len) +
                              ", --max-len is " + std::to_string(*max_len) +
                              tag);
}

inline EvalReport evaluate_records(const ModelBundle &b,
                                   const std::vector<LabeledRecord> &records,
                                   std::set<std::size_t> subset,
                                   std::size_t positive_class,
                                   double threshold) {
  const std::size_t k = b.model.classes();
  for (const auto &r : records)
    if (r.label < 0 || static_cast<std::size_t>(r.label) >= k)
      throw SchemaMismatchError(
          "record " + r.id + " has label " + std::to_string(r.label) +
          " but the model predicts " + std::to_string(k) +
          " classes (model format " + std::string(model_version) + ")");
  for (std::size_t c : subset)
    if (c >= k)
      throw ParameterError("--subset class " + std::to_string(c) +
                           " outside the model's " + std::to_string(k) +
                           " classes");
  const auto data = encode_dataset(records, b.vocab, b.max_len, false);
  const auto preds = predict_all(b.model, data, threshold);
  return make_report(confusion(preds, data.labels, k), std::move(subset),
                     positive_class, threshold);
}

inline int run_eval(const EvalOptions &o, std::ostream &out,
                    std::ostream &err) {
  return guarded(err, [&] {
    const ModelBundle b = load_model(o.model_path);
    check_schema(b, o.classes, o.max_len);
    const auto records = load_tsv(o.data_path);
    const auto report =
        evaluate_records(b, records,
                         o.subset.value_or(default_subset(b.model.classes())),
                         o.positive_class, o.threshold);
    write_report_text(out, report);
    out << '\n';
    write_report_kv(out, report);
    return exit_ok;
  });
}

struct PredictOptions {
  std::string model_path;
  std::string data_path;
  std::string out_path; // empty: stdout
  double threshold = 0.5;
};

inline void write_predictions(std::ostream &os, const ModelBundle &b,
                              const std::vector<PredictRecord> &records,
                              double threshold) {
  Rng unused(0);
  for (const auto &rec : records) {
    const auto seq = encode_sequence(tokenize(rec.text), b.vocab, b.max_len);
    const auto p = forward(seq, b.model, unused, false).probabilities;
    os << rec.id << '\t' << predict_class(p, b.model.head.kind, threshold)
       << '\t';
    const auto probs = class_probabilities(p, b.model.head.kind);
    for (std::size_t i = 0; i < probs.size(); ++i) {
      if (i)
        os << ',';
      os << detail::format_double(probs[i]);
    }
    os << '\n';
  }
}

inline int run_predict(const PredictOptions &o, std::ostream &out,
                       std::ostream &err) {
  return guarded(err, [&] {
    const ModelBundle b = load_model(o.model_path);
    std::ifstream in(o.data_path);
    if (!in)
      throw IoError("cannot open " + o.data_path);
    const auto records = read_predict_tsv(in);
    for (const auto &r : records)
      if (r.label && (*r.label < 0 ||
                      static_cast<std::size_t>(*r.label) >= b.model.classes()))
        throw SchemaMismatchError("record " + r.id + " has label " +
                                  std::to_string(*r.label) +
                                  " but the model predicts " +
                                  std::to_string(b.model.classes()) +
                                  " classes (model format " +
                                  std::string(model_version) + ")");
    std::ostringstream buf;
    write_predictions(buf, b, records, o.threshold);
    if (o.out_path.empty())
      out << buf.str();
    else
      write_text_file(o.out_path, buf.str());
    return exit_ok;
  });
}

struct GradcheckOptions {
  CellKind cell = CellKind::lstm;
  std::size_t hidden = 3;
  std::size_t len = 4;
  std::size_t embedding = 3;
  std::size_t vocab = 10;
  std::size_t classes = 2;
  std::uint64_t seed = 0;
  double eps = 1e-5;
  double tolerance = 1e-4;
};

/// Random small model (dropout 0) plus one random labelled sequence.
struct GradcheckProblem {
  ModelParams model;
  EncodedSequence sequence;
  int label = 0;
};

inline GradcheckProblem make_gradcheck_problem(const GradcheckOptions &o) {
  Rng rng(o.seed);
  ModelShape shape;
  shape.vocab_size = o.vocab;
  shape.embedding_dim = o.embedding;
  shape.hidden_dim = o.hidden;
  shape.cell = o.cell;
  shape.classes = o.classes;
  shape.dropout_rate = 0.0;
  GradcheckProblem p;
  p.model = init_model(shape, rng);
  // Nonzero biases so every bias path is exercised away from the origin.
  for_each_tensor(p.model, [&](std::string_view name, Matrix &m) {
    if (name.find(".b") != std::string_view::npos)
      for (auto &v : m.values())
        v = rng.uniform(-0.5, 0.5);
  });
  p.sequence.resize(o.len);
  for (auto &idx : p.sequence)
    idx = static_cast<TokenIndex>(rng.below(o.vocab));
  p.label = static_cast<int>(rng.below(o.classes));
  return p;
}

inline int run_gradcheck(const GradcheckOptions &o, std::ostream &out,
                         std::ostream &err) {
  return guarded(err, [&] {
    if (!(o.eps > 0.0))
      throw ParameterError("--eps must be positive");
    const auto p = make_gradcheck_problem(o);
    const auto r = grad_check(p.model, p.sequence, p.label, o.eps);
    out << "cell=" << to_string(o.cell) << " hidden=" << o.hidden
        << " len=" << o.len << " classes=" << o.classes << " seed=" << o.seed
        << " entries=" << r.entries_checked << '\n';
    out << "max_relative_error=" << r.max_relative_error;
    if (!r.worst_tensor.empty())
      out << " (" << r.worst_tensor << '[' << r.worst_index
          << "] analytic=" << r.analytic << " numeric=" << r.numeric << ')';
    out << '\n';
    const bool ok = r.max_relative_error < o.tolerance;
    out << (ok ? "PASS" : "FAIL") << '\n';
    return ok ? exit_ok : exit_check_failed;
  });
}

struct SweepOptions {
  TrainOptions train;
  std::vector<std::size_t> embedding_sizes{128, 256, 512};
  bool hidden_follows_embedding = true;
};

/// Trains one model per embedding size and reports the best validation
/// epoch of each.
inline int run_sweep(const SweepOptions &o, std::ostream &out,
                     std::ostream &err) {
  return guarded(err, [&] {
    if (o.embedding_sizes.empty())
      throw ParameterError("--sizes must list at least one embedding size");
    o.train.config.validate();
    const Prepared p = prepare_data(o.train);
    out << "embedding_dim\thidden_dim\tbest_epoch\tvalid_loss\tvalid_acc\n";
    for (std::size_t size : o.embedding_sizes) {
      TrainConfig cfg = o.train.config;
      cfg.embedding_dim = size;
      if (o.hidden_follows_embedding)
        cfg.hidden_dim.reset();
      cfg.validate();
      const auto r = train(p.train, p.valid, cfg, p.vocab.size());
      const auto &best = r.history[r.best_epoch - 1];
      out << size << '\t' << cfg.effective_hidden_dim() << '\t' << r.best_epoch
          << '\t' << detail::format_double(best.valid_loss) << '\t'
          << detail::format_double(best.valid_accuracy) << '\n';
    }
    return exit_ok;
  });
}

} // namespace seqclass::cli
