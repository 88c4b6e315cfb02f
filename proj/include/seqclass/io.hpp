// SPDX-License-Identifier: Apache-2.0
/**
 * @file   io.hpp
 * @brief  TSV record ingestion and the versioned text model format.
 *
 * Model file layout:
 *
 *   SEQCLASS-MODEL v1
 *   task: binary|multiclass
 *   classes: <k>
 *   vocab_size: <n including reserved 0>
 *   max_len: <L>
 *   embedding_dim: <E>
 *   hidden_dim: <H>
 *   cell: rnn|lstm
 *   dropout: <rate>
 *   VOCAB <n - 1>
 *   <token>\t<index>           (n - 1 lines)
 *   PARAM <name> <rows> <cols>
 *   <row-major values, 17 significant digits, one matrix row per line>
 *   ...
 */

#pragma once

#include <array>
#include <charconv>
#include <cstddef>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "seqclass/encoding.hpp"
#include "seqclass/errors.hpp"
#include "seqclass/model.hpp"
#include "seqclass/numerics.hpp"
#include "seqclass/training.hpp"

namespace seqclass {

inline constexpr std::string_view model_magic = "SEQCLASS-MODEL";
inline constexpr std::string_view model_version = "v1";

namespace detail {

inline std::optional<long long> parse_integer(std::string_view s) {
  long long v = 0;
  const auto *end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || s.empty())
    return std::nullopt;
  return v;
}

inline std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  const auto *end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || s.empty())
    return std::nullopt;
  return v;
}

/// Shortest text that reads back to the identical double: 17 significant
/// digits in general format.
inline std::string format_double(double v) {
  std::array<char, 40> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v,
                                       std::chars_format::general, 17);
  if (ec != std::errc())
    throw FormatError("cannot format value");
  return std::string(buf.data(), ptr);
}

inline void strip_cr(std::string &line) {
  if (!line.empty() && line.back() == '\r')
    line.pop_back();
}

} // namespace detail

/// Parses id<TAB>label<TAB>text records. Blank lines and lines starting with
/// '#' are skipped. With `num_classes`, labels must lie in [0, num_classes).
inline std::vector<LabeledRecord>
read_tsv(std::istream &in, std::optional<std::size_t> num_classes = {}) {
  std::vector<LabeledRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    detail::strip_cr(line);
    if (line.empty() || line.front() == '#')
      continue;
    const auto tab1 = line.find('\t');
    const auto tab2 =
        tab1 == std::string::npos ? std::string::npos : line.find('\t', tab1 + 1);
    if (tab2 == std::string::npos)
      throw ParseError("line " + std::to_string(line_no) +
                       ": expected id<TAB>label<TAB>text");
    const std::string_view label_text =
        std::string_view(line).substr(tab1 + 1, tab2 - tab1 - 1);
    const auto label = detail::parse_integer(label_text);
    if (!label)
      throw ParseError("line " + std::to_string(line_no) + ": label '" +
                       std::string(label_text) + "' is not an integer");
    if (*label < 0 ||
        (num_classes && static_cast<std::size_t>(*label) >= *num_classes))
      throw LabelError("line " + std::to_string(line_no) + ": label " +
                       std::to_string(*label) + " is not a valid class" +
                       (num_classes ? " (expected 0.." +
                                          std::to_string(*num_classes - 1) + ")"
                                    : std::string()));
    out.push_back({line.substr(0, tab1), static_cast<int>(*label),
                   line.substr(tab2 + 1)});
  }
  return out;
}

inline std::vector<LabeledRecord>
load_tsv(const std::string &path, std::optional<std::size_t> num_classes = {}) {
  std::ifstream in(path);
  if (!in)
    throw IoError("cannot open " + path);
  return read_tsv(in, num_classes);
}

/// Prediction input: id<TAB>label<TAB>text or id<TAB>text.
struct PredictRecord {
  std::string id;
  std::optional<int> label;
  std::string text;
};

inline std::vector<PredictRecord> read_predict_tsv(std::istream &in) {
  std::vector<PredictRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    detail::strip_cr(line);
    if (line.empty() || line.front() == '#')
      continue;
    const auto tab1 = line.find('\t');
    if (tab1 == std::string::npos)
      throw ParseError("line " + std::to_string(line_no) +
                       ": expected id<TAB>text or id<TAB>label<TAB>text");
    PredictRecord rec;
    rec.id = line.substr(0, tab1);
    const auto tab2 = line.find('\t', tab1 + 1);
    if (tab2 != std::string::npos) {
      const auto label = detail::parse_integer(
          std::string_view(line).substr(tab1 + 1, tab2 - tab1 - 1));
      if (label) {
        rec.label = static_cast<int>(*label);
        rec.text = line.substr(tab2 + 1);
        out.push_back(std::move(rec));
        continue;
      }
    }
    rec.text = line.substr(tab1 + 1);
    out.push_back(std::move(rec));
  }
  return out;
}

/// A trained model together with everything needed to encode new text.
struct ModelBundle {
  ModelParams model;
  Vocabulary vocab;
  std::size_t max_len = 0;
};

inline void write_model(std::ostream &os, const ModelBundle &b) {
  check_model(b.model);
  if (b.vocab.size() != b.model.vocab_size())
    throw ShapeError("vocabulary has " + std::to_string(b.vocab.size()) +
                     " entries, embedding has " +
                     std::to_string(b.model.vocab_size()) + " rows");
  os << model_magic << ' ' << model_version << '\n';
  os << "task: " << to_string(b.model.head.kind) << '\n';
  os << "classes: " << b.model.classes() << '\n';
  os << "vocab_size: " << b.model.vocab_size() << '\n';
  os << "max_len: " << b.max_len << '\n';
  os << "embedding_dim: " << b.model.embedding_dim() << '\n';
  os << "hidden_dim: " << b.model.hidden_dim() << '\n';
  os << "cell: " << to_string(b.model.cell_kind()) << '\n';
  os << "dropout: " << detail::format_double(b.model.dropout_rate) << '\n';
  os << "VOCAB " << b.vocab.tokens().size() << '\n';
  for (std::size_t i = 0; i < b.vocab.tokens().size(); ++i)
    os << b.vocab.tokens()[i] << '\t' << (i + 1) << '\n';
  for_each_tensor(b.model, [&](std::string_view name, const Matrix &m) {
    os << "PARAM " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
    for (std::size_t r = 0; r < m.rows(); ++r) {
      const auto row = m.row_values(r);
      for (std::size_t c = 0; c < row.size(); ++c) {
        if (c)
          os << ' ';
        os << detail::format_double(row[c]);
      }
      os << '\n';
    }
  });
}

inline void save_model(const ModelBundle &b, const std::string &path) {
  std::ofstream os(path, std::ios::binary);
  if (!os)
    throw IoError("cannot write " + path);
  write_model(os, b);
  os.flush();
  if (!os)
    throw IoError("write failed for " + path);
}

namespace detail {

class ModelReader {
public:
  explicit ModelReader(std::istream &in) : in_(in) {}

  ModelBundle read() {
    const std::string first = next_line("header");
    const std::string expected =
        std::string(model_magic) + ' ' + std::string(model_version);
    if (first.rfind(std::string(model_magic), 0) != 0)
      throw FormatError("header: not a model file (missing " +
                        std::string(model_magic) + ")");
    if (first != expected)
      throw FormatError("header: unsupported version '" + first +
                        "', expected '" + expected + "'");

    const std::string task = header_value("task");
    const auto classes = header_size("classes");
    const auto vocab_size = header_size("vocab_size");
    const auto max_len = header_size("max_len");
    const auto embedding_dim = header_size("embedding_dim");
    const auto hidden_dim = header_size("hidden_dim");
    const std::string cell = header_value("cell");
    const auto dropout = parse_double(header_value("dropout"));
    if (!dropout)
      throw FormatError("header: dropout is not a number");

    ModelShape shape;
    if (cell == "rnn")
      shape.cell = CellKind::rnn;
    else if (cell == "lstm")
      shape.cell = CellKind::lstm;
    else
      throw FormatError("header: unknown cell '" + cell + "'");
    if (task != "binary" && task != "multiclass")
      throw FormatError("header: unknown task '" + task + "'");
    if ((task == "binary") != (classes == 2))
      throw FormatError("header: task " + task + " with " +
                        std::to_string(classes) + " classes");
    if (classes < 2 || vocab_size < 1 || max_len < 1 || embedding_dim < 1 ||
        hidden_dim < 1)
      throw FormatError("header: dimensions must be positive");
    if (!(*dropout >= 0.0 && *dropout < 1.0))
      throw FormatError("header: dropout must be in [0, 1)");
    shape.classes = classes;
    shape.vocab_size = vocab_size;
    shape.embedding_dim = embedding_dim;
    shape.hidden_dim = hidden_dim;
    shape.dropout_rate = *dropout;

    ModelBundle b;
    b.max_len = max_len;
    b.vocab = read_vocab(vocab_size);

    // Allocate the expected layout, then fill each tensor from its section.
    Rng unused(0);
    b.model = init_model(shape, unused);
    std::map<std::string, Matrix *> slots;
    for (auto &[name, ptr] : tensor_list(b.model))
      slots.emplace(name, ptr);
    std::set<std::string> seen;
    for (std::size_t i = 0; i < slots.size(); ++i)
      read_param(slots, seen);
    std::string extra;
    while (std::getline(in_, extra)) {
      strip_cr(extra);
      if (!extra.empty())
        throw FormatError("trailing content after last PARAM section: '" +
                          extra.substr(0, 40) + "'");
    }
    return b;
  }

private:
  std::string next_line(const std::string &section) {
    std::string line;
    if (!std::getline(in_, line))
      throw FormatError("unexpected end of file: missing " + section);
    strip_cr(line);
    ++line_no_;
    return line;
  }

  std::string header_value(const std::string &key) {
    const std::string line = next_line("header key '" + key + "'");
    const std::string prefix = key + ": ";
    if (line.rfind(prefix, 0) != 0)
      throw FormatError("header: expected '" + key + "' at line " +
                        std::to_string(line_no_) + ", got '" + line + "'");
    return line.substr(prefix.size());
  }

  std::size_t header_size(const std::string &key) {
    const auto v = parse_integer(header_value(key));
    if (!v || *v < 0)
      throw FormatError("header: " + key + " is not a nonnegative integer");
    return static_cast<std::size_t>(*v);
  }

  Vocabulary read_vocab(std::size_t vocab_size) {
    const std::string line = next_line("VOCAB section");
    std::istringstream ls(line);
    std::string tag;
    long long n = -1;
    ls >> tag >> n;
    if (tag != "VOCAB" || n < 0 || !ls.eof())
      throw FormatError("VOCAB section: malformed header at line " +
                        std::to_string(line_no_));
    if (static_cast<std::size_t>(n) + 1 != vocab_size)
      throw FormatError("VOCAB section: " + std::to_string(n) +
                        " tokens but vocab_size " + std::to_string(vocab_size));
    std::vector<Token> tokens;
    tokens.reserve(static_cast<std::size_t>(n));
    for (long long i = 0; i < n; ++i) {
      const std::string entry = next_line("VOCAB entry " + std::to_string(i + 1));
      const auto tab = entry.find('\t');
      const auto idx = tab == std::string::npos
                           ? std::nullopt
                           : parse_integer(std::string_view(entry).substr(tab + 1));
      if (!idx || *idx != i + 1)
        throw FormatError("VOCAB section: bad entry at line " +
                          std::to_string(line_no_));
      tokens.push_back(entry.substr(0, tab));
    }
    try {
      return Vocabulary(tokens);
    } catch (const ParameterError &e) {
      throw FormatError(std::string("VOCAB section: ") + e.what());
    }
  }

  void read_param(std::map<std::string, Matrix *> &slots,
                  std::set<std::string> &seen) {
    const std::string line = next_line("PARAM section");
    std::istringstream ls(line);
    std::string tag, name;
    long long rows = -1, cols = -1;
    ls >> tag >> name >> rows >> cols;
    if (tag != "PARAM" || !ls || !ls.eof())
      throw FormatError("PARAM section: malformed header at line " +
                        std::to_string(line_no_));
    const auto it = slots.find(name);
    if (it == slots.end())
      throw FormatError("PARAM " + name + ": unknown tensor for this model");
    if (!seen.insert(name).second)
      throw FormatError("PARAM " + name + ": duplicate tensor");
    Matrix &m = *it->second;
    if (static_cast<long long>(m.rows()) != rows ||
        static_cast<long long>(m.cols()) != cols)
      throw FormatError("PARAM " + name + ": declared " + std::to_string(rows) +
                        "x" + std::to_string(cols) + ", header implies " +
                        m.shape());
    for (std::size_t r = 0; r < m.rows(); ++r) {
      const std::string values = next_line("PARAM " + name + " row " +
                                           std::to_string(r));
      std::size_t c = 0;
      std::size_t pos = 0;
      while (pos < values.size()) {
        while (pos < values.size() && values[pos] == ' ')
          ++pos;
        if (pos >= values.size())
          break;
        auto end = values.find(' ', pos);
        if (end == std::string::npos)
          end = values.size();
        const auto v = parse_double(std::string_view(values).substr(pos, end - pos));
        if (!v || c >= m.cols())
          throw FormatError("PARAM " + name + ": bad value or count in row " +
                            std::to_string(r));
        m(r, c++) = *v;
        pos = end;
      }
      if (c != m.cols())
        throw FormatError("PARAM " + name + ": row " + std::to_string(r) +
                          " has " + std::to_string(c) + " values, expected " +
                          std::to_string(m.cols()));
    }
  }

  std::istream &in_;
  std::size_t line_no_ = 0;
};

} // namespace detail

inline ModelBundle read_model(std::istream &in) {
  return detail::ModelReader(in).read();
}

inline ModelBundle load_model(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot open " + path);
  return read_model(in);
}

/// One line per epoch: epoch, train_loss, valid_loss, valid_acc (tab
/// separated).
inline void write_history(std::ostream &os, const TrainHistory &h) {
  os << "epoch\ttrain_loss\tvalid_loss\tvalid_acc\n";
  for (const auto &e : h)
    os << e.epoch << '\t' << detail::format_double(e.train_loss) << '\t'
       << detail::format_double(e.valid_loss) << '\t'
       << detail::format_double(e.valid_accuracy) << '\n';
}

} // namespace seqclass
