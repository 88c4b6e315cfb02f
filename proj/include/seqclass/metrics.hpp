// SPDX-License-Identifier: Apache-2.0
/**
 * @file   metrics.hpp
 * @brief  Confusion matrix, binary precision/recall/F and micro-averaged
 *         precision/recall/F over a subset of classes.
 *
 * Every rate whose denominator is zero is reported as 0.
 */

#pragma once

#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "seqclass/errors.hpp"

namespace seqclass {

class ConfusionMatrix {
public:
  using Count = std::uint64_t;

  explicit ConfusionMatrix(std::size_t k) : k_(k), counts_(k * k, 0) {
    if (k == 0)
      throw ParameterError("confusion matrix needs at least one class");
  }

  std::size_t classes() const noexcept { return k_; }

  Count &at(std::size_t truth, std::size_t predicted) {
    check(truth, predicted);
    return counts_[truth * k_ + predicted];
  }
  Count at(std::size_t truth, std::size_t predicted) const {
    check(truth, predicted);
    return counts_[truth * k_ + predicted];
  }

  Count row_total(std::size_t truth) const {
    Count s = 0;
    for (std::size_t j = 0; j < k_; ++j)
      s += at(truth, j);
    return s;
  }

  Count column_total(std::size_t predicted) const {
    Count s = 0;
    for (std::size_t i = 0; i < k_; ++i)
      s += at(i, predicted);
    return s;
  }

  Count total() const {
    Count s = 0;
    for (Count c : counts_)
      s += c;
    return s;
  }

  Count trace() const {
    Count s = 0;
    for (std::size_t i = 0; i < k_; ++i)
      s += at(i, i);
    return s;
  }

  friend bool operator==(const ConfusionMatrix &,
                         const ConfusionMatrix &) = default;

private:
  void check(std::size_t truth, std::size_t predicted) const {
    if (truth >= k_ || predicted >= k_)
      throw IndexError("confusion cell (" + std::to_string(truth) + ", " +
                       std::to_string(predicted) + ") outside " +
                       std::to_string(k_) + " classes");
  }

  std::size_t k_;
  std::vector<Count> counts_;
};

inline ConfusionMatrix confusion(const std::vector<int> &preds,
                                 const std::vector<int> &labels,
                                 std::size_t k) {
  if (preds.size() != labels.size())
    throw ParameterError("confusion: " + std::to_string(preds.size()) +
                         " predictions vs " + std::to_string(labels.size()) +
                         " labels");
  ConfusionMatrix cm(k);
  for (std::size_t t = 0; t < preds.size(); ++t) {
    if (labels[t] < 0 || static_cast<std::size_t>(labels[t]) >= k ||
        preds[t] < 0 || static_cast<std::size_t>(preds[t]) >= k)
      throw ParameterError("confusion: record " + std::to_string(t) +
                           " has class outside [0, " + std::to_string(k) +
                           ")");
    ++cm.at(static_cast<std::size_t>(labels[t]),
            static_cast<std::size_t>(preds[t]));
  }
  return cm;
}

struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

inline double safe_ratio(double num, double den) {
  return den == 0.0 ? 0.0 : num / den;
}

/// Harmonic mean of precision and recall; 0 when both are 0.
inline double f_score(double precision, double recall) {
  return safe_ratio(2.0 * precision * recall, precision + recall);
}

inline PRF prf_from_counts(std::uint64_t tp, std::uint64_t fp,
                           std::uint64_t fn) {
  PRF r;
  r.precision = safe_ratio(static_cast<double>(tp), static_cast<double>(tp + fp));
  r.recall = safe_ratio(static_cast<double>(tp), static_cast<double>(tp + fn));
  r.f1 = f_score(r.precision, r.recall);
  return r;
}

/// One-vs-rest counts for `positive`; for k = 2 this is the usual binary
/// score.
inline PRF class_prf(const ConfusionMatrix &cm, std::size_t positive) {
  const auto tp = cm.at(positive, positive);
  return prf_from_counts(tp, cm.column_total(positive) - tp,
                         cm.row_total(positive) - tp);
}

inline PRF binary_prf(const ConfusionMatrix &cm, std::size_t positive = 1) {
  if (cm.classes() != 2)
    throw ParameterError("binary_prf needs a 2-class confusion matrix, got " +
                         std::to_string(cm.classes()));
  return class_prf(cm, positive);
}

/// TP, FP and FN summed over the classes in `subset`, then P/R/F.
inline PRF micro_prf_subset(const ConfusionMatrix &cm,
                            const std::set<std::size_t> &subset) {
  if (subset.empty())
    throw ParameterError("micro_prf_subset: empty class subset");
  std::uint64_t tp = 0, fp = 0, fn = 0;
  for (std::size_t c : subset) {
    if (c >= cm.classes())
      throw ParameterError("micro_prf_subset: class " + std::to_string(c) +
                           " outside " + std::to_string(cm.classes()) +
                           " classes");
    const auto diag = cm.at(c, c);
    tp += diag;
    fp += cm.column_total(c) - diag;
    fn += cm.row_total(c) - diag;
  }
  return prf_from_counts(tp, fp, fn);
}

inline double accuracy(const ConfusionMatrix &cm) {
  return safe_ratio(static_cast<double>(cm.trace()),
                    static_cast<double>(cm.total()));
}

/// Default micro-average subset: {1} for binary tasks, {0, 1} otherwise
/// (personal and possible medication intake in the 3-class task).
inline std::set<std::size_t> default_subset(std::size_t k) {
  if (k == 2)
    return {1};
  return {0, 1};
}

struct EvalReport {
  ConfusionMatrix confusion{2};
  std::vector<PRF> per_class;
  std::size_t positive_class = 1;
  PRF positive; // one-vs-rest score of positive_class ("adr_*")
  std::set<std::size_t> subset;
  PRF micro;
  double accuracy = 0.0;
  double threshold = 0.5;
};

inline EvalReport make_report(const ConfusionMatrix &cm,
                              std::set<std::size_t> subset,
                              std::size_t positive_class = 1,
                              double threshold = 0.5) {
  if (positive_class >= cm.classes())
    throw ParameterError("positive class outside class range");
  EvalReport r;
  r.confusion = cm;
  for (std::size_t c = 0; c < cm.classes(); ++c)
    r.per_class.push_back(class_prf(cm, c));
  r.positive_class = positive_class;
  r.positive = cm.classes() == 2 ? binary_prf(cm, positive_class)
                                 : class_prf(cm, positive_class);
  r.micro = micro_prf_subset(cm, subset);
  r.subset = std::move(subset);
  r.accuracy = accuracy(cm);
  r.threshold = threshold;
  return r;
}

namespace detail {

inline std::string fixed3(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3) << v;
  return os.str();
}

inline std::string subset_string(const std::set<std::size_t> &s) {
  std::string out;
  for (std::size_t c : s) {
    if (!out.empty())
      out += ',';
    out += std::to_string(c);
  }
  return out;
}

} // namespace detail

/// Aligned table: conventions header, confusion matrix, per-class scores.
inline void write_report_text(std::ostream &os, const EvalReport &r) {
  const std::size_t k = r.confusion.classes();
  os << "# threshold=" << r.threshold << " zero_denominator=0"
     << " positive_class=" << r.positive_class
     << " micro_subset=" << detail::subset_string(r.subset) << '\n';
  os << "records: " << r.confusion.total() << '\n';
  os << "confusion (rows = true, cols = predicted)\n";
  os << std::setw(8) << "";
  for (std::size_t j = 0; j < k; ++j)
    os << std::setw(10) << ("pred " + std::to_string(j));
  os << '\n';
  for (std::size_t i = 0; i < k; ++i) {
    os << std::setw(8) << ("true " + std::to_string(i));
    for (std::size_t j = 0; j < k; ++j)
      os << std::setw(10) << r.confusion.at(i, j);
    os << '\n';
  }
  os << std::setw(8) << "class" << std::setw(11) << "precision"
     << std::setw(10) << "recall" << std::setw(10) << "f1" << '\n';
  for (std::size_t c = 0; c < k; ++c)
    os << std::setw(8) << c << std::setw(11)
       << detail::fixed3(r.per_class[c].precision) << std::setw(10)
       << detail::fixed3(r.per_class[c].recall) << std::setw(10)
       << detail::fixed3(r.per_class[c].f1) << '\n';
  os << std::setw(8) << "micro" << std::setw(11)
     << detail::fixed3(r.micro.precision) << std::setw(10)
     << detail::fixed3(r.micro.recall) << std::setw(10)
     << detail::fixed3(r.micro.f1) << "   classes {"
     << detail::subset_string(r.subset) << "}\n";
  os << "accuracy: " << detail::fixed3(r.accuracy) << '\n';
}

/// Machine-readable block, one key=value per line.
inline void write_report_kv(std::ostream &os, const EvalReport &r) {
  auto kv = [&](const char *key, double v) {
    os << key << '=' << detail::fixed3(v) << '\n';
  };
  kv("adr_precision", r.positive.precision);
  kv("adr_recall", r.positive.recall);
  kv("adr_f1", r.positive.f1);
  kv("micro_precision", r.micro.precision);
  kv("micro_recall", r.micro.recall);
  kv("micro_f1", r.micro.f1);
  kv("accuracy", r.accuracy);
}

} // namespace seqclass
