// SPDX-License-Identifier: Apache-2.0
/**
 * @file   encoding.hpp
 * @brief  Tweet text to fixed-length index sequences.
 *
 * Pipeline: tokenize (lowercase, whitespace split) -> vocabulary lookup
 * (index 0 = unknown and padding) -> truncate to the first max_len tokens or
 * left-pad with zeros.
 */

#pragma once

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "seqclass/errors.hpp"

namespace seqclass {

using Token = std::string;
using TokenList = std::vector<Token>;
using TokenIndex = std::uint32_t;

struct LabeledRecord {
  std::string id;
  int label = 0;
  std::string text;
};

namespace detail {

// ASCII whitespace plus the multi-byte UTF-8 spaces: U+0085, U+00A0,
// U+1680, U+2000-U+200A, U+2028, U+2029, U+202F, U+205F, U+3000.
// Returns the byte length of the whitespace sequence at `pos`, or 0.
inline std::size_t whitespace_len(std::string_view s, std::size_t pos) {
  const auto c = static_cast<unsigned char>(s[pos]);
  if (c == ' ' || (c >= 0x09 && c <= 0x0d))
    return 1;
  auto byte = [&](std::size_t i) -> unsigned {
    return pos + i < s.size() ? static_cast<unsigned char>(s[pos + i]) : 0u;
  };
  if (c == 0xc2 && (byte(1) == 0x85 || byte(1) == 0xa0))
    return 2;
  if (c == 0xe1 && byte(1) == 0x9a && byte(2) == 0x80)
    return 3;
  if (c == 0xe2 && byte(1) == 0x80) {
    const unsigned b2 = byte(2);
    if ((b2 >= 0x80 && b2 <= 0x8a) || b2 == 0xa8 || b2 == 0xa9 || b2 == 0xaf)
      return 3;
  }
  if (c == 0xe2 && byte(1) == 0x81 && byte(2) == 0x9f)
    return 3;
  if (c == 0xe3 && byte(1) == 0x80 && byte(2) == 0x80)
    return 3;
  return 0;
}

inline char ascii_lower(char ch) {
  return static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
}

} // namespace detail

/// Lowercases (ASCII range; other UTF-8 bytes pass through) and splits on
/// whitespace. Punctuation stays attached to its token.
inline TokenList tokenize(std::string_view text) {
  TokenList tokens;
  Token current;
  std::size_t pos = 0;
  while (pos < text.size()) {
    if (const auto ws = detail::whitespace_len(text, pos); ws > 0) {
      if (!current.empty())
        tokens.push_back(std::move(current));
      current.clear();
      pos += ws;
      continue;
    }
    current.push_back(detail::ascii_lower(text[pos]));
    ++pos;
  }
  if (!current.empty())
    tokens.push_back(std::move(current));
  return tokens;
}

class Vocabulary {
public:
  static constexpr TokenIndex unknown = 0;

  Vocabulary() = default;

  /// Tokens in index order; tokens[i] receives index i + 1.
  explicit Vocabulary(const std::vector<Token> &ordered_tokens) {
    for (const auto &tok : ordered_tokens)
      add(tok);
  }

  /// Number of indices including the reserved 0.
  std::size_t size() const noexcept { return tokens_.size() + 1; }

  TokenIndex index_of(std::string_view token) const {
    const auto it = index_.find(std::string(token));
    return it == index_.end() ? unknown : it->second;
  }

  bool contains(std::string_view token) const {
    return index_.count(std::string(token)) != 0;
  }

  /// Token for a nonzero index.
  const Token &token_at(TokenIndex idx) const {
    if (idx == unknown || idx >= size())
      throw IndexError("vocabulary index " + std::to_string(idx) +
                       " out of range [1, " + std::to_string(size()) + ")");
    return tokens_[idx - 1];
  }

  /// Tokens in index order (index 1 first).
  const std::vector<Token> &tokens() const noexcept { return tokens_; }

  friend bool operator==(const Vocabulary &a, const Vocabulary &b) {
    return a.tokens_ == b.tokens_;
  }

private:
  void add(const Token &tok) {
    if (tok.empty())
      throw ParameterError("vocabulary token must be nonempty");
    if (std::any_of(tok.begin(), tok.end(), [](char c) {
          return detail::ascii_lower(c) != c;
        }))
      throw ParameterError("vocabulary token must be lowercase: " + tok);
    if (!index_.emplace(tok, static_cast<TokenIndex>(tokens_.size() + 1))
             .second)
      throw ParameterError("duplicate vocabulary token: " + tok);
    tokens_.push_back(tok);
  }

  std::vector<Token> tokens_;
  std::unordered_map<Token, TokenIndex> index_;
};

/// Ranks tokens by descending frequency with ties broken by first occurrence
/// in corpus order. With `top_words`, only that many tokens get an index.
inline Vocabulary build_vocabulary(const std::vector<LabeledRecord> &corpus,
                                   std::optional<std::size_t> top_words = {}) {
  if (corpus.empty())
    throw EmptyInputError("build_vocabulary: empty corpus");
  if (top_words && *top_words == 0)
    throw ParameterError("build_vocabulary: top_words must be positive");

  struct Entry {
    Token token;
    std::size_t count;
    std::size_t first_seen;
  };
  std::vector<Entry> entries;
  std::unordered_map<Token, std::size_t> slot;
  for (const auto &rec : corpus) {
    for (auto &tok : tokenize(rec.text)) {
      auto [it, inserted] = slot.emplace(tok, entries.size());
      if (inserted)
        entries.push_back({std::move(tok), 1, entries.size()});
      else
        ++entries[it->second].count;
    }
  }
  std::stable_sort(entries.begin(), entries.end(),
                   [](const Entry &a, const Entry &b) {
                     if (a.count != b.count)
                       return a.count > b.count;
                     return a.first_seen < b.first_seen;
                   });
  if (top_words && entries.size() > *top_words)
    entries.resize(*top_words);

  std::vector<Token> ordered;
  ordered.reserve(entries.size());
  for (auto &e : entries)
    ordered.push_back(std::move(e.token));
  return Vocabulary(ordered);
}

using EncodedSequence = std::vector<TokenIndex>;

/// Maps tokens through `vocab`, keeps the first `max_len` of them and
/// left-pads shorter sequences with zeros.
inline EncodedSequence encode_sequence(const TokenList &tokens,
                                       const Vocabulary &vocab,
                                       std::size_t max_len) {
  if (max_len == 0)
    throw ParameterError("encode_sequence: max_len must be positive");
  EncodedSequence seq(max_len, Vocabulary::unknown);
  const std::size_t n = std::min(tokens.size(), max_len);
  const std::size_t offset = max_len - n;
  for (std::size_t i = 0; i < n; ++i)
    seq[offset + i] = vocab.index_of(tokens[i]);
  return seq;
}

/// Row-aligned sequences and labels; every sequence has length max_len.
struct EncodedDataset {
  std::size_t max_len = 0;
  std::vector<EncodedSequence> sequences;
  std::vector<int> labels;

  std::size_t rows() const noexcept { return sequences.size(); }
  std::size_t cols() const noexcept { return max_len; }
  bool empty() const noexcept { return sequences.empty(); }
};

/// With `discard_long`, records with more than `max_len` tokens are dropped;
/// otherwise they are truncated.
inline EncodedDataset encode_dataset(const std::vector<LabeledRecord> &records,
                                     const Vocabulary &vocab,
                                     std::size_t max_len, bool discard_long) {
  if (max_len == 0)
    throw ParameterError("encode_dataset: max_len must be positive");
  EncodedDataset out;
  out.max_len = max_len;
  out.sequences.reserve(records.size());
  out.labels.reserve(records.size());
  for (const auto &rec : records) {
    const auto tokens = tokenize(rec.text);
    if (discard_long && tokens.size() > max_len)
      continue;
    out.sequences.push_back(encode_sequence(tokens, vocab, max_len));
    out.labels.push_back(rec.label);
  }
  return out;
}

} // namespace seqclass
