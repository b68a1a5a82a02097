// Copyright 2026 The simuldec Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

/**
 * Value types shared by every part of the decoder: token ids, vocabularies,
 * scored hypotheses, beams and the append-only decode trace.
 *
 * Scores are natural-log probabilities. The end-of-sequence symbol is always
 * id 0; the start symbol is never materialized (an empty prefix stands in
 * for it).
 */

#include <algorithm>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

namespace simuldec {

using Token = std::int32_t;

inline constexpr Token kEos = 0;
inline constexpr std::string_view kEosSymbol = "</s>";

// Log-probability assigned to explicit zeros so that scores stay finite.
inline constexpr double kLogZeroFloor = -1e9;

// ============================================================================
// Errors
// ============================================================================

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidTokenError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column = 0)
      : Error(what), line_(line), column_(column) {}
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class VocabularyError : public Error {
 public:
  using Error::Error;
};

class ContractViolation : public Error {
 public:
  using Error::Error;
};

class PolicyContractError : public Error {
 public:
  using Error::Error;
};

class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

class InstanceTooLargeError : public Error {
 public:
  using Error::Error;
};

// ============================================================================
// Vocab
// ============================================================================

class Vocab {
 public:
  explicit Vocab(std::vector<std::string> symbols) : symbols_(std::move(symbols)) {
    if (symbols_.size() < 2)
      throw ValidationError("vocabulary needs </s> plus at least one token");
    if (symbols_[0] != kEosSymbol)
      throw ValidationError("vocabulary must start with </s>");
    for (std::size_t i = 0; i < symbols_.size(); ++i) {
      if (symbols_[i].empty()) throw ValidationError("empty vocabulary symbol");
      if (!index_.emplace(symbols_[i], static_cast<Token>(i)).second)
        throw ValidationError("duplicate vocabulary symbol '" + symbols_[i] + "'");
    }
  }

  std::size_t size() const { return symbols_.size(); }
  const std::string& symbol(Token id) const { return symbols_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& symbols() const { return symbols_; }
  bool contains(Token id) const { return id >= 0 && static_cast<std::size_t>(id) < symbols_.size(); }

  std::optional<Token> find(std::string_view symbol) const {
    auto it = index_.find(std::string(symbol));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  Token id(std::string_view symbol) const {
    if (auto t = find(symbol)) return *t;
    throw VocabularyError("unknown token '" + std::string(symbol) + "'");
  }

 private:
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, Token> index_;
};

// ============================================================================
// Hypothesis / Beam
// ============================================================================

struct Hypothesis {
  std::vector<Token> tokens;
  double log_score = 0.0;
  bool finished = false;

  bool operator==(const Hypothesis&) const = default;
};

/// Total order used for every top-b selection: higher score first, then the
/// lexicographically smaller token sequence. `less` means `a` ranks first.
inline std::weak_ordering compare_hypotheses(const Hypothesis& a, const Hypothesis& b) {
  if (a.log_score > b.log_score) return std::weak_ordering::less;
  if (a.log_score < b.log_score) return std::weak_ordering::greater;
  return std::lexicographical_compare_three_way(a.tokens.begin(), a.tokens.end(),
                                                b.tokens.begin(), b.tokens.end());
}

inline bool ranks_before(const Hypothesis& a, const Hypothesis& b) {
  return compare_hypotheses(a, b) < 0;
}

struct Beam {
  std::vector<Hypothesis> items;

  bool empty() const { return items.empty(); }
  std::size_t size() const { return items.size(); }
  const Hypothesis& top() const { return items.front(); }

  /// Sorted under compare_hypotheses and `finished` consistent with tokens.
  bool well_formed(std::size_t beam_size) const {
    if (items.size() > beam_size) return false;
    for (std::size_t i = 0; i < items.size(); ++i) {
      const auto& h = items[i];
      bool ends_eos = !h.tokens.empty() && h.tokens.back() == kEos;
      if (h.finished != ends_eos) return false;
      if (i > 0 && compare_hypotheses(items[i - 1], h) > 0) return false;
    }
    return true;
  }

  static Beam initial(std::vector<Token> prefix = {}) {
    Beam b;
    b.items.push_back(Hypothesis{std::move(prefix), 0.0, false});
    return b;
  }
};

// ============================================================================
// Actions and decode trace
// ============================================================================

enum class Action : std::uint8_t { kRead, kWrite };

struct ReadEvent {
  Token token;
  std::size_t source_index;
  bool operator==(const ReadEvent&) const = default;
};

struct CommitEvent {
  Token token;
  std::size_t g;  // source tokens read when this target token was committed
  double logp;
  bool operator==(const CommitEvent&) const = default;
};

struct SpeculateEvent {
  std::vector<Token> window;  // discarded lookahead tokens
  bool operator==(const SpeculateEvent&) const = default;
};

struct TailStartEvent {
  bool operator==(const TailStartEvent&) const = default;
};

using Event = std::variant<ReadEvent, CommitEvent, SpeculateEvent, TailStartEvent>;

class DecodeTrace {
 public:
  void append(Event e) {
    if (auto* r = std::get_if<ReadEvent>(&e)) {
      if (r->source_index != reads_)
        throw ContractViolation("read event out of order");
      ++reads_;
    } else if (auto* c = std::get_if<CommitEvent>(&e)) {
      if (c->g > reads_) throw ContractViolation("commit references unread source");
      if (c->g < last_g_) throw ContractViolation("commit g decreased");
      last_g_ = c->g;
    }
    events_.push_back(std::move(e));
  }

  const std::vector<Event>& events() const { return events_; }
  std::size_t reads() const { return reads_; }

  std::vector<Token> output() const {
    std::vector<Token> out;
    for (const auto& e : events_)
      if (auto* c = std::get_if<CommitEvent>(&e)) out.push_back(c->token);
    return out;
  }

  std::vector<std::size_t> g() const {
    std::vector<std::size_t> out;
    for (const auto& e : events_)
      if (auto* c = std::get_if<CommitEvent>(&e)) out.push_back(c->g);
    return out;
  }

  /// READ/WRITE sequence as executed (tail commits count as WRITEs).
  std::vector<Action> actions() const {
    std::vector<Action> out;
    for (const auto& e : events_) {
      if (std::holds_alternative<ReadEvent>(e)) out.push_back(Action::kRead);
      if (std::holds_alternative<CommitEvent>(e)) out.push_back(Action::kWrite);
    }
    return out;
  }

  bool operator==(const DecodeTrace& o) const { return events_ == o.events_; }

 private:
  std::vector<Event> events_;
  std::size_t reads_ = 0;
  std::size_t last_g_ = 0;
};

}  // namespace simuldec
