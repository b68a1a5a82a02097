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
 * File-driven conditional model.
 *
 * A context is (number of revealed source tokens capped at s_max, the last
 * `order` target tokens). Lookup backs off from the full suffix to shorter
 * suffixes at the same source count and finally to the uniform distribution.
 *
 * File format:
 *
 *   # comment
 *   src_vocab: x1 x2 x3
 *   tgt_vocab: </s> A B C
 *   order: 1
 *   s_max: 2
 *   ctx s=1 [] :: A=0.6 B=0.4
 *   ctx s=1 [A] :: </s>=1.0
 *
 * Tokens missing from an entry have probability zero. Zeros are stored as
 * kLogZeroFloor.
 */

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "simuldec/core.hpp"
#include "simuldec/scorer.hpp"

namespace simuldec {

class TabularModel {
 public:
  struct ContextKey {
    std::size_t s;
    std::vector<Token> suffix;
    auto operator<=>(const ContextKey&) const = default;
  };

  TabularModel(Vocab src, Vocab tgt, std::size_t order, std::size_t s_max)
      : src_(std::move(src)), tgt_(std::move(tgt)), order_(order), s_max_(s_max) {}

  const Vocab& source_vocab() const { return src_; }
  const Vocab& target_vocab() const { return tgt_; }
  std::size_t order() const { return order_; }
  std::size_t s_max() const { return s_max_; }
  std::size_t vocab_size() const { return tgt_.size(); }
  std::size_t num_entries() const { return entries_.size(); }

  /// Adds a context with explicit probabilities (one per target token).
  void add_entry(ContextKey key, std::span<const double> probs) {
    const std::string name = describe(key);
    if (key.s > s_max_) throw ValidationError(name + ": s exceeds s_max");
    if (key.suffix.size() > order_) throw ValidationError(name + ": suffix longer than order");
    check_target_tokens(key.suffix, tgt_.size());
    if (probs.size() != tgt_.size())
      throw ValidationError(name + ": distribution size does not match target vocab");
    double sum = 0.0;
    for (double p : probs) {
      if (!(p >= 0.0)) throw ValidationError(name + ": negative probability");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-6)
      throw ValidationError(name + ": probabilities sum to " + std::to_string(sum));
    LogDistribution logp(probs.size());
    for (std::size_t v = 0; v < probs.size(); ++v)
      logp[v] = probs[v] > 0.0 ? std::max(std::log(probs[v]), kLogZeroFloor) : kLogZeroFloor;
    if (!entries_.emplace(std::move(key), std::move(logp)).second)
      throw ValidationError(name + ": duplicate context");
  }

  bool remove_entry(const ContextKey& key) { return entries_.erase(key) > 0; }

  void score_into(std::span<const Token> source_prefix, std::span<const Token> target_prefix,
                  LogDistribution& out) const {
    for (Token t : source_prefix)
      if (!src_.contains(t))
        throw InvalidTokenError("source token id " + std::to_string(t) + " out of range");
    check_target_tokens(target_prefix, tgt_.size());

    ContextKey key{std::min(source_prefix.size(), s_max_), {}};
    const std::size_t max_len = std::min(order_, target_prefix.size());
    for (std::size_t len = max_len + 1; len-- > 0;) {
      key.suffix.assign(target_prefix.end() - static_cast<std::ptrdiff_t>(len), target_prefix.end());
      if (auto it = entries_.find(key); it != entries_.end()) {
        out = it->second;
        return;
      }
    }
    out.assign(tgt_.size(), -std::log(static_cast<double>(tgt_.size())));
  }

  std::string describe(const ContextKey& key) const {
    std::string s = "ctx s=" + std::to_string(key.s) + " [";
    for (std::size_t i = 0; i < key.suffix.size(); ++i) {
      if (i > 0) s += ' ';
      s += tgt_.contains(key.suffix[i]) ? tgt_.symbol(key.suffix[i]) : std::to_string(key.suffix[i]);
    }
    return s + "]";
  }

 private:
  Vocab src_;
  Vocab tgt_;
  std::size_t order_;
  std::size_t s_max_;
  std::map<ContextKey, LogDistribution> entries_;
};

namespace detail {

inline std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

template <class T>
bool parse_number(std::string_view s, T& value) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

}  // namespace detail

/// Parses the tabular model format. `name` prefixes error messages.
inline TabularModel parse_tabular_model(std::istream& in, const std::string& name = "<model>") {
  std::optional<Vocab> src, tgt;
  std::optional<std::size_t> order, s_max;
  std::optional<TabularModel> model;

  auto where = [&](std::size_t line) { return name + ":" + std::to_string(line) + ": "; };

  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string_view line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;

    if (line.starts_with("ctx")) {
      if (!model) {
        if (!src || !tgt || !order || !s_max)
          throw ParseError(where(lineno) + "entry before complete header", lineno);
        model.emplace(*src, *tgt, *order, *s_max);
      }
      const auto open = line.find('[');
      const auto close = line.find(']');
      const auto sep = line.find("::");
      if (open == std::string_view::npos || close == std::string_view::npos ||
          sep == std::string_view::npos || !(open < close && close < sep))
        throw ParseError(where(lineno) + "expected 'ctx s=<int> [suffix] :: tok=prob ...'", lineno);

      auto s_field = detail::trim(line.substr(3, open - 3));
      std::size_t s = 0;
      if (!s_field.starts_with("s=") || !detail::parse_number(s_field.substr(2), s))
        throw ParseError(where(lineno) + "bad source count '" + std::string(s_field) + "'",
                         lineno, 4);

      TabularModel::ContextKey key{s, {}};
      for (const auto& tok : detail::split_ws(line.substr(open + 1, close - open - 1))) {
        auto id = model->target_vocab().find(tok);
        if (!id) throw VocabularyError(where(lineno) + "unknown token '" + tok + "'");
        key.suffix.push_back(*id);
      }

      std::vector<double> probs(model->vocab_size(), 0.0);
      std::vector<bool> seen(model->vocab_size(), false);
      for (const auto& item : detail::split_ws(line.substr(sep + 2))) {
        const auto eq = item.rfind('=');
        if (eq == std::string::npos || eq == 0)
          throw ParseError(where(lineno) + "expected tok=prob, got '" + item + "'", lineno);
        const std::string tok = item.substr(0, eq);
        double p = 0.0;
        if (!detail::parse_number(std::string_view(item).substr(eq + 1), p))
          throw ParseError(where(lineno) + "bad probability in '" + item + "'", lineno);
        auto id = model->target_vocab().find(tok);
        if (!id) throw VocabularyError(where(lineno) + "unknown token '" + tok + "'");
        if (seen[static_cast<std::size_t>(*id)])
          throw ParseError(where(lineno) + "token '" + tok + "' listed twice", lineno);
        seen[static_cast<std::size_t>(*id)] = true;
        probs[static_cast<std::size_t>(*id)] = p;
      }
      try {
        model->add_entry(std::move(key), probs);
      } catch (const ValidationError& e) {
        throw ValidationError(where(lineno) + e.what());
      }
      continue;
    }

    const auto colon = line.find(':');
    if (colon == std::string_view::npos)
      throw ParseError(where(lineno) + "unrecognized line", lineno);
    if (model) throw ParseError(where(lineno) + "header after entries", lineno);
    const auto field = detail::trim(line.substr(0, colon));
    const auto value = detail::trim(line.substr(colon + 1));
    try {
      if (field == "src_vocab") {
        auto syms = detail::split_ws(value);
        if (syms.empty()) throw ParseError(where(lineno) + "empty src_vocab", lineno);
        // The source side has no eos; give it one so ids line up with Vocab.
        if (syms.front() != kEosSymbol) syms.insert(syms.begin(), std::string(kEosSymbol));
        src.emplace(std::move(syms));
      } else if (field == "tgt_vocab") {
        tgt.emplace(detail::split_ws(value));
      } else if (field == "order" || field == "s_max") {
        std::size_t n = 0;
        if (!detail::parse_number(value, n))
          throw ParseError(where(lineno) + "bad integer for " + std::string(field), lineno);
        (field == "order" ? order : s_max) = n;
      } else {
        throw ParseError(where(lineno) + "unknown header '" + std::string(field) + "'", lineno);
      }
    } catch (const ValidationError& e) {
      throw ParseError(where(lineno) + e.what(), lineno);
    }
  }
  if (!model) {
    if (!src || !tgt || !order || !s_max) throw ParseError(name + ": incomplete header", lineno);
    model.emplace(*src, *tgt, *order, *s_max);
  }
  return std::move(*model);
}

inline TabularModel load_tabular_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open model file '" + path + "'");
  return parse_tabular_model(in, path);
}

}  // namespace simuldec
