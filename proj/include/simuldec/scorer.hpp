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
 * Incremental conditional model p(y_t | x_{<=s}, y_{<t}).
 *
 * A scorer is any type with
 *
 *   std::size_t vocab_size() const;
 *   void score_into(std::span<const Token> source_prefix,
 *                   std::span<const Token> target_prefix,
 *                   LogDistribution& out) const;
 *
 * `out` is resized to vocab_size() and filled with natural-log probabilities
 * that sum to one. Scorers must be pure and reentrant: the search code calls
 * them from several sessions at once.
 */

#include <atomic>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <span>
#include <vector>

#include "simuldec/core.hpp"

namespace simuldec {

using LogDistribution = std::vector<double>;

template <class M>
concept IncrementalScorer = requires(const M& m, std::span<const Token> src,
                                     std::span<const Token> tgt, LogDistribution& out) {
  { m.vocab_size() } -> std::convertible_to<std::size_t>;
  m.score_into(src, tgt, out);
};

template <IncrementalScorer M>
LogDistribution score_next(const M& model, std::span<const Token> source_prefix,
                           std::span<const Token> target_prefix) {
  LogDistribution out;
  model.score_into(source_prefix, target_prefix, out);
  return out;
}

/// |sum exp(logp) - 1|
inline double normalization_error(std::span<const double> logp) {
  double s = 0.0;
  for (double lp : logp) s += std::exp(lp);
  return std::abs(s - 1.0);
}

/// Index of the best entry; the smallest id wins ties.
inline Token argmax(std::span<const double> logp, bool allow_eos = true) {
  Token best = -1;
  for (std::size_t v = 0; v < logp.size(); ++v) {
    if (!allow_eos && static_cast<Token>(v) == kEos) continue;
    if (best < 0 || logp[v] > logp[static_cast<std::size_t>(best)]) best = static_cast<Token>(v);
  }
  return best;
}

inline void check_target_tokens(std::span<const Token> tokens, std::size_t vocab_size) {
  for (Token t : tokens)
    if (t < 0 || static_cast<std::size_t>(t) >= vocab_size)
      throw InvalidTokenError("target token id " + std::to_string(t) + " out of range");
}

/// Wraps a scorer and counts score_into calls. Used for work accounting.
template <IncrementalScorer M>
class CountingScorer {
 public:
  explicit CountingScorer(const M& inner) : inner_(&inner) {}

  std::size_t vocab_size() const { return inner_->vocab_size(); }
  void score_into(std::span<const Token> src, std::span<const Token> tgt,
                  LogDistribution& out) const {
    calls_.fetch_add(1, std::memory_order_relaxed);
    inner_->score_into(src, tgt, out);
  }

  std::size_t calls() const { return calls_.load(); }
  void reset() { calls_ = 0; }

 private:
  const M* inner_;
  mutable std::atomic<std::size_t> calls_{0};
};

}  // namespace simuldec
