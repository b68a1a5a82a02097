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

// Brute-force references for the search code. Exponential by design; both
// entry points refuse instances with more than kMaxOraclePaths paths.
// Nothing here shares code with beam.hpp or sbs.hpp beyond the scorer and
// compare_hypotheses.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "simuldec/core.hpp"
#include "simuldec/scorer.hpp"

namespace simuldec {

inline constexpr std::size_t kMaxOraclePaths = 1'000'000;

namespace detail {

inline void guard_paths(std::size_t branching, std::size_t depth) {
  std::size_t paths = 1;
  for (std::size_t i = 0; i < depth; ++i) {
    if (branching != 0 && paths > kMaxOraclePaths / branching)
      throw InstanceTooLargeError("oracle instance exceeds the path limit");
    paths *= branching;
  }
  if (paths > kMaxOraclePaths) throw InstanceTooLargeError("oracle instance exceeds the path limit");
}

template <IncrementalScorer M>
void enumerate_complete(const M& model, std::span<const Token> source, Hypothesis& cur,
                        std::size_t max_len, std::optional<Hypothesis>& best) {
  LogDistribution logp;
  model.score_into(source, cur.tokens, logp);
  {
    Hypothesis done{cur.tokens, cur.log_score + logp[static_cast<std::size_t>(kEos)], true};
    done.tokens.push_back(kEos);
    if (!best || ranks_before(done, *best)) best = std::move(done);
  }
  if (cur.tokens.size() + 1 >= max_len) return;
  for (std::size_t v = 0; v < logp.size(); ++v) {
    if (static_cast<Token>(v) == kEos) continue;
    const double saved = cur.log_score;
    cur.tokens.push_back(static_cast<Token>(v));
    cur.log_score += logp[v];
    enumerate_complete(model, source, cur, max_len, best);
    cur.tokens.pop_back();
    cur.log_score = saved;
  }
}

template <IncrementalScorer M>
void enumerate_paths(const M& model, std::span<const Token> source, Hypothesis& cur,
                     std::size_t remaining, bool mask_eos, std::optional<Hypothesis>& best) {
  if (remaining == 0 || cur.finished) {
    if (!best || ranks_before(cur, *best)) best = cur;
    return;
  }
  LogDistribution logp;
  model.score_into(source, cur.tokens, logp);
  for (std::size_t v = 0; v < logp.size(); ++v) {
    const Token tok = static_cast<Token>(v);
    if (mask_eos && tok == kEos) continue;
    Hypothesis next{cur.tokens, cur.log_score + logp[v], tok == kEos};
    next.tokens.push_back(tok);
    enumerate_paths(model, source, next, remaining - 1, mask_eos, best);
  }
}

}  // namespace detail

/// Best complete continuation of `prefix` with at most max_steps new tokens
/// (eos included), by exhaustive enumeration. Scores are relative to the
/// prefix.
template <IncrementalScorer M>
Hypothesis enumerate_best_from(const M& model, std::span<const Token> source,
                               std::span<const Token> prefix, std::size_t max_steps) {
  if (max_steps == 0) throw ContractViolation("enumerate_best needs max_len >= 1");
  detail::guard_paths(model.vocab_size() - 1, max_steps);
  Hypothesis cur{std::vector<Token>(prefix.begin(), prefix.end()), 0.0, false};
  std::optional<Hypothesis> best;
  detail::enumerate_complete(model, source, cur, prefix.size() + max_steps, best);
  return *best;
}

/// Best complete output of length <= max_len (eos included).
template <IncrementalScorer M>
Hypothesis enumerate_best(const M& model, std::span<const Token> source, std::size_t max_len) {
  return enumerate_best_from(model, source, {}, max_len);
}

/// Best `depth`-step continuation of `committed`. Paths that emit eos early
/// stop there and compete with their final score.
template <IncrementalScorer M>
Hypothesis enumerate_lookahead_path(const M& model, std::span<const Token> source_prefix,
                                    std::span<const Token> committed, std::size_t depth,
                                    bool mask_eos) {
  if (depth == 0) throw ContractViolation("enumerate_lookahead needs depth >= 1");
  detail::guard_paths(model.vocab_size() - 1, depth);
  Hypothesis cur{std::vector<Token>(committed.begin(), committed.end()), 0.0, false};
  std::optional<Hypothesis> best;
  detail::enumerate_paths(model, source_prefix, cur, depth, mask_eos, best);
  return *best;
}

/// First token of enumerate_lookahead_path().
template <IncrementalScorer M>
Token enumerate_lookahead(const M& model, std::span<const Token> source_prefix,
                          std::span<const Token> committed, std::size_t depth, bool mask_eos) {
  return enumerate_lookahead_path(model, source_prefix, committed, depth, mask_eos)
      .tokens[committed.size()];
}

}  // namespace simuldec
