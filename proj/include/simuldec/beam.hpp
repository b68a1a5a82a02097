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
 * Beam transitions and full-sentence search.
 *
 * next_step() is the one-step operator: every unfinished hypothesis is
 * extended by every token, finished hypotheses pass through frozen, and the
 * top `beam_size` survive. next_multi() applies it repeatedly.
 *
 * Selection always uses the raw accumulated log score. Candidates are kept as
 * (parent, token, score) triples until selection so that only the survivors
 * are ever materialized.
 */

#include <algorithm>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "simuldec/core.hpp"
#include "simuldec/scorer.hpp"

namespace simuldec {

struct Decoded {
  std::vector<Token> tokens;
  double log_score = 0.0;
  bool operator==(const Decoded&) const = default;
};

inline std::size_t default_max_len(std::size_t source_len) { return 2 * source_len + 5; }

namespace detail {

inline constexpr Token kPassThrough = -1;

struct Candidate {
  std::size_t parent;
  Token token;  // kPassThrough keeps the parent unchanged
  double score;
  double step_logp = 0.0;
};

// Lexicographic comparison of parent_a∘ta against parent_b∘tb without
// building either sequence.
inline std::weak_ordering compare_extended(std::span<const Token> pa, Token ta,
                                           std::span<const Token> pb, Token tb) {
  const std::size_t la = pa.size() + (ta != kPassThrough ? 1 : 0);
  const std::size_t lb = pb.size() + (tb != kPassThrough ? 1 : 0);
  const std::size_t n = std::min(la, lb);
  for (std::size_t i = 0; i < n; ++i) {
    Token x = i < pa.size() ? pa[i] : ta;
    Token y = i < pb.size() ? pb[i] : tb;
    if (x != y) return x < y ? std::weak_ordering::less : std::weak_ordering::greater;
  }
  return la <=> lb;
}

}  // namespace detail

/// One beam transition. Throws ContractViolation on an empty beam.
template <IncrementalScorer M>
Beam next_step(const M& model, std::span<const Token> source_prefix, const Beam& beam,
               std::size_t beam_size, bool allow_eos = true) {
  if (beam.empty()) throw ContractViolation("next_step on an empty beam");
  if (beam_size == 0) throw ContractViolation("beam size must be >= 1");

  const std::size_t vocab = model.vocab_size();
  std::vector<detail::Candidate> cands;
  cands.reserve(beam.size() * vocab);
  LogDistribution logp;
  for (std::size_t i = 0; i < beam.size(); ++i) {
    const auto& h = beam.items[i];
    if (h.finished) {
      cands.push_back({i, detail::kPassThrough, h.log_score});
      continue;
    }
    model.score_into(source_prefix, h.tokens, logp);
    for (std::size_t v = 0; v < vocab; ++v) {
      if (!allow_eos && static_cast<Token>(v) == kEos) continue;
      cands.push_back({i, static_cast<Token>(v), h.log_score + logp[v]});
    }
  }

  auto better = [&](const detail::Candidate& a, const detail::Candidate& b) {
    if (a.score != b.score) return a.score > b.score;
    return detail::compare_extended(beam.items[a.parent].tokens, a.token,
                                    beam.items[b.parent].tokens, b.token) < 0;
  };
  const std::size_t keep = std::min(beam_size, cands.size());
  std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(),
                    better);

  Beam next;
  next.items.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) {
    const auto& c = cands[i];
    Hypothesis h = beam.items[c.parent];
    if (c.token != detail::kPassThrough) {
      h.tokens.push_back(c.token);
      h.log_score = c.score;
      h.finished = c.token == kEos;
    }
    next.items.push_back(std::move(h));
  }
  return next;
}

/// `steps` applications of next_step; steps == 0 returns the beam unchanged.
template <IncrementalScorer M>
Beam next_multi(const M& model, std::span<const Token> source_prefix, Beam beam,
                std::size_t beam_size, std::size_t steps, bool allow_eos = true) {
  for (std::size_t i = 0; i < steps; ++i)
    beam = next_step(model, source_prefix, beam, beam_size, allow_eos);
  return beam;
}

template <IncrementalScorer M>
Decoded greedy_decode(const M& model, std::span<const Token> source, std::size_t max_len) {
  Decoded out;
  LogDistribution logp;
  while (out.tokens.size() < max_len) {
    model.score_into(source, out.tokens, logp);
    const Token best = argmax(logp);
    out.tokens.push_back(best);
    out.log_score += logp[static_cast<std::size_t>(best)];
    if (best == kEos) return out;
  }
  model.score_into(source, out.tokens, logp);
  out.tokens.push_back(kEos);
  out.log_score += logp[static_cast<std::size_t>(kEos)];
  return out;
}

struct SearchOptions {
  std::size_t beam_size = 5;
  std::size_t max_steps = 0;
  // Added per token when ranking finished hypotheses. Disables early stopping.
  double length_reward = 0.0;
};

/// Beam search seeded with `prefix` (score 0). Returns the best finished
/// hypothesis with tokens and score relative to the prefix. If nothing
/// finishes within max_steps, eos is appended to the top item.
template <IncrementalScorer M>
Decoded beam_search_from(const M& model, std::span<const Token> source,
                         std::span<const Token> prefix, const SearchOptions& opt) {
  if (opt.beam_size == 0) throw ContractViolation("beam size must be >= 1");
  auto rank = [&](const Hypothesis& h) {
    return h.log_score + opt.length_reward * static_cast<double>(h.tokens.size());
  };
  Beam beam = Beam::initial(std::vector<Token>(prefix.begin(), prefix.end()));
  std::optional<Hypothesis> best;
  for (std::size_t t = 0; t < opt.max_steps; ++t) {
    beam = next_step(model, source, beam, opt.beam_size, true);
    const Hypothesis* best_open = nullptr;
    for (const auto& h : beam.items) {
      if (h.finished) {
        if (!best || rank(h) > rank(*best) || (rank(h) == rank(*best) && ranks_before(h, *best)))
          best = h;
      } else if (!best_open) {
        best_open = &h;
      }
    }
    if (!best_open) break;
    if (opt.length_reward == 0.0 && best && best_open->log_score <= best->log_score) break;
  }
  if (!best) {
    Hypothesis h = beam.top();
    LogDistribution logp;
    model.score_into(source, h.tokens, logp);
    h.tokens.push_back(kEos);
    h.log_score += logp[static_cast<std::size_t>(kEos)];
    best = std::move(h);
  }
  Decoded out;
  out.tokens.assign(best->tokens.begin() + static_cast<std::ptrdiff_t>(prefix.size()),
                    best->tokens.end());
  out.log_score = best->log_score;
  return out;
}

template <IncrementalScorer M>
Decoded beam_search_full(const M& model, std::span<const Token> source, std::size_t beam_size,
                         std::size_t max_len, double length_reward = 0.0) {
  return beam_search_from(model, source, {}, SearchOptions{beam_size, max_len, length_reward});
}

}  // namespace simuldec
