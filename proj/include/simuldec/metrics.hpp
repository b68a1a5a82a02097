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

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <span>
#include <vector>

#include "simuldec/core.hpp"
#include "simuldec/scorer.hpp"

namespace simuldec {

// ============================================================================
// Latency
// ============================================================================

/// Average Lagging.
///
///   r   = n / m
///   tau = first t with g(t) = m  (n if the source is never fully read)
///   AL  = 1/tau * sum_{t=1..tau} [ g(t) - (t-1)/r ]
///
/// g(t) is the number of source tokens read when target token t was
/// committed. r uses the generated target length unless target_len is
/// nonzero (e.g. a reference length).
inline double average_lagging(std::span<const std::size_t> g, std::size_t m,
                              std::size_t target_len = 0) {
  if (g.empty()) throw UndefinedMetricError("average lagging of an empty output");
  if (m == 0) throw UndefinedMetricError("average lagging with an empty source");
  for (std::size_t t = 0; t < g.size(); ++t) {
    if (g[t] < 1 || g[t] > m) throw ContractViolation("g(t) outside [1, m]");
    if (t > 0 && g[t] < g[t - 1]) throw ContractViolation("g must be non-decreasing");
  }
  const double n = static_cast<double>(target_len ? target_len : g.size());
  const double r = n / static_cast<double>(m);
  std::size_t tau = g.size();
  for (std::size_t t = 0; t < g.size(); ++t)
    if (g[t] == m) {
      tau = t + 1;
      break;
    }
  double sum = 0.0;
  for (std::size_t t = 0; t < tau; ++t)
    sum += static_cast<double>(g[t]) - static_cast<double>(t) / r;
  return sum / static_cast<double>(tau);
}

/// Consecutive Wait: mean length of the maximal READ runs.
inline double consecutive_wait(std::span<const Action> actions) {
  std::size_t reads = 0, runs = 0;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (actions[i] != Action::kRead) continue;
    ++reads;
    if (i == 0 || actions[i - 1] != Action::kRead) ++runs;
  }
  if (runs == 0) throw UndefinedMetricError("consecutive wait without any READ");
  return static_cast<double>(reads) / static_cast<double>(runs);
}

inline double average_lagging(const DecodeTrace& trace, std::size_t m,
                              std::size_t target_len = 0) {
  const auto g = trace.g();
  return average_lagging(g, m, target_len);
}

inline double consecutive_wait(const DecodeTrace& trace) {
  const auto a = trace.actions();
  return consecutive_wait(a);
}

// ============================================================================
// Model score
// ============================================================================

/// Sum of log p(y_t | source, y_<t) with the whole source visible.
template <IncrementalScorer M>
double sequence_logprob(const M& model, std::span<const Token> source, std::span<const Token> y) {
  if (y.empty() || y.back() != kEos) throw ContractViolation("sequence must end with eos");
  LogDistribution logp;
  double total = 0.0;
  for (std::size_t t = 0; t < y.size(); ++t) {
    model.score_into(source, y.first(t), logp);
    total += logp[static_cast<std::size_t>(y[t])];
  }
  return total;
}

// ============================================================================
// BLEU
// ============================================================================

/// Corpus BLEU with up to `max_n`-gram precisions and the brevity penalty
/// against the closest reference length (shorter wins ties). Any zero
/// precision gives 0.
template <class T>
double corpus_bleu(const std::vector<std::vector<T>>& candidates,
                   const std::vector<std::vector<std::vector<T>>>& references,
                   std::size_t max_n = 4) {
  if (candidates.empty()) throw ContractViolation("corpus_bleu needs at least one candidate");
  if (candidates.size() != references.size())
    throw ContractViolation("corpus_bleu: candidate/reference count mismatch");
  if (max_n == 0) throw ContractViolation("corpus_bleu: max_n must be >= 1");

  std::vector<double> matched(max_n, 0.0), total(max_n, 0.0);
  double cand_len = 0.0, ref_len = 0.0;

  for (std::size_t s = 0; s < candidates.size(); ++s) {
    const auto& cand = candidates[s];
    const auto& refs = references[s];
    if (refs.empty()) throw ContractViolation("corpus_bleu: sentence without references");
    cand_len += static_cast<double>(cand.size());

    std::size_t best_ref = refs.front().size();
    for (const auto& r : refs) {
      const auto d = [&](std::size_t len) {
        return len > cand.size() ? len - cand.size() : cand.size() - len;
      };
      if (d(r.size()) < d(best_ref) || (d(r.size()) == d(best_ref) && r.size() < best_ref))
        best_ref = r.size();
    }
    ref_len += static_cast<double>(best_ref);

    for (std::size_t n = 1; n <= max_n; ++n) {
      std::map<std::vector<T>, std::size_t> cand_counts, max_ref;
      for (std::size_t i = 0; i + n <= cand.size(); ++i)
        ++cand_counts[std::vector<T>(cand.begin() + i, cand.begin() + i + n)];
      for (const auto& r : refs) {
        std::map<std::vector<T>, std::size_t> rc;
        for (std::size_t i = 0; i + n <= r.size(); ++i)
          ++rc[std::vector<T>(r.begin() + i, r.begin() + i + n)];
        for (const auto& [gram, c] : rc) max_ref[gram] = std::max(max_ref[gram], c);
      }
      for (const auto& [gram, c] : cand_counts) {
        auto it = max_ref.find(gram);
        matched[n - 1] += static_cast<double>(std::min(c, it == max_ref.end() ? 0 : it->second));
        total[n - 1] += static_cast<double>(c);
      }
    }
  }

  double log_prec = 0.0;
  for (std::size_t n = 0; n < max_n; ++n) {
    if (matched[n] == 0.0 || total[n] == 0.0) return 0.0;
    log_prec += std::log(matched[n] / total[n]);
  }
  log_prec /= static_cast<double>(max_n);
  const double bp = cand_len >= ref_len ? 1.0 : std::exp(1.0 - ref_len / cand_len);
  return bp * std::exp(log_prec);
}

}  // namespace simuldec
