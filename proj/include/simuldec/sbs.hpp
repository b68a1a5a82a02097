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
 * Speculative beam search and the simultaneous decoding loop.
 *
 * To commit the next n target tokens, the decoder runs an (n + w)-step beam
 * search from the committed prefix alone, takes the top hypothesis, commits
 * its first n new tokens and throws the remaining w away. The next commit
 * starts a fresh search, so speculation never leaks into later decisions.
 *
 *   n = 1            single-step SBS (fixed policies such as wait-k)
 *   n > 1            chunk SBS for runs of consecutive WRITEs
 *   w = 0            plain per-chunk beam search; with b = 1, greedy
 *
 * Until the source is complete the end-of-sequence token is masked out of
 * every expansion (unless SbsConfig::allow_early_eos), so the output cannot
 * stop before the input does. Once the stream ends the remaining target is
 * produced by an ordinary beam search ("tail").
 *
 * The speculative search stores hypotheses as back-pointer chains hanging
 * off the shared committed prefix. Each expansion adds at most b nodes, so a
 * search of depth d holds at most |committed| + b*d tokens.
 */

#include <algorithm>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "simuldec/beam.hpp"
#include "simuldec/core.hpp"
#include "simuldec/policy.hpp"
#include "simuldec/scorer.hpp"

namespace simuldec {

enum class CommitMode : std::uint8_t {
  kGreedy,     // argmax commits, greedy tail
  kTailBeam,   // argmax commits, beam search in the tail
  kSbs,        // single-step speculative beam search
  kChunkBeam,  // beam search over each WRITE run, no speculation
  kChunkSbs,   // speculative beam search over each WRITE run
};

struct SbsConfig {
  std::size_t beam_size = 5;
  std::size_t window = 2;
  bool allow_early_eos = false;
  std::size_t max_len = 256;
  CommitMode mode = CommitMode::kSbs;
  double length_reward = 0.0;  // tail search only

  void validate() const {
    if (beam_size == 0) throw ValidationError("beam size must be >= 1");
    if (max_len == 0) throw ValidationError("max_len must be >= 1");
  }
};

struct StepResult {
  std::vector<Token> tokens;       // committed
  std::vector<double> token_logps; // per committed token
  std::vector<Token> speculation;  // discarded
  double score = 0.0;              // accumulated score of the top hypothesis
  std::size_t peak_live_tokens = 0;
  std::size_t live_token_bound = 0;
};

namespace detail {

template <IncrementalScorer M>
class SpeculativeSearch {
 public:
  SpeculativeSearch(const M& model, std::span<const Token> source_prefix,
                    std::span<const Token> committed, std::size_t beam_size)
      : model_(model), source_(source_prefix), committed_(committed), beam_size_(beam_size) {
    items_.push_back({kRoot, 0.0, false});
    peak_ = committed_.size();
  }

  /// One beam transition. Returns false when there was nothing to expand into.
  bool advance(bool allow_eos) {
    const std::size_t vocab = model_.vocab_size();
    cands_.clear();
    for (std::size_t i = 0; i < items_.size(); ++i) {
      const auto& it = items_[i];
      if (it.finished) {
        cands_.push_back({i, kPassThrough, it.score});
        continue;
      }
      scratch_.assign(committed_.begin(), committed_.end());
      append_suffix(it.node, scratch_);
      model_.score_into(source_, scratch_, logp_);
      for (std::size_t v = 0; v < vocab; ++v) {
        if (!allow_eos && static_cast<Token>(v) == kEos) continue;
        cands_.push_back({i, static_cast<Token>(v), it.score + logp_[v], logp_[v]});
      }
    }
    if (cands_.empty()) return false;

    auto better = [&](const Candidate& a, const Candidate& b) {
      if (a.score != b.score) return a.score > b.score;
      // Exact score ties are rare; rebuild the suffixes only then.
      std::vector<Token> sa, sb;
      append_suffix(items_[a.parent].node, sa);
      append_suffix(items_[b.parent].node, sb);
      return compare_extended(sa, a.token, sb, b.token) < 0;
    };
    const std::size_t keep = std::min(beam_size_, cands_.size());
    std::partial_sort(cands_.begin(), cands_.begin() + static_cast<std::ptrdiff_t>(keep),
                      cands_.end(), better);

    next_.clear();
    for (std::size_t i = 0; i < keep; ++i) {
      const auto& c = cands_[i];
      const Item& parent = items_[c.parent];
      if (c.token == kPassThrough) {
        next_.push_back(parent);
        continue;
      }
      nodes_.push_back({c.token, parent.node, c.step_logp});
      next_.push_back({static_cast<std::int32_t>(nodes_.size() - 1), c.score, c.token == kEos});
    }
    items_.swap(next_);
    peak_ = std::max(peak_, live_tokens());
    return true;
  }

  bool all_finished() const {
    return std::all_of(items_.begin(), items_.end(), [](const Item& i) { return i.finished; });
  }

  std::size_t live_tokens() const { return committed_.size() + nodes_.size(); }
  std::size_t peak_live_tokens() const { return peak_; }
  double best_score() const { return items_.front().score; }

  /// Tokens after the committed prefix on the best path, with per-token logps.
  void best_path(std::vector<Token>& tokens, std::vector<double>& logps) const {
    std::vector<std::int32_t> chain;
    for (std::int32_t n = items_.front().node; n != kRoot; n = nodes_[static_cast<std::size_t>(n)].parent)
      chain.push_back(n);
    std::reverse(chain.begin(), chain.end());
    for (std::int32_t n : chain) {
      const auto& node = nodes_[static_cast<std::size_t>(n)];
      tokens.push_back(node.token);
      logps.push_back(node.logp);
    }
  }

 private:
  static constexpr std::int32_t kRoot = -1;

  struct Node {
    Token token;
    std::int32_t parent;
    double logp;  // of this token given its parent
  };
  struct Item {
    std::int32_t node;
    double score;
    bool finished;
  };

  void append_suffix(std::int32_t node, std::vector<Token>& out) const {
    const std::size_t start = out.size();
    for (; node != kRoot; node = nodes_[static_cast<std::size_t>(node)].parent)
      out.push_back(nodes_[static_cast<std::size_t>(node)].token);
    std::reverse(out.begin() + static_cast<std::ptrdiff_t>(start), out.end());
  }

  const M& model_;
  std::span<const Token> source_;
  std::span<const Token> committed_;
  std::size_t beam_size_;
  std::vector<Node> nodes_;
  std::vector<Item> items_;
  std::vector<Item> next_;
  std::vector<Candidate> cands_;
  std::vector<Token> scratch_;
  LogDistribution logp_;
  std::size_t peak_ = 0;
};

template <IncrementalScorer M>
std::vector<double> token_logps(const M& model, std::span<const Token> source,
                                std::vector<Token> prefix, std::span<const Token> tokens) {
  std::vector<double> out;
  LogDistribution logp;
  for (Token t : tokens) {
    model.score_into(source, prefix, logp);
    out.push_back(logp[static_cast<std::size_t>(t)]);
    prefix.push_back(t);
  }
  return out;
}

}  // namespace detail

/// Commits the next `n` tokens after `committed` from an (n + window)-step
/// speculative beam search. Stops early if the best path commits eos.
template <IncrementalScorer M>
StepResult chunk_sbs(const M& model, std::span<const Token> source_prefix,
                     std::span<const Token> committed, std::size_t n, const SbsConfig& cfg,
                     bool source_complete) {
  cfg.validate();
  if (n == 0) throw ContractViolation("chunk length must be >= 1");
  if (source_prefix.empty()) throw ContractViolation("cannot commit before reading any source");
  if (!committed.empty() && committed.back() == kEos)
    throw ContractViolation("committed prefix is already finished");

  const bool allow_eos = cfg.allow_early_eos || source_complete;
  const std::size_t depth = n + cfg.window;

  StepResult res;
  res.live_token_bound = cfg.beam_size * (committed.size() + depth);

  detail::SpeculativeSearch<M> search(model, source_prefix, committed, cfg.beam_size);
  if (!search.advance(allow_eos)) {
    // Everything masked: fall back to one unmasked argmax step.
    detail::SpeculativeSearch<M> fallback(model, source_prefix, committed, 1);
    fallback.advance(true);
    fallback.best_path(res.tokens, res.token_logps);
    res.score = fallback.best_score();
    res.peak_live_tokens = fallback.peak_live_tokens();
    return res;
  }
  for (std::size_t d = 1; d < depth && !search.all_finished(); ++d) search.advance(allow_eos);

  std::vector<Token> path;
  std::vector<double> logps;
  search.best_path(path, logps);
  std::size_t take = std::min(n, path.size());
  if (auto eos = std::find(path.begin(), path.begin() + static_cast<std::ptrdiff_t>(take), kEos);
      eos != path.begin() + static_cast<std::ptrdiff_t>(take))
    take = static_cast<std::size_t>(eos - path.begin()) + 1;

  res.tokens.assign(path.begin(), path.begin() + static_cast<std::ptrdiff_t>(take));
  res.token_logps.assign(logps.begin(), logps.begin() + static_cast<std::ptrdiff_t>(take));
  res.speculation.assign(path.begin() + static_cast<std::ptrdiff_t>(take), path.end());
  res.score = search.best_score();
  res.peak_live_tokens = search.peak_live_tokens();
  return res;
}

/// Single-step speculative beam search: commit one token chosen by the
/// ranking after 1 + window steps.
template <IncrementalScorer M>
StepResult sbs_step(const M& model, std::span<const Token> source_prefix,
                    std::span<const Token> committed, const SbsConfig& cfg,
                    bool source_complete) {
  return chunk_sbs(model, source_prefix, committed, 1, cfg, source_complete);
}

/// Beam search over the rest of the target once the whole source is known.
/// Returns only the new suffix and its incremental score.
template <IncrementalScorer M>
Decoded tail_beam_search(const M& model, std::span<const Token> full_source,
                         std::span<const Token> committed, const SbsConfig& cfg) {
  cfg.validate();
  if (!committed.empty() && committed.back() == kEos)
    throw ContractViolation("committed prefix is already finished");
  const std::size_t steps = cfg.max_len > committed.size() ? cfg.max_len - committed.size() : 1;
  return beam_search_from(model, full_source, committed,
                          SearchOptions{cfg.beam_size, steps, cfg.length_reward});
}

/// Speculative beam search as a sliding window over full-sentence decoding.
template <IncrementalScorer M>
Decoded full_sentence_sbs(const M& model, std::span<const Token> source, const SbsConfig& cfg) {
  Decoded out;
  while (out.tokens.size() < cfg.max_len) {
    auto step = sbs_step(model, source, out.tokens, cfg, true);
    out.tokens.push_back(step.tokens.front());
    out.log_score += step.token_logps.front();
    if (out.tokens.back() == kEos) return out;
  }
  LogDistribution logp;
  model.score_into(source, out.tokens, logp);
  out.tokens.push_back(kEos);
  out.log_score += logp[static_cast<std::size_t>(kEos)];
  return out;
}

// ============================================================================
// Source streams
// ============================================================================

class SourceStream {
 public:
  virtual ~SourceStream() = default;
  /// Next source token, or nullopt at end of stream. May block.
  virtual std::optional<Token> next() = 0;
};

class VectorSource final : public SourceStream {
 public:
  explicit VectorSource(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}
  std::optional<Token> next() override {
    if (pos_ >= tokens_.size()) return std::nullopt;
    return tokens_[pos_++];
  }

 private:
  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
};

/// Thread-safe stream fed by a producer; next() blocks until a token arrives
/// or the producer calls close().
class BlockingSource final : public SourceStream {
 public:
  void push(Token t) {
    {
      std::lock_guard lock(mu_);
      queue_.push_back(t);
    }
    cv_.notify_one();
  }

  void close() {
    {
      std::lock_guard lock(mu_);
      closed_ = true;
    }
    cv_.notify_all();
  }

  std::optional<Token> next() override {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return !queue_.empty() || closed_; });
    if (queue_.empty()) return std::nullopt;
    Token t = queue_.front();
    queue_.pop_front();
    return t;
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Token> queue_;
  bool closed_ = false;
};

// ============================================================================
// Simultaneous decoding
// ============================================================================

struct DecodeStats {
  std::size_t speculative_searches = 0;
  std::size_t peak_live_tokens = 0;
  bool memory_bound_held = true;
};

/// Runs one simultaneous decoding session and returns its trace. The output
/// is trace.output(); it always ends with eos.
///
/// WRITEs that would leave no room for eos within cfg.max_len are turned into
/// READs, which bounds the output of policies that keep writing.
template <IncrementalScorer M>
DecodeTrace simul_decode(const M& model, SourceStream& stream, Policy& policy,
                         const SbsConfig& cfg, DecodeStats* stats = nullptr) {
  cfg.validate();
  DecodeTrace trace;
  std::vector<Token> source;
  std::vector<Token> committed;
  double last_logp = 0.0;
  LogDistribution logp;

  auto commit = [&](Token t, double lp) {
    trace.append(CommitEvent{t, source.size(), lp});
    committed.push_back(t);
    last_logp = lp;
  };
  auto record = [&](const StepResult& r) {
    if (!stats) return;
    ++stats->speculative_searches;
    stats->peak_live_tokens = std::max(stats->peak_live_tokens, r.peak_live_tokens);
    if (r.peak_live_tokens > r.live_token_bound) stats->memory_bound_held = false;
  };

  while (committed.empty() || committed.back() != kEos) {
    PolicyState st{source.size(), committed.size(), false, last_logp, 0.0};
    if (policy.needs_confidence() && !source.empty()) {
      model.score_into(source, committed, logp);
      st.next_argmax_logp = logp[static_cast<std::size_t>(argmax(logp, cfg.allow_early_eos))];
    }
    Action act = policy.next_action(st);
    if (act == Action::kWrite && source.empty())
      throw PolicyContractError(policy.name() + " policy wrote before reading any source");
    if (act == Action::kWrite && committed.size() + 1 >= cfg.max_len) act = Action::kRead;

    if (act == Action::kRead) {
      auto tok = stream.next();
      if (tok) {
        trace.append(ReadEvent{*tok, source.size()});
        source.push_back(*tok);
        continue;
      }
      if (source.empty()) throw ContractViolation("source stream ended before any token");
      trace.append(TailStartEvent{});
      SbsConfig tail_cfg = cfg;
      if (cfg.mode == CommitMode::kGreedy) tail_cfg.beam_size = 1;
      const Decoded tail = tail_beam_search(model, source, committed, tail_cfg);
      const auto lps = detail::token_logps(model, source, committed, tail.tokens);
      for (std::size_t i = 0; i < tail.tokens.size(); ++i) commit(tail.tokens[i], lps[i]);
      break;
    }

    switch (cfg.mode) {
      case CommitMode::kGreedy:
      case CommitMode::kTailBeam: {
        model.score_into(source, committed, logp);
        const Token t = argmax(logp, cfg.allow_early_eos);
        commit(t, logp[static_cast<std::size_t>(t)]);
        break;
      }
      case CommitMode::kSbs: {
        const auto r = sbs_step(model, source, committed, cfg, false);
        record(r);
        commit(r.tokens.front(), r.token_logps.front());
        if (!r.speculation.empty()) trace.append(SpeculateEvent{r.speculation});
        break;
      }
      case CommitMode::kChunkBeam:
      case CommitMode::kChunkSbs: {
        std::size_t n = policy.take_write_run();
        n = std::min(n, cfg.max_len - 1 - committed.size());
        SbsConfig chunk_cfg = cfg;
        if (cfg.mode == CommitMode::kChunkBeam) chunk_cfg.window = 0;
        const auto r = chunk_sbs(model, source, committed, n, chunk_cfg, false);
        record(r);
        for (std::size_t i = 0; i < r.tokens.size(); ++i) commit(r.tokens[i], r.token_logps[i]);
        if (!r.speculation.empty()) trace.append(SpeculateEvent{r.speculation});
        break;
      }
    }
  }
  return trace;
}

template <IncrementalScorer M>
DecodeTrace simul_decode(const M& model, std::span<const Token> source, Policy& policy,
                         const SbsConfig& cfg, DecodeStats* stats = nullptr) {
  VectorSource stream(std::vector<Token>(source.begin(), source.end()));
  return simul_decode(model, stream, policy, cfg, stats);
}

}  // namespace simuldec
