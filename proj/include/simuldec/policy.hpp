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

// READ/WRITE decision sources.
//
// The decoder asks the policy for the next action until the source stream
// ends, at which point it switches to the write-only tail on its own. A policy
// therefore never sees a READ fail; it learns the source is over only through
// `source_exhausted`, which the built-in policies honor by writing.

#include <cstddef>
#include <fstream>
#include <iterator>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "simuldec/core.hpp"

namespace simuldec {

struct PolicyState {
  std::size_t s_read = 0;
  std::size_t t_written = 0;
  bool source_exhausted = false;
  double last_commit_logp = 0.0;
  // Best next-token log-probability under the current prefixes. Only filled
  // when the policy asks for it through needs_confidence().
  double next_argmax_logp = 0.0;
};

class Policy {
 public:
  virtual ~Policy() = default;

  virtual Action next_action(const PolicyState& state) = 0;

  /// Called right after next_action() returned WRITE when the decoder commits
  /// in chunks. Returns the length of the WRITE run that starts with that
  /// action and consumes the rest of it. Policies that decide one step at a
  /// time return 1.
  virtual std::size_t take_write_run() { return 1; }

  virtual bool needs_confidence() const { return false; }
  virtual std::string name() const = 0;
};

/// Read k tokens, then alternate WRITE/READ; write only once the source ends.
class WaitK final : public Policy {
 public:
  explicit WaitK(std::size_t k) : k_(k) {
    if (k_ == 0) throw ValidationError("wait-k needs k >= 1");
  }

  Action next_action(const PolicyState& st) override {
    if (st.source_exhausted) return Action::kWrite;
    return st.s_read < st.t_written + k_ ? Action::kRead : Action::kWrite;
  }

  std::size_t k() const { return k_; }
  std::string name() const override { return "wait-k"; }

 private:
  std::size_t k_;
};

/// Replays a fixed action list. Once the list runs out it reads until the
/// source ends (the decoder then finishes in the tail).
class SchedulePolicy final : public Policy {
 public:
  explicit SchedulePolicy(std::vector<Action> actions) : actions_(std::move(actions)) {}

  Action next_action(const PolicyState& st) override {
    if (pos_ < actions_.size()) return actions_[pos_++];
    return st.source_exhausted ? Action::kWrite : Action::kRead;
  }

  std::size_t take_write_run() override {
    std::size_t run = 1;
    while (pos_ < actions_.size() && actions_[pos_] == Action::kWrite) {
      ++run;
      ++pos_;
    }
    return run;
  }

  std::string name() const override { return "schedule"; }

 private:
  std::vector<Action> actions_;
  std::size_t pos_ = 0;
};

/// Writes while the model's best next token is at least exp(threshold) likely.
class ThresholdPolicy final : public Policy {
 public:
  explicit ThresholdPolicy(double threshold) : threshold_(threshold) {
    if (threshold_ > 0.0) throw ValidationError("threshold must be a log-probability (<= 0)");
  }

  Action next_action(const PolicyState& st) override {
    if (st.source_exhausted) return Action::kWrite;
    if (st.s_read == 0) return Action::kRead;
    return st.next_argmax_logp >= threshold_ ? Action::kWrite : Action::kRead;
  }

  bool needs_confidence() const override { return true; }
  std::string name() const override { return "threshold"; }

 private:
  double threshold_;
};

// ============================================================================
// Action sequences
// ============================================================================

/// Wait-k schedule for a source of length m and a target of length n. Reads
/// left over once n writes are placed go at the end.
inline std::vector<Action> wait_k_actions(std::size_t k, std::size_t m, std::size_t n) {
  if (k == 0 || m == 0 || n == 0) throw ContractViolation("wait_k_actions needs k, m, n >= 1");
  std::vector<Action> out;
  std::size_t reads = 0, writes = 0;
  while (writes < n) {
    if (reads < std::min(writes + k, m)) {
      out.push_back(Action::kRead);
      ++reads;
    } else {
      out.push_back(Action::kWrite);
      ++writes;
    }
  }
  out.insert(out.end(), m - reads, Action::kRead);
  return out;
}

inline std::vector<Action> parse_schedule(std::string_view text) {
  std::vector<Action> out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == 'R') out.push_back(Action::kRead);
    else if (c == 'W') out.push_back(Action::kWrite);
    else if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f') continue;
    else throw ParseError("unexpected character in schedule at offset " + std::to_string(i), 0, i);
  }
  return out;
}

inline std::vector<Action> load_schedule(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open schedule file '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_schedule(text);
}

inline std::string format_actions(const std::vector<Action>& actions) {
  std::string s;
  for (Action a : actions) s += a == Action::kRead ? 'R' : 'W';
  return s;
}

struct RunLengths {
  std::vector<std::size_t> reads;
  std::vector<std::size_t> writes;
  bool operator==(const RunLengths&) const = default;
};

inline RunLengths chunk_lengths(const std::vector<Action>& actions) {
  if (actions.empty()) throw ContractViolation("chunk_lengths on an empty action list");
  RunLengths out;
  for (std::size_t i = 0; i < actions.size();) {
    std::size_t j = i;
    while (j < actions.size() && actions[j] == actions[i]) ++j;
    (actions[i] == Action::kRead ? out.reads : out.writes).push_back(j - i);
    i = j;
  }
  return out;
}

}  // namespace simuldec
