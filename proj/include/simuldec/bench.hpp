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

// Per-token latency of sbs_step on a hash model, measured the way a wait-1
// session would see it: one new source token, then one commit.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <vector>

#include "simuldec/hash_model.hpp"
#include "simuldec/sbs.hpp"

namespace simuldec {

struct BenchParams {
  std::size_t vocab = 1000;
  std::size_t beam = 10;
  std::size_t window = 5;
  std::size_t steps = 200;
  std::uint64_t seed = 1;
  double sharpness = 1.0;
  HashMix mix = HashMix::kNone;
};

struct BenchReport {
  std::size_t steps = 0;
  std::size_t scorer_calls = 0;
  double total_seconds = 0.0;
  double tokens_per_sec = 0.0;
  double mean_ms = 0.0;
  double p50_ms = 0.0;
  double p90_ms = 0.0;
  double p99_ms = 0.0;
  double max_ms = 0.0;
};

inline BenchReport run_bench(const BenchParams& p) {
  const HashModel model({p.seed, p.vocab, p.sharpness, 1.0, p.mix});
  const CountingScorer<HashModel> counted(model);
  SbsConfig cfg;
  cfg.beam_size = p.beam;
  cfg.window = p.window;
  cfg.max_len = p.steps + 1;

  std::vector<Token> source, committed;
  std::vector<double> ms;
  ms.reserve(p.steps);
  for (std::size_t i = 0; i < p.steps; ++i) {
    source.push_back(static_cast<Token>((i * 7919 + 13) % 1000));
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = sbs_step(counted, source, committed, cfg, false);
    const auto t1 = std::chrono::steady_clock::now();
    committed.push_back(r.tokens.front());
    ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }

  BenchReport rep;
  rep.steps = p.steps;
  rep.scorer_calls = counted.calls();
  if (ms.empty()) return rep;
  for (double x : ms) rep.total_seconds += x / 1000.0;
  rep.mean_ms = rep.total_seconds * 1000.0 / static_cast<double>(ms.size());
  rep.tokens_per_sec = rep.total_seconds > 0 ? static_cast<double>(ms.size()) / rep.total_seconds : 0;
  std::sort(ms.begin(), ms.end());
  auto pct = [&](double q) {
    std::size_t i = static_cast<std::size_t>(q * static_cast<double>(ms.size() - 1) + 0.5);
    return ms[std::min(i, ms.size() - 1)];
  };
  rep.p50_ms = pct(0.50);
  rep.p90_ms = pct(0.90);
  rep.p99_ms = pct(0.99);
  rep.max_ms = ms.back();
  return rep;
}

}  // namespace simuldec
