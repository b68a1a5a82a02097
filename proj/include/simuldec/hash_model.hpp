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

// Seeded pseudo-random scorer. Every (seed, source prefix, target prefix)
// triple gets its own distribution, reproducible bit-for-bit on any platform.
//
// For token v the byte string "seed|p1,p2,...|q1,q2,...|v" (decimal ids) is
// hashed with 64-bit FNV-1a and mapped to u_v = (h >> 11) / 2^53. Weights are
// u_v^alpha, with the eos weight scaled by eos_weight, then normalized.
//
// Plain FNV-1a barely mixes the final byte, so the u_v of one context differ
// only around the 2^-24 scale and the distributions come out nearly uniform.
// HashMix::kFmix64 passes the hash through the MurmurHash3 64-bit finalizer
// first, which spreads u_v over (0, 1).

#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string_view>

#include "simuldec/core.hpp"
#include "simuldec/scorer.hpp"

namespace simuldec {

inline constexpr std::uint64_t kFnvOffsetBasis = 14695981039346656037ULL;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

constexpr std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t state = kFnvOffsetBasis) {
  for (unsigned char c : bytes) {
    state ^= c;
    state *= kFnvPrime;
  }
  return state;
}

constexpr std::uint64_t fmix64(std::uint64_t k) {
  k ^= k >> 33;
  k *= 0xff51afd7ed558ccdULL;
  k ^= k >> 33;
  k *= 0xc4ceb9fe1a85ec53ULL;
  k ^= k >> 33;
  return k;
}

enum class HashMix : std::uint8_t { kNone, kFmix64 };

struct HashModelParams {
  std::uint64_t seed = 0;
  std::size_t vocab_size = 2;
  double sharpness = 1.0;   // alpha
  double eos_weight = 1.0;
  HashMix mix = HashMix::kNone;
};

namespace detail {

inline std::uint64_t fnv_append_int(std::uint64_t state, std::uint64_t value) {
  char buf[24];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return fnv1a64(std::string_view(buf, static_cast<std::size_t>(end - buf)), state);
}

inline std::uint64_t fnv_append_list(std::uint64_t state, std::span<const Token> ids) {
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i > 0) state = fnv1a64(",", state);
    if (ids[i] < 0) throw InvalidTokenError("negative token id " + std::to_string(ids[i]));
    state = fnv_append_int(state, static_cast<std::uint64_t>(ids[i]));
  }
  return state;
}

}  // namespace detail

/// Uniform value in [0, 1) for token v in the given context.
inline double hash_uniform(const HashModelParams& p, std::span<const Token> source_prefix,
                           std::span<const Token> target_prefix, Token v) {
  std::uint64_t h = detail::fnv_append_int(kFnvOffsetBasis, p.seed);
  h = fnv1a64("|", h);
  h = detail::fnv_append_list(h, source_prefix);
  h = fnv1a64("|", h);
  h = detail::fnv_append_list(h, target_prefix);
  h = fnv1a64("|", h);
  h = detail::fnv_append_int(h, static_cast<std::uint64_t>(v));
  if (p.mix == HashMix::kFmix64) h = fmix64(h);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

class HashModel {
 public:
  explicit HashModel(HashModelParams params) : p_(params) {
    if (p_.vocab_size < 2) throw ValidationError("hash model vocab_size must be >= 2");
    if (!(p_.sharpness > 0.0)) throw ValidationError("hash model sharpness must be > 0");
    if (!(p_.eos_weight >= 0.0)) throw ValidationError("hash model eos_weight must be >= 0");
  }

  std::size_t vocab_size() const { return p_.vocab_size; }
  const HashModelParams& params() const { return p_; }

  void score_into(std::span<const Token> source_prefix, std::span<const Token> target_prefix,
                  LogDistribution& out) const {
    check_target_tokens(target_prefix, p_.vocab_size);
    // Hash the shared "seed|p|q|" prefix once, then finish per token.
    std::uint64_t base = detail::fnv_append_int(kFnvOffsetBasis, p_.seed);
    base = fnv1a64("|", base);
    base = detail::fnv_append_list(base, source_prefix);
    base = fnv1a64("|", base);
    base = detail::fnv_append_list(base, target_prefix);
    base = fnv1a64("|", base);

    constexpr double kNegInf = -std::numeric_limits<double>::infinity();
    out.resize(p_.vocab_size);
    double max_lw = kNegInf;
    for (std::size_t v = 0; v < p_.vocab_size; ++v) {
      std::uint64_t h = detail::fnv_append_int(base, v);
      if (p_.mix == HashMix::kFmix64) h = fmix64(h);
      double u = static_cast<double>(h >> 11) * 0x1.0p-53;
      double lw = u > 0.0 ? p_.sharpness * std::log(u) : kNegInf;
      if (v == static_cast<std::size_t>(kEos))
        lw = p_.eos_weight > 0.0 ? lw + std::log(p_.eos_weight) : kNegInf;
      out[v] = lw;
      max_lw = std::max(max_lw, lw);
    }
    double sum = 0.0;
    for (double lw : out)
      if (lw != kNegInf) sum += std::exp(lw - max_lw);
    const double log_z = max_lw + std::log(sum);
    for (double& lw : out) lw = lw == kNegInf ? kLogZeroFloor : std::max(lw - log_z, kLogZeroFloor);
  }

 private:
  HashModelParams p_;
};

inline LogDistribution hash_model_logits(std::uint64_t seed, std::span<const Token> source_prefix,
                                         std::span<const Token> target_prefix,
                                         std::size_t vocab_size, double sharpness,
                                         double eos_weight) {
  HashModel m({seed, vocab_size, sharpness, eos_weight, HashMix::kNone});
  return score_next(m, source_prefix, target_prefix);
}

}  // namespace simuldec
