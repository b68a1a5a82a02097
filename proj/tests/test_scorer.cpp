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

#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>

#include "simuldec/hash_model.hpp"
#include "simuldec/scorer.hpp"
#include "simuldec/tabular_model.hpp"
#include "test_util.hpp"

namespace simuldec {
namespace {

// Straightforward reference: build the key string, hash byte by byte,
// normalize in probability space.
std::vector<double> reference_hash_logits(std::uint64_t seed, const std::vector<Token>& p,
                                          const std::vector<Token>& q, std::size_t vocab,
                                          double alpha, double eos_weight) {
  auto join = [](const std::vector<Token>& xs) {
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + std::to_string(xs[i]);
    return s;
  };
  std::vector<double> w(vocab);
  double total = 0.0;
  for (std::size_t v = 0; v < vocab; ++v) {
    const std::string key =
        std::to_string(seed) + "|" + join(p) + "|" + join(q) + "|" + std::to_string(v);
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : key) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    const double u = static_cast<double>(h >> 11) / 9007199254740992.0;
    w[v] = std::pow(u, alpha) * (v == 0 ? eos_weight : 1.0);
    total += w[v];
  }
  for (auto& x : w) x = std::log(x / total);
  return w;
}

void expect_close(const std::vector<double>& got, const std::vector<double>& want, double tol) {
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], tol) << "index " << i;
}

TEST(HashModel, FnvOfKnownKey) {
  static_assert(fnv1a64("") == kFnvOffsetBasis);
  EXPECT_EQ(fnv1a64("42|||0"), 0x18ca25f53398b447ULL);
}

TEST(HashModel, KnownValuesUniformEos) {
  expect_close(hash_model_logits(42, {}, {}, 3, 1.0, 1.0),
               {-1.0986124938450366, -1.0986131093760696, -1.098611262784107}, 1e-13);
}

TEST(HashModel, KnownValuesSharpened) {
  expect_close(hash_model_logits(42, {}, {}, 3, 2.0, 0.5),
               {-1.6094384048594117, -0.9162924553615326, -0.9162887621776077}, 1e-13);
}

TEST(HashModel, KnownValuesWithPrefixes) {
  const std::vector<Token> p{3, 1}, q{2};
  expect_close(hash_model_logits(7, p, q, 4, 1.5, 1.0),
               {-1.386294300385226, -1.3862941789158973, -1.3862945433239118,
                -1.3862944218545639},
               1e-13);
}

TEST(HashModel, AgreesWithReferenceOnRandomContexts) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 300; ++i) {
    const auto p = testing::random_source(rng, rng() % 6, 30);
    const auto q = testing::random_source(rng, rng() % 5, 6);
    const std::uint64_t seed = rng() % 100000;
    const double alpha = 0.5 + static_cast<double>(rng() % 4);
    const double eos_w = 0.25 * static_cast<double>(1 + rng() % 8);
    expect_close(hash_model_logits(seed, p, q, 7, alpha, eos_w),
                 reference_hash_logits(seed, p, q, 7, alpha, eos_w), 1e-12);
  }
}

TEST(HashModel, DistributionsAreNormalized) {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 1000; ++i) {
    const HashMix mix = i % 2 ? HashMix::kFmix64 : HashMix::kNone;
    HashModel m({rng(), 2 + rng() % 40, 0.5 + (rng() % 5), 0.5 + (rng() % 3), mix});
    const auto logp = score_next(m, testing::random_source(rng, rng() % 8),
                                 testing::random_source(rng, rng() % 6, m.vocab_size() - 1));
    EXPECT_LT(normalization_error(logp), 1e-9);
  }
}

TEST(HashModel, IsPure) {
  HashModel m({3, 10, 1.0, 1.0, HashMix::kFmix64});
  const std::vector<Token> p{1, 2, 3}, q{4, 5};
  const auto first = score_next(m, p, q);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(score_next(m, p, q), first);
}

// Plain FNV-1a keys differ only in their last byte, so the uniforms are
// nearly equal and the distribution is close to flat. The finalizer
// spreads them.
TEST(HashModel, FinalizerSpreadsDistribution) {
  std::mt19937_64 rng(21);
  double spread_plain = 0.0, spread_mixed = 0.0;
  for (int i = 0; i < 200; ++i) {
    const auto p = testing::random_source(rng, 1 + rng() % 5);
    const std::uint64_t seed = rng() % 1000;
    auto spread = [&](HashMix mix) {
      const auto lp = score_next(HashModel({seed, 8, 1.0, 1.0, mix}), p, std::vector<Token>{});
      return *std::max_element(lp.begin(), lp.end()) - *std::min_element(lp.begin(), lp.end());
    };
    spread_plain += spread(HashMix::kNone);
    spread_mixed += spread(HashMix::kFmix64);
  }
  EXPECT_LT(spread_plain / 200, 0.01);
  EXPECT_GT(spread_mixed / 200, 1.0);
}

TEST(HashModel, ZeroEosWeightIsFloored) {
  HashModel m({1, 4, 1.0, 0.0, HashMix::kNone});
  const auto lp = score_next(m, std::vector<Token>{1}, std::vector<Token>{});
  EXPECT_EQ(lp[0], kLogZeroFloor);
  EXPECT_LT(normalization_error(lp), 1e-9);
}

TEST(HashModel, RejectsBadTokensAndParams) {
  HashModel m({1, 4, 1.0, 1.0, HashMix::kNone});
  EXPECT_THROW(score_next(m, std::vector<Token>{-1}, std::vector<Token>{}), InvalidTokenError);
  EXPECT_THROW(score_next(m, std::vector<Token>{1}, std::vector<Token>{4}), InvalidTokenError);
  EXPECT_THROW(HashModel({1, 1, 1.0, 1.0, HashMix::kNone}), ValidationError);
  EXPECT_THROW(HashModel({1, 4, 0.0, 1.0, HashMix::kNone}), ValidationError);
  EXPECT_THROW(HashModel({1, 4, 1.0, -1.0, HashMix::kNone}), ValidationError);
}

TEST(Scorer, ArgmaxPrefersSmallestIdOnTies) {
  const std::vector<double> lp{-1.0, -0.5, -0.5};
  EXPECT_EQ(argmax(lp), 1);
  const std::vector<double> eos_best{-0.1, -3.0, -2.0};
  EXPECT_EQ(argmax(eos_best), kEos);
  EXPECT_EQ(argmax(eos_best, false), 2);
}

TEST(Scorer, CountingScorerCountsCalls) {
  HashModel m({1, 4, 1.0, 1.0, HashMix::kNone});
  CountingScorer<HashModel> c(m);
  LogDistribution out;
  c.score_into(std::vector<Token>{1}, std::vector<Token>{}, out);
  c.score_into(std::vector<Token>{1}, std::vector<Token>{2}, out);
  EXPECT_EQ(c.calls(), 2u);
  EXPECT_EQ(out, score_next(m, std::vector<Token>{1}, std::vector<Token>{2}));
  c.reset();
  EXPECT_EQ(c.calls(), 0u);
}

TabularModel small_table() {
  TabularModel m(Vocab({"</s>", "世行", "x"}), Vocab({"</s>", "A", "B"}), 1, 1);
  const std::vector<double> probs{0.0, 0.6, 0.4};
  m.add_entry({1, {}}, probs);
  return m;
}

TEST(TabularModel, DirectTableRead) {
  const auto m = small_table();
  const auto lp = score_next(m, std::vector<Token>{1}, std::vector<Token>{});
  EXPECT_EQ(lp[0], kLogZeroFloor);
  EXPECT_DOUBLE_EQ(lp[1], std::log(0.6));
  EXPECT_DOUBLE_EQ(lp[2], std::log(0.4));
}

TEST(TabularModel, UnseenContextIsUniform) {
  const auto m = small_table();
  // No entry exists for an empty source prefix.
  const auto lp = score_next(m, std::vector<Token>{}, std::vector<Token>{});
  for (double x : lp) EXPECT_DOUBLE_EQ(x, -std::log(3.0));
}

TEST(TabularModel, BacksOffToShorterSuffixAndCapsSource) {
  const auto m = small_table();
  const auto base = score_next(m, std::vector<Token>{1}, std::vector<Token>{});
  EXPECT_EQ(score_next(m, std::vector<Token>{1}, std::vector<Token>{2, 1}), base);
  EXPECT_EQ(score_next(m, std::vector<Token>{1, 2, 1}, std::vector<Token>{}), base);
}

TEST(TabularModel, RemovingEntriesOnlyBacksOff) {
  auto m = testing::garden_path();
  std::mt19937_64 rng(4);
  const std::vector<TabularModel::ContextKey> keys{{1, {}}, {1, {1}}, {1, {2}}, {1, {3}}, {1, {4}}};
  for (const auto& k : keys) {
    ASSERT_TRUE(m.remove_entry(k));
    for (int i = 0; i < 50; ++i) {
      const auto q = testing::random_source(rng, rng() % 4, 4);
      const auto lp = score_next(m, testing::random_source(rng, rng() % 3, 4), q);
      EXPECT_LT(normalization_error(lp), 1e-9);
    }
  }
  EXPECT_EQ(m.num_entries(), 0u);
}

TEST(TabularModel, RejectsBadEntries) {
  auto m = small_table();
  EXPECT_THROW(m.add_entry({1, {}}, std::vector<double>{0.0, 0.5, 0.5}), ValidationError);
  EXPECT_THROW(m.add_entry({2, {}}, std::vector<double>{0.0, 0.5, 0.5}), ValidationError);
  EXPECT_THROW(m.add_entry({1, {1, 2}}, std::vector<double>{0.0, 0.5, 0.5}), ValidationError);
  EXPECT_THROW(m.add_entry({1, {1}}, std::vector<double>{0.5, 0.5}), ValidationError);
  EXPECT_THROW(m.add_entry({1, {1}}, std::vector<double>{1.5, -0.5, 0.0}), ValidationError);
  EXPECT_THROW(m.add_entry({1, {1}}, std::vector<double>{0.5, 0.4, 0.0}), ValidationError);
}

TEST(TabularModel, RejectsOutOfRangeTokens) {
  const auto m = small_table();
  EXPECT_THROW(score_next(m, std::vector<Token>{3}, std::vector<Token>{}), InvalidTokenError);
  EXPECT_THROW(score_next(m, std::vector<Token>{1}, std::vector<Token>{3}), InvalidTokenError);
}

TEST(TabularFile, LoadsGardenPath) {
  const auto m = testing::garden_path();
  EXPECT_EQ(m.vocab_size(), 5u);
  EXPECT_EQ(m.source_vocab().id("x1"), 1);
  EXPECT_EQ(m.source_vocab().id("世行"), 4);
  const auto lp = score_next(m, std::vector<Token>{1}, std::vector<Token>{2});
  EXPECT_DOUBLE_EQ(lp[3], std::log(0.9));
  EXPECT_DOUBLE_EQ(lp[4], std::log(0.1));
  EXPECT_EQ(lp[0], kLogZeroFloor);
}

TEST(TabularFile, BadSumNamesTheContext) {
  try {
    load_tabular_model(testing::data_path("bad_sum.model"));
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("ctx s=1 []"), std::string::npos) << e.what();
  }
}

TEST(TabularFile, UnknownTokenIsVocabularyError) {
  EXPECT_THROW(load_tabular_model(testing::data_path("unknown_token.model")), VocabularyError);
}

TEST(TabularFile, SyntaxErrorsCarryLineNumbers) {
  std::istringstream in(
      "# comment\n"
      "src_vocab: x\n"
      "tgt_vocab: </s> A\n"
      "order: 1\n"
      "s_max: 1\n"
      "ctx s=1 [] A=1.0\n");
  try {
    parse_tabular_model(in, "m");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 6u);
  }
}

TEST(TabularFile, HeaderAfterEntriesIsRejected) {
  std::istringstream in(
      "src_vocab: x\ntgt_vocab: </s> A\norder: 1\ns_max: 1\n"
      "ctx s=1 [] :: A=1.0\norder: 2\n");
  EXPECT_THROW(parse_tabular_model(in), ParseError);
}

TEST(TabularFile, CommentsAndBlankLinesIgnored) {
  std::istringstream in(
      "src_vocab: x   # the source\n\n"
      "tgt_vocab: </s> A\norder: 1\ns_max: 1\n"
      "ctx s=1 [] :: A=0.25 </s>=0.75  # trailing\n");
  const auto m = parse_tabular_model(in);
  const auto lp = score_next(m, std::vector<Token>{1}, std::vector<Token>{});
  EXPECT_DOUBLE_EQ(lp[0], std::log(0.75));
}

}  // namespace
}  // namespace simuldec
