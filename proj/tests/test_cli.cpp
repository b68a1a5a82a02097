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

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>

#include "cli.hpp"
#include "simuldec/simuldec.hpp"
#include "test_util.hpp"

namespace simuldec {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args, const std::string& stdin_text = "") {
  std::istringstream in(stdin_text);
  std::ostringstream out, err;
  const int code = cli::run(args, in, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("simuldec_cli_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string tmp(const std::string& name) const { return (dir_ / name).string(); }
  fs::path dir_;
};

const std::string kGarden = testing::data_path("garden_path.model");

TEST_F(Cli, GardenPathDecodeStartsWithB) {
  const auto r = run({"decode", "--model", kGarden, "--policy", "wait-k", "--k", "1", "--mode",
                      "sbs", "--beam", "2", "--window", "1"},
                     "x1\n");
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_EQ(r.out, "B C\n");
}

TEST_F(Cli, GreedyModeCommitsA) {
  const auto r = run({"decode", "--model", kGarden, "--k", "1", "--mode", "greedy"}, "x1\n");
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_EQ(r.out.substr(0, 1), "A");
}

TEST_F(Cli, UnicodeSourceTokens) {
  const auto r = run({"decode", "--model", kGarden, "--k", "1", "--beam", "2", "--window", "1"},
                     "世行 x2\n");
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_EQ(r.out.substr(0, 1), "B");
}

TEST_F(Cli, OutputOrderMatchesInputAcrossJobs) {
  std::string input;
  for (int i = 0; i < 40; ++i) input += std::to_string(1 + i % 7) + " " + std::to_string(2 + i % 5) + " 3\n";
  std::vector<std::string> base{"decode", "--hash-seed", "5", "--vocab", "9", "--hash-mix",
                                "fmix64", "--k", "2"};
  auto one = base, four = base;
  one.insert(one.end(), {"--jobs", "1", "--trace", tmp("t1.jsonl")});
  four.insert(four.end(), {"--jobs", "4", "--trace", tmp("t4.jsonl")});
  const auto a = run(one, input), b = run(four, input);
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(slurp(tmp("t1.jsonl")), slurp(tmp("t4.jsonl")));
}

TEST_F(Cli, TraceAgreesWithStdout) {
  const auto r = run({"decode", "--hash-seed", "3", "--vocab", "8", "--hash-mix", "fmix64", "--k",
                      "2", "--trace", tmp("t.jsonl")},
                     "1 2 3 4\n5 6\n");
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream f(tmp("t.jsonl"));
  const auto traces = read_traces(f);
  ASSERT_EQ(traces.size(), 2u);
  std::istringstream lines(r.out);
  for (const auto& t : traces) {
    std::string line, expect;
    std::getline(lines, line);
    for (Token tok : t.output())
      if (tok != kEos) expect += (expect.empty() ? "" : " ") + std::to_string(tok);
    EXPECT_EQ(line, expect);
  }
}

TEST_F(Cli, EmptyLineGivesEmptyOutput) {
  const auto r = run({"decode", "--model", kGarden}, "x1\n\nx2\n");
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream lines(r.out);
  std::string a, b, c;
  std::getline(lines, a);
  std::getline(lines, b);
  std::getline(lines, c);
  EXPECT_FALSE(a.empty());
  EXPECT_TRUE(b.empty());
  EXPECT_FALSE(c.empty());
}

TEST_F(Cli, MissingModelIsUsageError) {
  const auto r = run({"decode"}, "x1\n");
  EXPECT_EQ(r.code, cli::kExitUsage);
  EXPECT_NE(r.err.find("--model"), std::string::npos);
}

TEST_F(Cli, UnknownFlagIsUsageError) {
  EXPECT_EQ(run({"decode", "--model", kGarden, "--bogus"}).code, cli::kExitUsage);
  EXPECT_EQ(run({}).code, cli::kExitUsage);
  EXPECT_EQ(run({"--help"}).code, cli::kExitOk);
}

TEST_F(Cli, UnknownSourceTokenReportsPosition) {
  const auto r = run({"decode", "--model", kGarden}, "x1\nx1 zz\n");
  EXPECT_EQ(r.code, cli::kExitUnknownToken);
  EXPECT_NE(r.err.find("line 2, column 4"), std::string::npos) << r.err;
}

TEST_F(Cli, LeadingWriteScheduleIsPolicyError) {
  const auto r = run({"decode", "--model", kGarden, "--policy", "schedule", "--schedule",
                      testing::data_path("leading_write.sched")},
                     "x1 x2\n");
  EXPECT_EQ(r.code, cli::kExitPolicyContract) << r.err;
}

TEST_F(Cli, BadModelFileFails) {
  const auto r = run({"decode", "--model", testing::data_path("bad_sum.model")}, "x1\n");
  EXPECT_EQ(r.code, cli::kExitFailure);
  EXPECT_NE(r.err.find("ctx s=1 []"), std::string::npos);
}

TEST_F(Cli, EnvironmentSuppliesHashSeed) {
  ::setenv("SIMUL_DECODE_SEED", "11", 1);
  const auto from_env = run({"decode", "--vocab", "7", "--hash-mix", "fmix64"}, "1 2 3\n");
  ::unsetenv("SIMUL_DECODE_SEED");
  const auto explicit_seed =
      run({"decode", "--hash-seed", "11", "--vocab", "7", "--hash-mix", "fmix64"}, "1 2 3\n");
  ASSERT_EQ(from_env.code, 0) << from_env.err;
  EXPECT_EQ(from_env.out, explicit_seed.out);
}

TEST_F(Cli, HugeKGreedyIsFullSentenceGreedy) {
  const std::string input = "1 2 3\n4\n5 6 7 8 9\n";
  const auto r = run({"decode", "--hash-seed", "9", "--vocab", "6", "--hash-mix", "fmix64",
                      "--policy", "wait-k", "--k", "999", "--mode", "greedy"},
                     input);
  ASSERT_EQ(r.code, 0) << r.err;
  const HashModel m({9, 6, 1.0, 1.0, HashMix::kFmix64});
  std::string expect;
  for (const auto& src : {std::vector<Token>{1, 2, 3}, std::vector<Token>{4},
                          std::vector<Token>{5, 6, 7, 8, 9}}) {
    const Decoded d = greedy_decode(m, src, default_max_len(src.size()));
    std::string line;
    for (Token t : d.tokens)
      if (t != kEos) line += (line.empty() ? "" : " ") + std::to_string(t);
    expect += line + "\n";
  }
  EXPECT_EQ(r.out, expect);
}

TEST_F(Cli, WiderWindowDoesMoreWork) {
  auto median_ms = [](std::size_t w, std::size_t* calls) {
    std::vector<double> ms;
    for (int i = 0; i < 3; ++i) {
      BenchParams p;
      p.vocab = 200;
      p.beam = 4;
      p.window = w;
      p.steps = 30;
      const auto rep = run_bench(p);
      ms.push_back(rep.mean_ms);
      *calls = rep.scorer_calls;
    }
    std::sort(ms.begin(), ms.end());
    return ms[1];
  };
  std::size_t calls_prev = 0;
  double ms_prev = median_ms(1, &calls_prev);
  for (std::size_t w : {2, 4, 8}) {
    std::size_t calls = 0;
    const double ms = median_ms(w, &calls);
    EXPECT_GT(calls, calls_prev);
    // Allow a little timer noise on the shortest runs.
    EXPECT_GE(ms, ms_prev * 0.9) << "w=" << w;
    calls_prev = calls;
    ms_prev = ms;
  }
}

std::vector<std::string> sweep_args(const std::string& csv, const std::string& trace) {
  return {"sweep", "--hash-seed", "1", "--vocab", "8", "--hash-mix", "fmix64", "--k-list", "1,3",
          "--beam-list", "1,5", "--window-list", "0,2", "--instances", "6", "--csv", csv,
          "--trace", trace};
}

TEST_F(Cli, SweepWritesOneRowPerSetting) {
  const auto r = run(sweep_args(tmp("s.csv"), tmp("s.jsonl")));
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream csv(slurp(tmp("s.csv")));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, cli::kCsvHeader);
  std::size_t rows = 0;
  while (std::getline(csv, line)) {
    ++rows;
    EXPECT_EQ(line.rfind("wait-k,", 0), 0u) << line;
    EXPECT_EQ(line.back(), ',');  // no timing column without --timing
  }
  EXPECT_EQ(rows, 8u);
  std::ifstream tf(tmp("s.jsonl"));
  EXPECT_EQ(read_traces(tf).size(), 8u * 6u);
}

TEST_F(Cli, SweepIsByteIdenticalAcrossRuns) {
  ASSERT_EQ(run(sweep_args(tmp("a.csv"), tmp("a.jsonl"))).code, 0);
  ASSERT_EQ(run(sweep_args(tmp("b.csv"), tmp("b.jsonl"))).code, 0);
  EXPECT_EQ(slurp(tmp("a.csv")), slurp(tmp("b.csv")));
  EXPECT_EQ(slurp(tmp("a.jsonl")), slurp(tmp("b.jsonl")));
}

TEST_F(Cli, SweepWithReferencesFillsBleu) {
  {
    std::ofstream in(tmp("src.txt")), refs(tmp("refs.txt"));
    in << "x1\n";
    refs << "B C ||| A C\n";
  }
  const auto r = run({"sweep", "--model", kGarden, "--input", tmp("src.txt"), "--refs",
                      tmp("refs.txt"), "--k-list", "1", "--beam-list", "2", "--window-list", "0,1"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream csv(r.out);
  std::string header, w0, w1;
  std::getline(csv, header);
  std::getline(csv, w0);
  std::getline(csv, w1);
  // Two-token outputs have no 3-grams, so 4-gram BLEU is zero. The score
  // column shows the window paying off: ln 0.30 without it, ln 0.36 with it.
  EXPECT_EQ(w0, "wait-k,1,2,0,sbs,1.000000,1.000000,0.000000,-1.203973,");
  EXPECT_EQ(w1, "wait-k,1,2,1,sbs,1.000000,1.000000,0.000000,-1.021651,");
}

TEST_F(Cli, BenchReportsAndAppendsCsv) {
  const std::vector<std::string> args{"bench", "--vocab", "50", "--beam", "3", "--window", "1",
                                      "--steps", "10", "--csv", tmp("bench.csv")};
  const auto r1 = run(args);
  ASSERT_EQ(r1.code, 0) << r1.err;
  EXPECT_NE(r1.out.find("mean_ms="), std::string::npos);
  ASSERT_EQ(run(args).code, 0);
  std::istringstream csv(slurp(tmp("bench.csv")));
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(csv, line)) lines.push_back(line);
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(lines[0], cli::kCsvHeader);
  EXPECT_EQ(lines[1].rfind("bench,,3,1,sbs,", 0), 0u);
}

}  // namespace
}  // namespace simuldec
