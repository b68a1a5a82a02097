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

#include "cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <future>
#include <iostream>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <thread>
#include <variant>

#include "CLI11.hpp"
#include "simuldec/simuldec.hpp"

namespace simuldec::cli {
namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InputTokenError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using AnyModel = std::variant<TabularModel, HashModel>;

struct ModelOptions {
  std::string model_path;
  std::optional<std::uint64_t> hash_seed;
  std::size_t vocab = 0;
  std::size_t src_vocab = 0;  // 0: any non-negative id
  double alpha = 1.0;
  double eos_weight = 1.0;
  std::string hash_mix = "none";
};

struct PolicyOptions {
  std::string policy = "wait-k";
  std::string schedule_path;
  double threshold = -1.0;
  std::vector<Action> schedule;
};

struct DecodeOptions {
  std::string mode = "sbs";
  std::size_t beam = 5;
  std::size_t window = 2;
  bool allow_early_eos = false;
  double max_len_ratio = 2.0;
  std::size_t max_len_offset = 5;
  double length_reward = 0.0;
  std::size_t jobs = 1;
};

void add_model_options(CLI::App* app, ModelOptions& o) {
  app->add_option("--model", o.model_path, "Tabular model file");
  app->add_option("--hash-seed", o.hash_seed, "Seed of the hash model (default: $SIMUL_DECODE_SEED)");
  app->add_option("--vocab", o.vocab, "Target vocabulary size of the hash model");
  app->add_option("--src-vocab", o.src_vocab, "Source id bound for the hash model (0: none)");
  app->add_option("--alpha", o.alpha, "Hash model sharpness");
  app->add_option("--eos-weight", o.eos_weight, "Hash model eos weight");
  app->add_option("--hash-mix", o.hash_mix, "Hash finalizer: none|fmix64")
      ->check(CLI::IsMember({"none", "fmix64"}));
}

void add_policy_options(CLI::App* app, PolicyOptions& o) {
  app->add_option("--policy", o.policy, "wait-k|schedule|threshold")
      ->check(CLI::IsMember({"wait-k", "schedule", "threshold"}));
  app->add_option("--schedule", o.schedule_path, "R/W schedule file for --policy schedule");
  app->add_option("--threshold", o.threshold, "Log-prob threshold for --policy threshold");
}

void add_decode_options(CLI::App* app, DecodeOptions& o) {
  app->add_option("--beam", o.beam, "Beam size")->check(CLI::PositiveNumber);
  app->add_option("--window", o.window, "Speculative window");
  app->add_flag("--allow-early-eos", o.allow_early_eos, "Allow eos before the source ends");
  app->add_option("--max-len-ratio", o.max_len_ratio, "max_len = ratio * |source| + offset");
  app->add_option("--max-len-offset", o.max_len_offset, "max_len = ratio * |source| + offset");
  app->add_option("--length-reward", o.length_reward, "Per-token reward in the tail search");
  app->add_option("--jobs", o.jobs, "Sentences decoded in parallel")->check(CLI::PositiveNumber);
}

std::optional<std::uint64_t> env_seed() {
  const char* v = std::getenv("SIMUL_DECODE_SEED");
  if (!v || !*v) return std::nullopt;
  std::uint64_t seed = 0;
  if (!detail::parse_number(std::string_view(v), seed))
    throw UsageError("SIMUL_DECODE_SEED is not an unsigned integer");
  return seed;
}

HashModelParams hash_params(const ModelOptions& o, std::uint64_t seed) {
  return {seed, o.vocab, o.alpha, o.eos_weight,
          o.hash_mix == "fmix64" ? HashMix::kFmix64 : HashMix::kNone};
}

AnyModel load_model(const ModelOptions& o) {
  if (!o.model_path.empty()) return load_tabular_model(o.model_path);
  auto seed = o.hash_seed ? o.hash_seed : env_seed();
  if (!seed) throw UsageError("one of --model or --hash-seed is required");
  if (o.vocab < 2) throw UsageError("--vocab >= 2 is required with a hash model");
  return HashModel(hash_params(o, *seed));
}

CommitMode parse_mode(const std::string& s) {
  if (s == "greedy") return CommitMode::kGreedy;
  if (s == "beam") return CommitMode::kTailBeam;
  if (s == "sbs") return CommitMode::kSbs;
  if (s == "chunk-beam") return CommitMode::kChunkBeam;
  if (s == "chunk-sbs") return CommitMode::kChunkSbs;
  throw UsageError("unknown mode '" + s + "'");
}

std::unique_ptr<Policy> make_policy(const PolicyOptions& o, std::size_t k) {
  if (o.policy == "wait-k") return std::make_unique<WaitK>(k);
  if (o.policy == "schedule") return std::make_unique<SchedulePolicy>(o.schedule);
  return std::make_unique<ThresholdPolicy>(o.threshold);
}

void prepare_policy(PolicyOptions& o) {
  if (o.policy == "schedule") {
    if (o.schedule_path.empty()) throw UsageError("--policy schedule needs --schedule");
    o.schedule = load_schedule(o.schedule_path);
  }
  if (o.policy == "threshold" && o.threshold > 0.0)
    throw UsageError("--threshold must be <= 0");
}

std::vector<std::string> read_lines(std::istream& in) {
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

std::vector<std::string> read_input(const std::string& path, std::istream& stdin_stream) {
  if (path == "-") return read_lines(stdin_stream);
  std::ifstream f(path);
  if (!f) throw Error("cannot open input '" + path + "'");
  return read_lines(f);
}

// Converts one input line to source ids. Columns are 1-based byte offsets.
std::vector<Token> encode_source(const AnyModel& model, const ModelOptions& o,
                                 const std::string& line, std::size_t lineno) {
  std::vector<Token> ids;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i >= line.size()) break;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    const std::string tok = line.substr(i, j - i);
    auto fail = [&] {
      throw InputTokenError("line " + std::to_string(lineno) + ", column " + std::to_string(i + 1) +
                            ": unknown token '" + tok + "'");
    };
    if (const auto* tab = std::get_if<TabularModel>(&model)) {
      auto id = tab->source_vocab().find(tok);
      if (!id || *id == kEos) fail();
      ids.push_back(*id);
    } else {
      std::uint32_t v = 0;
      if (!detail::parse_number(std::string_view(tok), v) ||
          v > static_cast<std::uint32_t>(std::numeric_limits<Token>::max()) ||
          (o.src_vocab != 0 && v >= o.src_vocab))
        fail();
      ids.push_back(static_cast<Token>(v));
    }
    i = j;
  }
  return ids;
}

std::vector<std::string> render_target(const AnyModel& model, const std::vector<Token>& ids) {
  std::vector<std::string> out;
  for (Token t : ids) {
    if (t == kEos) continue;
    if (const auto* tab = std::get_if<TabularModel>(&model)) out.push_back(tab->target_vocab().symbol(t));
    else out.push_back(std::to_string(t));
  }
  return out;
}

std::string join(const std::vector<std::string>& toks) {
  std::string s;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (i > 0) s += ' ';
    s += toks[i];
  }
  return s;
}

std::size_t max_len_for(const DecodeOptions& o, std::size_t m) {
  const double v = std::ceil(o.max_len_ratio * static_cast<double>(m)) + static_cast<double>(o.max_len_offset);
  return v < 1.0 ? 1 : static_cast<std::size_t>(v);
}

SbsConfig make_config(const DecodeOptions& o, const std::string& mode, std::size_t b, std::size_t w,
                      std::size_t m) {
  SbsConfig cfg;
  cfg.beam_size = b;
  cfg.window = w;
  cfg.allow_early_eos = o.allow_early_eos;
  cfg.max_len = max_len_for(o, m);
  cfg.mode = parse_mode(mode);
  cfg.length_reward = o.length_reward;
  return cfg;
}

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. Exceptions surface in
/// index order.
template <class Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn fn) {
  std::vector<std::exception_ptr> errors(n);
  auto worker = [&](std::size_t start) {
    for (std::size_t i = start; i < n; i += jobs) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (jobs <= 1 || n <= 1) {
    worker(0);
    jobs = 1;
  } else {
    std::vector<std::thread> threads;
    for (std::size_t j = 0; j < std::min(jobs, n); ++j) threads.emplace_back(worker, j);
    for (auto& t : threads) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

struct SentenceResult {
  DecodeTrace trace;
  std::vector<Token> source;
};

SentenceResult decode_one(const AnyModel& model, const std::vector<Token>& source,
                          const PolicyOptions& po, std::size_t k, const SbsConfig& cfg) {
  SentenceResult r;
  r.source = source;
  if (source.empty()) return r;
  auto policy = make_policy(po, k);
  r.trace = std::visit([&](const auto& m) { return simul_decode(m, source, *policy, cfg); }, model);
  return r;
}

// ---------------------------------------------------------------------------
// decode
// ---------------------------------------------------------------------------

struct DecodeCommand {
  ModelOptions model;
  PolicyOptions policy;
  DecodeOptions decode;
  std::size_t k = 3;
  std::string trace_path;
  std::string input = "-";

  void attach(CLI::App* app) {
    add_model_options(app, model);
    add_policy_options(app, policy);
    add_decode_options(app, decode);
    app->add_option("--k", k, "k of the wait-k policy")->check(CLI::PositiveNumber);
    app->add_option("--mode", decode.mode, "greedy|beam|sbs|chunk-beam|chunk-sbs")
        ->check(CLI::IsMember({"greedy", "beam", "sbs", "chunk-beam", "chunk-sbs"}));
    app->add_option("--trace", trace_path, "Write decode traces (JSON lines) here");
    app->add_option("--input", input, "Source sentences, one per line ('-' for stdin)");
  }

  int run(std::istream& in, std::ostream& out) {
    const AnyModel m = load_model(model);
    prepare_policy(policy);
    const auto lines = read_input(input, in);

    std::vector<std::vector<Token>> sources;
    for (std::size_t i = 0; i < lines.size(); ++i)
      sources.push_back(encode_source(m, model, lines[i], i + 1));

    std::vector<SentenceResult> results(sources.size());
    parallel_for(sources.size(), decode.jobs, [&](std::size_t i) {
      const auto cfg = make_config(decode, decode.mode, decode.beam, decode.window, sources[i].size());
      results[i] = decode_one(m, sources[i], policy, k, cfg);
    });

    for (const auto& r : results) out << join(render_target(m, r.trace.output())) << '\n';
    if (!trace_path.empty()) {
      std::ofstream tf(trace_path, std::ios::binary);
      if (!tf) throw Error("cannot write trace '" + trace_path + "'");
      std::vector<DecodeTrace> traces;
      for (auto& r : results) traces.push_back(r.trace);
      write_traces(tf, traces);
    }
    return kExitOk;
  }
};

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

std::string fmt_num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

struct SweepCommand {
  ModelOptions model;
  PolicyOptions policy;
  DecodeOptions decode;
  std::vector<std::size_t> k_list{3};
  std::vector<std::size_t> beam_list{5};
  std::vector<std::size_t> window_list{2};
  std::vector<std::string> mode_list{"sbs"};
  std::size_t instances = 1;
  std::size_t src_len = 8;
  std::string input;
  std::string refs;
  std::string csv_path;
  std::string trace_path;
  bool timing = false;

  void attach(CLI::App* app) {
    add_model_options(app, model);
    add_policy_options(app, policy);
    add_decode_options(app, decode);
    app->add_option("--k-list", k_list, "Comma-separated k values")->delimiter(',');
    app->add_option("--beam-list", beam_list, "Comma-separated beam sizes")->delimiter(',');
    app->add_option("--window-list", window_list, "Comma-separated windows")->delimiter(',');
    app->add_option("--mode-list", mode_list, "Comma-separated modes")
        ->delimiter(',')
        ->check(CLI::IsMember({"greedy", "beam", "sbs", "chunk-beam", "chunk-sbs"}));
    app->add_option("--instances", instances, "Hash models seeded seed, seed+1, ...")
        ->check(CLI::PositiveNumber);
    app->add_option("--src-len", src_len, "Length of generated sources (hash models)")
        ->check(CLI::PositiveNumber);
    app->add_option("--input", input, "Source sentences instead of generated ones");
    app->add_option("--refs", refs, "References, one line per input, alternatives split by |||");
    app->add_option("--csv", csv_path, "CSV output (default stdout)");
    app->add_option("--trace", trace_path, "Write every decode trace here");
    app->add_flag("--timing", timing, "Fill tokens_per_sec (makes output run-dependent)");
  }

  int run(std::istream& in, std::ostream& out) {
    prepare_policy(policy);
    for (std::size_t b : beam_list)
      if (b == 0) throw UsageError("beam sizes must be >= 1");
    for (std::size_t k : k_list)
      if (k == 0) throw UsageError("k values must be >= 1");

    // One model per instance; sources are either the input file or generated
    // per instance from the instance seed.
    std::vector<AnyModel> models;
    std::vector<std::vector<std::vector<Token>>> sources;
    std::vector<std::string> lines;
    if (!input.empty()) lines = read_input(input, in);

    if (!model.model_path.empty()) {
      if (input.empty()) throw UsageError("a tabular model needs --input");
      models.push_back(load_model(model));
      instances = 1;
    } else {
      auto seed = model.hash_seed ? model.hash_seed : env_seed();
      if (!seed) throw UsageError("one of --model or --hash-seed is required");
      if (model.vocab < 2) throw UsageError("--vocab >= 2 is required with a hash model");
      for (std::size_t i = 0; i < instances; ++i)
        models.emplace_back(HashModel(hash_params(model, *seed + i)));
    }
    for (std::size_t i = 0; i < models.size(); ++i) {
      std::vector<std::vector<Token>> per;
      if (!lines.empty() || !input.empty()) {
        for (std::size_t j = 0; j < lines.size(); ++j)
          per.push_back(encode_source(models[i], model, lines[j], j + 1));
      } else {
        const auto& hm = std::get<HashModel>(models[i]);
        std::mt19937_64 rng(hm.params().seed ^ 0x9e3779b97f4a7c15ULL);
        const std::uint64_t bound = model.src_vocab ? model.src_vocab : model.vocab;
        std::vector<Token> src;
        for (std::size_t t = 0; t < src_len; ++t) src.push_back(static_cast<Token>(rng() % bound));
        per.push_back(std::move(src));
      }
      sources.push_back(std::move(per));
    }

    std::vector<std::vector<std::vector<std::string>>> references;
    if (!refs.empty()) {
      std::ifstream rf(refs);
      if (!rf) throw Error("cannot open references '" + refs + "'");
      for (const auto& line : read_lines(rf)) {
        std::vector<std::vector<std::string>> alts;
        std::size_t pos = 0;
        while (true) {
          auto bar = line.find("|||", pos);
          alts.push_back(detail::split_ws(line.substr(pos, bar == std::string::npos ? bar : bar - pos)));
          if (bar == std::string::npos) break;
          pos = bar + 3;
        }
        references.push_back(std::move(alts));
      }
      if (references.size() != sources.front().size())
        throw UsageError("--refs must have one line per source sentence");
    }

    const std::vector<std::size_t> ks =
        policy.policy == "wait-k" ? k_list : std::vector<std::size_t>{0};

    std::ofstream csv_file;
    std::ostream* csv = &out;
    if (!csv_path.empty()) {
      csv_file.open(csv_path, std::ios::binary);
      if (!csv_file) throw Error("cannot write '" + csv_path + "'");
      csv = &csv_file;
    }
    std::ofstream trace_file;
    if (!trace_path.empty()) {
      trace_file.open(trace_path, std::ios::binary);
      if (!trace_file) throw Error("cannot write '" + trace_path + "'");
    }

    *csv << kCsvHeader << '\n';
    bool first_trace = true;
    for (const auto& mode : mode_list) {
      for (std::size_t k : ks) {
        for (std::size_t b : beam_list) {
          for (std::size_t w : window_list) {
            struct Job {
              std::size_t inst, sent;
            };
            std::vector<Job> jobs;
            for (std::size_t i = 0; i < models.size(); ++i)
              for (std::size_t j = 0; j < sources[i].size(); ++j) jobs.push_back({i, j});

            std::vector<SentenceResult> results(jobs.size());
            const auto t0 = std::chrono::steady_clock::now();
            parallel_for(jobs.size(), decode.jobs, [&](std::size_t x) {
              const auto& src = sources[jobs[x].inst][jobs[x].sent];
              const auto cfg = make_config(decode, mode, b, w, src.size());
              results[x] = decode_one(models[jobs[x].inst], src, policy, std::max<std::size_t>(k, 1), cfg);
            });
            const double secs =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

            double al = 0, cw = 0, lp = 0;
            std::size_t counted = 0, tokens = 0;
            std::vector<std::vector<std::string>> hyps;
            for (std::size_t x = 0; x < jobs.size(); ++x) {
              const auto& r = results[x];
              const auto& m = models[jobs[x].inst];
              if (!references.empty()) hyps.push_back(render_target(m, r.trace.output()));
              if (r.source.empty()) continue;
              const auto y = r.trace.output();
              tokens += y.size();
              al += average_lagging(r.trace, r.source.size());
              cw += consecutive_wait(r.trace);
              lp += std::visit([&](const auto& mm) { return sequence_logprob(mm, r.source, y); }, m);
              ++counted;
            }
            const double denom = counted ? static_cast<double>(counted) : 1.0;
            std::string bleu;
            if (!references.empty()) {
              std::vector<std::vector<std::vector<std::string>>> refs_all;
              for (const auto& job : jobs) refs_all.push_back(references[job.sent]);
              bleu = fmt_num(corpus_bleu(hyps, refs_all));
            }
            *csv << policy.policy << ',' << (policy.policy == "wait-k" ? std::to_string(k) : "")
                 << ',' << b << ',' << w << ',' << mode << ',' << fmt_num(al / denom) << ','
                 << fmt_num(cw / denom) << ',' << bleu << ',' << fmt_num(lp / denom) << ','
                 << (timing && secs > 0 ? fmt_num(static_cast<double>(tokens) / secs) : "") << '\n';

            if (trace_file.is_open()) {
              for (const auto& r : results) {
                if (!first_trace) trace_file << '\n';
                write_trace(trace_file, r.trace);
                first_trace = false;
              }
            }
          }
        }
      }
    }
    return kExitOk;
  }
};

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

struct BenchCommand {
  BenchParams params;
  std::optional<std::uint64_t> seed;
  std::string hash_mix = "none";
  std::string csv_path;

  void attach(CLI::App* app) {
    app->add_option("--vocab", params.vocab, "Vocabulary size")->check(CLI::Range(2, 1 << 24));
    app->add_option("--beam", params.beam, "Beam size")->check(CLI::PositiveNumber);
    app->add_option("--window", params.window, "Speculative window");
    app->add_option("--steps", params.steps, "Tokens to commit")->check(CLI::PositiveNumber);
    app->add_option("--hash-seed", seed, "Hash model seed (default: $SIMUL_DECODE_SEED or 1)");
    app->add_option("--alpha", params.sharpness, "Hash model sharpness");
    app->add_option("--hash-mix", hash_mix, "none|fmix64")->check(CLI::IsMember({"none", "fmix64"}));
    app->add_option("--csv", csv_path, "Append a metrics row to this CSV file");
  }

  int run(std::ostream& out) {
    if (seed) params.seed = *seed;
    else if (auto e = env_seed()) params.seed = *e;
    params.mix = hash_mix == "fmix64" ? HashMix::kFmix64 : HashMix::kNone;
    const auto rep = run_bench(params);
    out << "steps=" << rep.steps << " vocab=" << params.vocab << " beam=" << params.beam
        << " window=" << params.window << '\n'
        << "tokens_per_sec=" << fmt_num(rep.tokens_per_sec) << '\n'
        << "mean_ms=" << fmt_num(rep.mean_ms) << " p50_ms=" << fmt_num(rep.p50_ms)
        << " p90_ms=" << fmt_num(rep.p90_ms) << " p99_ms=" << fmt_num(rep.p99_ms)
        << " max_ms=" << fmt_num(rep.max_ms) << '\n'
        << "scorer_calls=" << rep.scorer_calls << '\n';
    if (!csv_path.empty()) {
      bool need_header = true;
      {
        std::ifstream probe(csv_path);
        need_header = !probe || probe.peek() == std::ifstream::traits_type::eof();
      }
      std::ofstream f(csv_path, std::ios::app | std::ios::binary);
      if (!f) throw Error("cannot write '" + csv_path + "'");
      if (need_header) f << kCsvHeader << '\n';
      f << "bench,," << params.beam << ',' << params.window << ",sbs,,,,,"
        << fmt_num(rep.tokens_per_sec) << '\n';
    }
    return kExitOk;
  }
};

}  // namespace

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Simultaneous decoding with speculative beam search", "simuldec"};
  app.require_subcommand(1);
  DecodeCommand decode;
  SweepCommand sweep;
  BenchCommand bench;
  auto* decode_app = app.add_subcommand("decode", "Decode source sentences");
  auto* sweep_app = app.add_subcommand("sweep", "Sweep k, beam and window; print metrics CSV");
  auto* bench_app = app.add_subcommand("bench", "Measure per-token latency of speculative search");
  decode.attach(decode_app);
  sweep.attach(sweep_app);
  bench.attach(bench_app);

  std::vector<std::string> argv_store{"simuldec"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : argv_store) argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return kExitOk;
    }
    app.exit(e, err, err);
    return kExitUsage;
  }

  try {
    if (decode_app->parsed()) return decode.run(in, out);
    if (sweep_app->parsed()) return sweep.run(in, out);
    return bench.run(out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  } catch (const InputTokenError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUnknownToken;
  } catch (const PolicyContractError& e) {
    err << "error: policy contract violated: " << e.what() << '\n';
    return kExitPolicyContract;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace simuldec::cli
