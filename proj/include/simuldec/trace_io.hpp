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

// Line-delimited JSON trace format. One event per line:
//
//   {"type":"read","token":7,"source_index":0}
//   {"type":"commit","token":3,"g":1,"logp":-0.5108256237659907}
//   {"type":"speculate","window":[4,2]}
//   {"type":"tail_start"}
//
// Several traces in one stream are separated by a single empty line.

#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "simuldec/core.hpp"

namespace simuldec {

namespace detail {

inline nlohmann::ordered_json event_to_json(const Event& e) {
  nlohmann::ordered_json j;
  std::visit(
      [&](const auto& ev) {
        using T = std::decay_t<decltype(ev)>;
        if constexpr (std::is_same_v<T, ReadEvent>) {
          j["type"] = "read";
          j["token"] = ev.token;
          j["source_index"] = ev.source_index;
        } else if constexpr (std::is_same_v<T, CommitEvent>) {
          j["type"] = "commit";
          j["token"] = ev.token;
          j["g"] = ev.g;
          j["logp"] = ev.logp;
        } else if constexpr (std::is_same_v<T, SpeculateEvent>) {
          j["type"] = "speculate";
          j["window"] = ev.window;
        } else {
          j["type"] = "tail_start";
        }
      },
      e);
  return j;
}

inline Event event_from_json(const nlohmann::json& j, std::size_t line) {
  try {
    const auto type = j.at("type").get<std::string>();
    if (type == "read")
      return ReadEvent{j.at("token").get<Token>(), j.at("source_index").get<std::size_t>()};
    if (type == "commit")
      return CommitEvent{j.at("token").get<Token>(), j.at("g").get<std::size_t>(),
                         j.at("logp").get<double>()};
    if (type == "speculate") return SpeculateEvent{j.at("window").get<std::vector<Token>>()};
    if (type == "tail_start") return TailStartEvent{};
    throw ParseError("unknown trace event type '" + type + "'", line);
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(std::string("malformed trace event: ") + ex.what(), line);
  }
}

}  // namespace detail

inline void write_trace(std::ostream& os, const DecodeTrace& trace) {
  for (const auto& e : trace.events()) os << detail::event_to_json(e).dump() << '\n';
}

inline void write_traces(std::ostream& os, const std::vector<DecodeTrace>& traces) {
  for (std::size_t i = 0; i < traces.size(); ++i) {
    if (i > 0) os << '\n';
    write_trace(os, traces[i]);
  }
}

inline std::vector<DecodeTrace> read_traces(std::istream& is) {
  std::vector<DecodeTrace> out;
  std::string line;
  std::size_t lineno = 0;
  bool open = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) {
      if (open) open = false;
      else out.emplace_back();  // blank line after a blank line: empty trace
      continue;
    }
    if (!open) {
      out.emplace_back();
      open = true;
    }
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& ex) {
      throw ParseError(std::string("trace line is not JSON: ") + ex.what(), lineno);
    }
    try {
      out.back().append(detail::event_from_json(j, lineno));
    } catch (const ContractViolation& ex) {
      throw ParseError(ex.what(), lineno);
    }
  }
  return out;
}

inline DecodeTrace read_trace(std::istream& is) {
  auto all = read_traces(is);
  if (all.size() > 1) throw ParseError("stream holds more than one trace", 0);
  return all.empty() ? DecodeTrace{} : std::move(all.front());
}

}  // namespace simuldec
