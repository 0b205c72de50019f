#pragma once

/**
 * @file trace.hpp
 * @brief Run records: bindings, trace events, counters, and RunResult with
 * its JSON / JSONL exports.
 *
 * Trace JSONL: one event object per line, each with an "event" field naming
 * its type; the last line is {"event": "Summary", ...counters, termination}.
 */

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "scidc/common.hpp"

namespace scidc::engine {

/// Variable store with insertion order preserved.
class Bindings {
 public:
  const std::string* find(const std::string& name) const {
    for (const auto& [k, v] : items_) {
      if (k == name) return &v;
    }
    return nullptr;
  }

  void set(const std::string& name, std::string value) {
    for (auto& [k, v] : items_) {
      if (k == name) {
        v = std::move(value);
        return;
      }
    }
    items_.emplace_back(name, std::move(value));
  }

  const std::vector<std::pair<std::string, std::string>>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }
  bool operator==(const Bindings&) const = default;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [k, v] : items_) j[k] = v;
    return j;
  }

 private:
  std::vector<std::pair<std::string, std::string>> items_;
};

enum class EventType {
  StepStarted,
  TokensEmitted,
  MaskApplied,
  ValidationFailed,
  BacktrackPerformed,
  FallbackApplied,
  StepCompleted,
};

inline const char* event_name(EventType t) {
  switch (t) {
    case EventType::StepStarted: return "StepStarted";
    case EventType::TokensEmitted: return "TokensEmitted";
    case EventType::MaskApplied: return "MaskApplied";
    case EventType::ValidationFailed: return "ValidationFailed";
    case EventType::BacktrackPerformed: return "BacktrackPerformed";
    case EventType::FallbackApplied: return "FallbackApplied";
    case EventType::StepCompleted: return "StepCompleted";
  }
  return "?";
}

/**
 * One trace event. Field use by type:
 *   StepStarted        step, detail = step kind
 *   TokensEmitted      step, tokens, text, detail = segment kind
 *   MaskApplied        step, count = valid-set size
 *   ValidationFailed   step = loop, count = iteration (1-based), detail = predicate
 *   BacktrackPerformed step = loop, detail = anchor, count = erased tokens,
 *                      extra = injected retry tokens
 *   FallbackApplied    step = loop, detail = variable, text = value
 *   StepCompleted      step
 */
struct Event {
  EventType type = EventType::StepStarted;
  std::string step;
  std::string detail;
  std::string text;
  std::vector<TokenId> tokens;
  std::int64_t count = 0;
  std::int64_t extra = 0;

  bool operator==(const Event&) const = default;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["event"] = event_name(type);
    switch (type) {
      case EventType::StepStarted:
        j["step"] = step;
        j["kind"] = detail;
        break;
      case EventType::TokensEmitted:
        j["step"] = step;
        j["segment"] = detail;
        j["tokens"] = tokens;
        j["text"] = text;
        break;
      case EventType::MaskApplied:
        j["step"] = step;
        j["valid"] = count;
        break;
      case EventType::ValidationFailed:
        j["loop"] = step;
        j["iteration"] = count;
        j["predicate"] = detail;
        break;
      case EventType::BacktrackPerformed:
        j["loop"] = step;
        j["anchor"] = detail;
        j["erased_tokens"] = count;
        j["injected_tokens"] = extra;
        break;
      case EventType::FallbackApplied:
        j["loop"] = step;
        j["variable"] = detail;
        j["value"] = text;
        break;
      case EventType::StepCompleted:
        j["step"] = step;
        break;
    }
    return j;
  }
};

/**
 * Token accounting. "Emitted" counts tokens chosen by the decoding policy in
 * Gen/Select spans; each is either still in the output or was discarded by a
 * backtrack or overwritten by a fallback, so emitted = output + discarded.
 * Scaffolding, injected retry text and fallback text are counted separately.
 */
struct Counters {
  std::int64_t emitted = 0;
  std::int64_t output = 0;
  std::int64_t discarded = 0;
  std::int64_t regenerations = 0;
  std::int64_t scaffold = 0;
  std::int64_t injected = 0;
  std::int64_t fallback = 0;
  std::int64_t backend_calls = 0;

  bool operator==(const Counters&) const = default;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["tokens_emitted"] = emitted;
    j["tokens_output"] = output;
    j["tokens_discarded"] = discarded;
    j["regenerations"] = regenerations;
    j["scaffold_tokens"] = scaffold;
    j["injected_tokens"] = injected;
    j["fallback_tokens"] = fallback;
    j["backend_calls"] = backend_calls;
    return j;
  }
};

struct DecodeTrace {
  std::vector<Event> events;
  Counters counters;

  bool operator==(const DecodeTrace&) const = default;

  std::size_t count(EventType t) const {
    std::size_t n = 0;
    for (const auto& e : events) n += e.type == t ? 1 : 0;
    return n;
  }
};

enum class Termination { Completed, FallbackCompleted, Aborted };

inline const char* termination_name(Termination t) {
  switch (t) {
    case Termination::Completed: return "Completed";
    case Termination::FallbackCompleted: return "FallbackCompleted";
    case Termination::Aborted: return "Aborted";
  }
  return "?";
}

struct RunResult {
  std::string output;
  Bindings bindings;
  DecodeTrace trace;
  Termination termination = Termination::Completed;
  std::string abort_reason;  // "Kind: detail" when Aborted

  bool operator==(const RunResult&) const = default;

  nlohmann::ordered_json summary_json() const {
    nlohmann::ordered_json j;
    j["event"] = "Summary";
    j["termination"] = termination_name(termination);
    if (termination == Termination::Aborted) j["reason"] = abort_reason;
    const nlohmann::ordered_json counters = trace.counters.to_json();
    for (auto it = counters.begin(); it != counters.end(); ++it) j[it.key()] = it.value();
    return j;
  }

  nlohmann::ordered_json to_json(bool include_events = true) const {
    nlohmann::ordered_json j;
    j["output"] = output;
    j["termination"] = termination_name(termination);
    if (termination == Termination::Aborted) j["reason"] = abort_reason;
    j["bindings"] = bindings.to_json();
    j["counters"] = trace.counters.to_json();
    if (include_events) {
      nlohmann::ordered_json ev = nlohmann::ordered_json::array();
      for (const auto& e : trace.events) ev.push_back(e.to_json());
      j["events"] = std::move(ev);
    }
    return j;
  }

  /// Canonical serialization used for byte-level comparisons.
  std::string serialize() const { return dump(to_json()); }

  std::string trace_jsonl() const {
    std::string out;
    for (const auto& e : trace.events) out += dump(e.to_json()) + "\n";
    out += dump(summary_json()) + "\n";
    return out;
  }

  static std::string dump(const nlohmann::ordered_json& j, int indent = -1) {
    return j.dump(indent, ' ', false, nlohmann::ordered_json::error_handler_t::replace);
  }
};

}  // namespace scidc::engine
