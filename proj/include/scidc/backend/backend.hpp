#pragma once

// Decoder backend interface: the engine asks for next-token scores over the
// whole context and never keeps model state of its own.

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scidc/common.hpp"

namespace scidc::backend {

struct Capabilities {
  std::string vocab_id;             // Vocabulary::fingerprint() of the model's vocabulary
  std::size_t max_context = 1u << 20;
  bool supports_logits = true;      // false: degraded mode (choice + generate endpoints only)
};

/// Tells the backend a constrained or free span is starting. `span_id` grows
/// by one per span in a run, so re-executions of the same step after a
/// backtrack are distinguishable.
struct SpanInfo {
  std::string step;
  std::size_t context_length = 0;
  std::uint64_t span_id = 0;
};

struct GenerateParams {
  int max_tokens = 256;
  double temperature = 0.0;
  std::optional<std::string> stop;
};

class DecoderBackend {
 public:
  virtual ~DecoderBackend() = default;

  virtual Capabilities capabilities() const = 0;

  /// Scores for every vocabulary entry given the full context. `out` is
  /// resized to the vocabulary size.
  virtual void next_logits(std::span<const TokenId> context, std::vector<float>& out) = 0;

  virtual void begin_span(const SpanInfo&) {}

  /// Degraded mode: index of the chosen option.
  virtual std::size_t choose_option(std::span<const TokenId> /*context*/, const std::vector<std::string>& /*options*/) {
    throw Error(ErrorKind::CapabilityError, "backend has no option-choice endpoint");
  }

  /// Unconstrained completion, used by free generation in degraded mode and by
  /// the vanilla evaluation arm.
  virtual std::string generate(const std::string& /*prompt*/, const GenerateParams& /*params*/) {
    throw Error(ErrorKind::CapabilityError, "backend has no generate endpoint");
  }
};

/// Throws `kind` unless `scores` has `expected` finite entries.
inline void check_scores(std::span<const float> scores, std::size_t expected, ErrorKind kind) {
  if (scores.size() != expected) {
    throw Error(kind, "shape mismatch: expected " + std::to_string(expected) + " scores, got " +
                          std::to_string(scores.size()));
  }
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) throw Error(kind, "non-finite score at index " + std::to_string(i));
  }
}

}  // namespace scidc::backend
