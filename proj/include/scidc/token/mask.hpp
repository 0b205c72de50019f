#pragma once

// Logit masking: valid entries pass through bit-for-bit, everything else
// becomes the forbidden sentinel (-inf), so it has probability zero after
// softmax.

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "scidc/common.hpp"

namespace scidc::token {

inline constexpr float kForbidden = -std::numeric_limits<float>::infinity();

inline bool is_forbidden(float v) { return v == kForbidden; }

struct MaskedLogits {
  std::vector<float> values;

  std::size_t size() const { return values.size(); }

  std::size_t allowed_count() const {
    std::size_t n = 0;
    for (float v : values) n += is_forbidden(v) ? 0 : 1;
    return n;
  }
};

/// Writes the masked scores into `out` (resized to logits.size()).
inline void apply_mask_into(std::span<const float> logits, std::span<const TokenId> valid, MaskedLogits& out) {
  if (valid.empty()) throw Error(ErrorKind::EmptyValidSet, "mask has no valid token");
  out.values.assign(logits.size(), kForbidden);
  const auto n = static_cast<TokenId>(logits.size());
  for (TokenId id : valid) {
    if (id < 0 || id >= n) {
      throw Error(ErrorKind::InvalidArgument, "valid token " + std::to_string(id) + " outside the score vector");
    }
    out.values[static_cast<std::size_t>(id)] = logits[static_cast<std::size_t>(id)];
  }
}

inline MaskedLogits apply_mask(std::span<const float> logits, std::span<const TokenId> valid) {
  MaskedLogits out;
  apply_mask_into(logits, valid, out);
  return out;
}

}  // namespace scidc::token
