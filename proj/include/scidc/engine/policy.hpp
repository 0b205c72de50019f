#pragma once

// Token choice over masked scores: greedy (argmax, lowest id on ties) or
// temperature sampling from the renormalized distribution.

#include <cmath>
#include <cstdint>
#include <random>

#include "scidc/common.hpp"
#include "scidc/token/mask.hpp"

namespace scidc::engine {

struct DecodeMode {
  enum class Kind { Greedy, Sample };
  Kind kind = Kind::Greedy;
  double temperature = 1.0;

  static DecodeMode greedy() { return {Kind::Greedy, 0.0}; }
  static DecodeMode sample(double temperature) { return {Kind::Sample, temperature}; }

  /// Temperature 0 (or unset) means greedy.
  static DecodeMode from_temperature(double t) { return t > 0 ? sample(t) : greedy(); }
};

using Rng = std::mt19937_64;

inline TokenId greedy_pick(const token::MaskedLogits& masked) {
  TokenId best = -1;
  float best_score = token::kForbidden;
  for (std::size_t i = 0; i < masked.values.size(); ++i) {
    float v = masked.values[i];
    if (token::is_forbidden(v)) continue;
    if (best < 0 || v > best_score) {
      best = static_cast<TokenId>(i);
      best_score = v;
    }
  }
  if (best < 0) throw Error(ErrorKind::EmptyValidSet, "no token survives the mask");
  return best;
}

inline TokenId sample_pick(const token::MaskedLogits& masked, double temperature, Rng& rng) {
  if (!(temperature > 0)) return greedy_pick(masked);
  float max_score = token::kForbidden;
  bool any = false;
  for (float v : masked.values) {
    if (token::is_forbidden(v)) continue;
    if (!any || v > max_score) max_score = v;
    any = true;
  }
  if (!any) throw Error(ErrorKind::EmptyValidSet, "no token survives the mask");
  double total = 0;
  for (float v : masked.values) {
    if (!token::is_forbidden(v)) total += std::exp((static_cast<double>(v) - max_score) / temperature);
  }
  double u = static_cast<double>(rng() >> 11) * 0x1.0p-53 * total;
  TokenId last = -1;
  for (std::size_t i = 0; i < masked.values.size(); ++i) {
    float v = masked.values[i];
    if (token::is_forbidden(v)) continue;
    last = static_cast<TokenId>(i);
    u -= std::exp((static_cast<double>(v) - max_score) / temperature);
    if (u < 0) return last;
  }
  return last;  // rounding left a sliver of mass past the end
}

inline TokenId decode_policy(const token::MaskedLogits& masked, const DecodeMode& mode, Rng& rng) {
  return mode.kind == DecodeMode::Kind::Greedy ? greedy_pick(masked) : sample_pick(masked, mode.temperature, rng);
}

}  // namespace scidc::engine
