#pragma once

// Backend over a host-supplied function: token ids in, one score per
// vocabulary entry out. Lets a host-side model wrapper serve logits without a
// server.

#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "scidc/backend/backend.hpp"

namespace scidc::backend {

using LogitsCallback = std::function<std::vector<float>(std::span<const TokenId>)>;

class CallbackBackend : public DecoderBackend {
 public:
  CallbackBackend(LogitsCallback fn, std::size_t vocab_size, std::string vocab_id,
                  std::size_t max_context = std::size_t{1} << 20)
      : fn_(std::move(fn)), vocab_size_(vocab_size), caps_{std::move(vocab_id), max_context, true} {}

  Capabilities capabilities() const override { return caps_; }

  void next_logits(std::span<const TokenId> context, std::vector<float>& out) override {
    if (context.size() > caps_.max_context) {
      throw Error(ErrorKind::ContextOverflow, "context of " + std::to_string(context.size()) + " tokens exceeds " +
                                                  std::to_string(caps_.max_context));
    }
    std::vector<float> scores;
    try {
      scores = fn_(context);
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      throw Error(ErrorKind::BackendFailure, std::string("callback failed: ") + e.what());
    }
    check_scores(scores, vocab_size_, ErrorKind::BackendFailure);
    out = std::move(scores);
  }

 private:
  LogitsCallback fn_;
  std::size_t vocab_size_;
  Capabilities caps_;
};

}  // namespace scidc::backend
