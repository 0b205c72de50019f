#pragma once

/**
 * @file mock.hpp
 * @brief Scripted deterministic backend for tests and evaluation.
 *
 * A MockScript is a list of directives, one per generated span (every Gen or
 * Select execution, including re-executions after a backtrack). The engine
 * announces each span with begin_span(), which advances the cursor.
 *
 *   PreferText(t)   tokens that keep the span a prefix of t score +10 (the
 *                   longest such token) or +9 (shorter ones); once the span
 *                   equals t, or has left it, end-of-sequence scores +10.
 *   PreferToken(id) id scores +10 at the first position of the span; after
 *                   that end-of-sequence scores +10.
 *   UniformNoise(s) every score is uniform in [-1, 1], a pure function of
 *                   (s, context, token id). When it is the last directive it
 *                   also covers every later span.
 *
 * Every score not mentioned above is -10. Once the script is exhausted the
 * backend prefers end-of-sequence. FailValidationTimes is sugar expanded at
 * construction time into PreferText directives.
 */

#include <algorithm>
#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "scidc/backend/backend.hpp"
#include "scidc/token/vocabulary.hpp"

namespace scidc::backend {

struct Directive {
  enum class Kind { PreferText, PreferToken, UniformNoise };
  Kind kind = Kind::PreferText;
  std::string text;
  TokenId token = 0;
  std::uint64_t seed = 0;

  bool operator==(const Directive&) const = default;
};

class MockScript {
 public:
  std::vector<Directive> directives;

  MockScript& prefer_text(std::string text) {
    directives.push_back({Directive::Kind::PreferText, std::move(text), 0, 0});
    return *this;
  }
  MockScript& prefer_token(TokenId id) {
    directives.push_back({Directive::Kind::PreferToken, {}, id, 0});
    return *this;
  }
  MockScript& uniform_noise(std::uint64_t seed) {
    directives.push_back({Directive::Kind::UniformNoise, {}, 0, seed});
    return *this;
  }
  /// `n` rounds of the violating values, then one round of satisfying ones.
  /// Each value is one span of the re-executed region, in order.
  MockScript& fail_validation_times(int n, const std::vector<std::string>& failing,
                                    const std::vector<std::string>& passing) {
    for (int i = 0; i < n; ++i) {
      for (const auto& v : failing) prefer_text(v);
    }
    for (const auto& v : passing) prefer_text(v);
    return *this;
  }

  nlohmann::json to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& d : directives) {
      switch (d.kind) {
        case Directive::Kind::PreferText: arr.push_back({{"prefer_text", d.text}}); break;
        case Directive::Kind::PreferToken: arr.push_back({{"prefer_token", d.token}}); break;
        case Directive::Kind::UniformNoise: arr.push_back({{"uniform_noise", d.seed}}); break;
      }
    }
    return {{"directives", arr}};
  }

  static MockScript from_json(const nlohmann::json& j) {
    MockScript s;
    const nlohmann::json& arr = j.is_array() ? j : j.at("directives");
    for (const auto& d : arr) {
      if (d.contains("prefer_text")) {
        s.prefer_text(d.at("prefer_text").get<std::string>());
      } else if (d.contains("prefer_token")) {
        s.prefer_token(d.at("prefer_token").get<TokenId>());
      } else if (d.contains("uniform_noise")) {
        s.uniform_noise(d.at("uniform_noise").get<std::uint64_t>());
      } else if (d.contains("fail_validation_times")) {
        const auto& f = d.at("fail_validation_times");
        s.fail_validation_times(f.at("n").get<int>(), f.at("fail").get<std::vector<std::string>>(),
                                f.at("pass").get<std::vector<std::string>>());
      } else {
        throw Error(ErrorKind::InvalidArgument, "unknown mock directive: " + d.dump());
      }
    }
    return s;
  }
};

inline constexpr float kPreferred = 10.0f;
inline constexpr float kConsistent = 9.0f;
inline constexpr float kFloor = -10.0f;

class MockBackend : public DecoderBackend {
 public:
  MockBackend(std::shared_ptr<const token::Vocabulary> vocab, MockScript script,
              std::size_t max_context = std::size_t{1} << 20)
      : vocab_(std::move(vocab)), script_(std::move(script)), max_context_(max_context) {}

  Capabilities capabilities() const override { return {vocab_->fingerprint(), max_context_, true}; }

  void begin_span(const SpanInfo& info) override {
    std::lock_guard<std::mutex> lock(mu_);
    ++cursor_;
    span_start_ = info.context_length;
  }

  /// Index of the directive the next call will use; -1 before the first span.
  long cursor() const {
    std::lock_guard<std::mutex> lock(mu_);
    return cursor_;
  }

  void next_logits(std::span<const TokenId> context, std::vector<float>& out) override {
    std::lock_guard<std::mutex> lock(mu_);
    if (context.size() > max_context_) {
      throw Error(ErrorKind::ContextOverflow, "context of " + std::to_string(context.size()) +
                                                  " tokens exceeds " + std::to_string(max_context_));
    }
    const std::size_t n = vocab_->size();
    out.assign(n, kFloor);
    const Directive* d = current();
    if (!d) {
      prefer_eos(out);
      return;
    }
    switch (d->kind) {
      case Directive::Kind::PreferText: prefer_text(*d, context, out); break;
      case Directive::Kind::PreferToken:
        if (context.size() <= span_start_ && d->token >= 0 && static_cast<std::size_t>(d->token) < n) {
          out[static_cast<std::size_t>(d->token)] = kPreferred;
        } else {
          prefer_eos(out);
        }
        break;
      case Directive::Kind::UniformNoise: {
        std::uint64_t h = text::splitmix64(d->seed ^ context_hash(context));
        for (std::size_t t = 0; t < n; ++t) {
          std::uint64_t r = text::splitmix64(h + t * 0x9e3779b97f4a7c15ULL);
          out[t] = static_cast<float>(static_cast<double>(r >> 11) * 0x1.0p-53 * 2.0 - 1.0);
        }
        break;
      }
    }
  }

 private:
  std::shared_ptr<const token::Vocabulary> vocab_;
  MockScript script_;
  std::size_t max_context_;
  mutable std::mutex mu_;
  long cursor_ = -1;
  std::size_t span_start_ = 0;
  // Prefix hashes of the last context seen, so hashing is incremental when
  // the context grows by appending.
  std::vector<TokenId> hashed_;
  std::vector<std::uint64_t> prefix_hash_{0x51ed270b27a3c5d1ULL};

  const Directive* current() const {
    const auto& ds = script_.directives;
    if (ds.empty()) return nullptr;
    long idx = std::max(cursor_, 0L);
    if (static_cast<std::size_t>(idx) < ds.size()) return &ds[static_cast<std::size_t>(idx)];
    if (ds.back().kind == Directive::Kind::UniformNoise) return &ds.back();
    return nullptr;
  }

  void prefer_eos(std::vector<float>& out) const {
    if (auto eos = vocab_->eos()) out[static_cast<std::size_t>(*eos)] = kPreferred;
  }

  void prefer_text(const Directive& d, std::span<const TokenId> context, std::vector<float>& out) const {
    std::string generated;
    if (span_start_ < context.size()) generated = vocab_->detokenize(context.subspan(span_start_));
    const std::string& target = d.text;
    if (generated.size() >= target.size() || target.compare(0, generated.size(), generated) != 0) {
      prefer_eos(out);
      return;
    }
    std::string_view rest = std::string_view(target).substr(generated.size());
    const token::TokenTrie& trie = vocab_->trie();
    std::int32_t node = 0;
    TokenId longest = -1;
    for (unsigned char c : rest) {
      node = trie.child(node, c);
      if (node < 0) break;
      for (TokenId t : trie.node(node).tokens) {
        out[static_cast<std::size_t>(t)] = kConsistent;
        longest = t;
      }
    }
    if (longest >= 0) {
      // Among equal spellings the lowest id is the preferred one.
      const auto& ids = trie.node(trie_node_of(vocab_->bytes(longest))).tokens;
      out[static_cast<std::size_t>(*std::min_element(ids.begin(), ids.end()))] = kPreferred;
    }
  }

  std::int32_t trie_node_of(std::string_view bytes) const {
    std::int32_t node = 0;
    for (unsigned char c : bytes) node = vocab_->trie().child(node, c);
    return node;
  }

  std::uint64_t context_hash(std::span<const TokenId> context) {
    std::size_t common = 0;
    std::size_t limit = std::min(context.size(), hashed_.size());
    while (common < limit && hashed_[common] == context[common]) ++common;
    hashed_.resize(common);
    prefix_hash_.resize(common + 1);
    for (std::size_t i = common; i < context.size(); ++i) {
      hashed_.push_back(context[i]);
      prefix_hash_.push_back(text::splitmix64(prefix_hash_.back() ^ static_cast<std::uint32_t>(context[i])));
    }
    return prefix_hash_.back();
  }
};

}  // namespace scidc::backend
