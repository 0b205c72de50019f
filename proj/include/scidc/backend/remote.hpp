#pragma once

/**
 * @file remote.hpp
 * @brief HTTP client for an external inference server.
 *
 * Wire protocol v1 (JSON bodies, POST):
 *
 *   /v1/logits    {"context": [ids], "model": str, "span": {"id": n, "step": str, "start": k}}
 *                 -> {"logits": [floats]}        ("span" is optional)
 *   /v1/generate  {"prompt": str, "max_tokens": n, "temperature": x, "stop": str|null}
 *                 -> {"text": str}
 *   /v1/select    {"context": [ids], "options": [str], "model": str}
 *                 -> {"index": n}                (degraded servers only)
 *
 * Authentication is a bearer token read from the environment variable named
 * in RemoteConfig (the value never appears in configuration or logs).
 * Transport failures (connect, timeout, malformed body) are retried
 * `retries` times and then raised as TransportError; a non-2xx status is
 * raised immediately as ServerError.
 */

#include <cstdlib>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "scidc/backend/backend.hpp"
#include "scidc/token/vocabulary.hpp"

namespace scidc::backend {

struct RemoteConfig {
  std::string endpoint;          // e.g. http://127.0.0.1:8080
  double timeout_s = 30.0;
  int retries = 2;
  std::string auth_env;          // name of the environment variable holding the token
  std::string model = "default";
  bool logits = true;            // false: server only offers /v1/select and /v1/generate
  std::size_t max_context = std::size_t{1} << 20;

  void validate() const {
    if (endpoint.empty()) throw Error(ErrorKind::InvalidArgument, "remote endpoint is empty");
    if (!(timeout_s > 0)) throw Error(ErrorKind::InvalidArgument, "remote timeout must be positive");
    if (retries < 0) throw Error(ErrorKind::InvalidArgument, "remote retries must be non-negative");
  }
};

class RemoteBackend : public DecoderBackend {
 public:
  RemoteBackend(RemoteConfig config, std::shared_ptr<const token::Vocabulary> vocab)
      : config_(std::move(config)), vocab_(std::move(vocab)) {
    config_.validate();
  }

  Capabilities capabilities() const override {
    return {vocab_->fingerprint(), config_.max_context, config_.logits};
  }

  void begin_span(const SpanInfo& info) override { span_ = info; }

  void next_logits(std::span<const TokenId> context, std::vector<float>& out) override {
    if (!config_.logits) throw Error(ErrorKind::CapabilityError, "server does not expose logits");
    if (context.size() > config_.max_context) {
      throw Error(ErrorKind::ContextOverflow, "context of " + std::to_string(context.size()) + " tokens exceeds " +
                                                  std::to_string(config_.max_context));
    }
    nlohmann::json req = {{"context", std::vector<TokenId>(context.begin(), context.end())}, {"model", config_.model}};
    if (span_) req["span"] = {{"id", span_->span_id}, {"step", span_->step}, {"start", span_->context_length}};
    nlohmann::json reply = post("/v1/logits", req);
    if (!reply.contains("logits") || !reply["logits"].is_array()) {
      throw Error(ErrorKind::TransportError, "reply has no logits array");
    }
    std::vector<float> scores;
    scores.reserve(reply["logits"].size());
    for (const auto& v : reply["logits"]) {
      if (!v.is_number()) throw Error(ErrorKind::TransportError, "non-numeric logit");
      scores.push_back(v.get<float>());
    }
    check_scores(scores, vocab_->size(), ErrorKind::TransportError);
    out = std::move(scores);
  }

  std::size_t choose_option(std::span<const TokenId> context, const std::vector<std::string>& options) override {
    nlohmann::json req = {{"context", std::vector<TokenId>(context.begin(), context.end())},
                          {"options", options},
                          {"model", config_.model}};
    nlohmann::json reply = post("/v1/select", req);
    if (!reply.contains("index") || !reply["index"].is_number_integer()) {
      throw Error(ErrorKind::TransportError, "reply has no integer index");
    }
    auto idx = reply["index"].get<long long>();
    if (idx < 0 || static_cast<std::size_t>(idx) >= options.size()) {
      throw Error(ErrorKind::TransportError, "option index " + std::to_string(idx) + " out of range");
    }
    return static_cast<std::size_t>(idx);
  }

  std::string generate(const std::string& prompt, const GenerateParams& params) override {
    nlohmann::json req = {{"prompt", prompt},
                          {"max_tokens", params.max_tokens},
                          {"temperature", params.temperature},
                          {"stop", params.stop ? nlohmann::json(*params.stop) : nlohmann::json(nullptr)}};
    nlohmann::json reply = post("/v1/generate", req);
    if (!reply.contains("text") || !reply["text"].is_string()) {
      throw Error(ErrorKind::TransportError, "reply has no text");
    }
    return reply["text"].get<std::string>();
  }

 private:
  RemoteConfig config_;
  std::shared_ptr<const token::Vocabulary> vocab_;
  std::optional<SpanInfo> span_;

  nlohmann::json post(const std::string& path, const nlohmann::json& body) {
    const std::string payload = body.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
    httplib::Headers headers;
    if (!config_.auth_env.empty()) {
      if (const char* tok = std::getenv(config_.auth_env.c_str())) {
        headers.emplace("Authorization", std::string("Bearer ") + tok);
      }
    }
    auto secs = static_cast<time_t>(config_.timeout_s);
    auto usecs = static_cast<time_t>((config_.timeout_s - static_cast<double>(secs)) * 1e6);
    std::string last_error;
    for (int attempt = 0; attempt <= config_.retries; ++attempt) {
      httplib::Client cli(config_.endpoint);
      cli.set_connection_timeout(secs, usecs);
      cli.set_read_timeout(secs, usecs);
      cli.set_write_timeout(secs, usecs);
      auto res = cli.Post(path, headers, payload, "application/json");
      if (!res) {
        last_error = httplib::to_string(res.error());
        continue;
      }
      if (res->status < 200 || res->status >= 300) throw ServerError(res->status, res->body.substr(0, 200));
      try {
        return nlohmann::json::parse(res->body);
      } catch (const nlohmann::json::exception& e) {
        last_error = std::string("malformed reply: ") + e.what();
      }
    }
    throw Error(ErrorKind::TransportError, path + " failed after " + std::to_string(config_.retries + 1) +
                                               " attempt(s): " + last_error);
  }
};

}  // namespace scidc::backend
