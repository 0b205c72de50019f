#pragma once

/**
 * @file gllm.hpp
 * @brief Clients for the general-purpose LLM that drives compilation.
 *
 * The interface is prompt text in, reply text out. Offline runs replay
 * recorded exchanges: one JSON file per exchange, named by the request hash
 * and holding {"request_hash", "prompt", "reply"}.
 */

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "scidc/common.hpp"

namespace scidc::compiler {

class GllmClient {
 public:
  virtual ~GllmClient() = default;
  virtual std::string complete(const std::string& prompt) = 0;
};

/// Hex FNV-1a of the prompt bytes; names the fixture file.
inline std::string request_hash(const std::string& prompt) { return text::hex64(text::fnv1a(prompt)); }

inline std::filesystem::path fixture_path(const std::filesystem::path& dir, const std::string& prompt) {
  return dir / (request_hash(prompt) + ".json");
}

inline void write_fixture(const std::filesystem::path& dir, const std::string& prompt, const std::string& reply) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  nlohmann::ordered_json j;
  j["request_hash"] = request_hash(prompt);
  j["prompt"] = prompt;
  j["reply"] = reply;
  std::ofstream out(fixture_path(dir, prompt), std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write fixture in " + dir.string());
  out << j.dump(2) << "\n";
}

class FunctionGllm : public GllmClient {
 public:
  explicit FunctionGllm(std::function<std::string(const std::string&)> fn) : fn_(std::move(fn)) {}
  std::string complete(const std::string& prompt) override { return fn_(prompt); }

 private:
  std::function<std::string(const std::string&)> fn_;
};

/// Replays recorded exchanges; a prompt without a fixture is FixtureMissing.
class FixtureGllm : public GllmClient {
 public:
  explicit FixtureGllm(std::filesystem::path dir) : dir_(std::move(dir)) {}

  std::string complete(const std::string& prompt) override {
    auto path = fixture_path(dir_, prompt);
    std::ifstream in(path, std::ios::binary);
    if (!in) {
      throw Error(ErrorKind::FixtureMissing, "no recorded reply for request " + request_hash(prompt) + " in " +
                                                 dir_.string());
    }
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::FixtureMissing, path.string() + ": " + e.what());
    }
    if (!j.contains("reply") || !j["reply"].is_string()) {
      throw Error(ErrorKind::FixtureMissing, path.string() + ": missing reply");
    }
    if (j.contains("prompt") && j["prompt"].is_string() && j["prompt"].get<std::string>() != prompt) {
      throw Error(ErrorKind::FixtureMissing, path.string() + ": recorded prompt differs (hash collision)");
    }
    ++served_;
    return j["reply"].get<std::string>();
  }

  std::size_t served() const { return served_; }

 private:
  std::filesystem::path dir_;
  std::size_t served_ = 0;
};

/// Forwards to another client and records every exchange.
class RecordingGllm : public GllmClient {
 public:
  RecordingGllm(GllmClient& inner, std::filesystem::path dir) : inner_(inner), dir_(std::move(dir)) {}

  std::string complete(const std::string& prompt) override {
    std::string reply = inner_.complete(prompt);
    write_fixture(dir_, prompt, reply);
    return reply;
  }

 private:
  GllmClient& inner_;
  std::filesystem::path dir_;
};

struct GllmConfig {
  std::string endpoint;  // base URL of an OpenAI-compatible server
  std::string model = "default";
  std::string auth_env;
  double timeout_s = 120.0;
  int retries = 1;
  int max_tokens = 4096;
  double temperature = 0.0;

  void validate() const {
    if (endpoint.empty()) throw Error(ErrorKind::InvalidArgument, "GLLM endpoint is empty");
    if (!(timeout_s > 0)) throw Error(ErrorKind::InvalidArgument, "GLLM timeout must be positive");
    if (retries < 0) throw Error(ErrorKind::InvalidArgument, "GLLM retries must be non-negative");
  }
};

/// POST /v1/chat/completions with a single user message.
class RemoteGllm : public GllmClient {
 public:
  explicit RemoteGllm(GllmConfig config) : config_(std::move(config)) { config_.validate(); }

  std::string complete(const std::string& prompt) override {
    nlohmann::json body = {{"model", config_.model},
                           {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
                           {"max_tokens", config_.max_tokens},
                           {"temperature", config_.temperature}};
    httplib::Headers headers;
    if (!config_.auth_env.empty()) {
      if (const char* tok = std::getenv(config_.auth_env.c_str())) {
        headers.emplace("Authorization", std::string("Bearer ") + tok);
      }
    }
    const std::string payload = body.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
    auto secs = static_cast<time_t>(config_.timeout_s);
    auto usecs = static_cast<time_t>((config_.timeout_s - static_cast<double>(secs)) * 1e6);
    std::string last_error;
    for (int attempt = 0; attempt <= config_.retries; ++attempt) {
      httplib::Client cli(config_.endpoint);
      cli.set_connection_timeout(secs, usecs);
      cli.set_read_timeout(secs, usecs);
      cli.set_write_timeout(secs, usecs);
      auto res = cli.Post("/v1/chat/completions", headers, payload, "application/json");
      if (!res) {
        last_error = httplib::to_string(res.error());
        continue;
      }
      if (res->status < 200 || res->status >= 300) {
        throw Error(ErrorKind::GllmTransport, "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
      }
      try {
        auto j = nlohmann::json::parse(res->body);
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
      } catch (const nlohmann::json::exception& e) {
        last_error = std::string("malformed reply: ") + e.what();
      }
    }
    throw Error(ErrorKind::GllmTransport,
                "chat completion failed after " + std::to_string(config_.retries + 1) + " attempt(s): " + last_error);
  }

 private:
  GllmConfig config_;
};

}  // namespace scidc::compiler
