#pragma once

/**
 * @file stub_server.hpp
 * @brief Reference inference server speaking the remote wire protocol over
 * any in-process backend (normally a MockBackend).
 *
 * /v1/logits forwards to the wrapped backend; the optional "span" field is
 * turned back into begin_span() calls so scripted mocks behave exactly as
 * they do in process. /v1/generate and /v1/select decode greedily from the
 * wrapped backend's scores. Faults can be injected for client tests.
 */

#include <atomic>
#include <functional>
#include <optional>
#include <chrono>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "scidc/backend/backend.hpp"
#include "scidc/token/automaton.hpp"
#include "scidc/token/vocabulary.hpp"

namespace scidc::backend {

struct StubFaults {
  int delay_ms = 0;           // sleep before answering
  int fail_status = 0;        // nonzero: answer every request with this status
  bool wrong_length = false;  // drop the last logit
  bool logits_enabled = true; // false: /v1/logits is refused (degraded server)
};

namespace detail {

/// Greedy unconstrained continuation of `context` under `backend`.
inline std::string greedy_generate(DecoderBackend& backend, const token::Vocabulary& vocab,
                                   std::vector<TokenId> context, const GenerateParams& params) {
  std::vector<float> scores;
  std::string text;
  const auto eos = vocab.eos();
  for (int i = 0; i < params.max_tokens; ++i) {
    backend.next_logits(context, scores);
    TokenId best = -1;
    for (std::size_t t = 0; t < vocab.size(); ++t) {
      auto id = static_cast<TokenId>(t);
      if (vocab.is_special(id) && id != eos) continue;
      if (best < 0 || scores[t] > scores[static_cast<std::size_t>(best)]) best = id;
    }
    if (best < 0 || best == eos) break;
    context.push_back(best);
    text += vocab.bytes(best);
    if (params.stop && !params.stop->empty()) {
      auto pos = text.find(*params.stop);
      if (pos != std::string::npos) {
        text.resize(pos);
        break;
      }
    }
  }
  return text;
}

/// Greedy walk through the option automaton; returns the chosen option index.
inline std::size_t greedy_select(DecoderBackend& backend, const token::Vocabulary& vocab,
                                 std::vector<TokenId> context, const std::vector<std::string>& options) {
  token::TokenAutomaton a = token::compile_select(options, vocab);
  std::vector<float> scores;
  token::StateId s = a.start();
  std::string text;
  const auto eos = vocab.eos();
  while (true) {
    const auto& edges = a.edges(s);
    if (edges.empty()) break;
    backend.next_logits(context, scores);
    TokenId best = -1;
    token::StateId next = -1;
    for (const auto& e : edges) {
      if (best < 0 || scores[static_cast<std::size_t>(e.token)] > scores[static_cast<std::size_t>(best)]) {
        best = e.token;
        next = e.target;
      }
    }
    if (a.is_accepting(s) && eos && scores[static_cast<std::size_t>(*eos)] > scores[static_cast<std::size_t>(best)]) break;
    context.push_back(best);
    text += vocab.bytes(best);
    s = next;
  }
  for (std::size_t i = 0; i < options.size(); ++i) {
    if (options[i] == text) return i;
  }
  throw Error(ErrorKind::InvalidTransition, "select walk ended outside the option set");
}

}  // namespace detail

class StubServer {
 public:
  StubServer(std::shared_ptr<DecoderBackend> backend, std::shared_ptr<const token::Vocabulary> vocab,
             StubFaults faults = {})
      : backend_(std::move(backend)), vocab_(std::move(vocab)), faults_(faults) {
    install_routes();
  }

  ~StubServer() { stop(); }

  StubServer(const StubServer&) = delete;
  StubServer& operator=(const StubServer&) = delete;

  /// Binds (port 0 picks a free port), starts serving on a background thread
  /// and returns the bound port.
  int start(const std::string& host = "127.0.0.1", int port = 0) {
    port_ = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
    if (port_ < 0) throw Error(ErrorKind::IoError, "cannot bind " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return port_;
  }

  /// Serves on the calling thread until stop() is called elsewhere.
  void serve_forever(const std::string& host, int port) {
    if (!server_.listen(host, port)) throw Error(ErrorKind::IoError, "cannot listen on " + host + ":" + std::to_string(port));
  }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  int port() const { return port_; }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }
  std::size_t requests() const { return requests_.load(); }

 private:
  std::shared_ptr<DecoderBackend> backend_;
  std::shared_ptr<const token::Vocabulary> vocab_;
  StubFaults faults_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = -1;
  std::mutex mu_;
  std::atomic<std::size_t> requests_{0};
  std::optional<std::uint64_t> last_span_;
  std::uint64_t local_spans_ = 1ull << 62;

  using Handler = std::function<nlohmann::json(const nlohmann::json&)>;

  void route(const std::string& path, Handler h) {
    server_.Post(path, [this, h](const httplib::Request& req, httplib::Response& res) {
      ++requests_;
      if (faults_.delay_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(faults_.delay_ms));
      if (faults_.fail_status != 0) {
        res.status = faults_.fail_status;
        res.set_content("{\"error\":\"injected failure\"}", "application/json");
        return;
      }
      try {
        nlohmann::json body = nlohmann::json::parse(req.body);
        std::lock_guard<std::mutex> lock(mu_);
        nlohmann::json out = h(body);
        res.set_content(out.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace), "application/json");
      } catch (const nlohmann::json::exception& e) {
        res.status = 400;
        res.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
      } catch (const Error& e) {
        res.status = 422;
        res.set_content(nlohmann::json{{"error", e.what()}}.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace),
                        "application/json");
      }
    });
  }

  void local_span(std::size_t context_length) {
    backend_->begin_span({"", context_length, local_spans_++});
  }

  void install_routes() {
    route("/v1/logits", [this](const nlohmann::json& body) -> nlohmann::json {
      if (!faults_.logits_enabled) throw Error(ErrorKind::CapabilityError, "logits endpoint disabled");
      auto context = body.at("context").get<std::vector<TokenId>>();
      if (body.contains("span")) {
        const auto& sp = body["span"];
        auto id = sp.at("id").get<std::uint64_t>();
        if (!last_span_ || *last_span_ != id) {
          last_span_ = id;
          backend_->begin_span({sp.value("step", ""), sp.at("start").get<std::size_t>(), id});
        }
      }
      std::vector<float> scores;
      backend_->next_logits(context, scores);
      if (faults_.wrong_length && !scores.empty()) scores.pop_back();
      return {{"logits", scores}};
    });
    route("/v1/generate", [this](const nlohmann::json& body) -> nlohmann::json {
      GenerateParams p;
      p.max_tokens = body.value("max_tokens", 256);
      p.temperature = body.value("temperature", 0.0);
      if (body.contains("stop") && body["stop"].is_string()) p.stop = body["stop"].get<std::string>();
      auto context = vocab_->tokenize(body.at("prompt").get<std::string>(), true);
      local_span(context.size());
      return {{"text", detail::greedy_generate(*backend_, *vocab_, context, p)}};
    });
    route("/v1/select", [this](const nlohmann::json& body) -> nlohmann::json {
      auto context = body.at("context").get<std::vector<TokenId>>();
      auto options = body.at("options").get<std::vector<std::string>>();
      local_span(context.size());
      return {{"index", detail::greedy_select(*backend_, *vocab_, context, options)}};
    });
  }
};

}  // namespace scidc::backend
