#pragma once

/**
 * @file engine.hpp
 * @brief Executes a rule program against a decoder backend.
 *
 * Context model: the context is the prompt followed by a list of segments.
 * Every step appends at most one segment (scaffolding, generated span,
 * injected retry text, or fallback text); a backtrack truncates the list to a
 * snapshot taken when the anchor step started. The output is the
 * concatenation of all non-injected segment texts.
 *
 * Per Gen/Select token: scores come from the backend for the full context,
 * the automaton's valid set masks them, the step's policy picks a token, and
 * the automaton advances. End-of-sequence competes with continuations only
 * in accepting states; regex spans also drop continuations that could not
 * reach acceptance within the remaining token budget.
 *
 * Validate loops: max_retries counts attempts. After a failed check with
 * attempts left, the engine restores the anchor snapshot (the anchor step
 * itself is re-executed), injects the rendered retry message, and re-runs
 * the span with the seed shifted by the run's backtrack count. The failure
 * that uses up the last attempt applies the fallback assignments instead.
 */

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "scidc/backend/backend.hpp"
#include "scidc/engine/policy.hpp"
#include "scidc/engine/trace.hpp"
#include "scidc/ir/lint.hpp"
#include "scidc/ir/predicate.hpp"
#include "scidc/ir/program.hpp"
#include "scidc/token/automaton.hpp"
#include "scidc/token/mask.hpp"
#include "scidc/token/vocabulary.hpp"

namespace scidc::engine {

/// Called after every constrained token choice with the raw scores, the
/// masked scores and the chosen token.
using MaskObserver =
    std::function<void(const std::string& step, std::span<const float> raw, const token::MaskedLogits& masked, TokenId chosen)>;

struct EngineOptions {
  bool lint_before_run = true;     // refuse programs with ERROR findings
  bool abort_on_error = false;     // report errors as termination Aborted instead of throwing
  bool record_masks = true;        // emit MaskApplied events
  bool check_vocabulary = true;    // backend vocab_id must match the vocabulary fingerprint
  MaskObserver observer;
};

enum class SegmentKind { Scaffold, Generated, Injected, Fallback };

inline const char* segment_kind_name(SegmentKind k) {
  switch (k) {
    case SegmentKind::Scaffold: return "scaffold";
    case SegmentKind::Generated: return "generated";
    case SegmentKind::Injected: return "injected";
    case SegmentKind::Fallback: return "fallback";
  }
  return "?";
}

struct Segment {
  std::string step;
  SegmentKind kind = SegmentKind::Scaffold;
  std::vector<TokenId> tokens;
  std::string text;
  std::int64_t sampled = 0;  // tokens chosen by the policy for this segment
};

/// Fallback literal as it appears in the output for a Gen with regex+stop.
inline std::string gen_segment_text(const ir::GenBody& g, const std::string& value) {
  return (g.regex && g.stop) ? value + *g.stop : value;
}

class Engine {
 public:
  Engine(ir::RuleProgram program, std::shared_ptr<const token::Vocabulary> vocab, EngineOptions options = {})
      : program_(std::move(program)), vocab_(std::move(vocab)), options_(std::move(options)) {
    if (!vocab_) throw Error(ErrorKind::InvalidArgument, "engine needs a vocabulary");
    if (options_.lint_before_run) {
      auto findings = ir::lint_program(program_, vocab_.get());
      if (ir::has_errors(findings)) {
        std::string msg;
        for (const auto& f : findings) {
          if (f.severity != ir::Severity::Error) continue;
          if (!msg.empty()) msg += "; ";
          msg += ir::format_finding(f);
        }
        throw Error(ErrorKind::LintErrors, msg);
      }
    }
    for (std::size_t i = 0; i < vocab_->size(); ++i) {
      auto id = static_cast<TokenId>(i);
      if (!vocab_->is_special(id) || id == vocab_->eos()) free_allowed_.push_back(id);
    }
  }

  const ir::RuleProgram& program() const { return program_; }
  const token::Vocabulary& vocab() const { return *vocab_; }
  std::shared_ptr<const token::Vocabulary> vocab_ptr() const { return vocab_; }

  RunResult run(backend::DecoderBackend& backend, std::string_view prompt, std::uint64_t seed) {
    Run r(*this, backend, seed);
    return r.execute(prompt);
  }

  /// Compiled automaton for a regex (cached per engine).
  std::shared_ptr<const token::TokenAutomaton> regex_automaton(const std::string& pattern) {
    return cached("r\x1f" + pattern, [&] { return token::compile_regex(pattern, *vocab_); });
  }

  /// Compiled automaton for an option list (cached per engine).
  std::shared_ptr<const token::TokenAutomaton> select_automaton(const std::vector<std::string>& options) {
    std::string key = "s";
    for (const auto& o : options) key += "\x1f" + o;
    return cached(key, [&] { return token::compile_select(options, *vocab_); });
  }

 private:
  ir::RuleProgram program_;
  std::shared_ptr<const token::Vocabulary> vocab_;
  EngineOptions options_;
  std::vector<TokenId> free_allowed_;
  std::mutex cache_mu_;
  std::map<std::string, std::shared_ptr<const token::TokenAutomaton>> cache_;

  template <typename Build>
  std::shared_ptr<const token::TokenAutomaton> cached(const std::string& key, Build&& build) {
    {
      std::lock_guard<std::mutex> lock(cache_mu_);
      auto it = cache_.find(key);
      if (it != cache_.end()) return it->second;
    }
    auto a = std::make_shared<const token::TokenAutomaton>(build());
    std::lock_guard<std::mutex> lock(cache_mu_);
    return cache_.emplace(key, std::move(a)).first->second;
  }

  /// State of one run.
  class Run {
   public:
    Run(Engine& e, backend::DecoderBackend& b, std::uint64_t seed) : eng_(e), backend_(b), seed_(seed) {}

    RunResult execute(std::string_view prompt) {
      RunResult result;
      try {
        auto caps = backend_.capabilities();
        if (eng_.options_.check_vocabulary && !caps.vocab_id.empty() && caps.vocab_id != eng_.vocab_->fingerprint()) {
          throw Error(ErrorKind::InvalidArgument, "backend vocabulary " + caps.vocab_id +
                                                      " does not match the engine vocabulary " + eng_.vocab_->fingerprint());
        }
        logits_mode_ = caps.supports_logits;
        prompt_tokens_ = eng_.vocab_->tokenize(prompt, true);
        context_ = prompt_tokens_;
        exec_list(eng_.program_.steps);
      } catch (const Error& e) {
        if (!eng_.options_.abort_on_error) throw;
        result.termination = Termination::Aborted;
        result.abort_reason = e.what();
      } catch (const std::exception& e) {
        if (!eng_.options_.abort_on_error) throw Error(ErrorKind::BackendFailure, e.what());
        result.termination = Termination::Aborted;
        result.abort_reason = std::string(kind_name(ErrorKind::BackendFailure)) + ": " + e.what();
      }
      for (const auto& s : segments_) {
        if (s.kind == SegmentKind::Injected) continue;
        result.output += s.text;
        if (s.kind == SegmentKind::Generated) trace_.counters.output += s.sampled;
        if (s.kind == SegmentKind::Scaffold) trace_.counters.scaffold += static_cast<std::int64_t>(s.tokens.size());
        if (s.kind == SegmentKind::Fallback) trace_.counters.fallback += static_cast<std::int64_t>(s.tokens.size());
      }
      if (result.termination != Termination::Aborted) {
        result.termination = fallback_used_ ? Termination::FallbackCompleted : Termination::Completed;
      }
      result.bindings = bindings_;
      result.trace = std::move(trace_);
      return result;
    }

   private:
    struct Snapshot {
      std::size_t segments = 0;
      std::size_t context = 0;
      Bindings bindings;
    };

    Engine& eng_;
    backend::DecoderBackend& backend_;
    std::uint64_t seed_;
    bool logits_mode_ = true;
    bool fallback_used_ = false;
    std::uint64_t span_counter_ = 0;
    std::vector<TokenId> prompt_tokens_;
    std::vector<TokenId> context_;
    std::vector<Segment> segments_;
    Bindings bindings_;
    DecodeTrace trace_;
    std::vector<float> scores_;
    token::MaskedLogits masked_;
    std::vector<TokenId> valid_;

    // -- helpers ---------------------------------------------------------------

    void event(EventType t, const std::string& step, std::string detail = {}, std::string text = {},
               std::int64_t count = 0, std::int64_t extra = 0, std::vector<TokenId> tokens = {}) {
      Event e;
      e.type = t;
      e.step = step;
      e.detail = std::move(detail);
      e.text = std::move(text);
      e.count = count;
      e.extra = extra;
      e.tokens = std::move(tokens);
      trace_.events.push_back(std::move(e));
    }

    void append_segment(Segment seg) {
      context_.insert(context_.end(), seg.tokens.begin(), seg.tokens.end());
      event(EventType::TokensEmitted, seg.step, segment_kind_name(seg.kind), seg.text, 0, 0, seg.tokens);
      segments_.push_back(std::move(seg));
    }

    Snapshot snapshot() const { return {segments_.size(), context_.size(), bindings_}; }

    /// Restores `snap`; returns the number of tokens erased from the context.
    std::int64_t restore(const Snapshot& snap) {
      std::int64_t erased = static_cast<std::int64_t>(context_.size() - snap.context);
      for (std::size_t i = snap.segments; i < segments_.size(); ++i) trace_.counters.discarded += segments_[i].sampled;
      segments_.resize(snap.segments);
      context_.resize(snap.context);
      bindings_ = snap.bindings;
      return erased;
    }

    void rebuild_context() {
      context_ = prompt_tokens_;
      for (const auto& s : segments_) context_.insert(context_.end(), s.tokens.begin(), s.tokens.end());
    }

    ir::VarLookup lookup() const {
      return [this](const std::string& name) { return bindings_.find(name); };
    }

    std::uint64_t step_seed(const std::string& step) const {
      return text::splitmix64(seed_ + static_cast<std::uint64_t>(trace_.counters.regenerations)) ^ text::fnv1a(step);
    }

    void fetch_scores() {
      backend_.next_logits(context_, scores_);
      ++trace_.counters.backend_calls;
      if (scores_.size() != eng_.vocab_->size()) {
        throw Error(ErrorKind::BackendFailure, "shape mismatch: expected " + std::to_string(eng_.vocab_->size()) +
                                                   " scores, got " + std::to_string(scores_.size()));
      }
    }

    /// Masks the current scores with valid_ and picks a token.
    TokenId choose(const std::string& step, const DecodeMode& mode, Rng& rng) {
      token::apply_mask_into(scores_, valid_, masked_);
      if (eng_.options_.record_masks) event(EventType::MaskApplied, step, {}, {}, static_cast<std::int64_t>(valid_.size()));
      TokenId t = decode_policy(masked_, mode, rng);
      if (eng_.options_.observer) eng_.options_.observer(step, scores_, masked_, t);
      return t;
    }

    void begin_span(const std::string& step) {
      backend_.begin_span({step, context_.size(), span_counter_++});
    }

    // -- step execution --------------------------------------------------------

    void exec_list(const std::vector<ir::Step>& steps) {
      // Indices of steps that anchor a later validate loop in this list.
      std::map<std::size_t, std::size_t> anchor_of_loop;  // loop index -> anchor index
      std::vector<bool> is_anchor(steps.size(), false);
      for (std::size_t i = 0; i < steps.size(); ++i) {
        if (steps[i].kind() != ir::StepKind::ValidateLoop) continue;
        const auto& v = steps[i].validate();
        if (!v.anchor) continue;
        for (std::size_t j = 0; j < i; ++j) {
          if (steps[j].name == *v.anchor) {
            anchor_of_loop[i] = j;
            is_anchor[j] = true;
          }
        }
      }
      std::map<std::size_t, Snapshot> snaps;
      std::map<std::size_t, int> failures;
      std::optional<std::size_t> resume_at;  // anchor re-entered after a backtrack
      std::size_t i = 0;
      while (i < steps.size()) {
        const ir::Step& s = steps[i];
        if (is_anchor[i] && resume_at != i) snaps[i] = snapshot();
        resume_at.reset();
        if (s.kind() != ir::StepKind::ValidateLoop) {
          exec_step(s);
          ++i;
          continue;
        }
        event(EventType::StepStarted, s.name, ir::step_kind_name(s.kind()));
        const auto& v = s.validate();
        if (!v.predicate) throw Error(ErrorKind::InvalidProgram, "validate '" + s.name + "' has no predicate");
        if (!v.max_retries || *v.max_retries < 1) {
          throw Error(ErrorKind::InvalidProgram, "validate '" + s.name + "' needs max_retries >= 1");
        }
        auto anchor_it = anchor_of_loop.find(i);
        if (anchor_it == anchor_of_loop.end()) {
          throw Error(ErrorKind::AnchorOrder, "anchor of '" + s.name + "' is not an earlier step at the same level");
        }
        if (ir::evaluate_bool(*v.predicate, lookup())) {
          event(EventType::StepCompleted, s.name);
          ++i;
          continue;
        }
        int& fails = failures[i];
        ++fails;
        event(EventType::ValidationFailed, s.name, ir::to_string(*v.predicate), {}, fails);
        if (fails < *v.max_retries) {
          const std::size_t a = anchor_it->second;
          std::string message = v.retry_message ? render_retry(*v.retry_message, fails) : std::string();
          std::int64_t erased = restore(snaps.at(a));
          ++trace_.counters.regenerations;
          for (auto it = failures.begin(); it != failures.end();) {
            it = (it->first > a && it->first < i) ? failures.erase(it) : std::next(it);
          }
          std::int64_t injected = 0;
          if (!message.empty()) {
            Segment seg;
            seg.step = s.name;
            seg.kind = SegmentKind::Injected;
            seg.tokens = eng_.vocab_->tokenize(message, true);
            seg.text = message;
            injected = static_cast<std::int64_t>(seg.tokens.size());
            trace_.counters.injected += injected;
            append_segment(std::move(seg));
          }
          event(EventType::BacktrackPerformed, s.name, steps[a].name, {}, erased, injected);
          resume_at = a;
          i = a;
          continue;
        }
        apply_fallback(s, v);
        event(EventType::StepCompleted, s.name);
        ++i;
      }
    }

    std::string render_retry(const std::string& tmpl, int attempt) const {
      std::string out;
      for (const auto& piece : ir::split_retry_message(tmpl)) {
        if (!piece.placeholder) {
          out += piece.text;
        } else if (piece.text == "retry") {
          out += std::to_string(attempt);
        } else if (const std::string* v = bindings_.find(piece.text)) {
          out += *v;
        } else {
          throw Error(ErrorKind::UnboundVariable, piece.text + " (in retry message)");
        }
      }
      return out;
    }

    void apply_fallback(const ir::Step& loop, const ir::ValidateBody& v) {
      bool rewrote = false;
      for (const auto& fa : v.fallback) {
        auto it = std::find_if(segments_.rbegin(), segments_.rend(), [&](const Segment& seg) {
          return seg.step == fa.variable && (seg.kind == SegmentKind::Generated || seg.kind == SegmentKind::Fallback);
        });
        if (it == segments_.rend()) continue;  // the binding step did not run on this pass
        const ir::Step* target = ir::find_step(eng_.program_.steps, fa.variable);
        std::string text = fa.value;
        if (target && target->kind() == ir::StepKind::Gen) text = gen_segment_text(target->gen(), fa.value);
        trace_.counters.discarded += it->sampled;
        it->sampled = 0;
        it->kind = SegmentKind::Fallback;
        it->text = text;
        it->tokens = eng_.vocab_->tokenize(text);
        bindings_.set(fa.variable, fa.value);
        rewrote = true;
        fallback_used_ = true;
        event(EventType::FallbackApplied, loop.name, fa.variable, fa.value);
      }
      if (rewrote) rebuild_context();
    }

    void exec_step(const ir::Step& s) {
      event(EventType::StepStarted, s.name, ir::step_kind_name(s.kind()));
      switch (s.kind()) {
        case ir::StepKind::EmitFixed: {
          Segment seg;
          seg.step = s.name;
          seg.kind = SegmentKind::Scaffold;
          seg.text = s.emit().text;
          seg.tokens = eng_.vocab_->tokenize(seg.text, true);
          append_segment(std::move(seg));
          break;
        }
        case ir::StepKind::Gen: exec_gen(s); break;
        case ir::StepKind::Select: exec_select(s); break;
        case ir::StepKind::Branch: {
          const auto& b = s.branch();
          bool taken = false;
          for (const auto& arm : b.arms) {
            if (ir::evaluate_bool(arm.guard, lookup())) {
              exec_list(arm.steps);
              taken = true;
              break;
            }
          }
          if (!taken && b.otherwise) exec_list(*b.otherwise);
          break;
        }
        case ir::StepKind::ValidateLoop: break;  // handled by exec_list
      }
      event(EventType::StepCompleted, s.name);
    }

    void exec_gen(const ir::Step& s) {
      const auto& g = s.gen();
      if (!g.regex && !g.stop) throw Error(ErrorKind::InvalidProgram, "gen '" + s.name + "' has neither regex nor stop");
      if (!g.max_tokens || *g.max_tokens <= 0) {
        throw Error(ErrorKind::InvalidProgram, "gen '" + s.name + "' needs max_tokens > 0");
      }
      const int budget = *g.max_tokens;
      const DecodeMode mode = DecodeMode::from_temperature(g.temperature.value_or(0.0));
      Rng rng(step_seed(s.name));
      begin_span(s.name);

      if (!logits_mode_) {
        if (g.regex) throw Error(ErrorKind::CapabilityError, "regex gen '" + s.name + "' needs a logits endpoint");
        backend::GenerateParams p;
        p.max_tokens = budget;
        p.temperature = g.temperature.value_or(0.0);
        p.stop = g.stop;
        std::string text = backend_.generate(eng_.vocab_->detokenize(context_), p);
        if (g.stop && !g.stop->empty()) {
          auto pos = text.find(*g.stop);
          if (pos != std::string::npos) text.resize(pos);
        }
        Segment seg;
        seg.step = s.name;
        seg.kind = SegmentKind::Generated;
        seg.tokens = eng_.vocab_->tokenize(text);
        seg.text = text;
        seg.sampled = static_cast<std::int64_t>(seg.tokens.size());
        trace_.counters.emitted += seg.sampled;
        bindings_.set(s.name, text);
        append_segment(std::move(seg));
        return;
      }

      if (!g.regex) {
        exec_free_gen(s, *g.stop, budget, mode, rng);
        return;
      }

      std::string pattern = *g.regex;
      if (g.stop && !g.stop->empty()) pattern = "(?:" + pattern + ")" + token::regex_escape(*g.stop);
      auto automaton = eng_.regex_automaton(pattern);
      std::vector<TokenId> emitted = walk(s.name, *automaton, budget, mode, rng);
      std::string text = eng_.vocab_->detokenize(emitted);
      std::string value = text;
      if (g.stop && !g.stop->empty()) value.resize(value.size() - g.stop->size());
      Segment seg;
      seg.step = s.name;
      seg.kind = SegmentKind::Generated;
      seg.sampled = static_cast<std::int64_t>(emitted.size());
      seg.tokens = std::move(emitted);
      seg.text = std::move(text);
      bindings_.set(s.name, value);
      // walk() pushed the tokens onto the context already
      context_.resize(context_.size() - seg.tokens.size());
      append_segment(std::move(seg));
    }

    /// Decodes one span through `a`. Tokens are appended to the context as
    /// they are chosen and returned. `budget` < 0 means unbounded.
    std::vector<TokenId> walk(const std::string& step, const token::TokenAutomaton& a, int budget, const DecodeMode& mode,
                              Rng& rng) {
      std::vector<TokenId> out;
      token::StateId state = a.start();
      const auto eos = eng_.vocab_->eos();
      while (true) {
        const auto& edges = a.edges(state);
        const bool accepting = a.is_accepting(state);
        const int remaining = budget < 0 ? -1 : budget - static_cast<int>(out.size());
        valid_.clear();
        for (const auto& e : edges) {
          if (remaining < 0 || a.distance_to_accept(e.target) <= remaining - 1) valid_.push_back(e.token);
        }
        if (valid_.empty()) {
          if (accepting) break;
          if (!edges.empty()) {
            throw Error(ErrorKind::MaxTokensInNonAcceptingState,
                        "step '" + step + "' has " + std::to_string(remaining) + " token(s) left and needs " +
                            std::to_string(a.distance_to_accept(state)));
          }
          throw Error(ErrorKind::UnsatisfiableConstraint, "step '" + step + "': no valid token");
        }
        if (accepting) {
          if (!eos) break;  // without an end-of-sequence token the shortest match wins
          valid_.insert(std::upper_bound(valid_.begin(), valid_.end(), *eos), *eos);
        }
        fetch_scores();
        TokenId t = choose(step, mode, rng);
        if (accepting && t == *eos) break;
        state = a.advance(state, t);
        out.push_back(t);
        context_.push_back(t);
        ++trace_.counters.emitted;
      }
      return out;
    }

    void exec_free_gen(const ir::Step& s, const std::string& stop, int budget, const DecodeMode& mode, Rng& rng) {
      const auto eos = eng_.vocab_->eos();
      std::vector<TokenId> emitted;
      std::string text;
      bool stopped = false;
      valid_ = eng_.free_allowed_;
      while (static_cast<int>(emitted.size()) < budget) {
        fetch_scores();
        TokenId t = choose(s.name, mode, rng);
        if (eos && t == *eos) break;
        emitted.push_back(t);
        context_.push_back(t);
        ++trace_.counters.emitted;
        std::size_t before = text.size();
        text += eng_.vocab_->bytes(t);
        if (!stop.empty()) {
          std::size_t from = before >= stop.size() ? before - stop.size() + 1 : 0;
          auto pos = text.find(stop, from);
          if (pos != std::string::npos) {
            text.resize(pos);
            stopped = true;
            break;
          }
        }
      }
      context_.resize(context_.size() - emitted.size());
      Segment seg;
      seg.step = s.name;
      seg.kind = SegmentKind::Generated;
      seg.sampled = static_cast<std::int64_t>(emitted.size());
      seg.text = text;
      if (stopped) {
        // The stop string is not part of the span; re-spell what is kept.
        try {
          seg.tokens = eng_.vocab_->tokenize(text);
        } catch (const Error&) {
          seg.tokens = emitted;
        }
      } else {
        seg.tokens = std::move(emitted);
      }
      bindings_.set(s.name, text);
      append_segment(std::move(seg));
    }

    void exec_select(const ir::Step& s) {
      const auto& sel = s.select();
      const std::vector<std::string>* options = &sel.options;
      if (sel.dynamic) {
        options = &sel.dynamic->otherwise;
        for (const auto& g : sel.dynamic->guards) {
          if (ir::evaluate_bool(g.guard, lookup())) {
            options = &g.options;
            break;
          }
        }
      }
      if (options->empty()) throw Error(ErrorKind::InvalidProgram, "select '" + s.name + "' has no options");
      const DecodeMode mode = DecodeMode::from_temperature(sel.temperature.value_or(0.0));
      Rng rng(step_seed(s.name));
      begin_span(s.name);
      Segment seg;
      seg.step = s.name;
      seg.kind = SegmentKind::Generated;
      if (!logits_mode_) {
        for (const auto& o : *options) {
          if (!eng_.vocab_->spellable(o)) throw Error(ErrorKind::UntokenizableOption, "\"" + token::escape_token_bytes(o) + "\"");
        }
        std::size_t idx = backend_.choose_option(context_, *options);
        seg.text = (*options)[idx];
        seg.tokens = eng_.vocab_->tokenize(seg.text);
        seg.sampled = static_cast<std::int64_t>(seg.tokens.size());
        trace_.counters.emitted += seg.sampled;
      } else {
        auto automaton = eng_.select_automaton(*options);
        seg.tokens = walk(s.name, *automaton, -1, mode, rng);
        context_.resize(context_.size() - seg.tokens.size());
        seg.text = eng_.vocab_->detokenize(seg.tokens);
        seg.sampled = static_cast<std::int64_t>(seg.tokens.size());
      }
      bindings_.set(s.name, seg.text);
      append_segment(std::move(seg));
    }
  };
};

/// One-shot convenience wrapper.
inline RunResult run(const ir::RuleProgram& program, std::shared_ptr<const token::Vocabulary> vocab,
                     backend::DecoderBackend& backend, std::string_view prompt, std::uint64_t seed,
                     EngineOptions options = {}) {
  Engine engine(program, std::move(vocab), std::move(options));
  return engine.run(backend, prompt, seed);
}

}  // namespace scidc::engine
