#pragma once

/**
 * @file lint.hpp
 * @brief Structural validator for rule programs.
 *
 * lint_program() never throws on a bad program; every problem becomes a
 * Finding. ERROR findings mark programs the engine refuses to run (or would
 * fail on: unbound variables, misplaced anchors, type errors). WARNING
 * findings are heuristics: unreachable guards, constant-true validations, and
 * single-option selects followed by free generation.
 *
 * Passing a Vocabulary enables the token-level checks: scaffolding and option
 * spellability, regex languages non-empty under the vocabulary, and token
 * budgets large enough to reach acceptance.
 */

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "scidc/ir/predicate.hpp"
#include "scidc/ir/program.hpp"
#include "scidc/token/automaton.hpp"
#include "scidc/token/regex.hpp"
#include "scidc/token/vocabulary.hpp"

namespace scidc::ir {

enum class Severity { Error, Warning };

inline const char* severity_name(Severity s) { return s == Severity::Error ? "ERROR" : "WARNING"; }

struct Finding {
  Severity severity = Severity::Error;
  std::string step;
  std::string message;

  bool operator==(const Finding&) const = default;
};

inline bool has_errors(const std::vector<Finding>& findings) {
  return std::any_of(findings.begin(), findings.end(), [](const Finding& f) { return f.severity == Severity::Error; });
}

inline std::string format_finding(const Finding& f) {
  return std::string(severity_name(f.severity)) + " [" + (f.step.empty() ? "<program>" : f.step) + "] " + f.message;
}

inline constexpr int kMaxBranchDepth = 4;

/// Piece of a retry message: literal text or a {name} placeholder.
struct RetryPiece {
  bool placeholder = false;
  std::string text;  // literal text, or the placeholder name
};

inline std::vector<RetryPiece> split_retry_message(std::string_view msg) {
  std::vector<RetryPiece> out;
  std::string literal;
  std::size_t i = 0;
  while (i < msg.size()) {
    if (msg[i] == '{') {
      std::size_t j = msg.find('}', i + 1);
      if (j != std::string_view::npos) {
        std::string_view name = msg.substr(i + 1, j - i - 1);
        bool ident = !name.empty() && !(name[0] >= '0' && name[0] <= '9');
        for (char c : name) {
          ident = ident && ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_');
        }
        if (ident) {
          if (!literal.empty()) out.push_back({false, std::move(literal)});
          literal.clear();
          out.push_back({true, std::string(name)});
          i = j + 1;
          continue;
        }
      }
    }
    literal += msg[i++];
  }
  if (!literal.empty()) out.push_back({false, std::move(literal)});
  return out;
}

/// Names appearing as {name} in a retry message.
inline std::vector<std::string> retry_placeholders(std::string_view msg) {
  std::vector<std::string> out;
  for (auto& p : split_retry_message(msg)) {
    if (p.placeholder) out.push_back(std::move(p.text));
  }
  return out;
}

/// Literal stretches of a retry message.
inline std::vector<std::string> retry_literals(std::string_view msg) {
  std::vector<std::string> out;
  for (auto& p : split_retry_message(msg)) {
    if (!p.placeholder) out.push_back(std::move(p.text));
  }
  return out;
}

/// Static type of the value a Gen/Select step binds.
inline VarType binding_type(const Step& s) {
  if (s.kind() == StepKind::Gen) {
    const auto& g = s.gen();
    if (!g.regex) return VarType::Text;
    try {
      token::CharDfa dfa = token::compile_char_dfa(*g.regex);
      return token::dfa_subset(dfa, token::numeric_dfa()) ? VarType::Numeric : VarType::Text;
    } catch (const Error&) {
      return VarType::Text;
    }
  }
  if (s.kind() == StepKind::Select) {
    const auto& sel = s.select();
    std::vector<const std::vector<std::string>*> lists;
    if (sel.dynamic) {
      for (const auto& g : sel.dynamic->guards) lists.push_back(&g.options);
      lists.push_back(&sel.dynamic->otherwise);
    } else {
      lists.push_back(&sel.options);
    }
    bool any = false;
    for (const auto* l : lists) {
      for (const auto& o : *l) {
        if (!text::is_decimal(o)) return VarType::Text;
        any = true;
      }
    }
    return any ? VarType::Numeric : VarType::Text;
  }
  return VarType::Text;
}

namespace detail {

class Linter {
 public:
  Linter(const RuleProgram& p, const token::Vocabulary* vocab) : program_(p), vocab_(vocab) {}

  std::vector<Finding> run() {
    std::set<std::string> seen;
    for_each_step(program_.steps, [&](const Step& s) {
      if (!seen.insert(s.name).second) error(s.name, "DuplicateStepName: step name is used more than once");
    });
    if (program_.steps.empty()) error("", "program has no steps");
    Env env;
    walk(program_.steps, env, 0);
    return std::move(findings_);
  }

 private:
  using Env = std::map<std::string, VarType>;

  const RuleProgram& program_;
  const token::Vocabulary* vocab_;
  std::vector<Finding> findings_;

  void error(const std::string& step, std::string msg) { findings_.push_back({Severity::Error, step, std::move(msg)}); }
  void warn(const std::string& step, std::string msg) { findings_.push_back({Severity::Warning, step, std::move(msg)}); }

  void check_predicate(const std::string& step, const Expr& e, const Env& env, const std::string& what) {
    TypeReport rep = type_check(e, env);
    for (const auto& name : rep.unbound) error(step, "UnboundVariable: " + name + " (in " + what + ")");
    for (const auto& msg : rep.errors) error(step, "PredicateTypeError: " + msg);
  }

  void check_spellable_option(const std::string& step, const std::string& opt) {
    if (opt.empty()) {
      error(step, "empty option string");
      return;
    }
    if (vocab_ && !vocab_->spellable(opt)) {
      error(step, "UntokenizableOption: \"" + token::escape_token_bytes(opt) + "\"");
    }
  }

  void walk(const std::vector<Step>& steps, Env& env, int depth) {
    for (std::size_t i = 0; i < steps.size(); ++i) {
      const Step& s = steps[i];
      switch (s.kind()) {
        case StepKind::EmitFixed: lint_emit(s); break;
        case StepKind::Gen: lint_gen(s); break;
        case StepKind::Select: lint_select(s, env, steps, i); break;
        case StepKind::Branch: lint_branch(s, env, depth); break;
        case StepKind::ValidateLoop: lint_validate(s, env, steps, i); break;
      }
      if (binds_variable(s)) env[s.name] = binding_type(s);
    }
  }

  void lint_emit(const Step& s) {
    const auto& t = s.emit().text;
    if (t.empty()) {
      warn(s.name, "emit text is empty");
      return;
    }
    if (vocab_) {
      try {
        vocab_->tokenize(t, true);
      } catch (const Error&) {
        error(s.name, "UnspellableText: scaffolding text cannot be tokenized");
      }
    }
  }

  void lint_gen(const Step& s) {
    const auto& g = s.gen();
    if (!g.regex && !g.stop) error(s.name, "gen requires a regex or a stop string");
    if (!g.max_tokens) {
      error(s.name, "gen requires max_tokens");
    } else if (*g.max_tokens <= 0) {
      error(s.name, "max_tokens must be positive");
    }
    if (g.temperature && !(*g.temperature >= 0)) error(s.name, "temperature must be non-negative");
    if (g.stop && g.stop->empty()) error(s.name, "stop string is empty");
    if (!g.regex) {
      if (vocab_ && g.stop && !g.stop->empty() && !vocab_->spellable(*g.stop)) {
        warn(s.name, "stop string cannot be spelled by the vocabulary");
      }
      return;
    }
    try {
      token::compile_char_dfa(*g.regex);
    } catch (const Error& e) {
      error(s.name, e.what());
      return;
    }
    if (!vocab_) return;
    std::string pattern = *g.regex;
    if (g.stop && !g.stop->empty()) pattern = "(?:" + pattern + ")" + token::regex_escape(*g.stop);
    try {
      token::TokenAutomaton a = token::compile_regex(pattern, *vocab_);
      if (g.max_tokens && *g.max_tokens > 0 && a.distance_to_accept(a.start()) > *g.max_tokens) {
        error(s.name, "MaxTokensInNonAcceptingState: max_tokens=" + std::to_string(*g.max_tokens) +
                          " is below the " + std::to_string(a.distance_to_accept(a.start())) +
                          " tokens the pattern needs");
      }
    } catch (const Error& e) {
      error(s.name, e.what());
    }
  }

  void lint_select(const Step& s, const Env& env, const std::vector<Step>& siblings, std::size_t index) {
    const auto& sel = s.select();
    if (sel.temperature && !(*sel.temperature >= 0)) error(s.name, "temperature must be non-negative");
    std::vector<std::string> all;
    bool single = false;
    if (sel.dynamic) {
      bool always = false;
      for (const auto& g : sel.dynamic->guards) {
        check_predicate(s.name, g.guard, env, "dynamic guard");
        if (g.options.empty()) error(s.name, "dynamic guard has an empty option list");
        if (always) warn(s.name, "unreachable dynamic guard: " + to_string(g.guard));
        auto c = constant_value(g.guard);
        if (c && !*c) warn(s.name, "dynamic guard is constant-false: " + to_string(g.guard));
        if (c && *c) always = true;
        all.insert(all.end(), g.options.begin(), g.options.end());
      }
      if (sel.dynamic->otherwise.empty()) error(s.name, "dynamic default option list is empty");
      all.insert(all.end(), sel.dynamic->otherwise.begin(), sel.dynamic->otherwise.end());
    } else {
      if (sel.options.empty()) error(s.name, "select requires a nonempty option list");
      single = sel.options.size() == 1;
      all = sel.options;
    }
    for (const auto& o : all) check_spellable_option(s.name, o);

    if (single) {
      for (std::size_t j = index + 1; j < siblings.size(); ++j) {
        const Step& next = siblings[j];
        if (next.kind() == StepKind::EmitFixed) continue;
        if (next.kind() == StepKind::Gen && !next.gen().regex) {
          warn(s.name, "single-option select followed by free generation (" + next.name + ")");
        }
        break;
      }
    }
  }

  void lint_branch(const Step& s, Env& env, int depth) {
    if (depth + 1 > kMaxBranchDepth) {
      error(s.name, "branch nesting exceeds depth " + std::to_string(kMaxBranchDepth));
    }
    const auto& b = s.branch();
    if (b.arms.empty()) error(s.name, "branch needs at least one 'when' arm");
    bool always = false;
    std::optional<Env> merged;
    auto merge = [&](const Env& e) {
      if (!merged) {
        merged = e;
        return;
      }
      for (auto it = merged->begin(); it != merged->end();) {
        auto f = e.find(it->first);
        if (f == e.end()) {
          it = merged->erase(it);
        } else {
          if (f->second != it->second) it->second = VarType::Text;
          ++it;
        }
      }
    };
    for (const auto& arm : b.arms) {
      check_predicate(s.name, arm.guard, env, "branch guard");
      if (always) warn(s.name, "unreachable branch arm: " + to_string(arm.guard));
      auto c = constant_value(arm.guard);
      if (c && !*c) warn(s.name, "unreachable branch arm (constant-false guard): " + to_string(arm.guard));
      Env arm_env = env;
      walk(arm.steps, arm_env, depth + 1);
      merge(arm_env);
      if (c && *c) always = true;
    }
    if (b.otherwise) {
      if (always) warn(s.name, "unreachable else arm");
      Env arm_env = env;
      walk(*b.otherwise, arm_env, depth + 1);
      merge(arm_env);
    } else if (!always) {
      merge(env);
    }
    if (merged) env = *merged;
  }

  void lint_validate(const Step& s, const Env& env, const std::vector<Step>& siblings, std::size_t index) {
    const auto& v = s.validate();
    if (!v.predicate) {
      error(s.name, "validate requires pred");
    } else {
      check_predicate(s.name, *v.predicate, env, "validation predicate");
      auto c = constant_value(*v.predicate);
      if (c && *c) warn(s.name, "validation predicate is constant-true");
      if (c && !*c) warn(s.name, "validation predicate is constant-false; the loop always falls back");
    }
    if (!v.max_retries) {
      error(s.name, "validate requires max_retries");
    } else if (*v.max_retries < 1) {
      error(s.name, "max_retries must be at least 1");
    }

    std::optional<std::size_t> anchor_index;
    if (!v.anchor) {
      error(s.name, "AnchorOrder: validate requires anchor");
    } else {
      for (std::size_t j = 0; j < index; ++j) {
        if (siblings[j].name == *v.anchor) anchor_index = j;
      }
      if (!anchor_index) {
        if (find_step(program_.steps, *v.anchor)) {
          error(s.name, "AnchorOrder: anchor must precede loop ('" + *v.anchor + "' is not an earlier step at the same level)");
        } else {
          error(s.name, "AnchorOrder: anchor '" + *v.anchor + "' does not name a step");
        }
      }
    }

    if (v.retry_message) {
      for (const auto& name : retry_placeholders(*v.retry_message)) {
        if (name != "retry" && !env.count(name)) error(s.name, "UnboundVariable: " + name + " (in retry message)");
      }
      if (vocab_) {
        for (const auto& chunk : retry_literals(*v.retry_message)) {
          try {
            vocab_->tokenize(chunk, true);
          } catch (const Error&) {
            error(s.name, "UnspellableText: retry message text \"" + token::escape_token_bytes(chunk) + "\"");
          }
        }
      }
    }

    std::map<std::string, const Step*> rebound;
    if (anchor_index) {
      for (std::size_t j = *anchor_index; j < index; ++j) {
        for_each_step(std::span<const Step>(&siblings[j], 1), [&](const Step& x) {
          if (binds_variable(x)) rebound[x.name] = &x;
        });
      }
      if (rebound.empty()) warn(s.name, "no step between anchor and loop produces a value; retries cannot change the outcome");
    }
    std::set<std::string> assigned;
    for (const auto& fa : v.fallback) {
      if (!assigned.insert(fa.variable).second) {
        error(s.name, "fallback assigns '" + fa.variable + "' twice");
        continue;
      }
      if (!anchor_index) continue;
      auto it = rebound.find(fa.variable);
      if (it == rebound.end()) {
        error(s.name, "fallback variable '" + fa.variable + "' is not re-bound between anchor and loop");
        continue;
      }
      check_fallback_value(s.name, *it->second, fa.value);
    }
    for (const auto& [name, step] : rebound) {
      if (!assigned.count(name)) error(s.name, "fallback missing for re-bound variable '" + name + "'");
    }
  }

  void check_fallback_value(const std::string& loop, const Step& target, const std::string& value) {
    if (target.kind() == StepKind::Gen) {
      const auto& g = target.gen();
      if (g.regex) {
        try {
          if (!token::compile_char_dfa(*g.regex).matches(value)) {
            error(loop, "fallback value \"" + value + "\" for '" + target.name + "' does not match its regex");
          }
        } catch (const Error&) {
          // reported on the gen step itself
        }
      } else if (g.stop && !g.stop->empty() && value.find(*g.stop) != std::string::npos) {
        error(loop, "fallback value for '" + target.name + "' contains its stop string");
      }
    } else {
      const auto& sel = target.select();
      std::set<std::string> allowed(sel.options.begin(), sel.options.end());
      if (sel.dynamic) {
        for (const auto& g : sel.dynamic->guards) allowed.insert(g.options.begin(), g.options.end());
        allowed.insert(sel.dynamic->otherwise.begin(), sel.dynamic->otherwise.end());
      }
      if (!allowed.count(value)) {
        error(loop, "fallback value \"" + value + "\" for '" + target.name + "' is not one of its options");
      }
    }
    if (vocab_ && !value.empty() && !vocab_->spellable(value)) {
      error(loop, "UnspellableText: fallback value \"" + token::escape_token_bytes(value) + "\"");
    }
  }
};

}  // namespace detail

/// All findings for `program`, in program order. `vocab` is optional.
inline std::vector<Finding> lint_program(const RuleProgram& program, const token::Vocabulary* vocab = nullptr) {
  return detail::Linter(program, vocab).run();
}

}  // namespace scidc::ir
