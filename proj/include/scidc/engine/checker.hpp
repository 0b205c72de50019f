#pragma once

/**
 * @file checker.hpp
 * @brief Output checker that works from the program text alone.
 *
 * It searches for a segmentation of the output text that the program could
 * have produced: scaffolding must appear verbatim, regex spans must match
 * under std::regex, options must come from the active set, branches follow
 * their guards, and every validate predicate must hold on the recovered
 * values unless the run reports a fallback for that loop whose values are
 * exactly the recovered ones. The recovered bindings must equal the run's.
 */

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "scidc/engine/trace.hpp"
#include "scidc/ir/predicate.hpp"
#include "scidc/ir/program.hpp"

namespace scidc::engine {

struct CheckReport {
  bool ok = true;
  std::vector<std::string> violations;
};

class OutputChecker {
 public:
  /// `max_token_bytes` bounds how many bytes one token can spell; regex spans
  /// longer than max_tokens * max_token_bytes are not considered.
  explicit OutputChecker(const ir::RuleProgram& program, std::size_t max_token_bytes = 64)
      : program_(program), max_token_bytes_(max_token_bytes) {}

  CheckReport check(const RunResult& result) {
    CheckReport rep;
    if (result.termination == Termination::Aborted) {
      rep.ok = false;
      rep.violations.push_back("run aborted: " + result.abort_reason);
      return rep;
    }
    fallbacks_.clear();
    for (const auto& e : result.trace.events) {
      if (e.type == EventType::FallbackApplied) fallbacks_[e.step][e.detail] = e.text;
    }
    out_ = &result.output;
    found_.reset();
    Env env;
    bool parsed = match(program_.steps, 0, 0, env, [this](std::size_t pos, const Env& final_env) {
      if (pos != out_->size()) return false;
      found_ = final_env;
      return true;
    });
    if (!parsed) {
      rep.ok = false;
      rep.violations.push_back("no segmentation of the output satisfies the program");
      return rep;
    }
    Env reported;
    for (const auto& [k, v] : result.bindings.items()) reported[k] = v;
    for (const auto& [k, v] : *found_) {
      auto it = reported.find(k);
      if (it == reported.end()) {
        rep.violations.push_back("binding '" + k + "' missing from the run result");
      } else if (it->second != v) {
        rep.violations.push_back("binding '" + k + "' is \"" + it->second + "\" but the output shows \"" + v + "\"");
      }
    }
    for (const auto& [k, v] : reported) {
      if (!found_->count(k)) rep.violations.push_back("binding '" + k + "' has no span in the output");
    }
    rep.ok = rep.violations.empty();
    return rep;
  }

 private:
  using Env = std::map<std::string, std::string>;
  using Cont = std::function<bool(std::size_t, const Env&)>;

  const ir::RuleProgram& program_;
  std::size_t max_token_bytes_;
  const std::string* out_ = nullptr;
  std::optional<Env> found_;
  std::map<std::string, std::map<std::string, std::string>> fallbacks_;
  std::map<std::string, std::regex> regex_cache_;

  const std::regex& regex_for(const std::string& pattern) {
    auto it = regex_cache_.find(pattern);
    if (it == regex_cache_.end()) it = regex_cache_.emplace(pattern, std::regex(pattern, std::regex::ECMAScript)).first;
    return it->second;
  }

  static bool holds(const ir::Expr& e, const Env& env) {
    try {
      return ir::evaluate_bool(e, ir::lookup_in(env));
    } catch (const Error&) {
      return false;
    }
  }

  bool match(const std::vector<ir::Step>& steps, std::size_t i, std::size_t pos, const Env& env, const Cont& k) {
    if (i == steps.size()) return k(pos, env);
    const ir::Step& s = steps[i];
    const std::string& out = *out_;
    auto next = [&](std::size_t p, const Env& e) { return match(steps, i + 1, p, e, k); };
    auto bind = [&](const std::string& value) {
      Env e = env;
      e[s.name] = value;
      return e;
    };
    switch (s.kind()) {
      case ir::StepKind::EmitFixed: {
        const std::string& t = s.emit().text;
        if (out.compare(pos, t.size(), t) != 0) return false;
        return next(pos + t.size(), env);
      }
      case ir::StepKind::Gen: {
        const auto& g = s.gen();
        const std::string stop = g.stop.value_or("");
        if (g.regex) {
          const std::regex& re = regex_for(*g.regex);
          std::size_t cap = out.size();
          if (g.max_tokens && *g.max_tokens > 0) {
            cap = std::min(cap, pos + static_cast<std::size_t>(*g.max_tokens) * max_token_bytes_);
          }
          for (std::size_t end = cap + 1; end-- > pos;) {
            std::string value = out.substr(pos, end - pos);
            if (!std::regex_match(value, re)) continue;
            if (!stop.empty() && out.compare(end, stop.size(), stop) != 0) continue;
            if (next(end + stop.size(), bind(value))) return true;
          }
          return false;
        }
        // Free text ends before the first occurrence of the stop string.
        std::size_t limit = stop.empty() ? out.size() : std::min(out.size(), out.find(stop, pos));
        for (std::size_t end = pos; end <= limit; ++end) {
          if (next(end, bind(out.substr(pos, end - pos)))) return true;
        }
        return false;
      }
      case ir::StepKind::Select: {
        const auto& sel = s.select();
        const std::vector<std::string>* options = &sel.options;
        if (sel.dynamic) {
          options = &sel.dynamic->otherwise;
          for (const auto& g : sel.dynamic->guards) {
            if (holds(g.guard, env)) {
              options = &g.options;
              break;
            }
          }
        }
        for (const auto& o : *options) {
          if (out.compare(pos, o.size(), o) == 0 && next(pos + o.size(), bind(o))) return true;
        }
        return false;
      }
      case ir::StepKind::Branch: {
        const auto& b = s.branch();
        for (const auto& arm : b.arms) {
          if (holds(arm.guard, env)) return match(arm.steps, 0, pos, env, next);
        }
        if (b.otherwise) return match(*b.otherwise, 0, pos, env, next);
        return next(pos, env);
      }
      case ir::StepKind::ValidateLoop: {
        const auto& v = s.validate();
        if (v.predicate && holds(*v.predicate, env)) return next(pos, env);
        auto fb = fallbacks_.find(s.name);
        if (fb == fallbacks_.end()) return false;
        for (const auto& [var, value] : fb->second) {
          auto it = env.find(var);
          if (it == env.end() || it->second != value) return false;
        }
        return next(pos, env);
      }
    }
    return false;
  }
};

inline CheckReport check_output(const ir::RuleProgram& program, const RunResult& result,
                                std::size_t max_token_bytes = 64) {
  return OutputChecker(program, max_token_bytes).check(result);
}

}  // namespace scidc::engine
