#pragma once

/**
 * @file arms.hpp
 * @brief Ablation arms: mechanical stripping of rule layers from a program.
 *
 *   full     program as written
 *   wo_rt    every step folded into one free generation; the scaffolding
 *            and option lists move into the prompt as a layout description
 *   wo_rm    validate steps removed
 *   wo_rb    regex and select constraints replaced by free generation
 *            (stop "\n"); option lists move into the prompt. A validate
 *            whose predicate no longer type-checks is dropped and noted.
 *   vanilla  one free generation from the instance and the task question
 */

#include <string>
#include <vector>

#include "scidc/common.hpp"
#include "scidc/compiler/explain.hpp"
#include "scidc/ir/lint.hpp"

namespace scidc::eval {

enum class Arm { Full, WoRT, WoRM, WoRB, Vanilla };

inline const std::vector<Arm>& all_arms() {
  static const std::vector<Arm> arms = {Arm::Vanilla, Arm::Full, Arm::WoRT, Arm::WoRM, Arm::WoRB};
  return arms;
}

inline const char* arm_name(Arm a) {
  switch (a) {
    case Arm::Full: return "full";
    case Arm::WoRT: return "wo_rt";
    case Arm::WoRM: return "wo_rm";
    case Arm::WoRB: return "wo_rb";
    case Arm::Vanilla: return "vanilla";
  }
  return "?";
}

inline Arm parse_arm(const std::string& s) {
  for (Arm a : all_arms()) {
    if (s == arm_name(a)) return a;
  }
  throw Error(ErrorKind::InvalidArgument, "unknown arm '" + s + "' (expected full, wo_rt, wo_rm, wo_rb, vanilla)");
}

struct StrippedArm {
  Arm arm = Arm::Full;
  ir::RuleProgram program;
  std::string prompt_suffix;  // appended to the instance prompt
  std::vector<std::string> notes;
};

inline constexpr int kFreeAnswerTokens = 32;
inline constexpr int kWholeAnswerTokens = 2048;

namespace detail {

inline std::string option_line(const ir::Step& s) {
  const auto& sel = s.select();
  if (!sel.dynamic) return "Options for " + s.name + ": " + text::join(sel.options, " | ") + "\n";
  std::string line = "Options for " + s.name + ":";
  for (const auto& g : sel.dynamic->guards) {
    line += " when " + compiler::detail::words(g.guard) + " -> " + text::join(g.options, " | ") + ";";
  }
  return line + " otherwise -> " + text::join(sel.dynamic->otherwise, " | ") + "\n";
}

inline void remove_validates(std::vector<ir::Step>& steps, std::vector<std::string>& notes) {
  std::vector<ir::Step> kept;
  for (auto& s : steps) {
    if (s.kind() == ir::StepKind::ValidateLoop) {
      notes.push_back("removed validate '" + s.name + "'");
      continue;
    }
    if (s.kind() == ir::StepKind::Branch) {
      auto& b = std::get<ir::BranchBody>(s.body);
      for (auto& arm : b.arms) remove_validates(arm.steps, notes);
      if (b.otherwise) remove_validates(*b.otherwise, notes);
    }
    kept.push_back(std::move(s));
  }
  steps = std::move(kept);
}

inline void free_token_layer(std::vector<ir::Step>& steps, std::string& options) {
  for (auto& s : steps) {
    switch (s.kind()) {
      case ir::StepKind::Gen: {
        auto& g = std::get<ir::GenBody>(s.body);
        if (g.regex) {
          g.regex.reset();
          if (!g.stop) g.stop = "\n";
          g.max_tokens = std::max(g.max_tokens.value_or(0), kFreeAnswerTokens);
        }
        break;
      }
      case ir::StepKind::Select: {
        options += option_line(s);
        std::size_t longest = 0;
        const auto& sel = s.select();
        for (const auto& o : sel.options) longest = std::max(longest, o.size());
        if (sel.dynamic) {
          for (const auto& gc : sel.dynamic->guards) {
            for (const auto& o : gc.options) longest = std::max(longest, o.size());
          }
          for (const auto& o : sel.dynamic->otherwise) longest = std::max(longest, o.size());
        }
        ir::GenBody g;
        g.stop = "\n";
        g.max_tokens = std::max(kFreeAnswerTokens, static_cast<int>(longest) + 16);
        g.temperature = s.select().temperature;
        s.body = g;
        break;
      }
      case ir::StepKind::Branch: {
        auto& b = std::get<ir::BranchBody>(s.body);
        for (auto& arm : b.arms) free_token_layer(arm.steps, options);
        if (b.otherwise) free_token_layer(*b.otherwise, options);
        break;
      }
      default: break;
    }
  }
}

inline bool erase_step(std::vector<ir::Step>& steps, const std::string& name) {
  for (auto it = steps.begin(); it != steps.end(); ++it) {
    if (it->name == name) {
      steps.erase(it);
      return true;
    }
    if (it->kind() == ir::StepKind::Branch) {
      auto& b = std::get<ir::BranchBody>(it->body);
      for (auto& arm : b.arms) {
        if (erase_step(arm.steps, name)) return true;
      }
      if (b.otherwise && erase_step(*b.otherwise, name)) return true;
    }
  }
  return false;
}

inline void layout(const std::vector<ir::Step>& steps, std::string& text, std::string& options) {
  for (const auto& s : steps) {
    switch (s.kind()) {
      case ir::StepKind::EmitFixed: text += s.emit().text; break;
      case ir::StepKind::Gen: text += "<" + s.name + ">"; break;
      case ir::StepKind::Select:
        text += "<" + s.name + ">";
        options += option_line(s);
        break;
      case ir::StepKind::Branch:
        throw Error(ErrorKind::ArmStripError,
                    "branch '" + s.name + "' has data-dependent scaffolding and cannot be flattened into the prompt");
      case ir::StepKind::ValidateLoop: break;
    }
  }
}

inline ir::RuleProgram single_generation(const ir::RuleProgram& base) {
  ir::RuleProgram p;
  p.name = base.name;
  p.metadata = base.metadata;
  ir::GenBody g;
  g.stop = "\n\n";
  g.max_tokens = kWholeAnswerTokens;
  p.steps.push_back(ir::Step{"response", g});
  return p;
}

inline void require_clean(const StrippedArm& s, const token::Vocabulary* vocab) {
  std::vector<std::string> errs;
  for (const auto& f : ir::lint_program(s.program, vocab)) {
    if (f.severity == ir::Severity::Error) errs.push_back(ir::format_finding(f));
  }
  if (!errs.empty()) {
    throw Error(ErrorKind::ArmStripError,
                std::string(arm_name(s.arm)) + " program does not lint: " + text::join(errs, "; "));
  }
}

}  // namespace detail

/// Builds the arm's program and prompt addition. Throws ArmStripError when
/// the layers cannot be separated coherently.
inline StrippedArm strip_program(const ir::RuleProgram& program, Arm arm, const std::string& question = {},
                                 const token::Vocabulary* vocab = nullptr) {
  StrippedArm out;
  out.arm = arm;
  out.program = program;
  switch (arm) {
    case Arm::Full: break;
    case Arm::WoRM: detail::remove_validates(out.program.steps, out.notes); break;
    case Arm::WoRB: {
      std::string options;
      detail::free_token_layer(out.program.steps, options);
      out.prompt_suffix = options;
      for (int round = 0; round < 64; ++round) {
        std::vector<std::string> typed;
        for (const auto& f : ir::lint_program(out.program, vocab)) {
          if (f.severity == ir::Severity::Error && f.message.find("PredicateTypeError") != std::string::npos &&
              std::find(typed.begin(), typed.end(), f.step) == typed.end()) {
            typed.push_back(f.step);
          }
        }
        if (typed.empty()) break;
        for (const auto& name : typed) {
          const ir::Step* s = ir::find_step(out.program.steps, name);
          if (!s || s->kind() != ir::StepKind::ValidateLoop) {
            throw Error(ErrorKind::ArmStripError, "step '" + name +
                                                      "' compares a value whose type depends on a removed regex "
                                                      "constraint");
          }
          detail::erase_step(out.program.steps, name);
          out.notes.push_back("dropped validate '" + name + "': its predicate needs a regex-typed value");
        }
      }
      break;
    }
    case Arm::WoRT: {
      std::string text, options;
      detail::layout(program.steps, text, options);
      out.program = detail::single_generation(program);
      out.prompt_suffix = "Write the answer in this layout, replacing each <slot>:\n" + text + "\n" + options;
      out.notes.push_back("all steps folded into one free generation");
      break;
    }
    case Arm::Vanilla:
      out.program = detail::single_generation(program);
      out.prompt_suffix = question.empty() ? std::string() : question + "\n";
      break;
  }
  detail::require_clean(out, vocab);
  return out;
}

}  // namespace scidc::eval
