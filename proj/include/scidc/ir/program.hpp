#pragma once

/**
 * @file program.hpp
 * @brief Rule-program data model.
 *
 * A RuleProgram is an ordered list of steps. EmitFixed steps give the top-layer
 * scaffolding, Branch and ValidateLoop give the middle layer, Gen and Select
 * carry the bottom-layer token constraints. Programs are immutable values once
 * parsed; `==` is structural equality.
 */

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "scidc/ir/predicate.hpp"

namespace scidc::ir {

enum class StepKind { EmitFixed, Gen, Select, Branch, ValidateLoop };

inline const char* step_kind_name(StepKind k) {
  switch (k) {
    case StepKind::EmitFixed: return "emit";
    case StepKind::Gen: return "gen";
    case StepKind::Select: return "select";
    case StepKind::Branch: return "branch";
    case StepKind::ValidateLoop: return "validate";
  }
  return "?";
}

struct EmitBody {
  std::string text;
  bool operator==(const EmitBody&) const = default;
};

struct GenBody {
  std::optional<std::string> regex;
  std::optional<std::string> stop;
  std::optional<int> max_tokens;
  std::optional<double> temperature;
  bool operator==(const GenBody&) const = default;
};

struct GuardClause {
  Expr guard;
  std::vector<std::string> options;
  bool operator==(const GuardClause&) const = default;
};

struct DynamicOptions {
  std::vector<GuardClause> guards;
  std::vector<std::string> otherwise;
  bool operator==(const DynamicOptions&) const = default;
};

struct SelectBody {
  std::vector<std::string> options;        // used when `dynamic` is absent
  std::optional<DynamicOptions> dynamic;
  std::optional<double> temperature;
  bool operator==(const SelectBody&) const = default;
};

struct Step;

struct BranchArm {
  Expr guard;
  std::vector<Step> steps;
  bool operator==(const BranchArm& o) const;
};

struct BranchBody {
  std::vector<BranchArm> arms;
  std::optional<std::vector<Step>> otherwise;
  bool operator==(const BranchBody& o) const;
};

struct FallbackAssignment {
  std::string variable;
  std::string value;
  bool operator==(const FallbackAssignment&) const = default;
};

struct ValidateBody {
  std::optional<Expr> predicate;
  std::optional<int> max_retries;
  std::optional<std::string> anchor;
  std::vector<FallbackAssignment> fallback;
  std::optional<std::string> retry_message;
  bool operator==(const ValidateBody&) const = default;
};

using StepBody = std::variant<EmitBody, GenBody, SelectBody, BranchBody, ValidateBody>;

struct Step {
  std::string name;
  StepBody body;

  StepKind kind() const { return static_cast<StepKind>(body.index()); }

  bool operator==(const Step& o) const { return name == o.name && body == o.body; }

  const EmitBody& emit() const { return std::get<EmitBody>(body); }
  const GenBody& gen() const { return std::get<GenBody>(body); }
  const SelectBody& select() const { return std::get<SelectBody>(body); }
  const BranchBody& branch() const { return std::get<BranchBody>(body); }
  const ValidateBody& validate() const { return std::get<ValidateBody>(body); }
};

inline bool BranchArm::operator==(const BranchArm& o) const { return guard == o.guard && steps == o.steps; }
inline bool BranchBody::operator==(const BranchBody& o) const { return arms == o.arms && otherwise == o.otherwise; }

struct RuleProgram {
  std::string name;
  std::vector<std::pair<std::string, std::string>> metadata;
  std::vector<Step> steps;

  bool operator==(const RuleProgram&) const = default;

  const std::string* meta(std::string_view key) const {
    for (const auto& [k, v] : metadata) {
      if (k == key) return &v;
    }
    return nullptr;
  }
};

/// Depth-first visit of every step, including those nested in branch arms.
template <typename F>
void for_each_step(std::span<const Step> steps, F&& f) {
  for (const auto& s : steps) {
    f(s);
    if (s.kind() == StepKind::Branch) {
      for (const auto& arm : s.branch().arms) for_each_step(arm.steps, f);
      if (s.branch().otherwise) for_each_step(*s.branch().otherwise, f);
    }
  }
}

/// Finds a step by name anywhere in the tree.
inline const Step* find_step(std::span<const Step> steps, std::string_view name) {
  const Step* found = nullptr;
  for_each_step(steps, [&](const Step& s) {
    if (!found && s.name == name) found = &s;
  });
  return found;
}

/// True for steps that bind a variable under their own name.
inline bool binds_variable(const Step& s) { return s.kind() == StepKind::Gen || s.kind() == StepKind::Select; }

}  // namespace scidc::ir
