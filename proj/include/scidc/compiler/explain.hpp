#pragma once

/**
 * @file explain.hpp
 * @brief Template-based plain-language rendering of rule programs.
 */

#include <string>
#include <vector>

#include "scidc/common.hpp"
#include "scidc/ir/program.hpp"

namespace scidc::compiler {

namespace detail {

inline std::string spoken_name(const std::string& var) {
  std::string out = var;
  for (char& c : out) {
    if (c == '_') c = ' ';
  }
  return out;
}

inline std::string quoted(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '\n') {
      out += "\\n";
    } else if (c == '\t') {
      out += "\\t";
    } else {
      out += c;
    }
  }
  return out + "\"";
}

inline std::string quoted_list(const std::vector<std::string>& items, const std::string& last_sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += (i + 1 == items.size()) ? last_sep : ", ";
    out += quoted(items[i]);
  }
  return out;
}

inline std::string words(const ir::Expr& e);

inline std::string words_child(const ir::Expr& child, const std::string& parent_op) {
  std::string w = words(child);
  bool logical = child.kind == ir::Expr::Kind::Binary && (child.op == "and" || child.op == "or");
  if (logical && child.op != parent_op) return "(" + w + ")";
  return w;
}

inline std::string words(const ir::Expr& e) {
  using K = ir::Expr::Kind;
  switch (e.kind) {
    case K::Number: return e.text;
    case K::String: return quoted(e.text);
    case K::Bool: return e.truth ? "true" : "false";
    case K::Var: return spoken_name(e.text);
    case K::Neg: return "minus " + words(e.args[0]);
    case K::Not: return "it is not the case that " + words(e.args[0]);
    case K::In: {
      std::vector<std::string> lits;
      for (std::size_t i = 1; i < e.args.size(); ++i) lits.push_back(e.args[i].text);
      return words(e.args[0]) + (e.negated ? " is none of " : " is one of ") + quoted_list(lits, ", ");
    }
    case K::Binary: break;
  }
  static const std::vector<std::pair<std::string, std::string>> phrases = {
      {"<", "is smaller than"}, {"<=", "is at most"}, {">", "is greater than"}, {">=", "is at least"},
      {"==", "is"},             {"!=", "is not"},     {"+", "plus"},           {"-", "minus"},
      {"*", "times"},           {"/", "divided by"},  {"and", "and"},          {"or", "or"}};
  std::string phrase = e.op;
  for (const auto& [op, w] : phrases) {
    if (op == e.op) phrase = w;
  }
  return words_child(e.args[0], e.op) + " " + phrase + " " + words_child(e.args[1], e.op);
}

inline void explain_steps(const std::vector<ir::Step>& steps, const std::string& indent, std::string& out) {
  for (const auto& s : steps) {
    out += indent;
    switch (s.kind()) {
      case ir::StepKind::EmitFixed:
        out += "The program then writes the fixed text " + quoted(s.emit().text) + ".";
        break;
      case ir::StepKind::Gen: {
        const auto& g = s.gen();
        std::string limit = g.max_tokens ? " within " + std::to_string(*g.max_tokens) + " tokens" : "";
        if (g.regex) {
          out += "Step '" + s.name + "' generates " + spoken_name(s.name) + " matching the pattern " + *g.regex;
          if (g.stop) out += " followed by " + quoted(*g.stop);
          out += limit + ".";
        } else {
          out += "Step '" + s.name + "' lets the model write " + spoken_name(s.name) + " freely until " +
                 quoted(g.stop.value_or("")) + " appears" + limit + ".";
        }
        break;
      }
      case ir::StepKind::Select: {
        const auto& sel = s.select();
        if (!sel.dynamic) {
          out += "Step '" + s.name + "' chooses " + spoken_name(s.name) + " from " + quoted_list(sel.options, " or ") +
                 ".";
        } else {
          out += "Step '" + s.name + "' chooses " + spoken_name(s.name) + " by rule:";
          for (const auto& g : sel.dynamic->guards) {
            out += " when " + words(g.guard) + " -> " + quoted_list(g.options, " or ") + ";";
          }
          out += " otherwise -> " + quoted_list(sel.dynamic->otherwise, " or ") + ".";
        }
        break;
      }
      case ir::StepKind::Branch: {
        const auto& b = s.branch();
        out += "Step '" + s.name + "' branches:";
        auto names = [](const std::vector<ir::Step>& ss) {
          std::vector<std::string> n;
          for (const auto& x : ss) n.push_back("'" + x.name + "'");
          return n.empty() ? std::string("nothing") : text::join(n, ", ");
        };
        for (std::size_t i = 0; i < b.arms.size(); ++i) {
          out += std::string(i == 0 ? " when " : "; else when ") + words(b.arms[i].guard) + " it runs " +
                 names(b.arms[i].steps);
        }
        if (b.otherwise) out += "; otherwise it runs " + names(*b.otherwise);
        out += ".\n";
        for (const auto& arm : b.arms) explain_steps(arm.steps, indent + "  ", out);
        if (b.otherwise) explain_steps(*b.otherwise, indent + "  ", out);
        continue;
      }
      case ir::StepKind::ValidateLoop: {
        const auto& v = s.validate();
        out += "Step '" + s.name + "' checks that " + (v.predicate ? words(*v.predicate) : std::string("?")) +
               "; if not, decoding goes back to '" + v.anchor.value_or("?") + "' and tries again, up to " +
               std::to_string(v.max_retries.value_or(0)) + " attempts in total";
        if (!v.fallback.empty()) {
          std::vector<std::string> sets;
          for (const auto& f : v.fallback) sets.push_back(spoken_name(f.variable) + " to " + quoted(f.value));
          out += ", after which it sets " + text::join(sets, ", ");
        }
        out += ".";
        break;
      }
    }
    out += "\n";
  }
}

}  // namespace detail

/// Deterministic plain-language rendering, one sentence per step.
inline std::string explain_program(const ir::RuleProgram& program) {
  std::size_t count = 0;
  ir::for_each_step(program.steps, [&](const ir::Step&) { ++count; });
  std::string out = "Program '" + program.name + "' has " + std::to_string(count) + " steps.\n";
  detail::explain_steps(program.steps, "", out);
  return out;
}

}  // namespace scidc::compiler
