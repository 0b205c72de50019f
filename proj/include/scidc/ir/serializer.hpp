#pragma once

// Canonical `scidc-ir v1` text for a RuleProgram. parse_program() of the
// output is structurally equal to the input.

#include <charconv>
#include <string>
#include <vector>

#include "scidc/ir/predicate.hpp"
#include "scidc/ir/program.hpp"

namespace scidc::ir {

namespace detail {

inline std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string format_list(const std::vector<std::string>& items) {
  std::string out = "[";
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ", ";
    out += quote(items[i]);
  }
  return out + "]";
}

inline void write_steps(const std::vector<Step>& steps, int indent, std::string& out);

inline void write_step(const Step& s, int indent, std::string& out) {
  const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
  out += pad + "step " + s.name + ": " + step_kind_name(s.kind());
  switch (s.kind()) {
    case StepKind::EmitFixed:
      out += " " + quote(s.emit().text) + "\n";
      break;
    case StepKind::Gen: {
      const auto& g = s.gen();
      if (g.regex) out += " regex=" + quote(*g.regex);
      if (g.stop) out += " stop=" + quote(*g.stop);
      if (g.max_tokens) out += " max_tokens=" + std::to_string(*g.max_tokens);
      if (g.temperature) out += " temperature=" + format_number(*g.temperature);
      out += "\n";
      break;
    }
    case StepKind::Select: {
      const auto& sel = s.select();
      if (sel.dynamic) {
        out += " dynamic {\n";
        for (const auto& g : sel.dynamic->guards) {
          out += pad + "  when " + to_string(g.guard) + " -> " + format_list(g.options) + ";\n";
        }
        out += pad + "  else -> " + format_list(sel.dynamic->otherwise) + ";\n";
        out += pad + "}";
      } else {
        out += " options=" + format_list(sel.options);
      }
      if (sel.temperature) out += " temperature=" + format_number(*sel.temperature);
      out += "\n";
      break;
    }
    case StepKind::Branch: {
      const auto& b = s.branch();
      out += " {\n";
      for (const auto& arm : b.arms) {
        out += pad + "  when " + to_string(arm.guard) + " {\n";
        write_steps(arm.steps, indent + 2, out);
        out += pad + "  }\n";
      }
      if (b.otherwise) {
        out += pad + "  else {\n";
        write_steps(*b.otherwise, indent + 2, out);
        out += pad + "  }\n";
      }
      out += pad + "}\n";
      break;
    }
    case StepKind::ValidateLoop: {
      const auto& v = s.validate();
      if (v.predicate) out += " pred=" + to_string(*v.predicate);
      if (v.max_retries) out += " max_retries=" + std::to_string(*v.max_retries);
      if (v.anchor) out += " anchor=" + *v.anchor;
      if (v.retry_message) out += " retry=" + quote(*v.retry_message);
      if (!v.fallback.empty()) {
        out += " fallback {\n";
        for (const auto& fa : v.fallback) out += pad + "  " + fa.variable + " = " + quote(fa.value) + ";\n";
        out += pad + "}";
      }
      out += "\n";
      break;
    }
  }
}

inline void write_steps(const std::vector<Step>& steps, int indent, std::string& out) {
  for (const auto& s : steps) write_step(s, indent, out);
}

}  // namespace detail

inline std::string serialize_program(const RuleProgram& p) {
  std::string out = "scidc-ir v1\nprogram " + p.name + "\n";
  for (const auto& [k, v] : p.metadata) out += "meta " + k + " = " + detail::quote(v) + "\n";
  if (!p.steps.empty()) out += "\n";
  detail::write_steps(p.steps, 0, out);
  return out;
}

}  // namespace scidc::ir
