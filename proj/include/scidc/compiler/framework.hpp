#pragma once

/**
 * @file framework.hpp
 * @brief Chain-of-thought frameworks produced by task decomposition: parsing
 * of the GLLM reply, structural validation, and canonical rendering.
 *
 * Reply layout (headings required, field lines optional):
 *
 *   ## Problem Class Understanding
 *   <summary>
 *   ## Reasoning Framework
 *   Step 1: [Extract] Variable: <VAR_x>
 *   Meaning: ...
 *   Step 2: [Judge] Intermediate Conclusion: <MID_y>
 *   Depends On: <VAR_x>
 *   Step 3: [Conclude] Final Answer: <ANS_z>
 *   Depends On: <VAR_x, MID_y>
 */

#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "scidc/common.hpp"

namespace scidc::compiler {

enum class FrameworkStepKind { Extract, Judge, Conclude };

inline const char* framework_step_tag(FrameworkStepKind k) {
  switch (k) {
    case FrameworkStepKind::Extract: return "Extract";
    case FrameworkStepKind::Judge: return "Judge";
    case FrameworkStepKind::Conclude: return "Conclude";
  }
  return "?";
}

inline const char* framework_step_label(FrameworkStepKind k) {
  switch (k) {
    case FrameworkStepKind::Extract: return "Variable";
    case FrameworkStepKind::Judge: return "Intermediate Conclusion";
    case FrameworkStepKind::Conclude: return "Final Answer";
  }
  return "?";
}

inline const char* framework_var_prefix(FrameworkStepKind k) {
  switch (k) {
    case FrameworkStepKind::Extract: return "VAR_";
    case FrameworkStepKind::Judge: return "MID_";
    case FrameworkStepKind::Conclude: return "ANS_";
  }
  return "?";
}

struct FrameworkStep {
  FrameworkStepKind kind = FrameworkStepKind::Extract;
  std::string variable;
  std::vector<std::pair<std::string, std::string>> fields;  // e.g. Meaning, Source, Inference Logic
  std::vector<std::string> depends_on;

  bool operator==(const FrameworkStep&) const = default;

  const std::string* field(std::string_view key) const {
    for (const auto& [k, v] : fields) {
      if (k == key) return &v;
    }
    return nullptr;
  }
};

struct CotFramework {
  std::string summary;
  std::vector<FrameworkStep> steps;

  bool operator==(const CotFramework&) const = default;

  const FrameworkStep* conclude() const {
    for (const auto& s : steps) {
      if (s.kind == FrameworkStepKind::Conclude) return &s;
    }
    return nullptr;
  }
};

namespace detail {

inline std::string strip_brackets(std::string_view s) {
  std::string t = text::trim(s);
  while (!t.empty() && (t.front() == '<' || t.front() == '`')) t.erase(t.begin());
  while (!t.empty() && (t.back() == '>' || t.back() == '`')) t.pop_back();
  return text::trim(t);
}

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    std::string t = strip_brackets(cur);
    if (!t.empty() && t != "none" && t != "None" && t != "-") out.push_back(t);
    cur.clear();
  };
  for (char c : s) {
    if (c == ',' || c == ';') {
      flush();
    } else {
      cur += c;
    }
  }
  flush();
  return out;
}

inline std::string strip_markup(std::string_view line) {
  std::string s = text::trim(line);
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '*' && i + 1 < s.size() && s[i + 1] == '*') {
      ++i;
      continue;
    }
    out += s[i];
  }
  return text::trim(out);
}

}  // namespace detail

/// Parses a decomposition reply. Throws MalformedFrameworkReply when the
/// reply has no recognizable step list.
inline CotFramework parse_framework(std::string_view reply) {
  CotFramework fw;
  enum class Section { None, Summary, Steps } section = Section::None;
  std::vector<std::string> summary_lines;
  for (const auto& raw : text::split_lines(reply)) {
    std::string line = detail::strip_markup(raw);
    if (text::starts_with(line, "#")) {
      if (line.find("Problem Class Understanding") != std::string::npos) {
        section = Section::Summary;
      } else if (line.find("Reasoning Framework") != std::string::npos) {
        section = Section::Steps;
      } else {
        section = Section::None;
      }
      continue;
    }
    if (section == Section::Summary) {
      if (!line.empty()) summary_lines.push_back(line);
      continue;
    }
    if (section != Section::Steps || line.empty()) continue;
    if (text::starts_with(line, "Step ") && line.find('[') != std::string::npos) {
      auto open = line.find('[');
      auto close = line.find(']', open);
      if (close == std::string::npos) {
        throw Error(ErrorKind::MalformedFrameworkReply, "unterminated step tag: " + line);
      }
      std::string tag = line.substr(open + 1, close - open - 1);
      FrameworkStep st;
      if (tag == "Extract") {
        st.kind = FrameworkStepKind::Extract;
      } else if (tag == "Judge") {
        st.kind = FrameworkStepKind::Judge;
      } else if (tag == "Conclude") {
        st.kind = FrameworkStepKind::Conclude;
      } else {
        throw Error(ErrorKind::MalformedFrameworkReply, "unknown step type [" + tag + "]");
      }
      std::string rest = line.substr(close + 1);
      auto colon = rest.find(':');
      st.variable = detail::strip_brackets(colon == std::string::npos ? rest : rest.substr(colon + 1));
      fw.steps.push_back(std::move(st));
      continue;
    }
    auto colon = line.find(':');
    if (fw.steps.empty() || colon == std::string::npos) continue;
    std::string key = text::trim(line.substr(0, colon));
    std::string value = text::trim(line.substr(colon + 1));
    if (key == "Depends On") {
      fw.steps.back().depends_on = detail::split_list(value);
    } else {
      fw.steps.back().fields.emplace_back(key, detail::strip_brackets(value));
    }
  }
  fw.summary = text::join(summary_lines, " ");
  if (fw.steps.empty()) throw Error(ErrorKind::MalformedFrameworkReply, "reply contains no framework steps");
  return fw;
}

/// Structural problems: naming, dependency order, and the single final
/// Conclude step.
inline std::vector<std::string> validate_framework(const CotFramework& fw) {
  std::vector<std::string> out;
  std::set<std::string> defined;
  std::size_t concludes = 0;
  for (std::size_t i = 0; i < fw.steps.size(); ++i) {
    const auto& s = fw.steps[i];
    const std::string where = "step " + std::to_string(i + 1);
    if (s.variable.empty()) out.push_back(where + " has no variable name");
    if (!text::starts_with(s.variable, framework_var_prefix(s.kind))) {
      out.push_back(where + " variable '" + s.variable + "' should start with " + framework_var_prefix(s.kind));
    }
    if (!defined.insert(s.variable).second) out.push_back(where + " redefines '" + s.variable + "'");
    if (s.kind != FrameworkStepKind::Extract) {
      if (s.depends_on.empty()) out.push_back(where + " lists no dependencies");
      for (const auto& d : s.depends_on) {
        bool earlier = false;
        for (std::size_t j = 0; j < i; ++j) earlier = earlier || fw.steps[j].variable == d;
        if (!earlier) out.push_back(where + " depends on '" + d + "', which no earlier step defines");
        if (!text::starts_with(d, "VAR_") && !text::starts_with(d, "MID_")) {
          out.push_back(where + " dependency '" + d + "' is not a VAR_ or MID_ variable");
        }
      }
    }
    if (s.kind == FrameworkStepKind::Conclude) {
      ++concludes;
      if (i + 1 != fw.steps.size()) out.push_back(where + " is a Conclude step but not the last step");
    }
  }
  if (concludes == 0) out.push_back("framework has no Conclude step");
  if (concludes > 1) out.push_back("framework has " + std::to_string(concludes) + " Conclude steps");
  return out;
}

/// Canonical text form; parse_framework(render_framework(f)) == f.
inline std::string render_framework(const CotFramework& fw) {
  std::string out = "## Problem Class Understanding\n" + fw.summary + "\n## Reasoning Framework\n";
  for (std::size_t i = 0; i < fw.steps.size(); ++i) {
    const auto& s = fw.steps[i];
    out += "Step " + std::to_string(i + 1) + ": [" + framework_step_tag(s.kind) + "] " + framework_step_label(s.kind) +
           ": <" + s.variable + ">\n";
    for (const auto& [k, v] : s.fields) out += k + ": " + v + "\n";
    if (!s.depends_on.empty()) out += "Depends On: <" + text::join(s.depends_on, ", ") + ">\n";
  }
  return out;
}

}  // namespace scidc::compiler
