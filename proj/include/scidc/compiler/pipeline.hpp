#pragma once

/**
 * @file pipeline.hpp
 * @brief Knowledge compilation: task decomposition, rule-program
 * generation, template explanation, and expert revision.
 *
 * Each GLLM stage gets one automatic repair re-ask carrying the problems
 * found in the first reply. Every program returned here is free of ERROR
 * lint findings.
 */

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "scidc/common.hpp"
#include "scidc/compiler/explain.hpp"
#include "scidc/compiler/framework.hpp"
#include "scidc/compiler/gllm.hpp"
#include "scidc/compiler/prompts.hpp"
#include "scidc/ir/lint.hpp"
#include "scidc/ir/parser.hpp"
#include "scidc/ir/serializer.hpp"

namespace scidc::compiler {

struct KnowledgeDoc {
  std::string text;
  std::string provenance;

  std::size_t token_estimate() const { return (text.size() + 3) / 4; }

  static KnowledgeDoc load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::IoError, "cannot read knowledge document " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return {ss.str(), path.filename().string()};
  }
};

enum class TurnKind { ModelExplanation, ExpertSuggestion };

struct Turn {
  TurnKind kind;
  std::string text;
  bool operator==(const Turn&) const = default;
};

class VerificationTranscript {
 public:
  static constexpr std::size_t kMaxExpertTurns = 2;

  const std::vector<Turn>& turns() const { return turns_; }

  std::size_t expert_turns() const {
    std::size_t n = 0;
    for (const auto& t : turns_) n += t.kind == TurnKind::ExpertSuggestion;
    return n;
  }

  void add_explanation(std::string text) {
    if (!turns_.empty() && turns_.back().kind == TurnKind::ModelExplanation) {
      throw Error(ErrorKind::InvalidArgument, "two explanations in a row");
    }
    turns_.push_back({TurnKind::ModelExplanation, std::move(text)});
  }

  void add_suggestion(std::string text) {
    if (turns_.empty() || turns_.back().kind != TurnKind::ModelExplanation) {
      throw Error(ErrorKind::InvalidArgument, "a suggestion must answer an explanation");
    }
    if (expert_turns() >= kMaxExpertTurns) {
      throw Error(ErrorKind::InvalidArgument, "expert turn budget of 2 is exhausted");
    }
    turns_.push_back({TurnKind::ExpertSuggestion, std::move(text)});
  }

 private:
  std::vector<Turn> turns_;
};

namespace detail {

inline std::string fenced_body(const std::string& reply) {
  auto open = reply.find("```");
  if (open != std::string::npos) {
    auto body_start = reply.find('\n', open);
    if (body_start != std::string::npos) {
      auto close = reply.find("```", body_start + 1);
      return reply.substr(body_start + 1, close == std::string::npos ? std::string::npos : close - body_start - 1);
    }
  }
  auto header = reply.find("scidc-ir v1");
  return header == std::string::npos ? reply : reply.substr(header);
}

struct ProgramAttempt {
  std::optional<ir::RuleProgram> program;
  bool parsed = false;
  std::vector<std::string> problems;
  std::vector<ErrorKind> kinds;
};

inline ProgramAttempt check_program_reply(const std::string& reply, const token::Vocabulary* vocab) {
  ProgramAttempt a;
  ir::RuleProgram p;
  try {
    p = ir::parse_program(fenced_body(reply));
  } catch (const Error& e) {
    a.problems.push_back(e.what());
    a.kinds.push_back(e.kind());
    return a;
  }
  a.parsed = true;
  for (const auto& f : ir::lint_program(p, vocab)) {
    if (f.severity != ir::Severity::Error) continue;
    a.problems.push_back(ir::format_finding(f));
  }
  if (a.problems.empty()) a.program = std::move(p);
  return a;
}

inline std::vector<std::string> conclude_variables(const ir::RuleProgram& p) {
  std::vector<std::string> out;
  if (const auto* c = p.meta("conclude")) {
    std::string cur;
    for (char ch : *c + ",") {
      if (ch == ',') {
        auto t = text::trim(cur);
        if (!t.empty()) out.push_back(t);
        cur.clear();
      } else {
        cur += ch;
      }
    }
    return out;
  }
  ir::for_each_step(p.steps, [&](const ir::Step& s) {
    if (ir::binds_variable(s)) {
      out.assign(1, s.name);
    }
  });
  return out;
}

}  // namespace detail

/// Stage 1: knowledge document and problem class to a validated framework.
inline CotFramework decompose_task(const KnowledgeDoc& doc, const std::string& problem_class, GllmClient& gllm) {
  if (text::trim(doc.text).empty()) throw Error(ErrorKind::InvalidArgument, "knowledge document is empty");
  if (text::trim(problem_class).empty()) throw Error(ErrorKind::InvalidArgument, "problem class is empty");
  const std::string prompt = decomposition_prompt(doc.text, problem_class);
  auto attempt = [](const std::string& reply, CotFramework& fw) {
    try {
      fw = parse_framework(reply);
    } catch (const Error& e) {
      return std::vector<std::string>{e.detail()};
    }
    return validate_framework(fw);
  };
  CotFramework fw;
  std::string reply = gllm.complete(prompt);
  auto problems = attempt(reply, fw);
  if (problems.empty()) return fw;
  reply = gllm.complete(repair_prompt(prompt, reply, problems, "framework"));
  problems = attempt(reply, fw);
  if (problems.empty()) return fw;
  throw Error(ErrorKind::MalformedFrameworkReply, text::join(problems, "; "));
}

/// Stage 2: framework to a lint-clean rule program.
inline ir::RuleProgram generate_rule_program(const KnowledgeDoc& doc, const std::string& question_class,
                                             const CotFramework& framework, GllmClient& gllm,
                                             const token::Vocabulary* vocab = nullptr) {
  if (auto v = validate_framework(framework); !v.empty()) {
    throw Error(ErrorKind::InvalidArgument, "framework is invalid: " + text::join(v, "; "));
  }
  const std::string prompt = program_prompt(doc.text, question_class, render_framework(framework));
  std::string reply = gllm.complete(prompt);
  auto a = detail::check_program_reply(reply, vocab);
  if (a.program) return *a.program;
  reply = gllm.complete(repair_prompt(prompt, reply, a.problems, "program"));
  a = detail::check_program_reply(reply, vocab);
  if (a.program) return *a.program;
  if (!a.parsed) throw Error(ErrorKind::UnparseableProgram, text::join(a.problems, "; "));
  throw Error(ErrorKind::LintErrors, text::join(a.problems, "; "));
}

struct CompileResult {
  CotFramework framework;
  ir::RuleProgram program;
};

inline CompileResult compile_knowledge(const KnowledgeDoc& doc, const std::string& task, GllmClient& gllm,
                                       const token::Vocabulary* vocab = nullptr) {
  CompileResult r;
  r.framework = decompose_task(doc, task, gllm);
  r.program = generate_rule_program(doc, task, r.framework, gllm, vocab);
  return r;
}

/// One expert turn: explanation and suggestion go to the GLLM, which
/// returns a revised program. An empty suggestion leaves the program and
/// the transcript unchanged.
inline ir::RuleProgram apply_expert_feedback(const ir::RuleProgram& program, VerificationTranscript& transcript,
                                             const std::string& suggestion, GllmClient& gllm,
                                             const token::Vocabulary* vocab = nullptr) {
  if (transcript.expert_turns() >= VerificationTranscript::kMaxExpertTurns) {
    throw Error(ErrorKind::InvalidArgument, "expert turn budget of 2 is exhausted");
  }
  if (text::trim(suggestion).empty()) return program;
  const std::string explanation = explain_program(program);
  transcript.add_explanation(explanation);
  transcript.add_suggestion(suggestion);
  std::string reply = gllm.complete(revision_prompt(ir::serialize_program(program), explanation, suggestion));
  auto a = detail::check_program_reply(reply, vocab);
  if (!a.program) throw Error(ErrorKind::RevisionRejected, text::join(a.problems, "; "));
  std::vector<std::string> dropped;
  for (const auto& v : detail::conclude_variables(program)) {
    const auto* s = ir::find_step(a.program->steps, v);
    if (!s || !ir::binds_variable(*s)) dropped.push_back(v);
  }
  if (!dropped.empty()) {
    throw Error(ErrorKind::RevisionRejected, "revision drops final answer step(s): " + text::join(dropped, ", "));
  }
  return *a.program;
}

}  // namespace scidc::compiler
