#pragma once

// Parser for the `scidc-ir v1` rule-program text format.

#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "scidc/ir/lexer.hpp"
#include "scidc/ir/predicate.hpp"
#include "scidc/ir/program.hpp"

namespace scidc::ir {

namespace detail {

class ProgramParser {
 public:
  explicit ProgramParser(std::string_view src) : toks_(Lexer(src).tokenize()) {}

  RuleProgram parse() {
    expect_ident("scidc");
    expect_punct("-");
    expect_ident("ir");
    if (!at_ident("v1")) fail("unsupported format version; expected 'scidc-ir v1'");
    ++pos_;
    RuleProgram p;
    expect_ident("program");
    p.name = take_ident("program name");
    while (at_ident("meta")) {
      ++pos_;
      std::string key = take_ident("metadata key");
      expect_punct("=");
      p.metadata.emplace_back(key, take_string("metadata value"));
    }
    p.steps = parse_steps(0);
    if (peek().kind != LexToken::Kind::End) fail("expected 'step'");
    return p;
  }

 private:
  std::vector<LexToken> toks_;
  std::size_t pos_ = 0;
  std::set<std::string> names_;

  const LexToken& peek(std::size_t ahead = 0) const {
    std::size_t i = pos_ + ahead;
    return i < toks_.size() ? toks_[i] : toks_.back();
  }
  bool at_ident(std::string_view s) const { return peek().kind == LexToken::Kind::Ident && peek().text == s; }
  bool at_punct(std::string_view s) const { return peek().kind == LexToken::Kind::Punct && peek().text == s; }

  [[noreturn]] void fail(const std::string& msg, ErrorKind kind = ErrorKind::SyntaxError) const {
    throw SyntaxError(kind, msg, peek().line, peek().column);
  }

  void expect_ident(std::string_view s) {
    if (!at_ident(s)) fail("expected '" + std::string(s) + "'");
    ++pos_;
  }
  void expect_punct(std::string_view s) {
    if (!at_punct(s)) fail("expected '" + std::string(s) + "'");
    ++pos_;
  }
  std::string take_ident(const std::string& what) {
    if (peek().kind != LexToken::Kind::Ident) fail("expected " + what);
    return toks_[pos_++].text;
  }
  std::string take_string(const std::string& what) {
    if (peek().kind != LexToken::Kind::String) fail("expected " + what + " (a quoted string)");
    return toks_[pos_++].text;
  }
  std::string take_literal(const std::string& what) {
    if (peek().kind == LexToken::Kind::String || peek().kind == LexToken::Kind::Number) return toks_[pos_++].text;
    fail("expected " + what + " (a string or number)");
  }
  double take_number(const std::string& what) {
    bool neg = false;
    if (at_punct("-")) {
      neg = true;
      ++pos_;
    }
    if (peek().kind != LexToken::Kind::Number) fail("expected " + what + " (a number)");
    double v = parse_decimal(toks_[pos_++].text);
    return neg ? -v : v;
  }
  int take_int(const std::string& what) {
    bool neg = false;
    if (at_punct("-")) {
      neg = true;
      ++pos_;
    }
    const LexToken& tok = peek();
    if (tok.kind != LexToken::Kind::Number || tok.text.find('.') != std::string::npos || tok.text.size() > 9) {
      fail("expected " + what + " (an integer)");
    }
    ++pos_;
    int v = std::stoi(tok.text);
    return neg ? -v : v;
  }
  Expr take_predicate() {
    PredicateParser pp(toks_, pos_);
    return pp.parse();
  }

  std::vector<std::string> parse_list() {
    expect_punct("[");
    std::vector<std::string> out;
    while (!at_punct("]")) {
      out.push_back(take_literal("list item"));
      if (at_punct(",")) {
        ++pos_;
      } else if (!at_punct("]")) {
        fail("expected ',' or ']'");
      }
    }
    ++pos_;
    return out;
  }

  bool at_step_end() const {
    return at_ident("step") || at_punct("}") || peek().kind == LexToken::Kind::End;
  }

  template <typename T>
  void set_once(std::optional<T>& slot, T value, const std::string& attr, const LexToken& at) {
    if (slot) throw SyntaxError(ErrorKind::SyntaxError, "duplicate attribute '" + attr + "'", at.line, at.column);
    slot = std::move(value);
  }

  std::vector<Step> parse_steps(int depth) {
    std::vector<Step> steps;
    while (at_ident("step")) steps.push_back(parse_step(depth));
    return steps;
  }

  Step parse_step(int depth) {
    expect_ident("step");
    const LexToken name_tok = peek();
    Step s;
    s.name = take_ident("step name");
    if (!names_.insert(s.name).second) {
      throw SyntaxError(ErrorKind::DuplicateStepName, "step '" + s.name + "' is already defined", name_tok.line,
                        name_tok.column);
    }
    expect_punct(":");
    const LexToken kind_tok = peek();
    std::string kind = take_ident("step kind");
    if (kind == "emit") {
      s.body = parse_emit();
    } else if (kind == "gen") {
      s.body = parse_gen();
    } else if (kind == "select") {
      s.body = parse_select();
    } else if (kind == "branch") {
      s.body = parse_branch(depth);
    } else if (kind == "validate") {
      s.body = parse_validate();
    } else {
      throw SyntaxError(ErrorKind::UnknownStepKind, "unknown step kind '" + kind + "'", kind_tok.line,
                        kind_tok.column);
    }
    return s;
  }

  EmitBody parse_emit() {
    EmitBody b;
    if (at_ident("text")) {
      ++pos_;
      expect_punct("=");
    }
    b.text = take_string("emit text");
    return b;
  }

  GenBody parse_gen() {
    GenBody b;
    while (!at_step_end()) {
      const LexToken at = peek();
      std::string attr = take_ident("gen attribute");
      expect_punct("=");
      if (attr == "regex") {
        set_once(b.regex, take_string("regex"), attr, at);
      } else if (attr == "stop") {
        set_once(b.stop, take_string("stop string"), attr, at);
      } else if (attr == "max_tokens") {
        set_once(b.max_tokens, take_int("max_tokens"), attr, at);
      } else if (attr == "temperature") {
        set_once(b.temperature, take_number("temperature"), attr, at);
      } else {
        throw SyntaxError(ErrorKind::SyntaxError, "unknown gen attribute '" + attr + "'", at.line, at.column);
      }
    }
    return b;
  }

  SelectBody parse_select() {
    SelectBody b;
    bool have_options = false;
    while (!at_step_end()) {
      const LexToken at = peek();
      std::string attr = take_ident("select attribute");
      if (attr == "options") {
        if (have_options) throw SyntaxError(ErrorKind::SyntaxError, "duplicate options", at.line, at.column);
        have_options = true;
        expect_punct("=");
        b.options = parse_list();
      } else if (attr == "dynamic") {
        if (have_options) throw SyntaxError(ErrorKind::SyntaxError, "duplicate options", at.line, at.column);
        have_options = true;
        b.dynamic = parse_dynamic();
      } else if (attr == "temperature") {
        expect_punct("=");
        set_once(b.temperature, take_number("temperature"), attr, at);
      } else {
        throw SyntaxError(ErrorKind::SyntaxError, "unknown select attribute '" + attr + "'", at.line, at.column);
      }
    }
    return b;
  }

  DynamicOptions parse_dynamic() {
    DynamicOptions d;
    expect_punct("{");
    bool saw_else = false;
    while (!at_punct("}")) {
      if (saw_else) fail("'else' must be the last clause");
      if (at_ident("when")) {
        ++pos_;
        GuardClause g;
        g.guard = take_predicate();
        expect_punct("->");
        g.options = parse_list();
        expect_punct(";");
        d.guards.push_back(std::move(g));
      } else if (at_ident("else")) {
        ++pos_;
        expect_punct("->");
        d.otherwise = parse_list();
        expect_punct(";");
        saw_else = true;
      } else {
        fail("expected 'when' or 'else'");
      }
    }
    ++pos_;
    if (!saw_else) fail("dynamic options need an 'else' clause");
    return d;
  }

  BranchBody parse_branch(int depth) {
    BranchBody b;
    expect_punct("{");
    while (!at_punct("}")) {
      if (b.otherwise) fail("'else' must be the last arm");
      if (at_ident("when")) {
        ++pos_;
        BranchArm arm;
        arm.guard = take_predicate();
        expect_punct("{");
        arm.steps = parse_steps(depth + 1);
        expect_punct("}");
        b.arms.push_back(std::move(arm));
      } else if (at_ident("else")) {
        ++pos_;
        expect_punct("{");
        b.otherwise = parse_steps(depth + 1);
        expect_punct("}");
      } else {
        fail("expected 'when' or 'else'");
      }
    }
    ++pos_;
    return b;
  }

  ValidateBody parse_validate() {
    ValidateBody b;
    bool have_fallback = false;
    while (!at_step_end()) {
      const LexToken at = peek();
      std::string attr = take_ident("validate attribute");
      if (attr == "fallback") {
        if (have_fallback) throw SyntaxError(ErrorKind::SyntaxError, "duplicate fallback", at.line, at.column);
        have_fallback = true;
        expect_punct("{");
        while (!at_punct("}")) {
          FallbackAssignment fa;
          fa.variable = take_ident("fallback variable");
          expect_punct("=");
          fa.value = take_literal("fallback value");
          expect_punct(";");
          b.fallback.push_back(std::move(fa));
        }
        ++pos_;
        continue;
      }
      expect_punct("=");
      if (attr == "pred") {
        set_once(b.predicate, take_predicate(), attr, at);
      } else if (attr == "max_retries") {
        set_once(b.max_retries, take_int("max_retries"), attr, at);
      } else if (attr == "anchor") {
        set_once(b.anchor, take_ident("anchor step name"), attr, at);
      } else if (attr == "retry") {
        set_once(b.retry_message, take_string("retry message"), attr, at);
      } else {
        throw SyntaxError(ErrorKind::SyntaxError, "unknown validate attribute '" + attr + "'", at.line, at.column);
      }
    }
    return b;
  }
};

}  // namespace detail

/// Parses rule-program text. Throws SyntaxError (kinds SyntaxError,
/// DuplicateStepName, UnknownStepKind) with a line:column position.
inline RuleProgram parse_program(std::string_view source) { return detail::ProgramParser(source).parse(); }

}  // namespace scidc::ir
