#pragma once

/**
 * @file predicate.hpp
 * @brief Guard and validation predicates: AST, parser, printer, evaluator,
 * static type checker.
 *
 * Grammar, loosest binding first:
 *
 *   or    := and ("or" and)*
 *   and   := not ("and" not)*
 *   not   := "not" not | cmp
 *   cmp   := sum (("<"|"<="|"=="|"="|"!="|">="|">") sum | ["not"] "in" list)?
 *   sum   := prod (("+"|"-") prod)*
 *   prod  := unary (("*"|"/") unary)*
 *   unary := "-" unary | atom
 *   atom  := NUMBER | STRING | "true" | "false" | IDENT | "(" or ")"
 *
 * Values are typed by capability. A bound variable whose text is a decimal
 * number can be used both as a number and as a string; any other bound text
 * is string-only. Ordering and arithmetic need numbers; equality and `in`
 * compare numerically when both sides can, otherwise as strings.
 */

#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "scidc/common.hpp"
#include "scidc/ir/lexer.hpp"

namespace scidc::ir {

struct Expr {
  enum class Kind { Number, String, Bool, Var, Neg, Not, Binary, In };

  Kind kind = Kind::Bool;
  std::string op;    // Binary: or and < <= == != >= > + - * /
  std::string text;  // Number spelling, String value, Var name
  double number = 0;
  bool truth = false;
  bool negated = false;  // In: "not in"
  std::vector<Expr> args;  // Neg/Not: [x]; Binary: [l, r]; In: [subject, literals...]

  bool operator==(const Expr& o) const {
    return kind == o.kind && op == o.op && text == o.text && truth == o.truth && negated == o.negated &&
           args == o.args && (kind != Kind::Number || number == o.number);
  }

  static Expr num(std::string spelling) {
    Expr e;
    e.kind = Kind::Number;
    e.number = std::stod(spelling);
    e.text = std::move(spelling);
    return e;
  }
  static Expr str(std::string value) {
    Expr e;
    e.kind = Kind::String;
    e.text = std::move(value);
    return e;
  }
  static Expr boolean(bool v) {
    Expr e;
    e.kind = Kind::Bool;
    e.truth = v;
    return e;
  }
  static Expr var(std::string name) {
    Expr e;
    e.kind = Kind::Var;
    e.text = std::move(name);
    return e;
  }
  static Expr unary(Kind k, Expr x) {
    Expr e;
    e.kind = k;
    e.args.push_back(std::move(x));
    return e;
  }
  static Expr binary(std::string op, Expr l, Expr r) {
    Expr e;
    e.kind = Kind::Binary;
    e.op = std::move(op);
    e.args.push_back(std::move(l));
    e.args.push_back(std::move(r));
    return e;
  }
};

namespace detail {

inline bool is_keyword(std::string_view s) {
  return s == "and" || s == "or" || s == "not" || s == "in" || s == "true" || s == "false";
}

inline bool is_comparison(std::string_view op) {
  return op == "<" || op == "<=" || op == "==" || op == "!=" || op == ">=" || op == ">";
}

}  // namespace detail

/// Recursive-descent predicate parser over a shared token stream. Parsing
/// stops at the first token that cannot continue the expression.
class PredicateParser {
 public:
  PredicateParser(const std::vector<LexToken>& toks, std::size_t& pos) : t_(toks), pos_(pos) {}

  Expr parse() { return parse_or(); }

 private:
  const std::vector<LexToken>& t_;
  std::size_t& pos_;

  const LexToken& peek(std::size_t ahead = 0) const {
    std::size_t i = pos_ + ahead;
    return i < t_.size() ? t_[i] : t_.back();
  }
  bool at_ident(std::string_view s, std::size_t ahead = 0) const {
    return peek(ahead).kind == LexToken::Kind::Ident && peek(ahead).text == s;
  }
  bool at_punct(std::string_view s) const { return peek().kind == LexToken::Kind::Punct && peek().text == s; }

  [[noreturn]] void fail(const std::string& msg) const {
    throw SyntaxError(ErrorKind::SyntaxError, msg, peek().line, peek().column);
  }

  Expr parse_or() {
    Expr left = parse_and();
    while (at_ident("or")) {
      ++pos_;
      left = Expr::binary("or", std::move(left), parse_and());
    }
    return left;
  }

  Expr parse_and() {
    Expr left = parse_not();
    while (at_ident("and")) {
      ++pos_;
      left = Expr::binary("and", std::move(left), parse_not());
    }
    return left;
  }

  Expr parse_not() {
    if (at_ident("not")) {
      ++pos_;
      return Expr::unary(Expr::Kind::Not, parse_not());
    }
    return parse_cmp();
  }

  Expr parse_cmp() {
    Expr left = parse_sum();
    if (peek().kind == LexToken::Kind::Punct) {
      std::string op = peek().text;
      if (op == "=") op = "==";
      if (detail::is_comparison(op)) {
        ++pos_;
        return Expr::binary(op, std::move(left), parse_sum());
      }
    }
    bool negated = false;
    if (at_ident("not") && at_ident("in", 1)) {
      negated = true;
      ++pos_;
    }
    if (at_ident("in")) {
      ++pos_;
      Expr e;
      e.kind = Expr::Kind::In;
      e.negated = negated;
      e.args.push_back(std::move(left));
      if (!at_punct("[")) fail("expected '[' after 'in'");
      ++pos_;
      while (!at_punct("]")) {
        e.args.push_back(parse_literal());
        if (at_punct(",")) {
          ++pos_;
        } else if (!at_punct("]")) {
          fail("expected ',' or ']' in list");
        }
      }
      ++pos_;
      return e;
    }
    return left;
  }

  Expr parse_literal() {
    bool neg = false;
    if (at_punct("-")) {
      neg = true;
      ++pos_;
    }
    const LexToken& tok = peek();
    if (tok.kind == LexToken::Kind::Number) {
      ++pos_;
      return Expr::num((neg ? "-" : "") + tok.text);
    }
    if (!neg && tok.kind == LexToken::Kind::String) {
      ++pos_;
      return Expr::str(tok.text);
    }
    fail("expected a number or string literal");
  }

  Expr parse_sum() {
    Expr left = parse_prod();
    while (at_punct("+") || at_punct("-")) {
      std::string op = peek().text;
      ++pos_;
      left = Expr::binary(op, std::move(left), parse_prod());
    }
    return left;
  }

  Expr parse_prod() {
    Expr left = parse_unary();
    while (at_punct("*") || at_punct("/")) {
      std::string op = peek().text;
      ++pos_;
      left = Expr::binary(op, std::move(left), parse_unary());
    }
    return left;
  }

  Expr parse_unary() {
    if (at_punct("-")) {
      ++pos_;
      return Expr::unary(Expr::Kind::Neg, parse_unary());
    }
    return parse_atom();
  }

  Expr parse_atom() {
    const LexToken& tok = peek();
    switch (tok.kind) {
      case LexToken::Kind::Number:
        ++pos_;
        return Expr::num(tok.text);
      case LexToken::Kind::String:
        ++pos_;
        return Expr::str(tok.text);
      case LexToken::Kind::Ident:
        if (tok.text == "true" || tok.text == "false") {
          ++pos_;
          return Expr::boolean(tok.text == "true");
        }
        if (detail::is_keyword(tok.text)) fail("unexpected keyword '" + tok.text + "'");
        ++pos_;
        return Expr::var(tok.text);
      case LexToken::Kind::Punct:
        if (tok.text == "(") {
          ++pos_;
          Expr inner = parse_or();
          if (!at_punct(")")) fail("expected ')'");
          ++pos_;
          return inner;
        }
        fail("unexpected '" + tok.text + "' in expression");
      case LexToken::Kind::End:
        break;
    }
    fail("unexpected end of input in expression");
  }
};

/// Parses a complete predicate; trailing input is a SyntaxError.
inline Expr parse_predicate(std::string_view src) {
  auto toks = Lexer(src).tokenize();
  std::size_t pos = 0;
  Expr e = PredicateParser(toks, pos).parse();
  if (toks[pos].kind != LexToken::Kind::End) {
    throw SyntaxError(ErrorKind::SyntaxError, "unexpected '" + toks[pos].text + "' after expression", toks[pos].line,
                      toks[pos].column);
  }
  return e;
}

// ---------------------------------------------------------------------------
// Printing

namespace detail {

inline int precedence(const Expr& e) {
  switch (e.kind) {
    case Expr::Kind::Binary:
      if (e.op == "or") return 1;
      if (e.op == "and") return 2;
      if (is_comparison(e.op)) return 4;
      if (e.op == "+" || e.op == "-") return 5;
      return 6;
    case Expr::Kind::Not: return 3;
    case Expr::Kind::In: return 4;
    case Expr::Kind::Neg: return 7;
    default: return 8;
  }
}

inline std::string quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '"': out += "\\\""; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  return out + "\"";
}

inline void print_expr(const Expr& e, std::string& out);

inline void print_child(const Expr& child, int min_prec, std::string& out) {
  bool paren = precedence(child) < min_prec;
  // A leading minus on a number literal would otherwise fuse with a binary minus.
  if (child.kind == Expr::Kind::Number && !child.text.empty() && child.text[0] == '-' && min_prec > 5) paren = true;
  if (paren) out += '(';
  print_expr(child, out);
  if (paren) out += ')';
}

inline void print_expr(const Expr& e, std::string& out) {
  switch (e.kind) {
    case Expr::Kind::Number:
      out += e.text;
      return;
    case Expr::Kind::String:
      out += quote(e.text);
      return;
    case Expr::Kind::Bool:
      out += e.truth ? "true" : "false";
      return;
    case Expr::Kind::Var:
      out += e.text;
      return;
    case Expr::Kind::Neg:
      out += '-';
      print_child(e.args[0], 7, out);
      return;
    case Expr::Kind::Not:
      out += "not ";
      print_child(e.args[0], 3, out);
      return;
    case Expr::Kind::In:
      print_child(e.args[0], 5, out);
      out += e.negated ? " not in [" : " in [";
      for (std::size_t i = 1; i < e.args.size(); ++i) {
        if (i > 1) out += ", ";
        print_expr(e.args[i], out);
      }
      out += ']';
      return;
    case Expr::Kind::Binary: {
      int p = precedence(e);
      bool cmp = is_comparison(e.op);
      print_child(e.args[0], cmp ? p + 1 : p, out);
      out += ' ';
      out += e.op;
      out += ' ';
      print_child(e.args[1], p + 1, out);
      return;
    }
  }
}

}  // namespace detail

inline std::string to_string(const Expr& e) {
  std::string out;
  detail::print_expr(e, out);
  return out;
}

/// Free variables, sorted.
inline std::set<std::string> variables(const Expr& e) {
  std::set<std::string> out;
  std::function<void(const Expr&)> walk = [&](const Expr& x) {
    if (x.kind == Expr::Kind::Var) out.insert(x.text);
    for (const auto& a : x.args) walk(a);
  };
  walk(e);
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation

struct Value {
  bool has_num = false;
  bool has_str = false;
  bool is_bool = false;
  double num = 0;
  std::string str;
  bool truth = false;
};

/// Variable lookup; returns nullptr when the name is unbound.
using VarLookup = std::function<const std::string*(const std::string&)>;

inline double parse_decimal(std::string_view s) {
  double v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc()) return std::stod(std::string(s));
  return v;
}

namespace detail {

[[noreturn]] inline void type_error(const std::string& msg) { throw Error(ErrorKind::PredicateTypeError, msg); }

inline bool values_equal(const Value& a, const Value& b, const std::string& where) {
  if (a.is_bool && b.is_bool) return a.truth == b.truth;
  if (a.has_num && b.has_num) return a.num == b.num;
  if (a.has_str && b.has_str) return a.str == b.str;
  type_error("cannot compare mismatched types in " + where);
}

inline Value eval(const Expr& e, const VarLookup& lookup) {
  Value v;
  switch (e.kind) {
    case Expr::Kind::Number:
      v.has_num = true;
      v.num = e.number;
      return v;
    case Expr::Kind::String:
      v.has_str = true;
      v.str = e.text;
      return v;
    case Expr::Kind::Bool:
      v.is_bool = true;
      v.truth = e.truth;
      return v;
    case Expr::Kind::Var: {
      const std::string* bound = lookup ? lookup(e.text) : nullptr;
      if (!bound) throw Error(ErrorKind::UnboundVariable, e.text);
      v.has_str = true;
      v.str = *bound;
      if (text::is_decimal(*bound)) {
        v.has_num = true;
        v.num = parse_decimal(*bound);
      }
      return v;
    }
    case Expr::Kind::Neg: {
      Value x = eval(e.args[0], lookup);
      if (!x.has_num) type_error("unary minus needs a number");
      v.has_num = true;
      v.num = -x.num;
      return v;
    }
    case Expr::Kind::Not: {
      Value x = eval(e.args[0], lookup);
      if (!x.is_bool) type_error("'not' needs a boolean");
      v.is_bool = true;
      v.truth = !x.truth;
      return v;
    }
    case Expr::Kind::In: {
      Value subject = eval(e.args[0], lookup);
      bool found = false;
      for (std::size_t i = 1; i < e.args.size() && !found; ++i) {
        found = values_equal(subject, eval(e.args[i], lookup), "'in'");
      }
      v.is_bool = true;
      v.truth = e.negated ? !found : found;
      return v;
    }
    case Expr::Kind::Binary: {
      if (e.op == "and" || e.op == "or") {
        Value l = eval(e.args[0], lookup);
        if (!l.is_bool) type_error("'" + e.op + "' needs booleans");
        // Both sides are evaluated so unbound names and type errors surface
        // regardless of the left operand.
        Value r = eval(e.args[1], lookup);
        if (!r.is_bool) type_error("'" + e.op + "' needs booleans");
        v.is_bool = true;
        v.truth = e.op == "and" ? (l.truth && r.truth) : (l.truth || r.truth);
        return v;
      }
      Value l = eval(e.args[0], lookup);
      Value r = eval(e.args[1], lookup);
      if (e.op == "==" || e.op == "!=") {
        bool eq = values_equal(l, r, "'" + e.op + "'");
        v.is_bool = true;
        v.truth = e.op == "==" ? eq : !eq;
        return v;
      }
      if (!l.has_num || !r.has_num) type_error("'" + e.op + "' needs numbers");
      if (is_comparison(e.op)) {
        v.is_bool = true;
        if (e.op == "<") v.truth = l.num < r.num;
        if (e.op == "<=") v.truth = l.num <= r.num;
        if (e.op == ">=") v.truth = l.num >= r.num;
        if (e.op == ">") v.truth = l.num > r.num;
        return v;
      }
      v.has_num = true;
      if (e.op == "+") v.num = l.num + r.num;
      if (e.op == "-") v.num = l.num - r.num;
      if (e.op == "*") v.num = l.num * r.num;
      if (e.op == "/") v.num = l.num / r.num;  // IEEE: x/0 is +-inf or NaN
      return v;
    }
  }
  return v;
}

}  // namespace detail

inline Value evaluate(const Expr& e, const VarLookup& lookup) { return detail::eval(e, lookup); }

/// Evaluates a predicate that must produce a boolean.
inline bool evaluate_bool(const Expr& e, const VarLookup& lookup) {
  Value v = detail::eval(e, lookup);
  if (!v.is_bool) detail::type_error("predicate does not produce a boolean: " + to_string(e));
  return v.truth;
}

inline VarLookup lookup_in(const std::map<std::string, std::string>& bindings) {
  return [&bindings](const std::string& name) -> const std::string* {
    auto it = bindings.find(name);
    return it == bindings.end() ? nullptr : &it->second;
  };
}

// ---------------------------------------------------------------------------
// Static typing

enum class VarType { Numeric, Text };

struct StaticType {
  bool num = false;
  bool str = false;
  bool boolean = false;
};

struct TypeReport {
  std::vector<std::string> errors;
  std::set<std::string> unbound;
};

namespace detail {

inline StaticType check(const Expr& e, const std::map<std::string, VarType>& env, TypeReport& rep) {
  StaticType t;
  auto need_num = [&](const StaticType& x, const std::string& what) {
    if (!x.num) rep.errors.push_back(what + " needs numbers in: " + to_string(e));
  };
  auto eq_compatible = [&](const StaticType& a, const StaticType& b) {
    if ((a.boolean && b.boolean) || (a.num && b.num) || (a.str && b.str)) return;
    rep.errors.push_back("mismatched types compared in: " + to_string(e));
  };
  switch (e.kind) {
    case Expr::Kind::Number: t.num = true; return t;
    case Expr::Kind::String: t.str = true; return t;
    case Expr::Kind::Bool: t.boolean = true; return t;
    case Expr::Kind::Var: {
      auto it = env.find(e.text);
      if (it == env.end()) {
        rep.unbound.insert(e.text);
        t.num = t.str = true;  // avoid cascading reports
        return t;
      }
      t.str = true;
      t.num = it->second == VarType::Numeric;
      return t;
    }
    case Expr::Kind::Neg:
      need_num(check(e.args[0], env, rep), "unary minus");
      t.num = true;
      return t;
    case Expr::Kind::Not:
      if (!check(e.args[0], env, rep).boolean) rep.errors.push_back("'not' needs a boolean in: " + to_string(e));
      t.boolean = true;
      return t;
    case Expr::Kind::In: {
      StaticType s = check(e.args[0], env, rep);
      for (std::size_t i = 1; i < e.args.size(); ++i) eq_compatible(s, check(e.args[i], env, rep));
      t.boolean = true;
      return t;
    }
    case Expr::Kind::Binary: {
      StaticType l = check(e.args[0], env, rep);
      StaticType r = check(e.args[1], env, rep);
      if (e.op == "and" || e.op == "or") {
        if (!l.boolean || !r.boolean) rep.errors.push_back("'" + e.op + "' needs booleans in: " + to_string(e));
        t.boolean = true;
      } else if (e.op == "==" || e.op == "!=") {
        eq_compatible(l, r);
        t.boolean = true;
      } else if (is_comparison(e.op)) {
        need_num(l, "'" + e.op + "'");
        need_num(r, "'" + e.op + "'");
        t.boolean = true;
      } else {
        need_num(l, "'" + e.op + "'");
        need_num(r, "'" + e.op + "'");
        t.num = true;
      }
      return t;
    }
  }
  return t;
}

}  // namespace detail

/// Type-checks `e` as a boolean predicate against the given variable types.
inline TypeReport type_check(const Expr& e, const std::map<std::string, VarType>& env) {
  TypeReport rep;
  StaticType t = detail::check(e, env, rep);
  if (!t.boolean) rep.errors.push_back("predicate does not produce a boolean: " + to_string(e));
  return rep;
}

/// Value of a predicate with no free variables, or nullopt when it has any
/// or fails to evaluate.
inline std::optional<bool> constant_value(const Expr& e) {
  if (!variables(e).empty()) return std::nullopt;
  try {
    return evaluate_bool(e, nullptr);
  } catch (const Error&) {
    return std::nullopt;
  }
}

}  // namespace scidc::ir
