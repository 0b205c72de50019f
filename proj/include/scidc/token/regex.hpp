#pragma once

/**
 * @file regex.hpp
 * @brief Byte-level regex compiler producing a minimal deterministic automaton.
 *
 * Supported syntax: literals, escapes (\d \w \s \D \W \S \n \t \r \f \v \xHH and
 * escaped punctuation), classes with ranges and negation, `.`, `*`, `+`, `?`,
 * `{m}`, `{m,}`, `{m,n}`, alternation, `(...)` and `(?:...)` groups. The match is
 * always a full match; a leading `^` and trailing `$` are accepted and ignored.
 *
 * Backreferences, lookaround, word boundaries, named groups and inline flags are
 * rejected with UnsupportedRegexFeature so the language stays regular.
 *
 * `.` matches any byte except '\n' and '\r'; `\s` is " \t\n\v\f\r"; `\w` is
 * [A-Za-z0-9_]. Multi-byte UTF-8 literals are treated as one atom for the
 * purpose of quantifiers.
 */

#include <algorithm>
#include <array>
#include <bitset>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "scidc/common.hpp"

namespace scidc::token {

using ByteSet = std::bitset<256>;

/// Deterministic automaton over bytes. Missing transitions are -1 (dead).
struct CharDfa {
  std::vector<std::array<std::int32_t, 256>> next;
  std::vector<bool> accepting;
  std::int32_t start = 0;

  std::size_t size() const { return next.size(); }

  bool matches(std::string_view s) const {
    if (next.empty()) return false;
    std::int32_t state = start;
    for (unsigned char c : s) {
      state = next[static_cast<std::size_t>(state)][c];
      if (state < 0) return false;
    }
    return accepting[static_cast<std::size_t>(state)];
  }

  bool empty_language() const {
    return next.empty() || std::none_of(accepting.begin(), accepting.end(), [](bool a) { return a; });
  }
};

namespace detail {

struct RegexNode {
  enum class Kind { Empty, Bytes, Concat, Alt, Repeat };
  Kind kind = Kind::Empty;
  ByteSet bytes;
  std::vector<RegexNode> children;
  int min = 0;
  int max = 0;  // -1 = unbounded
};

inline constexpr int kMaxRepeat = 1000;

class RegexParser {
 public:
  explicit RegexParser(std::string_view pattern) : p_(pattern) {}

  RegexNode parse() {
    if (pos_ < p_.size() && p_[pos_] == '^') ++pos_;
    RegexNode node = parse_alt();
    if (pos_ < p_.size()) {
      if (p_[pos_] == ')') unsupported("unbalanced ')'");
      unsupported("unexpected character '" + std::string(1, p_[pos_]) + "'");
    }
    return node;
  }

 private:
  std::string_view p_;
  std::size_t pos_ = 0;

  [[noreturn]] void unsupported(const std::string& what) const {
    throw Error(ErrorKind::UnsupportedRegexFeature,
                what + " at offset " + std::to_string(pos_) + " in /" + std::string(p_) + "/");
  }

  bool at_end() const { return pos_ >= p_.size(); }

  bool trailing_dollar() const { return pos_ + 1 == p_.size() && p_[pos_] == '$'; }

  RegexNode parse_alt() {
    std::vector<RegexNode> branches;
    branches.push_back(parse_concat());
    while (!at_end() && p_[pos_] == '|') {
      ++pos_;
      branches.push_back(parse_concat());
    }
    if (branches.size() == 1) return std::move(branches.front());
    RegexNode alt;
    alt.kind = RegexNode::Kind::Alt;
    alt.children = std::move(branches);
    return alt;
  }

  RegexNode parse_concat() {
    RegexNode cat;
    cat.kind = RegexNode::Kind::Concat;
    while (!at_end() && p_[pos_] != '|' && p_[pos_] != ')') {
      if (trailing_dollar()) {
        ++pos_;
        break;
      }
      cat.children.push_back(parse_repeat());
    }
    if (cat.children.size() == 1) return std::move(cat.children.front());
    if (cat.children.empty()) return RegexNode{};
    return cat;
  }

  int parse_int() {
    std::size_t start = pos_;
    long v = 0;
    while (!at_end() && p_[pos_] >= '0' && p_[pos_] <= '9') {
      v = v * 10 + (p_[pos_] - '0');
      if (v > kMaxRepeat) unsupported("repetition bound above " + std::to_string(kMaxRepeat));
      ++pos_;
    }
    if (pos_ == start) return -1;
    return static_cast<int>(v);
  }

  RegexNode parse_repeat() {
    RegexNode atom = parse_atom();
    while (!at_end()) {
      char c = p_[pos_];
      int lo = 0, hi = 0;
      if (c == '*') {
        lo = 0, hi = -1, ++pos_;
      } else if (c == '+') {
        lo = 1, hi = -1, ++pos_;
      } else if (c == '?') {
        lo = 0, hi = 1, ++pos_;
      } else if (c == '{') {
        ++pos_;
        lo = parse_int();
        if (lo < 0) unsupported("malformed bounded repetition");
        hi = lo;
        if (!at_end() && p_[pos_] == ',') {
          ++pos_;
          hi = parse_int();
          if (hi >= 0 && hi < lo) unsupported("repetition bounds out of order");
        }
        if (at_end() || p_[pos_] != '}') unsupported("malformed bounded repetition");
        ++pos_;
      } else {
        break;
      }
      // Lazy and possessive suffixes do not change a full-match language.
      if (!at_end() && p_[pos_] == '?') ++pos_;
      else if (!at_end() && p_[pos_] == '+') unsupported("possessive quantifier");
      RegexNode rep;
      rep.kind = RegexNode::Kind::Repeat;
      rep.min = lo;
      rep.max = hi;
      rep.children.push_back(std::move(atom));
      atom = std::move(rep);
    }
    return atom;
  }

  static RegexNode bytes_node(const ByteSet& set) {
    RegexNode n;
    n.kind = RegexNode::Kind::Bytes;
    n.bytes = set;
    return n;
  }

  static ByteSet single(unsigned char c) {
    ByteSet s;
    s.set(c);
    return s;
  }

  static ByteSet range(unsigned char lo, unsigned char hi) {
    ByteSet s;
    for (int c = lo; c <= hi; ++c) s.set(static_cast<std::size_t>(c));
    return s;
  }

  static ByteSet digit_set() { return range('0', '9'); }
  static ByteSet word_set() { return range('a', 'z') | range('A', 'Z') | range('0', '9') | single('_'); }
  static ByteSet space_set() {
    ByteSet s;
    for (char c : std::string_view(" \t\n\v\f\r")) s.set(static_cast<unsigned char>(c));
    return s;
  }

  static int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  }

  // Parses the character after a backslash. Returns the set it denotes.
  ByteSet parse_escape(bool in_class) {
    if (at_end()) unsupported("dangling backslash");
    char c = p_[pos_++];
    switch (c) {
      case 'd': return digit_set();
      case 'D': return ~digit_set();
      case 'w': return word_set();
      case 'W': return ~word_set();
      case 's': return space_set();
      case 'S': return ~space_set();
      case 'n': return single('\n');
      case 't': return single('\t');
      case 'r': return single('\r');
      case 'f': return single('\f');
      case 'v': return single('\v');
      case 'x': {
        if (pos_ + 2 > p_.size()) unsupported("short \\x escape");
        int hi = hex_value(p_[pos_]), lo = hex_value(p_[pos_ + 1]);
        if (hi < 0 || lo < 0) unsupported("malformed \\x escape");
        pos_ += 2;
        return single(static_cast<unsigned char>(hi * 16 + lo));
      }
      case 'b':
      case 'B':
        if (in_class && c == 'b') return single('\b');
        --pos_;
        unsupported("word boundary");
      case 'p':
      case 'P':
        --pos_;
        unsupported("unicode property class");
      case 'k':
        --pos_;
        unsupported("named backreference");
      default:
        break;
    }
    if (c >= '1' && c <= '9') {
      --pos_;
      unsupported("backreference");
    }
    if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '0') {
      --pos_;
      unsupported("unknown escape \\" + std::string(1, c));
    }
    return single(static_cast<unsigned char>(c));
  }

  static std::size_t utf8_length(unsigned char lead) {
    if (lead >= 0xF0) return 4;
    if (lead >= 0xE0) return 3;
    if (lead >= 0xC0) return 2;
    return 1;
  }

  RegexNode utf8_literal() {
    unsigned char lead = static_cast<unsigned char>(p_[pos_]);
    std::size_t len = std::min(utf8_length(lead), p_.size() - pos_);
    RegexNode cat;
    cat.kind = RegexNode::Kind::Concat;
    for (std::size_t i = 0; i < len; ++i) {
      cat.children.push_back(bytes_node(single(static_cast<unsigned char>(p_[pos_ + i]))));
    }
    pos_ += len;
    if (cat.children.size() == 1) return std::move(cat.children.front());
    return cat;
  }

  RegexNode parse_class() {
    // pos_ is just past '['
    bool negate = false;
    if (!at_end() && p_[pos_] == '^') {
      negate = true;
      ++pos_;
    }
    ByteSet set;
    bool first = true;
    while (true) {
      if (at_end()) unsupported("unterminated character class");
      char c = p_[pos_];
      if (c == ']' && !first) {
        ++pos_;
        break;
      }
      first = false;
      if (static_cast<unsigned char>(c) >= 0x80) unsupported("non-ASCII character in class");
      if (c == '[' && pos_ + 1 < p_.size() && (p_[pos_ + 1] == ':' || p_[pos_ + 1] == '=' || p_[pos_ + 1] == '.')) {
        unsupported("POSIX bracket expression");
      }
      ByteSet item;
      bool is_single = true;
      unsigned char lo = 0;
      ++pos_;
      if (c == '\\') {
        item = parse_escape(true);
        is_single = item.count() == 1;
        if (is_single) {
          for (int b = 0; b < 256; ++b) {
            if (item.test(static_cast<std::size_t>(b))) lo = static_cast<unsigned char>(b);
          }
        }
      } else {
        lo = static_cast<unsigned char>(c);
        item = single(lo);
      }
      // Range?
      if (is_single && pos_ + 1 < p_.size() && p_[pos_] == '-' && p_[pos_ + 1] != ']') {
        ++pos_;
        char hc = p_[pos_++];
        unsigned char hi;
        if (hc == '\\') {
          ByteSet h = parse_escape(true);
          if (h.count() != 1) unsupported("class escape as range bound");
          hi = 0;
          for (int b = 0; b < 256; ++b) {
            if (h.test(static_cast<std::size_t>(b))) hi = static_cast<unsigned char>(b);
          }
        } else {
          if (static_cast<unsigned char>(hc) >= 0x80) unsupported("non-ASCII character in class");
          hi = static_cast<unsigned char>(hc);
        }
        if (hi < lo) unsupported("reversed class range");
        item = range(lo, hi);
      }
      set |= item;
    }
    if (negate) set = ~set;
    return bytes_node(set);
  }

  RegexNode parse_atom() {
    char c = p_[pos_];
    switch (c) {
      case '(': {
        ++pos_;
        if (!at_end() && p_[pos_] == '?') {
          if (pos_ + 1 < p_.size() && p_[pos_ + 1] == ':') {
            pos_ += 2;
          } else if (pos_ + 1 < p_.size() && (p_[pos_ + 1] == '=' || p_[pos_ + 1] == '!')) {
            unsupported("lookahead");
          } else if (pos_ + 2 < p_.size() && p_[pos_ + 1] == '<' &&
                     (p_[pos_ + 2] == '=' || p_[pos_ + 2] == '!')) {
            unsupported("lookbehind");
          } else if (pos_ + 1 < p_.size() && (p_[pos_ + 1] == '<' || p_[pos_ + 1] == 'P')) {
            unsupported("named group");
          } else {
            unsupported("inline flags");
          }
        }
        RegexNode inner = parse_alt();
        if (at_end() || p_[pos_] != ')') unsupported("unbalanced '('");
        ++pos_;
        return inner;
      }
      case '[':
        ++pos_;
        return parse_class();
      case '.':
        ++pos_;
        return bytes_node(~(single('\n') | single('\r')));
      case '\\':
        ++pos_;
        return bytes_node(parse_escape(false));
      case '*':
      case '+':
      case '?':
        unsupported("quantifier without operand");
      case '{':
      case '}':
        unsupported("stray brace");
      case '^':
        unsupported("anchor inside pattern");
      case '$':
        unsupported("anchor inside pattern");
      default:
        break;
    }
    if (static_cast<unsigned char>(c) >= 0x80) return utf8_literal();
    ++pos_;
    return bytes_node(single(static_cast<unsigned char>(c)));
  }
};

/// Thompson NFA with byte-set edges.
struct Nfa {
  struct State {
    std::vector<std::pair<ByteSet, int>> edges;
    std::vector<int> eps;
  };
  std::vector<State> states;

  int add() {
    states.emplace_back();
    return static_cast<int>(states.size()) - 1;
  }

  static constexpr std::size_t kMaxStates = 200000;

  // Builds a fragment for `node` between fresh states; returns {in, out}.
  std::pair<int, int> build(const RegexNode& node) {
    if (states.size() > kMaxStates) {
      throw Error(ErrorKind::UnsupportedRegexFeature, "pattern expands beyond the automaton size limit");
    }
    switch (node.kind) {
      case RegexNode::Kind::Empty: {
        int s = add();
        return {s, s};
      }
      case RegexNode::Kind::Bytes: {
        int a = add(), b = add();
        states[static_cast<std::size_t>(a)].edges.push_back({node.bytes, b});
        return {a, b};
      }
      case RegexNode::Kind::Concat: {
        int in = add();
        int cur = in;
        for (const auto& child : node.children) {
          auto [ci, co] = build(child);
          states[static_cast<std::size_t>(cur)].eps.push_back(ci);
          cur = co;
        }
        return {in, cur};
      }
      case RegexNode::Kind::Alt: {
        int in = add(), out = add();
        for (const auto& child : node.children) {
          auto [ci, co] = build(child);
          states[static_cast<std::size_t>(in)].eps.push_back(ci);
          states[static_cast<std::size_t>(co)].eps.push_back(out);
        }
        return {in, out};
      }
      case RegexNode::Kind::Repeat: {
        const RegexNode& child = node.children.front();
        int in = add();
        int cur = in;
        for (int i = 0; i < node.min; ++i) {
          auto [ci, co] = build(child);
          states[static_cast<std::size_t>(cur)].eps.push_back(ci);
          cur = co;
        }
        int out = add();
        if (node.max < 0) {
          auto [ci, co] = build(child);
          states[static_cast<std::size_t>(cur)].eps.push_back(ci);
          states[static_cast<std::size_t>(co)].eps.push_back(ci);
          states[static_cast<std::size_t>(co)].eps.push_back(out);
          states[static_cast<std::size_t>(cur)].eps.push_back(out);
        } else {
          states[static_cast<std::size_t>(cur)].eps.push_back(out);
          for (int i = node.min; i < node.max; ++i) {
            auto [ci, co] = build(child);
            states[static_cast<std::size_t>(cur)].eps.push_back(ci);
            states[static_cast<std::size_t>(co)].eps.push_back(out);
            cur = co;
          }
        }
        return {in, out};
      }
    }
    return {add(), add()};
  }

  void closure(std::vector<int>& set) const {
    std::vector<char> seen(states.size(), 0);
    std::vector<int> stack(set.begin(), set.end());
    for (int s : set) seen[static_cast<std::size_t>(s)] = 1;
    while (!stack.empty()) {
      int s = stack.back();
      stack.pop_back();
      for (int t : states[static_cast<std::size_t>(s)].eps) {
        if (!seen[static_cast<std::size_t>(t)]) {
          seen[static_cast<std::size_t>(t)] = 1;
          set.push_back(t);
          stack.push_back(t);
        }
      }
    }
    std::sort(set.begin(), set.end());
  }
};

inline constexpr std::size_t kMaxDfaStates = 20000;

/// Removes states that cannot reach acceptance and states unreachable from start.
inline CharDfa trim_dfa(const CharDfa& dfa) {
  const std::size_t n = dfa.size();
  std::vector<std::vector<std::int32_t>> rev(n);
  for (std::size_t s = 0; s < n; ++s) {
    for (int b = 0; b < 256; ++b) {
      std::int32_t t = dfa.next[s][static_cast<std::size_t>(b)];
      if (t >= 0) rev[static_cast<std::size_t>(t)].push_back(static_cast<std::int32_t>(s));
    }
  }
  std::vector<char> live(n, 0);
  std::vector<std::int32_t> stack;
  for (std::size_t s = 0; s < n; ++s) {
    if (dfa.accepting[s]) {
      live[s] = 1;
      stack.push_back(static_cast<std::int32_t>(s));
    }
  }
  while (!stack.empty()) {
    auto s = stack.back();
    stack.pop_back();
    for (auto p : rev[static_cast<std::size_t>(s)]) {
      if (!live[static_cast<std::size_t>(p)]) {
        live[static_cast<std::size_t>(p)] = 1;
        stack.push_back(p);
      }
    }
  }
  CharDfa out;
  if (n == 0 || !live[static_cast<std::size_t>(dfa.start)]) {
    // Empty language: a single non-accepting start state with no edges.
    out.next.push_back({});
    out.next.back().fill(-1);
    out.accepting.push_back(false);
    out.start = 0;
    return out;
  }
  std::vector<std::int32_t> remap(n, -1);
  std::vector<std::int32_t> order;
  remap[static_cast<std::size_t>(dfa.start)] = 0;
  order.push_back(dfa.start);
  for (std::size_t i = 0; i < order.size(); ++i) {
    auto s = static_cast<std::size_t>(order[i]);
    for (int b = 0; b < 256; ++b) {
      std::int32_t t = dfa.next[s][static_cast<std::size_t>(b)];
      if (t >= 0 && live[static_cast<std::size_t>(t)] && remap[static_cast<std::size_t>(t)] < 0) {
        remap[static_cast<std::size_t>(t)] = static_cast<std::int32_t>(order.size());
        order.push_back(t);
      }
    }
  }
  out.next.resize(order.size());
  out.accepting.resize(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    auto s = static_cast<std::size_t>(order[i]);
    out.accepting[i] = dfa.accepting[s];
    for (int b = 0; b < 256; ++b) {
      std::int32_t t = dfa.next[s][static_cast<std::size_t>(b)];
      out.next[i][static_cast<std::size_t>(b)] =
          (t >= 0 && live[static_cast<std::size_t>(t)]) ? remap[static_cast<std::size_t>(t)] : -1;
    }
  }
  out.start = 0;
  return out;
}

/// Moore partition refinement. Input must be trimmed (no dead states).
inline CharDfa minimize_dfa(const CharDfa& dfa) {
  const std::size_t n = dfa.size();
  std::vector<std::int32_t> cls(n);
  for (std::size_t s = 0; s < n; ++s) cls[s] = dfa.accepting[s] ? 1 : 0;
  std::size_t num_classes = 0;
  while (true) {
    std::map<std::vector<std::int32_t>, std::int32_t> sig_to_class;
    std::vector<std::int32_t> next_cls(n);
    for (std::size_t s = 0; s < n; ++s) {
      std::vector<std::int32_t> sig;
      sig.reserve(257);
      sig.push_back(cls[s]);
      for (int b = 0; b < 256; ++b) {
        std::int32_t t = dfa.next[s][static_cast<std::size_t>(b)];
        sig.push_back(t < 0 ? -1 : cls[static_cast<std::size_t>(t)]);
      }
      auto [it, inserted] = sig_to_class.emplace(std::move(sig), static_cast<std::int32_t>(sig_to_class.size()));
      next_cls[s] = it->second;
    }
    std::size_t count = sig_to_class.size();
    cls.swap(next_cls);
    if (count == num_classes) break;
    num_classes = count;
  }
  // Renumber classes in BFS order from the start state for a canonical layout.
  std::vector<std::int32_t> class_rep(num_classes, -1);
  for (std::size_t s = 0; s < n; ++s) {
    if (class_rep[static_cast<std::size_t>(cls[s])] < 0) class_rep[static_cast<std::size_t>(cls[s])] = static_cast<std::int32_t>(s);
  }
  std::vector<std::int32_t> new_id(num_classes, -1);
  std::vector<std::int32_t> order;
  new_id[static_cast<std::size_t>(cls[static_cast<std::size_t>(dfa.start)])] = 0;
  order.push_back(cls[static_cast<std::size_t>(dfa.start)]);
  for (std::size_t i = 0; i < order.size(); ++i) {
    auto rep = static_cast<std::size_t>(class_rep[static_cast<std::size_t>(order[i])]);
    for (int b = 0; b < 256; ++b) {
      std::int32_t t = dfa.next[rep][static_cast<std::size_t>(b)];
      if (t < 0) continue;
      auto c = static_cast<std::size_t>(cls[static_cast<std::size_t>(t)]);
      if (new_id[c] < 0) {
        new_id[c] = static_cast<std::int32_t>(order.size());
        order.push_back(static_cast<std::int32_t>(c));
      }
    }
  }
  CharDfa out;
  out.next.resize(order.size());
  out.accepting.resize(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    auto rep = static_cast<std::size_t>(class_rep[static_cast<std::size_t>(order[i])]);
    out.accepting[i] = dfa.accepting[rep];
    for (int b = 0; b < 256; ++b) {
      std::int32_t t = dfa.next[rep][static_cast<std::size_t>(b)];
      out.next[i][static_cast<std::size_t>(b)] =
          t < 0 ? -1 : new_id[static_cast<std::size_t>(cls[static_cast<std::size_t>(t)])];
    }
  }
  out.start = 0;
  return out;
}

}  // namespace detail

/// Compiles `pattern` (full-match semantics) into a trimmed, minimal byte DFA.
/// An empty language yields a DFA whose empty_language() is true.
inline CharDfa compile_char_dfa(std::string_view pattern) {
  detail::RegexNode ast = detail::RegexParser(pattern).parse();
  detail::Nfa nfa;
  auto [in, out] = nfa.build(ast);

  CharDfa dfa;
  std::map<std::vector<int>, std::int32_t> ids;
  std::vector<std::vector<int>> sets;
  std::vector<int> start{in};
  nfa.closure(start);
  ids.emplace(start, 0);
  sets.push_back(start);
  for (std::size_t i = 0; i < sets.size(); ++i) {
    if (sets.size() > detail::kMaxDfaStates) {
      throw Error(ErrorKind::UnsupportedRegexFeature, "pattern expands beyond the automaton size limit");
    }
    std::array<std::int32_t, 256> row;
    row.fill(-1);
    // Group bytes by identical target sets to avoid recomputing closures.
    std::map<std::vector<int>, std::int32_t> cache;
    for (int b = 0; b < 256; ++b) {
      std::vector<int> target;
      for (int s : sets[i]) {
        for (const auto& [bytes, t] : nfa.states[static_cast<std::size_t>(s)].edges) {
          if (bytes.test(static_cast<std::size_t>(b))) target.push_back(t);
        }
      }
      if (target.empty()) continue;
      std::sort(target.begin(), target.end());
      target.erase(std::unique(target.begin(), target.end()), target.end());
      auto cached = cache.find(target);
      if (cached != cache.end()) {
        row[static_cast<std::size_t>(b)] = cached->second;
        continue;
      }
      std::vector<int> key = target;
      nfa.closure(target);
      auto [it, inserted] = ids.emplace(target, static_cast<std::int32_t>(sets.size()));
      if (inserted) sets.push_back(target);
      cache.emplace(std::move(key), it->second);
      row[static_cast<std::size_t>(b)] = it->second;
    }
    dfa.next.push_back(row);
    dfa.accepting.push_back(std::binary_search(sets[i].begin(), sets[i].end(), out));
  }
  dfa.start = 0;
  CharDfa trimmed = detail::trim_dfa(dfa);
  if (trimmed.empty_language()) return trimmed;
  return detail::minimize_dfa(trimmed);
}

/// Builds a DFA accepting exactly the given strings (a byte trie).
inline CharDfa compile_literal_set(const std::vector<std::string>& options) {
  CharDfa dfa;
  dfa.next.push_back({});
  dfa.next.back().fill(-1);
  dfa.accepting.push_back(false);
  for (const auto& opt : options) {
    std::int32_t state = 0;
    for (unsigned char c : opt) {
      std::int32_t& slot = dfa.next[static_cast<std::size_t>(state)][c];
      if (slot < 0) {
        slot = static_cast<std::int32_t>(dfa.next.size());
        dfa.next.push_back({});
        dfa.next.back().fill(-1);
        dfa.accepting.push_back(false);
      }
      state = dfa.next[static_cast<std::size_t>(state)][c];
    }
    dfa.accepting[static_cast<std::size_t>(state)] = true;
  }
  return dfa;
}

/// Escapes `literal` so it can be embedded in a pattern.
inline std::string regex_escape(std::string_view literal) {
  std::string out;
  for (char c : literal) {
    if (std::string_view("\\^$.|?*+()[]{}-").find(c) != std::string_view::npos) out += '\\';
    out += c;
  }
  return out;
}

/// True when every string accepted by `sub` is also accepted by `super`.
inline bool dfa_subset(const CharDfa& sub, const CharDfa& super) {
  if (sub.empty_language()) return true;
  if (super.next.empty()) return false;
  std::map<std::pair<std::int32_t, std::int32_t>, bool> seen;
  std::vector<std::pair<std::int32_t, std::int32_t>> stack{{sub.start, super.start}};
  seen[stack.front()] = true;
  while (!stack.empty()) {
    auto [a, b] = stack.back();
    stack.pop_back();
    bool super_accepts = b >= 0 && super.accepting[static_cast<std::size_t>(b)];
    if (sub.accepting[static_cast<std::size_t>(a)] && !super_accepts) return false;
    for (int c = 0; c < 256; ++c) {
      std::int32_t na = sub.next[static_cast<std::size_t>(a)][static_cast<std::size_t>(c)];
      if (na < 0) continue;
      std::int32_t nb = b < 0 ? -1 : super.next[static_cast<std::size_t>(b)][static_cast<std::size_t>(c)];
      auto key = std::make_pair(na, nb);
      if (!seen[key]) {
        seen[key] = true;
        stack.push_back(key);
      }
    }
  }
  return true;
}

/// DFA for the engine's numeric syntax.
inline const CharDfa& numeric_dfa() {
  static const CharDfa dfa = compile_char_dfa(R"(\d+\.?\d*)");
  return dfa;
}

}  // namespace scidc::token
