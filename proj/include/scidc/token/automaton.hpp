#pragma once

/**
 * @file automaton.hpp
 * @brief Token-level automata: a character DFA composed with a vocabulary.
 *
 * A TokenAutomaton state is a character-DFA state reached by some walk of whole
 * tokens. Edge (s, t) exists when reading the bytes of token t from s stays
 * inside the DFA and lands in a state from which an accepting state is still
 * reachable by whole tokens. Every spelling of an accepted string is allowed,
 * not just the tokenizer's canonical split.
 *
 * Construction walks the vocabulary trie once per reachable DFA state, so the
 * cost is bounded by (reachable states) x (trie nodes inside the DFA's live
 * region), not by vocabulary size times token length.
 */

#include <algorithm>
#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "scidc/common.hpp"
#include "scidc/token/regex.hpp"
#include "scidc/token/vocabulary.hpp"

namespace scidc::token {

using StateId = std::int32_t;

class TokenAutomaton {
 public:
  struct Edge {
    TokenId token;
    StateId target;
  };

  StateId start() const { return start_; }
  std::size_t num_states() const { return edges_.size(); }
  std::size_t vocab_size() const { return vocab_size_; }
  const std::string& vocab_fingerprint() const { return vocab_fingerprint_; }

  bool contains(StateId s) const { return s >= 0 && static_cast<std::size_t>(s) < edges_.size(); }

  bool is_accepting(StateId s) const {
    check(s);
    return accepting_[static_cast<std::size_t>(s)];
  }

  /// All states are live after pruning; kept for interface completeness.
  bool is_live(StateId s) const {
    check(s);
    return true;
  }

  bool has_continuation(StateId s) const {
    check(s);
    return !edges_[static_cast<std::size_t>(s)].empty();
  }

  /// Minimum number of further tokens needed to reach an accepting state.
  int distance_to_accept(StateId s) const {
    check(s);
    return distance_[static_cast<std::size_t>(s)];
  }

  const std::vector<Edge>& edges(StateId s) const {
    check(s);
    return edges_[static_cast<std::size_t>(s)];
  }

  /// Tokens with a transition out of `s`, in ascending id order.
  std::vector<TokenId> allowed_tokens(StateId s) const {
    check(s);
    const auto& e = edges_[static_cast<std::size_t>(s)];
    std::vector<TokenId> out;
    out.reserve(e.size());
    for (const auto& edge : e) out.push_back(edge.token);
    return out;
  }

  StateId advance(StateId s, TokenId token) const {
    check(s);
    const auto& e = edges_[static_cast<std::size_t>(s)];
    auto it = std::lower_bound(e.begin(), e.end(), token, [](const Edge& a, TokenId t) { return a.token < t; });
    if (it == e.end() || it->token != token) {
      throw Error(ErrorKind::InvalidTransition,
                  "token " + std::to_string(token) + " is not allowed in state " + std::to_string(s));
    }
    return it->target;
  }

  /// Builds the product of `dfa` with `vocab`. Throws EmptyLanguage when no
  /// token path reaches acceptance.
  static TokenAutomaton build(const CharDfa& dfa, const Vocabulary& vocab, std::string_view what) {
    TokenAutomaton a;
    a.vocab_size_ = vocab.size();
    a.vocab_fingerprint_ = vocab.fingerprint();
    if (dfa.empty_language()) {
      throw Error(ErrorKind::EmptyLanguage, std::string(what) + " matches no string");
    }
    const TokenTrie& trie = vocab.trie();

    // Discover token-reachable DFA states and raw edges.
    std::vector<std::int32_t> dfa_to_tok(dfa.size(), -1);
    std::vector<std::int32_t> tok_to_dfa;
    std::vector<std::vector<Edge>> raw;
    dfa_to_tok[static_cast<std::size_t>(dfa.start)] = 0;
    tok_to_dfa.push_back(dfa.start);
    raw.emplace_back();
    struct Frame {
      std::int32_t trie_node;
      std::int32_t dfa_state;
    };
    std::vector<Frame> stack;
    for (std::size_t i = 0; i < tok_to_dfa.size(); ++i) {
      stack.clear();
      stack.push_back({0, tok_to_dfa[i]});
      std::vector<Edge> found;
      while (!stack.empty()) {
        Frame f = stack.back();
        stack.pop_back();
        for (const auto& [byte, child] : trie.node(f.trie_node).children) {
          std::int32_t nd = dfa.next[static_cast<std::size_t>(f.dfa_state)][byte];
          if (nd < 0) continue;
          for (TokenId t : trie.node(child).tokens) {
            if (dfa_to_tok[static_cast<std::size_t>(nd)] < 0) {
              dfa_to_tok[static_cast<std::size_t>(nd)] = static_cast<std::int32_t>(tok_to_dfa.size());
              tok_to_dfa.push_back(nd);
              raw.emplace_back();
            }
            found.push_back({t, dfa_to_tok[static_cast<std::size_t>(nd)]});
          }
          stack.push_back({child, nd});
        }
      }
      std::sort(found.begin(), found.end(), [](const Edge& x, const Edge& y) { return x.token < y.token; });
      raw[i] = std::move(found);
    }

    // Token-level liveness (backward reachability from accepting states), with
    // shortest distances in tokens.
    const std::size_t n = tok_to_dfa.size();
    std::vector<std::vector<std::int32_t>> rev(n);
    for (std::size_t s = 0; s < n; ++s) {
      for (const auto& e : raw[s]) rev[static_cast<std::size_t>(e.target)].push_back(static_cast<std::int32_t>(s));
    }
    constexpr int kInf = std::numeric_limits<int>::max();
    std::vector<int> dist(n, kInf);
    std::vector<std::int32_t> queue;
    for (std::size_t s = 0; s < n; ++s) {
      if (dfa.accepting[static_cast<std::size_t>(tok_to_dfa[s])]) {
        dist[s] = 0;
        queue.push_back(static_cast<std::int32_t>(s));
      }
    }
    for (std::size_t qi = 0; qi < queue.size(); ++qi) {
      auto s = static_cast<std::size_t>(queue[qi]);
      for (auto p : rev[s]) {
        if (dist[static_cast<std::size_t>(p)] == kInf) {
          dist[static_cast<std::size_t>(p)] = dist[s] + 1;
          queue.push_back(p);
        }
      }
    }
    if (dist[0] == kInf) {
      throw Error(ErrorKind::EmptyLanguage, std::string(what) + " cannot be spelled with the vocabulary");
    }

    // Keep live states reachable from start, renumbered in BFS order.
    std::vector<std::int32_t> remap(n, -1);
    std::vector<std::int32_t> order{0};
    remap[0] = 0;
    for (std::size_t i = 0; i < order.size(); ++i) {
      for (const auto& e : raw[static_cast<std::size_t>(order[i])]) {
        auto t = static_cast<std::size_t>(e.target);
        if (dist[t] != kInf && remap[t] < 0) {
          remap[t] = static_cast<std::int32_t>(order.size());
          order.push_back(e.target);
        }
      }
    }
    a.edges_.resize(order.size());
    a.accepting_.resize(order.size());
    a.distance_.resize(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
      auto old = static_cast<std::size_t>(order[i]);
      a.accepting_[i] = dfa.accepting[static_cast<std::size_t>(tok_to_dfa[old])];
      a.distance_[i] = dist[old];
      for (const auto& e : raw[old]) {
        if (dist[static_cast<std::size_t>(e.target)] != kInf) {
          a.edges_[i].push_back({e.token, remap[static_cast<std::size_t>(e.target)]});
        }
      }
    }
    a.start_ = 0;
    return a;
  }

 private:
  std::vector<std::vector<Edge>> edges_;
  std::vector<bool> accepting_;
  std::vector<int> distance_;
  StateId start_ = 0;
  std::size_t vocab_size_ = 0;
  std::string vocab_fingerprint_;

  void check(StateId s) const {
    if (!contains(s)) throw Error(ErrorKind::UnknownState, "state " + std::to_string(s) + " is not in the automaton");
  }
};

/// Token automaton accepting exactly the token paths whose concatenation
/// full-matches `pattern`.
inline TokenAutomaton compile_regex(std::string_view pattern, const Vocabulary& vocab) {
  CharDfa dfa = compile_char_dfa(pattern);
  return TokenAutomaton::build(dfa, vocab, "pattern /" + std::string(pattern) + "/");
}

/// Token automaton accepting exactly the token paths spelling one option.
inline TokenAutomaton compile_select(const std::vector<std::string>& options, const Vocabulary& vocab) {
  if (options.empty()) throw Error(ErrorKind::InvalidArgument, "select needs at least one option");
  for (const auto& opt : options) {
    if (!vocab.spellable(opt)) throw Error(ErrorKind::UntokenizableOption, "\"" + escape_token_bytes(opt) + "\"");
  }
  return TokenAutomaton::build(compile_literal_set(options), vocab, "option set");
}

}  // namespace scidc::token
