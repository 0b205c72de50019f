#pragma once

/**
 * @file vocabulary.hpp
 * @brief Tokenizer vocabulary: token id <-> byte string, special tokens, and a byte
 *        trie used by tokenization and automaton construction.
 *
 * File format (native):
 *   { "0": "a", "1": "b", ..., "special": [5, 6], "eos": 6 }
 * Keys are dense decimal ids. Entry strings are UTF-8; a raw byte that is not
 * valid UTF-8 is written as the four characters `\xHH`, and a literal backslash
 * as `\\`. "eos" is optional and must name a special token.
 *
 * Compatible inputs: a bare JSON array of strings (ids are positions), and the
 * common tokenizer export with "model": {"vocab": {token: id}} (merges ignored,
 * "added_tokens" with "special": true become special tokens; a ByteLevel decoder
 * maps the printable byte alphabet back to raw bytes).
 */

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "scidc/common.hpp"

namespace scidc::token {

/// Byte trie over non-special token spellings.
class TokenTrie {
 public:
  struct Node {
    std::vector<std::pair<unsigned char, std::int32_t>> children;  // sorted by byte
    std::vector<TokenId> tokens;                                   // tokens ending here
  };

  TokenTrie() { nodes_.emplace_back(); }

  void insert(std::string_view bytes, TokenId id) {
    std::int32_t cur = 0;
    for (unsigned char c : bytes) {
      auto& kids = nodes_[static_cast<std::size_t>(cur)].children;
      auto it = std::lower_bound(kids.begin(), kids.end(), c,
                                 [](const auto& kv, unsigned char b) { return kv.first < b; });
      if (it != kids.end() && it->first == c) {
        cur = it->second;
      } else {
        auto next = static_cast<std::int32_t>(nodes_.size());
        kids.insert(it, {c, next});
        nodes_.emplace_back();
        cur = next;
      }
    }
    nodes_[static_cast<std::size_t>(cur)].tokens.push_back(id);
  }

  std::int32_t child(std::int32_t node, unsigned char c) const {
    const auto& kids = nodes_[static_cast<std::size_t>(node)].children;
    auto it = std::lower_bound(kids.begin(), kids.end(), c,
                               [](const auto& kv, unsigned char b) { return kv.first < b; });
    return (it != kids.end() && it->first == c) ? it->second : -1;
  }

  const Node& node(std::int32_t id) const { return nodes_[static_cast<std::size_t>(id)]; }
  std::size_t size() const { return nodes_.size(); }

 private:
  std::vector<Node> nodes_;
};

namespace detail {

inline bool valid_utf8_at(std::string_view s, std::size_t i, std::size_t& len) {
  auto b = static_cast<unsigned char>(s[i]);
  if (b < 0x80) {
    len = 1;
    return true;
  }
  std::size_t need;
  if (b >= 0xC2 && b <= 0xDF) need = 2;
  else if (b >= 0xE0 && b <= 0xEF) need = 3;
  else if (b >= 0xF0 && b <= 0xF4) need = 4;
  else return false;
  if (i + need > s.size()) return false;
  for (std::size_t k = 1; k < need; ++k) {
    auto c = static_cast<unsigned char>(s[i + k]);
    if ((c & 0xC0) != 0x80) return false;
  }
  len = need;
  return true;
}

// GPT-2 style printable-byte alphabet, used by ByteLevel tokenizer exports.
inline std::map<std::string, unsigned char> byte_level_decoder() {
  std::vector<int> bs;
  for (int b = '!'; b <= '~'; ++b) bs.push_back(b);
  for (int b = 0xA1; b <= 0xAC; ++b) bs.push_back(b);
  for (int b = 0xAE; b <= 0xFF; ++b) bs.push_back(b);
  std::vector<int> cs = bs;
  int extra = 0;
  for (int b = 0; b < 256; ++b) {
    if (std::find(bs.begin(), bs.end(), b) == bs.end()) {
      bs.push_back(b);
      cs.push_back(256 + extra++);
    }
  }
  std::map<std::string, unsigned char> out;
  for (std::size_t i = 0; i < bs.size(); ++i) {
    auto cp = static_cast<unsigned>(cs[i]);
    std::string utf8;
    if (cp < 0x80) {
      utf8 += static_cast<char>(cp);
    } else {
      utf8 += static_cast<char>(0xC0 | (cp >> 6));
      utf8 += static_cast<char>(0x80 | (cp & 0x3F));
    }
    out[utf8] = static_cast<unsigned char>(bs[i]);
  }
  return out;
}

}  // namespace detail

/// Encodes raw bytes into the vocabulary file's escaped UTF-8 form.
inline std::string escape_token_bytes(std::string_view bytes) {
  std::string out;
  std::size_t i = 0;
  while (i < bytes.size()) {
    std::size_t len = 0;
    if (bytes[i] == '\\') {
      out += "\\\\";
      ++i;
    } else if (detail::valid_utf8_at(bytes, i, len)) {
      out.append(bytes.substr(i, len));
      i += len;
    } else {
      static const char* hex = "0123456789ABCDEF";
      auto b = static_cast<unsigned char>(bytes[i]);
      out += "\\x";
      out += hex[b >> 4];
      out += hex[b & 0xF];
      ++i;
    }
  }
  return out;
}

/// Inverse of escape_token_bytes. Unknown escapes are kept literally.
inline std::string unescape_token_bytes(std::string_view text) {
  auto hexv = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  std::string out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '\\' && i + 1 < text.size()) {
      if (text[i + 1] == '\\') {
        out += '\\';
        ++i;
        continue;
      }
      if (text[i + 1] == 'x' && i + 3 < text.size() && hexv(text[i + 2]) >= 0 && hexv(text[i + 3]) >= 0) {
        out += static_cast<char>(hexv(text[i + 2]) * 16 + hexv(text[i + 3]));
        i += 3;
        continue;
      }
    }
    out += text[i];
  }
  return out;
}

class Vocabulary {
 public:
  Vocabulary() = default;

  Vocabulary(std::vector<std::string> entries, std::vector<TokenId> special = {},
             std::optional<TokenId> eos = std::nullopt)
      : entries_(std::move(entries)), eos_(eos) {
    special_flags_.assign(entries_.size(), false);
    for (TokenId id : special) {
      if (id < 0 || static_cast<std::size_t>(id) >= entries_.size()) {
        throw Error(ErrorKind::InvalidVocabulary, "special token id " + std::to_string(id) + " out of range");
      }
      special_flags_[static_cast<std::size_t>(id)] = true;
    }
    if (eos_) {
      if (*eos_ < 0 || static_cast<std::size_t>(*eos_) >= entries_.size()) {
        throw Error(ErrorKind::InvalidVocabulary, "eos id out of range");
      }
      special_flags_[static_cast<std::size_t>(*eos_)] = true;
    }
    for (std::size_t id = 0; id < entries_.size(); ++id) {
      if (special_flags_[id]) {
        if (!entries_[id].empty()) specials_.emplace_back(entries_[id], static_cast<TokenId>(id));
        continue;
      }
      if (entries_[id].empty()) {
        throw Error(ErrorKind::InvalidVocabulary, "token " + std::to_string(id) + " has an empty spelling");
      }
      trie_.insert(entries_[id], static_cast<TokenId>(id));
      max_token_bytes_ = std::max(max_token_bytes_, entries_[id].size());
    }
    // Longest special spelling first so prefixes never shadow longer markers.
    std::stable_sort(specials_.begin(), specials_.end(),
                     [](const auto& a, const auto& b) { return a.first.size() > b.first.size(); });
    fingerprint_ = text::hex64(fingerprint_hash());
  }

  std::size_t size() const { return entries_.size(); }
  const std::string& bytes(TokenId id) const { return entries_.at(static_cast<std::size_t>(id)); }
  bool is_special(TokenId id) const { return special_flags_.at(static_cast<std::size_t>(id)); }
  std::optional<TokenId> eos() const { return eos_; }
  const TokenTrie& trie() const { return trie_; }
  const std::string& fingerprint() const { return fingerprint_; }
  const std::vector<std::string>& entries() const { return entries_; }

  std::vector<TokenId> special_ids() const {
    std::vector<TokenId> out;
    for (std::size_t i = 0; i < special_flags_.size(); ++i) {
      if (special_flags_[i]) out.push_back(static_cast<TokenId>(i));
    }
    return out;
  }

  std::string detokenize(std::span<const TokenId> ids) const {
    std::string out;
    for (TokenId id : ids) {
      if (id < 0 || static_cast<std::size_t>(id) >= entries_.size()) {
        throw Error(ErrorKind::InvalidArgument, "token id " + std::to_string(id) + " out of range");
      }
      out += entries_[static_cast<std::size_t>(id)];
    }
    return out;
  }

  /// True when some sequence of non-special tokens spells `text` exactly.
  bool spellable(std::string_view text) const { return reachability(text, false)[0]; }

  /**
   * Greedy longest-match tokenization. At each position the longest token that
   * still leaves a spellable remainder is taken (ties between identical
   * spellings go to the lowest id). Special-token spellings are matched as
   * whole tokens only when `allow_special` is set.
   */
  std::vector<TokenId> tokenize(std::string_view text, bool allow_special = false) const {
    std::vector<char> ok = reachability(text, allow_special);
    if (!ok[0]) {
      throw Error(ErrorKind::UnspellableText, "no token cover for \"" + escape_token_bytes(text.substr(0, 64)) + "\"");
    }
    std::vector<TokenId> out;
    std::size_t i = 0;
    while (i < text.size()) {
      std::size_t best_len = 0;
      TokenId best = -1;
      if (allow_special) {
        for (const auto& [spelling, id] : specials_) {
          if (text.substr(i, spelling.size()) == spelling && ok[i + spelling.size()]) {
            best_len = spelling.size();
            best = id;
            break;
          }
        }
      }
      std::int32_t node = 0;
      for (std::size_t j = i; j < text.size(); ++j) {
        node = trie_.child(node, static_cast<unsigned char>(text[j]));
        if (node < 0) break;
        const auto& toks = trie_.node(node).tokens;
        std::size_t len = j + 1 - i;
        if (!toks.empty() && ok[j + 1] && len > best_len) {
          best_len = len;
          best = *std::min_element(toks.begin(), toks.end());
        }
      }
      out.push_back(best);
      i += best_len;
    }
    return out;
  }

  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (std::size_t i = 0; i < entries_.size(); ++i) j[std::to_string(i)] = escape_token_bytes(entries_[i]);
    std::vector<TokenId> specials;
    for (std::size_t i = 0; i < special_flags_.size(); ++i) {
      if (special_flags_[i]) specials.push_back(static_cast<TokenId>(i));
    }
    j["special"] = specials;
    if (eos_) j["eos"] = *eos_;
    return j;
  }

  static Vocabulary from_json(const nlohmann::json& j) {
    if (j.is_array()) {
      std::vector<std::string> entries;
      for (const auto& e : j) entries.push_back(unescape_token_bytes(e.get<std::string>()));
      return Vocabulary(std::move(entries));
    }
    if (!j.is_object()) throw Error(ErrorKind::InvalidVocabulary, "vocabulary must be a JSON object or array");
    if (j.contains("model") && j["model"].is_object() && j["model"].contains("vocab")) return from_tokenizer_export(j);

    std::map<long, std::string> by_id;
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (it.key() == "special" || it.key() == "eos") continue;
      char* end = nullptr;
      long id = std::strtol(it.key().c_str(), &end, 10);
      if (it.key().empty() || *end != '\0' || id < 0) {
        throw Error(ErrorKind::InvalidVocabulary, "non-numeric token id key \"" + it.key() + "\"");
      }
      by_id[id] = unescape_token_bytes(it.value().get<std::string>());
    }
    std::vector<std::string> entries;
    for (const auto& [id, bytes] : by_id) {
      if (id != static_cast<long>(entries.size())) {
        throw Error(ErrorKind::InvalidVocabulary, "token ids are not dense at " + std::to_string(entries.size()));
      }
      entries.push_back(bytes);
    }
    std::vector<TokenId> special;
    if (j.contains("special")) special = j["special"].get<std::vector<TokenId>>();
    std::optional<TokenId> eos;
    if (j.contains("eos") && !j["eos"].is_null()) eos = j["eos"].get<TokenId>();
    return Vocabulary(std::move(entries), std::move(special), eos);
  }

  static Vocabulary load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::IoError, "cannot open vocabulary " + path.string());
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::InvalidVocabulary, path.string() + ": " + e.what());
    }
    return from_json(j);
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
    out << to_json().dump(1) << "\n";
  }

 private:
  std::vector<std::string> entries_;
  std::vector<bool> special_flags_;
  std::vector<std::pair<std::string, TokenId>> specials_;
  std::optional<TokenId> eos_;
  TokenTrie trie_;
  std::size_t max_token_bytes_ = 0;
  std::string fingerprint_;

  std::uint64_t fingerprint_hash() const {
    std::uint64_t h = text::fnv1a("vocab");
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      h = text::fnv1a(entries_[i], h);
      h = text::fnv1a(special_flags_[i] ? "\x01" : "\x02", h);
    }
    return h;
  }

  // ok[i] == true when text[i:] can be spelled.
  std::vector<char> reachability(std::string_view text, bool allow_special) const {
    std::vector<char> ok(text.size() + 1, 0);
    ok[text.size()] = 1;
    for (std::size_t i = text.size(); i-- > 0;) {
      if (allow_special) {
        for (const auto& [spelling, id] : specials_) {
          if (text.substr(i, spelling.size()) == spelling && ok[i + spelling.size()]) {
            ok[i] = 1;
            break;
          }
        }
        if (ok[i]) continue;
      }
      std::int32_t node = 0;
      for (std::size_t j = i; j < text.size(); ++j) {
        node = trie_.child(node, static_cast<unsigned char>(text[j]));
        if (node < 0) break;
        if (!trie_.node(node).tokens.empty() && ok[j + 1]) {
          ok[i] = 1;
          break;
        }
      }
    }
    return ok;
  }

  static Vocabulary from_tokenizer_export(const nlohmann::json& j) {
    const auto& vocab = j["model"]["vocab"];
    bool byte_level = j.contains("decoder") && j["decoder"].is_object() &&
                      j["decoder"].value("type", std::string()) == "ByteLevel";
    auto decode = [&](const std::string& tok) {
      if (!byte_level) return tok;
      static const auto table = detail::byte_level_decoder();
      std::string out;
      std::size_t i = 0;
      while (i < tok.size()) {
        std::size_t len = 1;
        if (!detail::valid_utf8_at(tok, i, len)) len = 1;
        auto it = table.find(tok.substr(i, len));
        if (it == table.end()) {
          out.append(tok, i, len);
        } else {
          out += static_cast<char>(it->second);
        }
        i += len;
      }
      return out;
    };
    std::map<long, std::string> by_id;
    std::set<long> special_ids;
    for (auto it = vocab.begin(); it != vocab.end(); ++it) by_id[it.value().get<long>()] = decode(it.key());
    if (j.contains("added_tokens")) {
      for (const auto& t : j["added_tokens"]) {
        long id = t.at("id").get<long>();
        by_id[id] = t.at("content").get<std::string>();
        if (t.value("special", false)) special_ids.insert(id);
      }
    }
    std::vector<std::string> entries;
    for (const auto& [id, bytes] : by_id) {
      if (id != static_cast<long>(entries.size())) {
        throw Error(ErrorKind::InvalidVocabulary, "token ids are not dense at " + std::to_string(entries.size()));
      }
      entries.push_back(bytes);
    }
    std::vector<TokenId> special(special_ids.begin(), special_ids.end());
    std::optional<TokenId> eos;
    for (TokenId id : special) {
      const auto& s = entries[static_cast<std::size_t>(id)];
      if (s == "</s>" || s == "<|endoftext|>" || s == "<eos>" || s == "<|im_end|>") {
        eos = id;
        break;
      }
    }
    return Vocabulary(std::move(entries), std::move(special), eos);
  }
};

/**
 * A vocabulary that spells every byte string: the 256 single bytes, the given
 * extra multi-byte tokens, then the chat markers and an end-of-sequence token.
 */
inline Vocabulary make_byte_vocabulary(const std::vector<std::string>& merges = {}) {
  std::vector<std::string> entries;
  entries.reserve(256 + merges.size() + 3);
  for (int b = 0; b < 256; ++b) entries.emplace_back(1, static_cast<char>(b));
  for (const auto& m : merges) entries.push_back(m);
  auto im_start = static_cast<TokenId>(entries.size());
  entries.emplace_back("<|im_start|>");
  entries.emplace_back("<|im_end|>");
  entries.emplace_back("<eos>");
  return Vocabulary(std::move(entries), {im_start, im_start + 1, im_start + 2}, im_start + 2);
}

}  // namespace scidc::token
