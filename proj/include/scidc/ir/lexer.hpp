#pragma once

// Tokenizer shared by the rule-program parser and the predicate parser.

#include <string>
#include <string_view>
#include <vector>

#include "scidc/common.hpp"

namespace scidc::ir {

struct LexToken {
  enum class Kind { Ident, Number, String, Punct, End };
  Kind kind = Kind::End;
  std::string text;  // identifier, number spelling, decoded string, or operator
  int line = 1;
  int column = 1;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<LexToken> tokenize() {
    std::vector<LexToken> out;
    while (true) {
      skip_space();
      LexToken tok;
      tok.line = line_;
      tok.column = col_;
      if (pos_ >= src_.size()) {
        tok.kind = LexToken::Kind::End;
        out.push_back(tok);
        return out;
      }
      char c = src_[pos_];
      if (is_ident_start(c)) {
        tok.kind = LexToken::Kind::Ident;
        while (pos_ < src_.size() && is_ident_char(src_[pos_])) tok.text += take();
      } else if (c >= '0' && c <= '9') {
        tok.kind = LexToken::Kind::Number;
        while (pos_ < src_.size() && src_[pos_] >= '0' && src_[pos_] <= '9') tok.text += take();
        if (pos_ + 1 < src_.size() && src_[pos_] == '.' && src_[pos_ + 1] >= '0' && src_[pos_ + 1] <= '9') {
          tok.text += take();
          while (pos_ < src_.size() && src_[pos_] >= '0' && src_[pos_] <= '9') tok.text += take();
        } else if (pos_ < src_.size() && src_[pos_] == '.') {
          tok.text += take();
        }
      } else if (c == '"') {
        tok.kind = LexToken::Kind::String;
        take();
        tok.text = read_string(tok.line, tok.column);
      } else {
        tok.kind = LexToken::Kind::Punct;
        tok.text = read_punct(tok.line, tok.column);
      }
      out.push_back(std::move(tok));
    }
  }

 private:
  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;

  static bool is_ident_start(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
  static bool is_ident_char(char c) { return is_ident_start(c) || (c >= '0' && c <= '9'); }

  char take() {
    char c = src_[pos_++];
    if (c == '\n') {
      ++line_;
      col_ = 1;
    } else if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) {
      ++col_;
    }
    return c;
  }

  void skip_space() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        take();
      } else if (c == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') take();
      } else {
        break;
      }
    }
  }

  std::string read_string(int line, int column) {
    std::string out;
    while (true) {
      if (pos_ >= src_.size()) throw SyntaxError(ErrorKind::SyntaxError, "unterminated string", line, column);
      char c = take();
      if (c == '"') return out;
      if (c == '\n') throw SyntaxError(ErrorKind::SyntaxError, "newline inside string", line, column);
      if (c == '\\' && pos_ < src_.size()) {
        char e = src_[pos_];
        switch (e) {
          case '\\': out += '\\'; take(); continue;
          case '"': out += '"'; take(); continue;
          case 'n': out += '\n'; take(); continue;
          case 't': out += '\t'; take(); continue;
          case 'r': out += '\r'; take(); continue;
          default: out += '\\'; continue;  // kept verbatim, e.g. regex escapes like \d
        }
      }
      out += c;
    }
  }

  std::string read_punct(int line, int column) {
    static const std::pair<std::string_view, std::string_view> multi[] = {
        {"->", "->"}, {"<=", "<="}, {">=", ">="}, {"==", "=="}, {"!=", "!="},
        {"\xE2\x89\xA4", "<="}, {"\xE2\x89\xA5", ">="}, {"\xE2\x89\xA0", "!="},
        {"\xC3\x97", "*"}, {"\xC3\xB7", "/"}, {"\xE2\x88\x92", "-"}};
    std::string_view rest = src_.substr(pos_);
    for (const auto& [spelling, canon] : multi) {
      if (text::starts_with(rest, spelling)) {
        for (std::size_t i = 0; i < spelling.size(); ++i) take();
        return std::string(canon);
      }
    }
    char c = src_[pos_];
    if (std::string_view(":=[]{};,()<>+-*/").find(c) != std::string_view::npos) {
      take();
      return std::string(1, c);
    }
    throw SyntaxError(ErrorKind::SyntaxError, "unexpected character '" + std::string(1, c) + "'", line, column);
  }
};

}  // namespace scidc::ir
