#pragma once

/**
 * @file common.hpp
 * @brief Shared vocabulary types, the error taxonomy, and small text helpers.
 *
 * Every failure raised by the engine is a scidc::Error carrying an ErrorKind.
 * The kind name is the stable identifier (tests and the CLI match on it); the
 * message is human-facing detail.
 */

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace scidc {

using TokenId = std::int32_t;

enum class ErrorKind {
  SyntaxError,
  DuplicateStepName,
  UnknownStepKind,
  InvalidProgram,
  UnsupportedRegexFeature,
  EmptyLanguage,
  UntokenizableOption,
  UnknownState,
  EmptyValidSet,
  InvalidTransition,
  UnsatisfiableConstraint,
  MaxTokensInNonAcceptingState,
  UnboundVariable,
  AnchorOrder,
  PredicateTypeError,
  BackendFailure,
  ContextOverflow,
  TransportError,
  ServerError,
  UnspellableText,
  CapabilityError,
  InvalidVocabulary,
  MalformedFrameworkReply,
  GllmTransport,
  FixtureMissing,
  UnparseableProgram,
  LintErrors,
  RevisionRejected,
  ArmStripError,
  InvalidArgument,
  IoError,
};

inline const char* kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::SyntaxError: return "SyntaxError";
    case ErrorKind::DuplicateStepName: return "DuplicateStepName";
    case ErrorKind::UnknownStepKind: return "UnknownStepKind";
    case ErrorKind::InvalidProgram: return "InvalidProgram";
    case ErrorKind::UnsupportedRegexFeature: return "UnsupportedRegexFeature";
    case ErrorKind::EmptyLanguage: return "EmptyLanguage";
    case ErrorKind::UntokenizableOption: return "UntokenizableOption";
    case ErrorKind::UnknownState: return "UnknownState";
    case ErrorKind::EmptyValidSet: return "EmptyValidSet";
    case ErrorKind::InvalidTransition: return "InvalidTransition";
    case ErrorKind::UnsatisfiableConstraint: return "UnsatisfiableConstraint";
    case ErrorKind::MaxTokensInNonAcceptingState: return "MaxTokensInNonAcceptingState";
    case ErrorKind::UnboundVariable: return "UnboundVariable";
    case ErrorKind::AnchorOrder: return "AnchorOrder";
    case ErrorKind::PredicateTypeError: return "PredicateTypeError";
    case ErrorKind::BackendFailure: return "BackendFailure";
    case ErrorKind::ContextOverflow: return "ContextOverflow";
    case ErrorKind::TransportError: return "TransportError";
    case ErrorKind::ServerError: return "ServerError";
    case ErrorKind::UnspellableText: return "UnspellableText";
    case ErrorKind::CapabilityError: return "CapabilityError";
    case ErrorKind::InvalidVocabulary: return "InvalidVocabulary";
    case ErrorKind::MalformedFrameworkReply: return "MalformedFrameworkReply";
    case ErrorKind::GllmTransport: return "GllmTransport";
    case ErrorKind::FixtureMissing: return "FixtureMissing";
    case ErrorKind::UnparseableProgram: return "UnparseableProgram";
    case ErrorKind::LintErrors: return "LintErrors";
    case ErrorKind::RevisionRejected: return "RevisionRejected";
    case ErrorKind::ArmStripError: return "ArmStripError";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& detail)
      : std::runtime_error(std::string(kind_name(kind)) + ": " + detail),
        kind_(kind),
        detail_(detail) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

/// Parse failure with a 1-based source position.
class SyntaxError : public Error {
 public:
  SyntaxError(ErrorKind kind, const std::string& detail, int line, int column)
      : Error(kind, detail + " at " + std::to_string(line) + ":" + std::to_string(column)),
        line_(line),
        column_(column) {}

  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

 private:
  int line_;
  int column_;
};

class ServerError : public Error {
 public:
  ServerError(int status, const std::string& body_excerpt)
      : Error(ErrorKind::ServerError, std::to_string(status) + " " + body_excerpt),
        status_(status),
        excerpt_(body_excerpt) {}

  int status() const noexcept { return status_; }
  const std::string& excerpt() const noexcept { return excerpt_; }

 private:
  int status_;
  std::string excerpt_;
};

namespace text {

inline bool starts_with(std::string_view s, std::string_view prefix) {
  return s.size() >= prefix.size() && s.compare(0, prefix.size(), prefix) == 0;
}

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r' || s[b] == '\n')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r' || s[e - 1] == '\n')) --e;
  return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split_lines(std::string_view s) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= s.size()) {
    std::size_t nl = s.find('\n', start);
    if (nl == std::string_view::npos) {
      lines.emplace_back(s.substr(start));
      break;
    }
    lines.emplace_back(s.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

/// True when `s` is a decimal number in the engine's numeric syntax: \d+\.?\d*
inline bool is_decimal(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size() && s[i] >= '0' && s[i] <= '9') ++i;
  if (i == 0) return false;
  if (i < s.size() && s[i] == '.') ++i;
  while (i < s.size() && s[i] >= '0' && s[i] <= '9') ++i;
  return i == s.size();
}

/// 64-bit FNV-1a. Used for request hashing and seed mixing; not cryptographic.
inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

}  // namespace text
}  // namespace scidc
