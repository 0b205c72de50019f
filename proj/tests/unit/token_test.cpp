#include <gtest/gtest.h>

#include <chrono>
#include <random>
#include <regex>
#include <set>

#include "scidc/token/automaton.hpp"
#include "scidc/token/mask.hpp"
#include "scidc/token/regex.hpp"
#include "scidc/token/vocabulary.hpp"

using namespace scidc;
using namespace scidc::token;

namespace {

Vocabulary small_vocab() {
  return Vocabulary({"0", "1", "2", ".", "12", "1.", ".5", "5", "a", "b", "ab", "<eos>"}, {}, 11);
}

bool expect_error(ErrorKind kind, const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind() == kind;
  }
  return false;
}

}  // namespace

TEST(CharDfa, MatchesAgreeWithStdRegex) {
  const std::vector<std::string> patterns = {"\\d+\\.?\\d*", "a|bc", "(?:ab)*c?", "[a-c]{2,3}", "x[^ab]y", "colou?r",
                                             "(a|b)+", "\\w\\s\\W", "[0-9]{1,2}(?:\\.[0-9])?"};
  const std::vector<std::string> inputs = {"", "1", "12.", "1.5", ".5", "a", "bc", "abab", "ababc", "abc", "cc", "xcy",
                                           "xay", "color", "colour", "abba", "a b", "_ !", "9.9", "99.", "123"};
  for (const auto& p : patterns) {
    CharDfa d = compile_char_dfa(p);
    std::regex re(p, std::regex::ECMAScript);
    for (const auto& in : inputs) {
      EXPECT_EQ(d.matches(in), std::regex_match(in, re)) << p << " on \"" << in << "\"";
    }
  }
}

TEST(CharDfa, RejectsUnsupportedFeatures) {
  for (const char* p : {"(?=a)b", "(?!a)", "(a)\\1", "a^b", "a$b", "\\bword"}) {
    EXPECT_TRUE(expect_error(ErrorKind::UnsupportedRegexFeature, [&] { compile_char_dfa(p); })) << p;
  }
  // Outer anchors restate full-match semantics and are accepted.
  EXPECT_TRUE(compile_char_dfa("^ab$").matches("ab"));
  EXPECT_FALSE(compile_char_dfa("^ab$").matches("abab"));
}

TEST(CharDfa, SubsetAndNumeric) {
  EXPECT_TRUE(dfa_subset(compile_char_dfa("\\d+"), numeric_dfa()));
  EXPECT_TRUE(dfa_subset(compile_char_dfa("\\d+\\.?\\d*"), numeric_dfa()));
  EXPECT_FALSE(dfa_subset(compile_char_dfa("[a-z]+"), numeric_dfa()));
  EXPECT_TRUE(compile_char_dfa("a{0}b{0}").matches(""));
}

TEST(Vocabulary, TokenizeRoundTripsAndPrefersLongest) {
  Vocabulary v = small_vocab();
  auto ids = v.tokenize("12.5");
  EXPECT_EQ(v.detokenize(ids), "12.5");
  EXPECT_EQ(v.bytes(ids[0]), "12");
  EXPECT_TRUE(v.spellable("ab1"));
  EXPECT_FALSE(v.spellable("c"));
  EXPECT_TRUE(expect_error(ErrorKind::UnspellableText, [&] { v.tokenize("abc"); }));
}

TEST(Vocabulary, SpecialsOnlyWhenAllowed) {
  Vocabulary v = make_byte_vocabulary();
  auto plain = v.tokenize("<|im_start|>");
  EXPECT_EQ(plain.size(), 12u);
  auto special = v.tokenize("<|im_start|>x", true);
  ASSERT_EQ(special.size(), 2u);
  EXPECT_TRUE(v.is_special(special[0]));
  ASSERT_TRUE(v.eos().has_value());
  EXPECT_EQ(v.bytes(*v.eos()), "<eos>");
}

TEST(Vocabulary, JsonRoundTripKeepsFingerprint) {
  Vocabulary v = make_byte_vocabulary({"ab", "Step"});
  Vocabulary w = Vocabulary::from_json(v.to_json());
  EXPECT_EQ(v.fingerprint(), w.fingerprint());
  EXPECT_EQ(v.entries(), w.entries());
  EXPECT_EQ(v.eos(), w.eos());
  EXPECT_NE(v.fingerprint(), make_byte_vocabulary().fingerprint());
}

TEST(Vocabulary, RejectsMalformedEntries) {
  EXPECT_TRUE(expect_error(ErrorKind::InvalidVocabulary, [] { Vocabulary({"a", ""}); }));
  EXPECT_TRUE(expect_error(ErrorKind::InvalidVocabulary, [] { Vocabulary({"a"}, {3}); }));
}

// Oracle: enumerate token sequences up to length 3 and compare automaton
// acceptance against std::regex on the detokenized string.
TEST(TokenAutomaton, AcceptsExactlyTheRegexLanguage) {
  Vocabulary v = small_vocab();
  for (const std::string p : {"\\d+\\.?\\d*", "1\\.5|12", "(?:ab)+", "a?b?"}) {
    TokenAutomaton a = compile_regex(p, v);
    std::regex re(p, std::regex::ECMAScript);
    std::vector<std::vector<TokenId>> frontier = {{}};
    for (int len = 1; len <= 3; ++len) {
      std::vector<std::vector<TokenId>> next;
      for (const auto& seq : frontier) {
        for (TokenId t = 0; t < 11; ++t) {
          auto s = seq;
          s.push_back(t);
          next.push_back(s);
        }
      }
      for (const auto& seq : next) {
        StateId st = a.start();
        bool alive = true;
        for (TokenId t : seq) {
          auto al = a.allowed_tokens(st);
          if (!std::binary_search(al.begin(), al.end(), t)) {
            alive = false;
            break;
          }
          st = a.advance(st, t);
        }
        std::string text = v.detokenize(seq);
        EXPECT_EQ(alive && a.is_accepting(st), std::regex_match(text, re)) << p << " " << text;
      }
      frontier = std::move(next);
    }
  }
}

TEST(TokenAutomaton, DistanceAndLiveness) {
  Vocabulary v = small_vocab();
  TokenAutomaton a = compile_regex("\\d\\d\\d", v);
  EXPECT_EQ(a.distance_to_accept(a.start()), 2);  // "12" + one digit
  for (StateId s = 0; s < static_cast<StateId>(a.num_states()); ++s) EXPECT_TRUE(a.is_live(s));
  EXPECT_TRUE(expect_error(ErrorKind::InvalidTransition, [&] { a.advance(a.start(), 8); }));
}

TEST(TokenAutomaton, EmptyLanguageAndUntokenizableOptions) {
  Vocabulary v = small_vocab();
  EXPECT_TRUE(expect_error(ErrorKind::EmptyLanguage, [&] { compile_regex("zz", v); }));
  EXPECT_TRUE(expect_error(ErrorKind::UntokenizableOption, [&] { compile_select({"ab", "zz"}, v); }));
  TokenAutomaton s = compile_select({"a", "ab"}, v);
  EXPECT_FALSE(s.is_accepting(s.start()));
  StateId after_a = s.advance(s.start(), 8);
  EXPECT_TRUE(s.is_accepting(after_a));
  EXPECT_TRUE(s.has_continuation(after_a));
}

TEST(Mask, ForbidsEverythingOutsideTheValidSet) {
  std::vector<float> logits = {1.0f, 2.0f, 3.0f, 4.0f};
  std::vector<TokenId> valid = {0, 2};
  MaskedLogits m = apply_mask(logits, valid);
  EXPECT_EQ(m.allowed_count(), 2u);
  EXPECT_FLOAT_EQ(m.values[0], 1.0f);
  EXPECT_TRUE(is_forbidden(m.values[1]));
  EXPECT_FLOAT_EQ(m.values[2], 3.0f);
  EXPECT_TRUE(is_forbidden(m.values[3]));
  EXPECT_TRUE(expect_error(ErrorKind::EmptyValidSet, [&] { apply_mask(logits, std::vector<TokenId>{}); }));
  EXPECT_TRUE(expect_error(ErrorKind::InvalidArgument, [&] { apply_mask(logits, std::vector<TokenId>{7}); }));
}

TEST(Mask, LargeVectorIsFast) {
  std::vector<float> logits(50000, 0.5f);
  std::vector<TokenId> valid;
  for (TokenId t = 0; t < 50000; t += 7) valid.push_back(t);
  MaskedLogits out;
  auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < 100; ++i) apply_mask_into(logits, valid, out);
  auto per_call = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count() / 100;
  EXPECT_LT(per_call, 1.0);
}
