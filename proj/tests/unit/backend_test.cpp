#include <gtest/gtest.h>

#include <algorithm>

#include "scidc/backend/callback.hpp"
#include "scidc/backend/mock.hpp"

using namespace scidc;
using namespace scidc::backend;

namespace {

std::shared_ptr<const token::Vocabulary> vocab() {
  static auto v = std::make_shared<const token::Vocabulary>(token::make_byte_vocabulary({"ab", "abc"}));
  return v;
}

TokenId argmax(const std::vector<float>& s) {
  return static_cast<TokenId>(std::max_element(s.begin(), s.end()) - s.begin());
}

ErrorKind error_kind(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::InvalidArgument;
}

}  // namespace

TEST(MockBackend, PreferTextSpellsTheTextThenEos) {
  auto v = vocab();
  MockBackend m(v, MockScript().prefer_text("abcab"));
  m.begin_span({"s", 0, 0});
  std::vector<TokenId> ctx;
  std::vector<float> scores;
  std::string text;
  for (int i = 0; i < 5; ++i) {
    m.next_logits(ctx, scores);
    ASSERT_EQ(scores.size(), v->size());
    TokenId t = argmax(scores);
    if (t == *v->eos()) break;
    ctx.push_back(t);
    text += v->bytes(t);
  }
  EXPECT_EQ(text, "abcab");
  EXPECT_EQ(ctx.size(), 2u);  // "abc" then "ab"
  m.next_logits(ctx, scores);
  EXPECT_EQ(argmax(scores), *v->eos());
}

TEST(MockBackend, ConsistentPrefixesOutrankOtherTokens) {
  auto v = vocab();
  MockBackend m(v, MockScript().prefer_text("abc"));
  m.begin_span({"s", 0, 0});
  std::vector<float> scores;
  m.next_logits({}, scores);
  TokenId a = v->tokenize("a")[0];
  TokenId abc = v->tokenize("abc")[0];
  EXPECT_FLOAT_EQ(scores[static_cast<std::size_t>(abc)], kPreferred);
  EXPECT_FLOAT_EQ(scores[static_cast<std::size_t>(a)], kConsistent);
  EXPECT_FLOAT_EQ(scores[static_cast<std::size_t>(v->tokenize("z")[0])], kFloor);
}

TEST(MockBackend, DirectivesAdvancePerSpanAndExhaustToEos) {
  auto v = vocab();
  MockBackend m(v, MockScript().prefer_token(7).prefer_text("x"));
  std::vector<float> scores;
  m.begin_span({"a", 0, 0});
  m.next_logits({}, scores);
  EXPECT_EQ(argmax(scores), 7);
  m.begin_span({"b", 1, 1});
  m.next_logits(std::vector<TokenId>{7}, scores);
  EXPECT_EQ(v->bytes(argmax(scores)), "x");
  m.begin_span({"c", 2, 2});
  m.next_logits(std::vector<TokenId>{7, 120}, scores);
  EXPECT_EQ(argmax(scores), *v->eos());
}

TEST(MockBackend, NoiseIsDeterministicPerContext) {
  auto v = vocab();
  MockBackend a(v, MockScript().uniform_noise(3));
  MockBackend b(v, MockScript().uniform_noise(3));
  MockBackend c(v, MockScript().uniform_noise(4));
  std::vector<float> sa, sb, sc;
  std::vector<TokenId> ctx = {1, 2, 3};
  a.next_logits(ctx, sa);
  b.next_logits(ctx, sb);
  c.next_logits(ctx, sc);
  EXPECT_EQ(sa, sb);
  EXPECT_NE(sa, sc);
  for (float x : sa) {
    EXPECT_GE(x, -1.0f);
    EXPECT_LE(x, 1.0f);
  }
}

TEST(MockBackend, ContextOverflow) {
  MockBackend m(vocab(), MockScript(), 4);
  std::vector<float> scores;
  EXPECT_EQ(error_kind([&] { m.next_logits(std::vector<TokenId>(5, 1), scores); }), ErrorKind::ContextOverflow);
}

TEST(MockScript, JsonRoundTrip) {
  MockScript s;
  s.prefer_text("a\nb").prefer_token(3).uniform_noise(9).fail_validation_times(2, {"1"}, {"2"});
  MockScript t = MockScript::from_json(s.to_json());
  EXPECT_EQ(s.directives, t.directives);
  EXPECT_EQ(t.directives.size(), 6u);
}

TEST(CallbackBackend, ShapeAndExceptionsBecomeBackendFailure) {
  std::vector<float> scores;
  CallbackBackend ok([](std::span<const TokenId> ctx) { return std::vector<float>(4, static_cast<float>(ctx.size())); }, 4,
                     "v");
  ok.next_logits(std::vector<TokenId>{1, 2}, scores);
  EXPECT_EQ(scores, std::vector<float>(4, 2.0f));
  CallbackBackend short_vec([](std::span<const TokenId>) { return std::vector<float>(3, 0.0f); }, 4, "v");
  try {
    short_vec.next_logits({}, scores);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::BackendFailure);
    EXPECT_NE(std::string(e.what()).find("shape mismatch: expected 4 scores, got 3"), std::string::npos);
  }
  CallbackBackend throws([](std::span<const TokenId>) -> std::vector<float> { throw std::runtime_error("boom"); }, 4,
                         "v");
  EXPECT_EQ(error_kind([&] { throws.next_logits({}, scores); }), ErrorKind::BackendFailure);
  CallbackBackend nan([](std::span<const TokenId>) { return std::vector<float>{0.0f, NAN, 0.0f, 0.0f}; }, 4, "v");
  EXPECT_EQ(error_kind([&] { nan.next_logits({}, scores); }), ErrorKind::BackendFailure);
}

TEST(DecoderBackend, OptionalCapabilitiesDefaultToCapabilityError) {
  CallbackBackend cb([](std::span<const TokenId>) { return std::vector<float>(2, 0.0f); }, 2, "v");
  EXPECT_EQ(error_kind([&] { cb.choose_option({}, {"a"}); }), ErrorKind::CapabilityError);
  EXPECT_EQ(error_kind([&] { cb.generate("p", {}); }), ErrorKind::CapabilityError);
}
