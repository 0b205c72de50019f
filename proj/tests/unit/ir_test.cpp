#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "scidc/ir/parser.hpp"
#include "scidc/ir/predicate.hpp"
#include "scidc/ir/serializer.hpp"

using namespace scidc;
using namespace scidc::ir;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ErrorKind error_kind(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::InvalidArgument;
}

const char* kSmall = R"(scidc-ir v1
program staging
meta source = "doc"
step head: emit "Stage: "
step stage: select options=["M0", "M1"]
step size: gen regex="\d+" max_tokens=4
step pick: branch {
  when size > 3 {
    step big: emit "big"
  }
  else {
    step small: emit "small"
  }
}
step check: validate pred=size <= 9 max_retries=2 anchor=size fallback {
  size = "1";
}
)";

}  // namespace

TEST(Parser, ReadsAllStepKinds) {
  RuleProgram p = parse_program(kSmall);
  EXPECT_EQ(p.name, "staging");
  ASSERT_EQ(p.steps.size(), 5u);
  EXPECT_EQ(p.steps[0].kind(), StepKind::EmitFixed);
  EXPECT_EQ(p.steps[0].emit().text, "Stage: ");
  EXPECT_EQ(p.steps[1].select().options, (std::vector<std::string>{"M0", "M1"}));
  EXPECT_EQ(*p.steps[2].gen().regex, "\\d+");
  EXPECT_EQ(*p.steps[2].gen().max_tokens, 4);
  const auto& b = p.steps[3].branch();
  ASSERT_EQ(b.arms.size(), 1u);
  EXPECT_EQ(b.arms[0].steps[0].name, "big");
  ASSERT_TRUE(b.otherwise.has_value());
  const auto& v = p.steps[4].validate();
  EXPECT_EQ(*v.max_retries, 2);
  EXPECT_EQ(*v.anchor, "size");
  ASSERT_EQ(v.fallback.size(), 1u);
  EXPECT_EQ(v.fallback[0].value, "1");
  ASSERT_NE(p.meta("source"), nullptr);
  EXPECT_EQ(*p.meta("source"), "doc");
}

TEST(Parser, ReportsPositionedErrors) {
  try {
    parse_program("scidc-ir v1\nprogram p\nstep a: emit \"x\"\nstep b emit \"y\"\n");
    FAIL() << "expected a syntax error";
  } catch (const SyntaxError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::SyntaxError);
    EXPECT_EQ(e.line(), 4);
  }
  EXPECT_EQ(error_kind([] { parse_program("scidc-ir v1\nprogram p\nstep a: emit \"x\"\nstep a: emit \"y\"\n"); }),
            ErrorKind::DuplicateStepName);
  EXPECT_EQ(error_kind([] { parse_program("scidc-ir v1\nprogram p\nstep a: loop\n"); }), ErrorKind::UnknownStepKind);
  EXPECT_EQ(error_kind([] { parse_program("scidc-ir v2\nprogram p\n"); }), ErrorKind::SyntaxError);
  EXPECT_EQ(error_kind([] { parse_program("scidc-ir v1\nprogram p\nstep g: gen max_tokens=3 max_tokens=4\n"); }),
            ErrorKind::SyntaxError);
}

TEST(Serializer, RoundTripsBundledPrograms) {
  for (const char* name : {"formulation.ir", "tnm.ir"}) {
    RuleProgram p = parse_program(read_file(std::string(SCIDC_DATA_DIR) + "/programs/" + name));
    std::string once = serialize_program(p);
    RuleProgram q = parse_program(once);
    EXPECT_EQ(p, q) << name;
    EXPECT_EQ(once, serialize_program(q)) << name;
  }
  RuleProgram s = parse_program(kSmall);
  EXPECT_EQ(parse_program(serialize_program(s)), s);
}

TEST(Serializer, EscapesSpecialCharacters) {
  RuleProgram p;
  p.name = "esc";
  p.steps.push_back(Step{"e", EmitBody{"quote \" backslash \\ newline \n tab \t"}});
  RuleProgram q = parse_program(serialize_program(p));
  EXPECT_EQ(q.steps[0].emit().text, p.steps[0].emit().text);
}

TEST(Predicate, ParsesWithPrecedence) {
  Expr e = parse_predicate("a + b * 2 <= 10 and not c == \"x\" or d in [\"p\", \"q\"]");
  EXPECT_EQ(to_string(parse_predicate(to_string(e))), to_string(e));
  EXPECT_EQ(variables(e), (std::set<std::string>{"a", "b", "c", "d"}));
  EXPECT_EQ(to_string(parse_predicate("x ≥ 2.5")), "x >= 2.5");
}

// Oracle: the same arithmetic written directly in C++.
TEST(Predicate, EvaluationMatchesDirectArithmetic) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> val(0, 100);
  Expr e = parse_predicate("b + p + c <= 100 and b >= 40 and c / b >= 0.1 and c / b <= 0.25");
  for (int i = 0; i < 500; ++i) {
    double b = std::round(val(rng) * 10) / 10, p = std::round(val(rng) / 10 * 10) / 10, c = std::round(val(rng) / 3 * 10) / 10;
    std::map<std::string, std::string> env;
    std::ostringstream sb, sp, sc;
    sb << b;
    sp << p;
    sc << c;
    env["b"] = sb.str();
    env["p"] = sp.str();
    env["c"] = sc.str();
    double bb = std::stod(env["b"]), pp = std::stod(env["p"]), cc = std::stod(env["c"]);
    bool expected = bb + pp + cc <= 100 && bb >= 40 && cc / bb >= 0.1 && cc / bb <= 0.25;
    EXPECT_EQ(evaluate_bool(e, lookup_in(env)), expected) << env["b"] << " " << env["p"] << " " << env["c"];
  }
}

TEST(Predicate, ErrorsOnUnboundAndTypeMismatch) {
  std::map<std::string, std::string> env{{"t", "T1a"}, {"n", "3"}};
  EXPECT_EQ(error_kind([&] { evaluate_bool(parse_predicate("zz > 1"), lookup_in(env)); }), ErrorKind::UnboundVariable);
  EXPECT_EQ(error_kind([&] { evaluate_bool(parse_predicate("t > 1"), lookup_in(env)); }), ErrorKind::PredicateTypeError);
  EXPECT_TRUE(evaluate_bool(parse_predicate("t in [\"T1a\", \"T1b\"] and n == 3"), lookup_in(env)));
  EXPECT_TRUE(evaluate_bool(parse_predicate("t not in [\"T2\"]"), lookup_in(env)));
}

TEST(Predicate, StaticTypeCheck) {
  std::map<std::string, VarType> env{{"t", VarType::Text}, {"n", VarType::Numeric}};
  EXPECT_TRUE(type_check(parse_predicate("n > 2 and t == \"x\""), env).errors.empty());
  EXPECT_FALSE(type_check(parse_predicate("t > 2"), env).errors.empty());
  EXPECT_EQ(type_check(parse_predicate("q > 2"), env).unbound, (std::set<std::string>{"q"}));
  EXPECT_EQ(constant_value(parse_predicate("1 < 2")), std::optional<bool>(true));
  EXPECT_EQ(constant_value(parse_predicate("n < 2")), std::nullopt);
}
