#include <gtest/gtest.h>

#include "scidc/ir/lint.hpp"
#include "scidc/ir/parser.hpp"

using namespace scidc;
using namespace scidc::ir;

namespace {

const token::Vocabulary& vocab() {
  static const token::Vocabulary v = token::make_byte_vocabulary();
  return v;
}

std::vector<Finding> lint(const std::string& body) {
  return lint_program(parse_program("scidc-ir v1\nprogram t\n" + body), &vocab());
}

bool has_error(const std::vector<Finding>& fs, const std::string& needle) {
  for (const auto& f : fs) {
    if (f.severity == Severity::Error && f.message.find(needle) != std::string::npos) return true;
  }
  return false;
}

bool has_warning(const std::vector<Finding>& fs, const std::string& needle) {
  for (const auto& f : fs) {
    if (f.severity == Severity::Warning && f.message.find(needle) != std::string::npos) return true;
  }
  return false;
}

std::string dump(const std::vector<Finding>& fs) {
  std::string out;
  for (const auto& f : fs) out += format_finding(f) + "\n";
  return out;
}

const char* kLoop = R"(step head: emit "A: "
step a: gen regex="\d" max_tokens=2
step b: select options=["x", "y"]
step chk: validate pred=a > 1 and b == "x" max_retries=3 anchor=head retry="[Retry {retry}] a={a}\n" fallback {
  a = "5";
  b = "x";
}
)";

}  // namespace

TEST(Lint, CleanProgramHasNoFindings) {
  auto fs = lint(kLoop);
  EXPECT_FALSE(has_errors(fs)) << dump(fs);
}

TEST(Lint, ValidateStructure) {
  EXPECT_TRUE(has_error(lint("step a: gen regex=\"\\d\" max_tokens=2\nstep v: validate pred=a > 1 anchor=a\n"),
                        "validate requires max_retries"));
  EXPECT_TRUE(has_error(lint("step a: gen regex=\"\\d\" max_tokens=2\nstep v: validate pred=a > 1 max_retries=0 anchor=a fallback { a = \"2\"; }\n"),
                        "max_retries must be at least 1"));
  EXPECT_TRUE(has_error(lint("step a: gen regex=\"\\d\" max_tokens=2\nstep v: validate pred=a > 1 max_retries=2\n"),
                        "AnchorOrder"));
  EXPECT_TRUE(has_error(lint("step v: validate pred=1 > 0 max_retries=2 anchor=a\nstep a: gen regex=\"\\d\" max_tokens=2\n"),
                        "AnchorOrder"));
  EXPECT_TRUE(has_error(lint("step a: gen regex=\"\\d\" max_tokens=2\nstep v: validate pred=a > 1 max_retries=2 anchor=a\n"),
                        "fallback missing for re-bound variable 'a'"));
  EXPECT_TRUE(has_error(lint("step a: gen regex=\"\\d\" max_tokens=2\nstep v: validate pred=a > 1 max_retries=2 anchor=a fallback { a = \"12\"; }\n"),
                        "does not match its regex"));
  EXPECT_TRUE(has_error(lint("step a: select options=[\"p\"]\nstep v: validate pred=a == \"p\" max_retries=2 anchor=a fallback { a = \"q\"; }\n"),
                        "is not one of its options"));
}

TEST(Lint, VariablesAndTypes) {
  EXPECT_TRUE(has_error(lint("step s: select dynamic {\n when z > 1 -> [\"a\"];\n else -> [\"b\"];\n}\n"),
                        "UnboundVariable: z"));
  EXPECT_TRUE(has_error(lint("step a: select options=[\"x\"]\nstep s: select dynamic {\n when a > 1 -> [\"a\"];\n else -> [\"b\"];\n}\n"),
                        "PredicateTypeError"));
  EXPECT_TRUE(has_error(lint("step a: gen stop=\"\\n\" max_tokens=5\nstep s: select dynamic {\n when a > 1 -> [\"a\"];\n else -> [\"b\"];\n}\n"),
                        "PredicateTypeError"));
  EXPECT_FALSE(has_errors(lint("step a: select options=[\"1\", \"2\"]\nstep s: select dynamic {\n when a > 1 -> [\"a\"];\n else -> [\"b\"];\n}\n")));
  auto retry = lint(R"(step head: emit "A: "
step a: gen regex="\d" max_tokens=2
step chk: validate pred=a > 1 max_retries=3 anchor=head retry="{nope}" fallback {
  a = "5";
}
)");
  EXPECT_TRUE(has_error(retry, "UnboundVariable: nope (in retry message)")) << dump(retry);
}

TEST(Lint, GenAndSelectConstraints) {
  EXPECT_TRUE(has_error(lint("step g: gen max_tokens=4\n"), "gen requires a regex or a stop string"));
  EXPECT_TRUE(has_error(lint("step g: gen regex=\"\\d\"\n"), "gen requires max_tokens"));
  EXPECT_TRUE(has_error(lint("step g: gen regex=\"(?=a)\" max_tokens=3\n"), "UnsupportedRegexFeature"));
  EXPECT_TRUE(has_error(lint("step g: gen regex=\"\\d{5}\" max_tokens=2\n"), "MaxTokensInNonAcceptingState"));
  EXPECT_TRUE(has_error(lint("step s: select options=[]\n"), "select requires a nonempty option list"));
  token::Vocabulary tiny({"a", "b", "<eos>"}, {}, 2);
  auto fs = lint_program(parse_program("scidc-ir v1\nprogram t\nstep s: select options=[\"ab\", \"c\"]\n"), &tiny);
  EXPECT_TRUE(has_error(fs, "UntokenizableOption")) << dump(fs);
  auto emit = lint_program(parse_program("scidc-ir v1\nprogram t\nstep e: emit \"abc\"\n"), &tiny);
  EXPECT_TRUE(has_error(emit, "UnspellableText")) << dump(emit);
}

TEST(Lint, BranchChecks) {
  std::string deep = "step x: gen regex=\"\\d\" max_tokens=2\n";
  std::string open, close;
  for (int i = 0; i < kMaxBranchDepth + 1; ++i) {
    open += "step b" + std::to_string(i) + ": branch {\n when x > 1 {\n";
    close += "}\n}\n";
  }
  auto fs = lint(deep + open + "step leaf: emit \"z\"\n" + close);
  EXPECT_TRUE(has_error(fs, "branch nesting exceeds depth")) << dump(fs);
  auto unreachable = lint(deep + "step b: branch {\n when 1 < 2 {\n step p: emit \"p\"\n }\n when x > 1 {\n step q: emit \"q\"\n }\n}\n");
  EXPECT_TRUE(has_warning(unreachable, "unreachable branch arm")) << dump(unreachable);
}

TEST(Lint, SingleOptionBeforeFreeGenerationWarns) {
  auto fs = lint("step s: select options=[\"only\"]\nstep g: gen stop=\"\\n\" max_tokens=4\n");
  EXPECT_TRUE(has_warning(fs, "single-option select followed by free generation")) << dump(fs);
  EXPECT_FALSE(has_errors(fs));
}

TEST(Lint, DuplicateNamesAcrossLevels) {
  RuleProgram p;
  p.name = "dup";
  p.steps.push_back(Step{"a", EmitBody{"x"}});
  p.steps.push_back(Step{"a", EmitBody{"y"}});
  EXPECT_TRUE(has_error(lint_program(p), "DuplicateStepName"));
}
