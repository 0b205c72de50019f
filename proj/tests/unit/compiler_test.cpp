#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "scidc/compiler/pipeline.hpp"

using namespace scidc;
using namespace scidc::compiler;
namespace fs = std::filesystem;

namespace {

const fs::path kData = SCIDC_DATA_DIR;
const fs::path kGolden = fs::path(SCIDC_TEST_DIR) / "golden";
const fs::path kFixtures = kData / "fixtures" / "tnm";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const token::Vocabulary& vocab() {
  static const token::Vocabulary v = token::Vocabulary::load(kData / "vocab" / "demo.json");
  return v;
}

KnowledgeDoc tnm_doc() { return KnowledgeDoc::load(kData / "knowledge" / "tnm.md"); }
std::string task() { return slurp(kFixtures / "task.txt"); }

// Compares against a golden file; SCIDC_UPDATE_GOLDEN=1 rewrites it.
void expect_golden(const std::string& name, const std::string& actual) {
  const fs::path p = kGolden / name;
  if (std::getenv("SCIDC_UPDATE_GOLDEN")) {
    fs::create_directories(kGolden);
    std::ofstream(p, std::ios::binary) << actual;
  }
  ASSERT_TRUE(fs::exists(p)) << p;
  EXPECT_EQ(slurp(p), actual) << "golden mismatch: " << name;
}

ErrorKind error_kind(const std::function<void()>& f, std::string* what = nullptr) {
  try {
    f();
  } catch (const Error& e) {
    if (what) *what = e.what();
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::IoError;
}

struct Scripted {
  explicit Scripted(std::vector<std::string> r) : replies(std::move(r)) {}
  Scripted(const Scripted&) = delete;

  std::vector<std::string> replies;
  std::vector<std::string> prompts;
  FunctionGllm client{[this](const std::string& p) {
    prompts.push_back(p);
    return replies.at(std::min(prompts.size(), replies.size()) - 1);
  }};
};

CotFramework tnm_framework() { return parse_framework(slurp(kFixtures / "replies" / "framework.txt")); }

const char* kMinimalProgram = "```\nscidc-ir v1\nprogram m\nstep a: select options=[\"x\", \"y\"]\n```\n";

}  // namespace

TEST(Framework, ParsesFixtureReplyAndRoundTrips) {
  auto fw = tnm_framework();
  ASSERT_EQ(fw.steps.size(), 7u);
  EXPECT_EQ(fw.steps[0].kind, FrameworkStepKind::Extract);
  EXPECT_EQ(fw.steps[0].variable, "VAR_TumorSize");
  EXPECT_EQ(*fw.steps[0].field("Source"), "Problem Instance");
  EXPECT_EQ(fw.steps[2].kind, FrameworkStepKind::Judge);
  EXPECT_EQ(fw.steps[2].variable, "MID_Tcategory");
  EXPECT_EQ(fw.steps[2].depends_on, (std::vector<std::string>{"VAR_TumorSize", "VAR_Extent"}));
  ASSERT_NE(fw.conclude(), nullptr);
  EXPECT_EQ(fw.conclude()->variable, "ANS_TNM");
  EXPECT_TRUE(validate_framework(fw).empty());
  EXPECT_EQ(parse_framework(render_framework(fw)), fw);
  expect_golden("tnm_framework.txt", render_framework(fw));
}

TEST(Framework, ToleratesMarkdownEmphasis) {
  auto fw = parse_framework(
      "**## Reasoning Framework**\n**Step 1: [Extract] Variable: <VAR_a>**\nStep 2: [Conclude] Final Answer: "
      "`ANS_b`\nDepends On: VAR_a\n");
  ASSERT_EQ(fw.steps.size(), 2u);
  EXPECT_EQ(fw.steps[1].variable, "ANS_b");
  EXPECT_TRUE(validate_framework(fw).empty());
}

TEST(Framework, StructuralViolations) {
  auto problems = [](const std::string& steps) {
    return text::join(validate_framework(parse_framework("## Reasoning Framework\n" + steps)), "|");
  };
  EXPECT_NE(problems("Step 1: [Extract] Variable: <VAR_a>\n").find("no Conclude step"), std::string::npos);
  EXPECT_NE(problems("Step 1: [Judge] Intermediate Conclusion: <MID_a>\nDepends On: <VAR_z>\n"
                     "Step 2: [Conclude] Final Answer: <ANS_a>\nDepends On: <MID_a>\n")
                .find("depends on 'VAR_z', which no earlier step defines"),
            std::string::npos);
  EXPECT_NE(problems("Step 1: [Extract] Variable: <VAR_a>\nStep 2: [Conclude] Final Answer: <ANS_a>\n"
                     "Depends On: <VAR_a>\nStep 3: [Extract] Variable: <VAR_b>\n")
                .find("not the last step"),
            std::string::npos);
  EXPECT_NE(problems("Step 1: [Extract] Variable: <MID_a>\nStep 2: [Conclude] Final Answer: <ANS_a>\n"
                     "Depends On: <MID_a>\n")
                .find("should start with VAR_"),
            std::string::npos);
  EXPECT_EQ(error_kind([] { parse_framework("no steps here"); }), ErrorKind::MalformedFrameworkReply);
}

TEST(Prompts, GoldenFilesAndSkeletonLines) {
  const std::string p1 = decomposition_prompt(tnm_doc().text, task());
  const std::string p2 = program_prompt(tnm_doc().text, task(), render_framework(tnm_framework()));
  expect_golden("tnm_decomposition_prompt.txt", p1);
  expect_golden("tnm_program_prompt.txt", p2);
  for (const char* line : {"# Role Definition", "# Input Format", "# Framework Step Specification",
                           "Type 1 · Information Extraction Step (Extract)", "[Extract] Variable: <VAR_xxx>",
                           "Type 2 · Intermediate Judgment Step (Judge)", "[Judge] Intermediate Conclusion: <MID_xxx>",
                           "Type 3 · Final Conclusion Step (Conclude)", "[Conclude] Final Answer: <ANS_xxx>",
                           "# Output Format", "## Problem Class Understanding", "## Reasoning Framework",
                           "Knowledge Document [DOC]: ", "Problem Class [Q]: stage thyroid cancer records"}) {
    EXPECT_NE(p1.find(line), std::string::npos) << line;
  }
  for (const char* line : {"# Role Definition", "# Input Format", "# Code Block Specification",
                           "Block Type 1 · Reasoning Step (Step Block)", "Block Type 2 · Dynamic Dependency Block",
                           "Block Type 3 · Cyclic Validation Block", "MAX_RETRIES = 5", "scidc-ir v1",
                           "Domain Knowledge [DOMAIN]: ", "Domain Question [Q]: ", "Chain of Thought [CoT]: "}) {
    EXPECT_NE(p2.find(line), std::string::npos) << line;
  }
}

TEST(Decompose, ReplaysFixtureReply) {
  FixtureGllm gllm(kFixtures);
  auto fw = decompose_task(tnm_doc(), task(), gllm);
  EXPECT_EQ(gllm.served(), 1u);
  EXPECT_EQ(fw, tnm_framework());
}

TEST(Decompose, OneRepairRoundThenError) {
  const std::string no_conclude = "## Reasoning Framework\nStep 1: [Extract] Variable: <VAR_a>\n";
  Scripted s{{no_conclude, no_conclude}};
  std::string what;
  EXPECT_EQ(error_kind([&] { decompose_task(tnm_doc(), task(), s.client); }, &what),
            ErrorKind::MalformedFrameworkReply);
  ASSERT_EQ(s.prompts.size(), 2u);
  EXPECT_NE(s.prompts[1].find("# Repair Request"), std::string::npos);
  EXPECT_NE(s.prompts[1].find("- framework has no Conclude step"), std::string::npos);
  EXPECT_NE(what.find("no Conclude step"), std::string::npos);

  Scripted fixed{{no_conclude, slurp(kFixtures / "replies" / "framework.txt")}};
  EXPECT_EQ(decompose_task(tnm_doc(), task(), fixed.client).steps.size(), 7u);
  EXPECT_EQ(fixed.prompts.size(), 2u);
}

TEST(Decompose, EmptyDocumentFailsBeforeAnyCall) {
  Scripted s{{"unused"}};
  EXPECT_EQ(error_kind([&] { decompose_task(KnowledgeDoc{"  \n", "x"}, task(), s.client); }),
            ErrorKind::InvalidArgument);
  EXPECT_TRUE(s.prompts.empty());
}

TEST(GenerateProgram, FixtureReplyIsLintCleanWithCategorySets) {
  FixtureGllm gllm(kFixtures);
  auto p = generate_rule_program(tnm_doc(), task(), tnm_framework(), gllm, &vocab());
  EXPECT_FALSE(ir::has_errors(ir::lint_program(p, &vocab())));
  std::set<std::string> options;
  ir::for_each_step(p.steps, [&](const ir::Step& s) {
    if (s.kind() != ir::StepKind::Select) return;
    const auto& sel = s.select();
    options.insert(sel.options.begin(), sel.options.end());
    if (sel.dynamic) {
      for (const auto& g : sel.dynamic->guards) options.insert(g.options.begin(), g.options.end());
      options.insert(sel.dynamic->otherwise.begin(), sel.dynamic->otherwise.end());
    }
  });
  for (const char* c : {"T1a", "T1b", "T2", "T3a", "T3b", "T4a", "T4b", "N0", "N1a", "N1b", "M0", "M1"}) {
    EXPECT_TRUE(options.count(c)) << c;
  }
}

TEST(GenerateProgram, LintErrorsTriggerOneRepairWithFindings) {
  const std::string no_retries =
      "```\nscidc-ir v1\nprogram r\nstep a: gen regex=\"\\d\" max_tokens=2\n"
      "step v: validate pred=a > 1 anchor=a fallback { a = \"2\"; }\n```\n";
  Scripted s{{no_retries, kMinimalProgram}};
  auto p = generate_rule_program(tnm_doc(), task(), tnm_framework(), s.client, &vocab());
  EXPECT_EQ(p.name, "m");
  ASSERT_EQ(s.prompts.size(), 2u);
  EXPECT_NE(s.prompts[0].find("MAX_RETRIES = 5"), std::string::npos);
  EXPECT_NE(s.prompts[1].find("validate requires max_retries"), std::string::npos);
}

TEST(GenerateProgram, UnsupportedRegexSurfacesAsLintErrors) {
  const std::string lookahead = "```\nscidc-ir v1\nprogram r\nstep a: gen regex=\"(?=a)b\" max_tokens=2\n```\n";
  Scripted s{{lookahead}};
  std::string what;
  EXPECT_EQ(error_kind([&] { generate_rule_program(tnm_doc(), task(), tnm_framework(), s.client); }, &what),
            ErrorKind::LintErrors);
  EXPECT_NE(what.find("UnsupportedRegexFeature"), std::string::npos) << what;
  EXPECT_EQ(s.prompts.size(), 2u);
}

TEST(GenerateProgram, UnparseableAfterRepair) {
  Scripted s{{"I cannot write that program."}};
  EXPECT_EQ(error_kind([&] { generate_rule_program(tnm_doc(), task(), tnm_framework(), s.client); }),
            ErrorKind::UnparseableProgram);
  CotFramework bad;
  bad.steps.push_back({FrameworkStepKind::Extract, "VAR_a", {}, {}});
  EXPECT_EQ(error_kind([&] { generate_rule_program(tnm_doc(), task(), bad, s.client); }), ErrorKind::InvalidArgument);
}

TEST(Explain, SentencesForEachStepKind) {
  auto p = ir::parse_program(R"(scidc-ir v1
program e
step head: emit "Size: "
step size: gen regex="\d+" max_tokens=3
step extent: select options=["within the thyroid gland", "strap muscles"]
step t: select dynamic {
  when size <= 1 and extent == "within the thyroid gland" -> ["T1a"];
  else -> ["T1b", "T2"];
}
step chk: validate pred=size > 0 max_retries=3 anchor=head retry="again\n" fallback {
  size = "1";
}
)");
  const std::string text = explain_program(p);
  EXPECT_NE(text.find("The program then writes the fixed text \"Size: \"."), std::string::npos) << text;
  EXPECT_NE(text.find("when size is at most 1 and extent is \"within the thyroid gland\" -> \"T1a\""),
            std::string::npos)
      << text;
  EXPECT_NE(text.find("otherwise -> \"T1b\" or \"T2\""), std::string::npos) << text;
  EXPECT_NE(text.find("checks that size is greater than 0"), std::string::npos) << text;
  EXPECT_NE(text.find("up to 3 attempts in total"), std::string::npos) << text;
  EXPECT_NE(text.find("sets size to \"1\""), std::string::npos) << text;
  EXPECT_EQ(explain_program(p), text);
}

TEST(Explain, TnmGolden) {
  auto p = ir::parse_program(slurp(kData / "programs" / "tnm.ir"));
  expect_golden("tnm_explanation.txt", explain_program(p));
}

TEST(ExpertFeedback, FixtureRevisionInsertsMetastasisSelect) {
  FixtureGllm gllm(kFixtures);
  auto compiled = compile_knowledge(tnm_doc(), task(), gllm, &vocab());
  EXPECT_EQ(ir::find_step(compiled.program.steps, "metastasis"), nullptr);
  VerificationTranscript tr;
  auto revised = apply_expert_feedback(compiled.program, tr, slurp(kFixtures / "suggestion.txt"), gllm, &vocab());
  EXPECT_EQ(gllm.served(), 3u);
  EXPECT_EQ(revised, ir::parse_program(slurp(kData / "programs" / "tnm.ir")));
  std::size_t meta_at = 0, m_at = 0;
  for (std::size_t i = 0; i < revised.steps.size(); ++i) {
    if (revised.steps[i].name == "metastasis") meta_at = i;
    if (revised.steps[i].name == "m_category") m_at = i;
  }
  EXPECT_GT(meta_at, 0u);
  EXPECT_LT(meta_at, m_at);
  EXPECT_EQ(revised.steps[meta_at].select().options,
            (std::vector<std::string>{"no distant transfer", "distant transfer exists"}));
  ASSERT_EQ(tr.turns().size(), 2u);
  EXPECT_EQ(tr.turns()[0].kind, TurnKind::ModelExplanation);
  EXPECT_EQ(tr.turns()[1].kind, TurnKind::ExpertSuggestion);
}

TEST(ExpertFeedback, EmptySuggestionIsIdentity) {
  auto p = ir::parse_program(slurp(kData / "programs" / "tnm.ir"));
  Scripted s{{"unused"}};
  VerificationTranscript tr;
  EXPECT_EQ(apply_expert_feedback(p, tr, "  ", s.client), p);
  EXPECT_TRUE(s.prompts.empty());
  EXPECT_TRUE(tr.turns().empty());
}

TEST(ExpertFeedback, RevisionDroppingConcludeStepIsRejected) {
  auto p = ir::parse_program(slurp(kData / "programs" / "tnm.ir"));
  std::string cut = ir::serialize_program(p);
  cut = cut.substr(0, cut.find("step s7_head"));
  Scripted s{{"```\n" + cut + "```\n"}};
  VerificationTranscript tr;
  std::string what;
  EXPECT_EQ(error_kind([&] { apply_expert_feedback(p, tr, "simplify", s.client); }, &what),
            ErrorKind::RevisionRejected);
  EXPECT_NE(what.find("m_category"), std::string::npos) << what;

  Scripted broken{{"```\nscidc-ir v1\nprogram r\nstep a: gen max_tokens=2\n```\n"}};
  EXPECT_EQ(error_kind([&] { apply_expert_feedback(p, tr, "again", broken.client); }, &what),
            ErrorKind::RevisionRejected);
  EXPECT_NE(what.find("gen requires a regex or a stop string"), std::string::npos) << what;
}

TEST(ExpertFeedback, AtMostTwoExpertTurns) {
  auto p = ir::parse_program(slurp(kData / "programs" / "tnm.ir"));
  Scripted s{{"```\n" + ir::serialize_program(p) + "```\n"}};
  VerificationTranscript tr;
  p = apply_expert_feedback(p, tr, "one", s.client);
  p = apply_expert_feedback(p, tr, "two", s.client);
  EXPECT_EQ(tr.expert_turns(), 2u);
  EXPECT_EQ(error_kind([&] { apply_expert_feedback(p, tr, "three", s.client); }), ErrorKind::InvalidArgument);
  EXPECT_EQ(s.prompts.size(), 2u);
}

TEST(Fixtures, OfflinePipelineIsByteDeterministic) {
  std::string first, second;
  for (std::string* out : {&first, &second}) {
    FixtureGllm gllm(kFixtures);
    auto r = compile_knowledge(tnm_doc(), task(), gllm, &vocab());
    *out = render_framework(r.framework) + ir::serialize_program(r.program);
  }
  EXPECT_EQ(first, second);
  FixtureGllm gllm(kFixtures);
  std::string what;
  EXPECT_EQ(error_kind([&] { decompose_task(tnm_doc(), "a different task", gllm); }, &what),
            ErrorKind::FixtureMissing);
  EXPECT_NE(what.find(request_hash(decomposition_prompt(tnm_doc().text, "a different task"))), std::string::npos);
}

TEST(Fixtures, RecordingThenReplay) {
  const fs::path dir = fs::temp_directory_path() / ("scidc_fixture_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  Scripted s{{"reply one"}};
  RecordingGllm rec(s.client, dir);
  EXPECT_EQ(rec.complete("prompt one"), "reply one");
  FixtureGllm replay(dir);
  EXPECT_EQ(replay.complete("prompt one"), "reply one");
  auto j = nlohmann::json::parse(slurp(fixture_path(dir, "prompt one")));
  EXPECT_EQ(j["request_hash"], request_hash("prompt one"));
  EXPECT_EQ(j["prompt"], "prompt one");
  fs::remove_all(dir);
}

TEST(RemoteGllm, ChatCompletionsProtocolAndErrors) {
  httplib::Server srv;
  nlohmann::json seen;
  srv.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    seen = nlohmann::json::parse(req.body);
    if (seen["messages"][0]["content"] == "fail") {
      res.status = 500;
      return;
    }
    res.set_content(R"({"choices":[{"message":{"role":"assistant","content":"pong"}}]})", "application/json");
  });
  int port = srv.bind_to_any_port("127.0.0.1");
  std::thread th([&] { srv.listen_after_bind(); });
  srv.wait_until_ready();
  GllmConfig c;
  c.endpoint = "http://127.0.0.1:" + std::to_string(port);
  c.model = "m";
  RemoteGllm gllm(c);
  EXPECT_EQ(gllm.complete("ping"), "pong");
  EXPECT_EQ(seen["model"], "m");
  EXPECT_EQ(seen["messages"][0]["role"], "user");
  EXPECT_EQ(error_kind([&] { gllm.complete("fail"); }), ErrorKind::GllmTransport);
  srv.stop();
  th.join();

  GllmConfig dead;
  dead.endpoint = "http://127.0.0.1:1";
  dead.timeout_s = 0.5;
  dead.retries = 0;
  RemoteGllm unreachable(dead);
  EXPECT_EQ(error_kind([&] { unreachable.complete("x"); }), ErrorKind::GllmTransport);
  EXPECT_THROW(RemoteGllm(GllmConfig{}), Error);
}
