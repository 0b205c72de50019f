#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "scidc/eval/builders.hpp"
#include "scidc/eval/harness.hpp"

using namespace scidc;
using namespace scidc::eval;

namespace {

std::shared_ptr<const token::Vocabulary> vocab() {
  static auto v = std::make_shared<const token::Vocabulary>(
      token::Vocabulary::load(std::string(SCIDC_DATA_DIR) + "/vocab/demo.json"));
  return v;
}

ValiditySpec staging_spec() { return build_tnm_pack(0, 1).scorer.validity; }

std::string staged(const std::string& t, const std::string& n, const std::string& m) {
  return "Step 1: Tumor size (cm): 0.8\nT category: " + t + "\nN category: " + n + "\nM category: " + m + "\n";
}

// Forward check: does some template join the two reactants into the product?
bool forward_valid(const std::string& product, const std::string& a, const std::string& b) {
  for (const auto& t : toy_templates()) {
    for (const auto& [r1, r2] : {std::pair{a, b}, std::pair{b, a}}) {
      if (r1.size() <= t.left.size() || r2.size() <= t.right.size()) continue;
      if (r1.compare(r1.size() - t.left.size(), t.left.size(), t.left) != 0) continue;
      if (r2.compare(0, t.right.size(), t.right) != 0) continue;
      if (r1.substr(0, r1.size() - t.left.size()) + t.bond + r2.substr(t.right.size()) == product) return true;
    }
  }
  return false;
}

// Brute force over every prefix/suffix reactant pair of the product.
std::set<std::string> brute_force_reachable(const std::string& product) {
  std::set<std::string> out;
  for (std::size_t i = 1; i < product.size(); ++i) {
    for (std::size_t k = i; k < product.size(); ++k) {
      for (const auto& t : toy_templates()) {
        std::string a = product.substr(0, i) + t.left;
        std::string b = t.right + product.substr(k);
        if (forward_valid(product, a, b)) out.insert(canonical_reactants(a + " + " + b));
      }
    }
  }
  return out;
}

}  // namespace

TEST(ReferenceStage, BundledRuleExamples) {
  EXPECT_EQ(reference_stage({0.8, "within the thyroid gland", "none", "no distant transfer"}).label(), "T1aN0M0");
  EXPECT_EQ(reference_stage({1.0, "within the thyroid gland", "none", "no distant transfer"}).t, "T1a");
  EXPECT_EQ(reference_stage({1.1, "within the thyroid gland", "none", "no distant transfer"}).t, "T1b");
  EXPECT_EQ(reference_stage({2.0, "within the thyroid gland", "none", "no distant transfer"}).t, "T1b");
  EXPECT_EQ(reference_stage({4.0, "within the thyroid gland", "none", "no distant transfer"}).t, "T2");
  EXPECT_EQ(reference_stage({4.1, "within the thyroid gland", "none", "no distant transfer"}).t, "T3a");
  EXPECT_EQ(reference_stage({0.5, "strap muscles", "none", "no distant transfer"}).t, "T3b");
  EXPECT_EQ(reference_stage({0.5, "adjacent organs", "none", "no distant transfer"}).t, "T4a");
  EXPECT_EQ(reference_stage({9.0, "prevertebral fascia or vessels", "none", "distant transfer exists"}).label(),
            "T4bN0M1");
  EXPECT_EQ(reference_stage({3.0, "within the thyroid gland", "lateral neck", "no distant transfer"}).n, "N1b");
  EXPECT_EQ(reference_stage({3.0, "within the thyroid gland", "central compartment", "no distant transfer"}).n, "N1a");
}

TEST(ReferenceStage, AgreesWithTheRuleProgram) {
  auto pack = build_tnm_pack(0, 1);
  engine::Engine eng(pack.program, vocab());
  for (double size : {0.3, 1.0, 1.4, 2.0, 3.9, 4.0, 4.2, 11.5}) {
    for (const auto& extent : kTnmExtents) {
      for (const auto& nodes : kTnmNodes) {
        for (const auto& met : kTnmMetastasis) {
          char buf[16];
          std::snprintf(buf, sizeof buf, "%.1f", size);
          backend::MockScript s;
          s.prefer_text(buf).prefer_text(extent).uniform_noise(1).prefer_text(nodes).uniform_noise(2);
          s.prefer_text(met).uniform_noise(3);
          backend::MockBackend mock(vocab(), s);
          auto r = eng.run(mock, "", 0);
          EXPECT_EQ(extract_label(r.output, pack.scorer.accuracy.fields),
                    reference_stage({size, extent, nodes, met}).label())
              << r.output;
        }
      }
    }
  }
}

TEST(TnmPack, SeedDeterministicAndWellFormed) {
  auto a = build_tnm_pack(11);
  auto b = build_tnm_pack(11);
  auto c = build_tnm_pack(12);
  ASSERT_EQ(a.instances.size(), 200u);
  EXPECT_EQ(pack_to_json(a).dump(), pack_to_json(b).dump());
  EXPECT_NE(pack_to_json(a).dump(), pack_to_json(c).dump());
  EXPECT_TRUE(validate_pack(a, vocab().get()).empty());
  std::set<std::string> t_seen;
  for (const auto& inst : a.instances) {
    TnmFacts f{std::stod(*inst.attribute("tumor_size")), *inst.attribute("extent"), *inst.attribute("nodes"),
               *inst.attribute("metastasis")};
    EXPECT_EQ(inst.gold, reference_stage(f).label());
    EXPECT_NE(inst.input.find(*inst.attribute("tumor_size") + " cm"), std::string::npos);
    if (f.nodes == "lateral neck") {
      EXPECT_EQ(reference_stage(f).n, "N1b");
    }
    t_seen.insert(reference_stage(f).t);
  }
  EXPECT_GE(t_seen.size(), 6u);
}

TEST(PackJson, RoundTripAndFileIo) {
  auto p = build_retro_pack(3, 12);
  auto j = pack_to_json(p);
  auto q = pack_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(pack_to_json(q).dump(), j.dump());
  ASSERT_TRUE(q.instances[0].program.has_value());
  EXPECT_EQ(*q.instances[0].program, *p.instances[0].program);
  auto path = std::filesystem::temp_directory_path() / "scidc_pack_test.json";
  save_pack(p, path);
  EXPECT_EQ(pack_to_json(load_pack(path)).dump(), j.dump());
  std::filesystem::remove(path);
  EXPECT_THROW(pack_from_json(nlohmann::json{{"format", "other"}}), Error);
}

TEST(Validity, Staging) {
  auto spec = staging_spec();
  EXPECT_TRUE(score_validity(staged("T1a", "N0", "M0"), spec).valid);
  EXPECT_TRUE(score_validity("... T1a N0 M0", spec).valid);
  auto two = score_validity(staged("T2 (or T3a)", "N0", "M0"), spec);
  EXPECT_FALSE(two.valid);
  EXPECT_EQ(two.violations, (std::vector<std::string>{"2 T categories (T2, T3a)"}));
  auto missing = score_validity("T category: T1a\nN category: N0\n", spec);
  EXPECT_EQ(missing.violations, (std::vector<std::string>{"no M category"}));
  auto illegal = score_validity(staged("T5", "N0", "M0"), spec);
  EXPECT_FALSE(illegal.valid);
  EXPECT_EQ(illegal.violations[0], "illegal T category T5");
}

TEST(Validity, Formulation) {
  const auto spec = build_formulation_pack(0, 1).scorer.validity;
  auto text = [](const std::string& b, const std::string& p, const std::string& c) {
    return "Step 4: Binder (%): " + b + "\nStep 5: Plasticizer (%): " + p + "\nStep 6: Curing agent (%): " + c + "\n";
  };
  EXPECT_TRUE(score_validity(text("60", "2.5", "10"), spec).valid);
  auto over = score_validity(text("80", "3", "20.2"), spec);
  EXPECT_FALSE(over.valid);
  EXPECT_NE(std::find(over.violations.begin(), over.violations.end(), "mass fractions exceed 100"),
            over.violations.end());
  auto nan = score_validity(text("sixty", "2", "10"), spec);
  EXPECT_EQ(nan.violations[0], "binder is not a number: 'sixty'");
  auto ratio = score_validity(text("60", "2", "3"), spec);
  EXPECT_EQ(ratio.violations, (std::vector<std::string>{"curing_agent/binder ratio out of range"}));
  EXPECT_EQ(score_validity(text("90", "4", "1"), spec).violations.size(), 3u);
}

TEST(Validity, RetrosynthesisAgreesWithForwardOracle) {
  std::mt19937_64 rng(5);
  auto pack = build_retro_pack(5, 60);
  std::size_t valid_seen = 0, invalid_seen = 0;
  for (const auto& inst : pack.instances) {
    const std::string& product = *inst.attribute("product");
    auto reach = disconnections(product, pack.scorer.validity.templates);
    EXPECT_EQ(std::set<std::string>(reach.begin(), reach.end()), brute_force_reachable(product)) << product;
    std::vector<std::pair<std::string, std::string>> proposals;
    for (const auto& r : reach) {
      auto plus = r.find(" + ");
      proposals.emplace_back(r.substr(0, plus), r.substr(plus + 3));
      proposals.emplace_back(r.substr(0, plus) + "x", r.substr(plus + 3));
      proposals.emplace_back(r.substr(plus + 3), r.substr(0, plus));
    }
    for (const auto& [a, b] : proposals) {
      bool oracle = forward_valid(product, a, b);
      auto r = score_validity("Product: " + product + "\nProposal 1: " + a + " + " + b + "\n",
                              pack.scorer.validity, &inst);
      EXPECT_EQ(r.valid, oracle) << product << " <- " << a << " + " << b;
      (oracle ? valid_seen : invalid_seen) += 1;
    }
  }
  EXPECT_GT(valid_seen, 0u);
  EXPECT_GT(invalid_seen, 0u);
}

TEST(Accuracy, ExactAndHitAtK) {
  AccuracySpec exact;
  exact.kind = "exact";
  exact.fields = {"T category: ", "N category: ", "M category: "};
  EXPECT_TRUE(exact_match(staged("T1a", "N0", "M0"), "T1aN0M0", exact));
  EXPECT_FALSE(exact_match(staged("T1a (or T2)", "N0", "M0"), "T1aN0M0", exact));
  const std::string out = "Proposal 1: A + B\nProposal 2: C + D\n";
  auto ranked = proposals(out, "Proposal ");
  ASSERT_EQ(ranked.size(), 2u);
  EXPECT_FALSE(hit_at_k(ranked, "D + C", 1));
  EXPECT_TRUE(hit_at_k(ranked, "D + C", 2));
  EXPECT_DOUBLE_EQ(percentage({true, false, true, true}), 75.0);
  EXPECT_DOUBLE_EQ(percentage({}), 0.0);
}

TEST(Arms, StrippingRules) {
  auto pack = build_tnm_pack(0, 1);
  auto rm = strip_program(pack.program, Arm::WoRM, "", vocab().get());
  EXPECT_EQ(ir::find_step(rm.program.steps, "size_check"), nullptr);
  EXPECT_EQ(rm.notes, (std::vector<std::string>{"removed validate 'size_check'"}));

  auto rb = strip_program(pack.program, Arm::WoRB, "", vocab().get());
  ir::for_each_step(rb.program.steps, [](const ir::Step& s) {
    EXPECT_NE(s.kind(), ir::StepKind::Select) << s.name;
    if (s.kind() == ir::StepKind::Gen) {
      EXPECT_FALSE(s.gen().regex.has_value()) << s.name;
    }
  });
  EXPECT_NE(rb.prompt_suffix.find("Options for extent: within the thyroid gland | strap muscles"), std::string::npos);
  EXPECT_NE(rb.prompt_suffix.find("Options for t_category: when extent is \"prevertebral fascia or vessels\" -> T4b;"),
            std::string::npos)
      << rb.prompt_suffix;
  EXPECT_EQ(ir::find_step(rb.program.steps, "size_check"), nullptr);
  ASSERT_EQ(rb.notes.size(), 1u);

  auto rt = strip_program(pack.program, Arm::WoRT, "", vocab().get());
  ASSERT_EQ(rt.program.steps.size(), 1u);
  EXPECT_NE(rt.prompt_suffix.find("Step 1: Tumor size (cm): <tumor_size>\nStep 2"), std::string::npos);
  auto van = strip_program(pack.program, Arm::Vanilla, "Give the categories.", vocab().get());
  EXPECT_EQ(van.prompt_suffix, "Give the categories.\n");

  auto branchy = ir::parse_program(
      "scidc-ir v1\nprogram b\nstep x: select options=[\"1\", \"2\"]\nstep br: branch {\n when x > 1 {\n"
      "  step y: emit \"big\"\n }\n}\n");
  try {
    strip_program(branchy, Arm::WoRT);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ArmStripError);
  }
  // The guard compares x numerically; freeing x makes it text.
  try {
    strip_program(branchy, Arm::WoRB);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ArmStripError);
  }
  EXPECT_EQ(parse_arm("wo_rb"), Arm::WoRB);
  EXPECT_THROW(parse_arm("nope"), Error);
}

TEST(RunPack, TnmOracleMockFullExactAndWoRbInvalid) {
  auto pack = build_tnm_pack(1, 60);
  RunPackOptions o;
  o.arms = {Arm::Full, Arm::WoRB, Arm::WoRM};
  auto rep = run_pack(pack, vocab(), oracle_mock_factory(vocab()), o);
  ASSERT_EQ(rep.arms.size(), 3u);
  const auto* full = rep.arm(Arm::Full);
  EXPECT_DOUBLE_EQ(full->validity, 100.0);
  EXPECT_DOUBLE_EQ(*full->accuracy, 100.0);
  EXPECT_EQ(full->validity_by_seed.size(), 3u);
  EXPECT_EQ(full->runs, 180u);
  const auto* rb = rep.arm(Arm::WoRB);
  EXPECT_LT(*std::min_element(rb->validity_by_seed.begin(), rb->validity_by_seed.end()), 100.0);
  for (double v : rb->validity_by_seed) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 100.0);
  }
  auto j = rep.to_json();
  EXPECT_EQ(j["accuracy_metric"], "exact");
  EXPECT_TRUE(j["arms"].contains("wo_rm"));
}

TEST(RunPack, SingleInstanceScriptedExactMatch) {
  auto pack = build_tnm_pack(0, 1);
  pack.instances[0].input = "A 0.8 cm intrathyroidal nodule, no nodes, no metastasis.";
  pack.instances[0].gold = "T1aN0M0";
  pack.instances[0].attributes = {{"tumor_size", "0.8"}, {"extent", "within the thyroid gland"},
                                  {"nodes", "none"},     {"metastasis", "no distant transfer"},
                                  {"t_category", "T1a"}, {"n_category", "N0"},
                                  {"m_category", "M0"}};
  pack.oracle.rate = 0;
  RunPackOptions o;
  o.arms = {Arm::Full};
  o.seeds = {0};
  std::string output;
  o.on_run = [&](const RunRecord& r) { output = r.result.output; };
  auto rep = run_pack(pack, vocab(), oracle_mock_factory(vocab()), o);
  EXPECT_DOUBLE_EQ(*rep.arm(Arm::Full)->accuracy, 100.0) << output;
}

TEST(RunPack, FullArmIsValidUnderRandomBackend) {
  for (const std::string id : {"tnm", "formulation"}) {
    auto pack = id == "tnm" ? build_tnm_pack(2, 40) : build_formulation_pack(2, 40);
    RunPackOptions o;
    o.arms = {Arm::Full};
    std::size_t fallbacks = 0;
    o.on_run = [&](const RunRecord& r) {
      fallbacks += r.result.termination == engine::Termination::FallbackCompleted;
      EXPECT_TRUE(r.validity.valid) << r.result.output << "\n" << text::join(r.validity.violations, "; ");
    };
    auto rep = run_pack(pack, vocab(), noise_mock_factory(vocab()), o);
    EXPECT_DOUBLE_EQ(rep.arm(Arm::Full)->validity, 100.0) << id;
    EXPECT_EQ(rep.arm(Arm::Full)->aborted, 0u);
    if (id == "formulation") {
      EXPECT_GT(fallbacks, 0u);
    }
  }
}

TEST(RunPack, RetroHitAtOneMatchesBruteForceOracle) {
  auto pack = build_retro_pack(9);
  ASSERT_EQ(pack.instances.size(), 201u);
  std::size_t agree = 0;
  for (const auto& inst : pack.instances) {
    auto reach = brute_force_reachable(*inst.attribute("product"));
    agree += *reach.begin() == canonical_reactants(inst.gold);
  }
  const double expected = 100.0 * static_cast<double>(agree) / 201.0;
  EXPECT_GT(agree, 0u);
  EXPECT_LT(agree, 201u);
  RunPackOptions o;
  o.arms = {Arm::Full};
  auto rep = run_pack(pack, vocab(), oracle_mock_factory(vocab()), o);
  for (double v : rep.arm(Arm::Full)->accuracy_by_seed) EXPECT_DOUBLE_EQ(v, expected);
  EXPECT_DOUBLE_EQ(rep.arm(Arm::Full)->validity, 100.0);
}

TEST(RunPack, RejectsInvalidPacks) {
  auto pack = build_tnm_pack(0, 2);
  pack.instances[1].gold = "T9N0M0";
  EXPECT_THROW(run_pack(pack, vocab(), oracle_mock_factory(vocab())), Error);
  pack.instances.clear();
  EXPECT_FALSE(validate_pack(pack).empty());
}
