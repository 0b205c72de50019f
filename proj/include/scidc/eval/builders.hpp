#pragma once

/**
 * @file builders.hpp
 * @brief Seed-deterministic synthetic task packs.
 *
 * TNM records come from a small template grammar (age, sex, size, local
 * extent, nodal compartment, metastasis) with gold labels from
 * reference_stage, which implements data/knowledge/tnm.md directly.
 * Retrosynthesis products are fragment strings joined by template bonds;
 * each instance carries its own select over the reachable disconnections.
 */

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "scidc/eval/pack.hpp"
#include "scidc/eval/scorers.hpp"
#include "scidc/ir/parser.hpp"

namespace scidc::eval {

#ifdef SCIDC_DATA_DIR
inline const std::filesystem::path kDefaultDataDir = SCIDC_DATA_DIR;
#else
inline const std::filesystem::path kDefaultDataDir = "data";
#endif

inline const std::vector<std::string> kTnmExtents = {"within the thyroid gland", "strap muscles", "adjacent organs",
                                                     "prevertebral fascia or vessels"};
inline const std::vector<std::string> kTnmNodes = {"none", "central compartment", "lateral neck"};
inline const std::vector<std::string> kTnmMetastasis = {"no distant transfer", "distant transfer exists"};
inline const std::vector<std::string> kTCategories = {"T1a", "T1b", "T2", "T3a", "T3b", "T4a", "T4b"};
inline const std::vector<std::string> kNCategories = {"N0", "N1a", "N1b"};
inline const std::vector<std::string> kMCategories = {"M0", "M1"};

struct TnmFacts {
  double size_cm = 1;
  std::string extent = "within the thyroid gland";
  std::string nodes = "none";
  std::string metastasis = "no distant transfer";
};

struct TnmStage {
  std::string t, n, m;
  std::string label() const { return t + n + m; }
};

/// Reference staging function for the bundled rule set.
inline TnmStage reference_stage(const TnmFacts& f) {
  TnmStage s;
  if (f.extent == "prevertebral fascia or vessels") {
    s.t = "T4b";
  } else if (f.extent == "adjacent organs") {
    s.t = "T4a";
  } else if (f.extent == "strap muscles") {
    s.t = "T3b";
  } else if (f.size_cm > 4) {
    s.t = "T3a";
  } else if (f.size_cm > 2) {
    s.t = "T2";
  } else if (f.size_cm > 1) {
    s.t = "T1b";
  } else {
    s.t = "T1a";
  }
  s.n = f.nodes == "lateral neck" ? "N1b" : f.nodes == "central compartment" ? "N1a" : "N0";
  s.m = f.metastasis == "distant transfer exists" ? "M1" : "M0";
  return s;
}

namespace detail {

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string one_decimal(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

template <typename T>
const T& pick(std::mt19937_64& rng, const std::vector<T>& items) {
  return items[std::uniform_int_distribution<std::size_t>(0, items.size() - 1)(rng)];
}

inline std::size_t weighted(std::mt19937_64& rng, const std::vector<double>& w) {
  std::discrete_distribution<std::size_t> d(w.begin(), w.end());
  return d(rng);
}

inline std::string tnm_record(std::mt19937_64& rng, std::size_t id, const TnmFacts& f) {
  static const std::vector<std::vector<std::string>> extent_text = {
      {"The lesion is confined to the thyroid gland.", "No extrathyroidal extension is seen."},
      {"Gross extension into the strap muscles is noted.", "The tumor reaches the strap muscles."},
      {"The tumor invades the trachea.", "Invasion of the esophageal wall is present."},
      {"The mass encases the carotid artery.", "Invasion of the prevertebral fascia is seen."}};
  static const std::vector<std::vector<std::string>> node_text = {
      {"No suspicious lymph nodes are found.", "Regional nodes are unremarkable."},
      {"Enlarged nodes are present in the central compartment (level VI).",
       "Metastatic central compartment nodes are confirmed."},
      {"Metastatic nodes are found in lateral neck levels II to IV.", "Lateral neck node involvement is confirmed."}};
  static const std::vector<std::vector<std::string>> met_text = {
      {"Chest CT shows no distant lesions.", "No distant spread is detected."},
      {"Pulmonary metastases are present.", "Bone scan shows distant metastatic deposits."}};
  auto idx = [](const std::vector<std::string>& v, const std::string& s) {
    return static_cast<std::size_t>(std::find(v.begin(), v.end(), s) - v.begin());
  };
  int age = std::uniform_int_distribution<int>(19, 86)(rng);
  std::string sex = pick(rng, std::vector<std::string>{"woman", "man"});
  std::string lobe = pick(rng, std::vector<std::string>{"left", "right"});
  std::string out = "Record " + std::to_string(id + 1) + ": " + std::to_string(age) + "-year-old " + sex + ". ";
  out += "Ultrasound shows a " + one_decimal(f.size_cm) + " cm nodule in the " + lobe + " lobe. ";
  out += pick(rng, extent_text[idx(kTnmExtents, f.extent)]) + " ";
  out += pick(rng, node_text[idx(kTnmNodes, f.nodes)]) + " ";
  out += pick(rng, met_text[idx(kTnmMetastasis, f.metastasis)]);
  return out;
}

}  // namespace detail

/// 200 synthetic staging records by default; identical for identical seeds.
inline TaskPack build_tnm_pack(std::uint64_t seed, std::size_t count = 200,
                               const std::filesystem::path& data_dir = kDefaultDataDir) {
  TaskPack p;
  p.id = "tnm";
  p.description = "Synthetic thyroid tumor records staged with the bundled rule set (illustrative rules, not clinical guidance).";
  p.prompt_prefix = "Stage the thyroid tumor record below with the bundled rules.\n";
  p.question = "Give the T, N and M categories.";
  p.program = ir::parse_program(detail::read_file(data_dir / "programs" / "tnm.ir"));
  p.scorer.validity.kind = "staging";
  p.scorer.validity.categories = {{"T", kTCategories}, {"N", kNCategories}, {"M", kMCategories}};
  p.scorer.accuracy.kind = "exact";
  p.scorer.accuracy.fields = {"T category: ", "N category: ", "M category: "};
  p.oracle.rate = 0.1;
  p.oracle.alternatives = {{"t_category", kTCategories}, {"n_category", kNCategories}, {"m_category", kMCategories}};
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    TnmFacts f;
    f.size_cm = std::round(std::uniform_real_distribution<double>(0.2, 8.0)(rng) * 10) / 10;
    f.extent = kTnmExtents[detail::weighted(rng, {0.6, 0.15, 0.15, 0.1})];
    f.nodes = kTnmNodes[detail::weighted(rng, {0.5, 0.3, 0.2})];
    f.metastasis = kTnmMetastasis[detail::weighted(rng, {0.85, 0.15})];
    TnmStage st = reference_stage(f);
    Instance inst;
    inst.input = detail::tnm_record(rng, i, f);
    inst.gold = st.label();
    inst.attributes = {{"tumor_size", detail::one_decimal(f.size_cm)},
                       {"extent", f.extent},
                       {"nodes", f.nodes},
                       {"metastasis", f.metastasis},
                       {"t_category", st.t},
                       {"n_category", st.n},
                       {"m_category", st.m}};
    p.instances.push_back(std::move(inst));
  }
  return p;
}

inline const std::vector<Template>& toy_templates() {
  static const std::vector<Template> t = {{"amide", "C(=O)N", "C(=O)O", "N"},
                                          {"ester", "C(=O)O", "C(=O)O", "O"},
                                          {"aryl_coupling", "~", "Br", "B(OH)2"}};
  return t;
}

inline ir::RuleProgram retro_program(const std::string& product, const std::vector<std::string>& candidates) {
  ir::RuleProgram p;
  p.name = "retro_single_step";
  p.steps.push_back(ir::Step{"head", ir::EmitBody{"Product: " + product + "\nProposal 1: "}});
  ir::SelectBody sel;
  sel.options = candidates;
  p.steps.push_back(ir::Step{"proposal", sel});
  p.steps.push_back(ir::Step{"close", ir::EmitBody{"\n"}});
  return p;
}

/// Toy single-step retrosynthesis. Products with one, two or three bonds;
/// gold is the disconnection of the last bond formed. The oracle answer
/// ("proposal") is the lexicographically smallest reachable pair.
inline TaskPack build_retro_pack(std::uint64_t seed, std::size_t count = 201) {
  static const std::vector<std::string> fragments = {"Ph", "Me", "Et", "Py", "Bn", "Cy", "Tol", "Nap", "Th", "Fur"};
  TaskPack p;
  p.id = "retro";
  p.description = "Toy single-step retrosynthesis over string-rewrite templates.";
  p.prompt_prefix = "Propose reactants for the product below.\n";
  p.question = "Give one pair of reactants as 'A + B'.";
  p.scorer.validity.kind = "retrosynthesis";
  p.scorer.validity.templates = toy_templates();
  p.scorer.accuracy.kind = "hit_at_k";
  p.scorer.accuracy.k = 1;
  p.scorer.accuracy.label = "Proposal ";
  p.program = retro_program("X~Y", {"XBr + B(OH)2Y"});
  std::mt19937_64 rng(seed);
  const auto& templates = toy_templates();
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t bonds = 1 + i % 3;
    std::string product = detail::pick(rng, fragments);
    std::string last_left;
    const Template* last = nullptr;
    for (std::size_t b = 0; b < bonds; ++b) {
      last = &detail::pick(rng, templates);
      last_left = product;
      product += last->bond + detail::pick(rng, fragments);
    }
    std::string right = product.substr(last_left.size() + last->bond.size());
    std::string gold = canonical_reactants(last_left + last->left + " + " + last->right + right);
    auto candidates = disconnections(product, templates);
    std::rotate(candidates.begin(), candidates.begin() + static_cast<long>(rng() % candidates.size()),
                candidates.end());
    Instance inst;
    inst.input = "Product: " + product;
    inst.gold = gold;
    inst.attributes = {{"product", product},
                       {"proposal", *std::min_element(candidates.begin(), candidates.end())}};
    inst.program = retro_program(product, candidates);
    p.instances.push_back(std::move(inst));
  }
  return p;
}

/// Formulation requests scored for guideline adherence only.
inline TaskPack build_formulation_pack(std::uint64_t seed, std::size_t count = 50,
                                       const std::filesystem::path& data_dir = kDefaultDataDir) {
  TaskPack p;
  p.id = "formulation";
  p.description = "Adhesive formulation adjustments checked against the bundled guideline.";
  p.prompt_prefix = "Adjust the adhesive formulation below to satisfy the guideline.\n";
  p.question = "Give the binder, plasticizer and curing agent fractions.";
  p.program = ir::parse_program(detail::read_file(data_dir / "programs" / "formulation.ir"));
  auto& v = p.scorer.validity;
  v.kind = "formulation";
  v.fields = {{"binder", "Binder (%): ", 40.0, 80.0},
              {"plasticizer", "Plasticizer (%): ", std::nullopt, 3.0},
              {"curing_agent", "Curing agent (%): ", std::nullopt, std::nullopt}};
  v.sum_fields = {"binder", "plasticizer", "curing_agent"};
  v.sum_max = 100;
  v.ratios = {{"curing_agent", "binder", 0.1, 0.25}};
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    double binder = std::round(std::uniform_real_distribution<double>(30, 90)(rng));
    double plast = std::round(std::uniform_real_distribution<double>(0.5, 4.5)(rng) * 10) / 10;
    double cure = std::round(std::uniform_real_distribution<double>(2, 30)(rng));
    Instance inst;
    inst.input = "Current formula: binder " + detail::one_decimal(binder) + "%, plasticizer " +
                 detail::one_decimal(plast) + "%, curing agent " + detail::one_decimal(cure) + "%.";
    p.instances.push_back(std::move(inst));
  }
  return p;
}

/// Builds a pack by id ("tnm", "retro", "formulation").
inline TaskPack build_pack(const std::string& id, std::uint64_t seed,
                           const std::filesystem::path& data_dir = kDefaultDataDir) {
  if (id == "tnm") return build_tnm_pack(seed, 200, data_dir);
  if (id == "retro") return build_retro_pack(seed);
  if (id == "formulation") return build_formulation_pack(seed, 50, data_dir);
  throw Error(ErrorKind::InvalidArgument, "unknown pack '" + id + "' (expected tnm, retro, formulation)");
}

}  // namespace scidc::eval
