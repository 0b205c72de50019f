#pragma once

/**
 * @file pack.hpp
 * @brief Task packs: instances, the rule program, and the scorer spec.
 *
 * JSON container ("scidc-pack v1"):
 *
 *   {
 *     "format": "scidc-pack v1",
 *     "id": "tnm",
 *     "description": "...",
 *     "prompt_prefix": "text placed before each instance input",
 *     "question": "task question used by the unconstrained arm",
 *     "program": "<scidc-ir v1 source>",
 *     "scorer": {"validity": {"kind": ...}, "accuracy": {"kind": ...}},
 *     "oracle": {"rate": 0.1, "alternatives": {"var": ["..."]}},
 *     "instances": [
 *       {"input": "...", "gold": "...", "attributes": {"var": "value"}, "program": "<optional override>"}
 *     ]
 *   }
 *
 * Validity kinds: "staging" {categories: {T: [...], N: [...], M: [...]}},
 * "formulation" {fields, sum, ratios}, "retrosynthesis" {templates},
 * "none". Accuracy kinds: "exact" {fields}, "hit_at_k" {k, label}, "none".
 */

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "scidc/common.hpp"
#include "scidc/ir/parser.hpp"
#include "scidc/ir/serializer.hpp"

namespace scidc::eval {

struct Instance {
  std::string input;
  std::string gold;
  std::map<std::string, std::string> attributes;
  std::optional<ir::RuleProgram> program;

  const std::string* attribute(const std::string& key) const {
    auto it = attributes.find(key);
    return it == attributes.end() ? nullptr : &it->second;
  }
};

struct FieldRange {
  std::string name;
  std::string label;
  std::optional<double> min;
  std::optional<double> max;
};

struct RatioRange {
  std::string numerator;
  std::string denominator;
  double min = 0;
  double max = 0;
};

struct Template {
  std::string name;
  std::string bond;   // product = A + bond + B
  std::string left;   // reactant A + left
  std::string right;  // reactant right + B
};

struct ValiditySpec {
  std::string kind = "none";
  std::map<std::string, std::vector<std::string>> categories;  // staging
  std::vector<FieldRange> fields;                               // formulation
  std::vector<std::string> sum_fields;
  double sum_max = 100;
  std::vector<RatioRange> ratios;
  std::vector<Template> templates;  // retrosynthesis
};

struct AccuracySpec {
  std::string kind = "none";        // exact | hit_at_k | none
  std::vector<std::string> fields;  // exact: labelled fields concatenated into the label
  int k = 1;                        // hit_at_k
  std::string label = "Proposal ";  // hit_at_k: "<label><n>: <proposal>" lines
};

struct ScorerSpec {
  ValiditySpec validity;
  AccuracySpec accuracy;
};

struct OracleHints {
  double rate = 0;  // chance that a listed variable gets a sloppy suffix
  std::map<std::string, std::vector<std::string>> alternatives;
};

struct TaskPack {
  std::string id;
  std::string description;
  std::string prompt_prefix;
  std::string question;
  ir::RuleProgram program;
  ScorerSpec scorer;
  OracleHints oracle;
  std::vector<Instance> instances;

  const ir::RuleProgram& program_for(const Instance& inst) const { return inst.program ? *inst.program : program; }
};

inline nlohmann::ordered_json validity_to_json(const ValiditySpec& v) {
  nlohmann::ordered_json j;
  j["kind"] = v.kind;
  if (v.kind == "staging") {
    j["categories"] = nlohmann::ordered_json::object();
    for (const auto& [k, list] : v.categories) j["categories"][k] = list;
  } else if (v.kind == "formulation") {
    j["fields"] = nlohmann::ordered_json::array();
    for (const auto& f : v.fields) {
      nlohmann::ordered_json fj = {{"name", f.name}, {"label", f.label}};
      if (f.min) fj["min"] = *f.min;
      if (f.max) fj["max"] = *f.max;
      j["fields"].push_back(fj);
    }
    j["sum"] = {{"fields", v.sum_fields}, {"max", v.sum_max}};
    j["ratios"] = nlohmann::ordered_json::array();
    for (const auto& r : v.ratios) {
      j["ratios"].push_back({{"numerator", r.numerator}, {"denominator", r.denominator}, {"min", r.min}, {"max", r.max}});
    }
  } else if (v.kind == "retrosynthesis") {
    j["templates"] = nlohmann::ordered_json::array();
    for (const auto& t : v.templates) {
      j["templates"].push_back({{"name", t.name}, {"bond", t.bond}, {"left", t.left}, {"right", t.right}});
    }
  }
  return j;
}

inline ValiditySpec validity_from_json(const nlohmann::json& j) {
  ValiditySpec v;
  v.kind = j.value("kind", "none");
  if (v.kind == "staging") {
    for (const auto& [k, list] : j.at("categories").items()) v.categories[k] = list.get<std::vector<std::string>>();
  } else if (v.kind == "formulation") {
    for (const auto& f : j.at("fields")) {
      FieldRange r{f.at("name").get<std::string>(), f.at("label").get<std::string>(), std::nullopt, std::nullopt};
      if (f.contains("min")) r.min = f["min"].get<double>();
      if (f.contains("max")) r.max = f["max"].get<double>();
      v.fields.push_back(r);
    }
    if (j.contains("sum")) {
      v.sum_fields = j["sum"].at("fields").get<std::vector<std::string>>();
      v.sum_max = j["sum"].value("max", 100.0);
    }
    if (j.contains("ratios")) {
      for (const auto& r : j["ratios"]) {
        v.ratios.push_back({r.at("numerator").get<std::string>(), r.at("denominator").get<std::string>(),
                            r.at("min").get<double>(), r.at("max").get<double>()});
      }
    }
  } else if (v.kind == "retrosynthesis") {
    for (const auto& t : j.at("templates")) {
      v.templates.push_back({t.at("name").get<std::string>(), t.at("bond").get<std::string>(),
                             t.at("left").get<std::string>(), t.at("right").get<std::string>()});
    }
  } else if (v.kind != "none") {
    throw Error(ErrorKind::InvalidArgument, "unknown validity kind '" + v.kind + "'");
  }
  return v;
}

inline nlohmann::ordered_json accuracy_to_json(const AccuracySpec& a) {
  nlohmann::ordered_json j;
  j["kind"] = a.kind;
  if (a.kind == "exact") j["fields"] = a.fields;
  if (a.kind == "hit_at_k") {
    j["k"] = a.k;
    j["label"] = a.label;
  }
  return j;
}

inline AccuracySpec accuracy_from_json(const nlohmann::json& j) {
  AccuracySpec a;
  a.kind = j.value("kind", "none");
  if (a.kind == "exact") {
    a.fields = j.at("fields").get<std::vector<std::string>>();
  } else if (a.kind == "hit_at_k") {
    a.k = j.value("k", 1);
    a.label = j.value("label", std::string("Proposal "));
    if (a.k < 1) throw Error(ErrorKind::InvalidArgument, "hit_at_k needs k >= 1");
  } else if (a.kind != "none") {
    throw Error(ErrorKind::InvalidArgument, "unknown accuracy kind '" + a.kind + "'");
  }
  return a;
}

inline nlohmann::ordered_json pack_to_json(const TaskPack& p) {
  nlohmann::ordered_json j;
  j["format"] = "scidc-pack v1";
  j["id"] = p.id;
  j["description"] = p.description;
  j["prompt_prefix"] = p.prompt_prefix;
  j["question"] = p.question;
  j["program"] = ir::serialize_program(p.program);
  j["scorer"] = {{"validity", validity_to_json(p.scorer.validity)}, {"accuracy", accuracy_to_json(p.scorer.accuracy)}};
  nlohmann::ordered_json oracle;
  oracle["rate"] = p.oracle.rate;
  oracle["alternatives"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : p.oracle.alternatives) oracle["alternatives"][k] = v;
  j["oracle"] = oracle;
  j["instances"] = nlohmann::ordered_json::array();
  for (const auto& inst : p.instances) {
    nlohmann::ordered_json ij;
    ij["input"] = inst.input;
    ij["gold"] = inst.gold;
    ij["attributes"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : inst.attributes) ij["attributes"][k] = v;
    if (inst.program) ij["program"] = ir::serialize_program(*inst.program);
    j["instances"].push_back(ij);
  }
  return j;
}

inline TaskPack pack_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "scidc-pack v1") {
    throw Error(ErrorKind::InvalidArgument, "not a scidc-pack v1 container");
  }
  TaskPack p;
  p.id = j.at("id").get<std::string>();
  p.description = j.value("description", "");
  p.prompt_prefix = j.value("prompt_prefix", "");
  p.question = j.value("question", "");
  p.program = ir::parse_program(j.at("program").get<std::string>());
  const auto& s = j.at("scorer");
  p.scorer.validity = validity_from_json(s.at("validity"));
  p.scorer.accuracy = accuracy_from_json(s.at("accuracy"));
  if (j.contains("oracle")) {
    p.oracle.rate = j["oracle"].value("rate", 0.0);
    if (j["oracle"].contains("alternatives")) {
      for (const auto& [k, v] : j["oracle"]["alternatives"].items()) {
        p.oracle.alternatives[k] = v.get<std::vector<std::string>>();
      }
    }
  }
  for (const auto& ij : j.at("instances")) {
    Instance inst;
    inst.input = ij.at("input").get<std::string>();
    inst.gold = ij.value("gold", "");
    if (ij.contains("attributes")) {
      for (const auto& [k, v] : ij["attributes"].items()) inst.attributes[k] = v.get<std::string>();
    }
    if (ij.contains("program")) inst.program = ir::parse_program(ij["program"].get<std::string>());
    p.instances.push_back(std::move(inst));
  }
  return p;
}

inline TaskPack load_pack(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot read pack " + path.string());
  try {
    return pack_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, path.string() + ": " + e.what());
  }
}

inline void save_pack(const TaskPack& p, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out << pack_to_json(p).dump(1) << "\n";
}

}  // namespace scidc::eval
