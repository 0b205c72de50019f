#pragma once

/**
 * @file scorers.hpp
 * @brief Pure scorers: validity specs, exact label match, hit@k.
 */

#include <algorithm>
#include <cstdlib>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include "scidc/eval/pack.hpp"

namespace scidc::eval {

struct ValidityResult {
  bool valid = true;
  std::vector<std::string> violations;
};

/// Text after the first occurrence of `label`, up to the end of that line.
inline std::optional<std::string> labelled_value(const std::string& output, const std::string& label) {
  auto at = output.find(label);
  if (at == std::string::npos) return std::nullopt;
  auto start = at + label.size();
  auto end = output.find('\n', start);
  return text::trim(output.substr(start, end == std::string::npos ? std::string::npos : end - start));
}

/// Unordered reactant pair "a + b" in canonical (sorted) form.
inline std::string canonical_reactants(const std::string& proposal) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    auto plus = proposal.find(" + ", start);
    parts.push_back(text::trim(proposal.substr(start, plus == std::string::npos ? std::string::npos : plus - start)));
    if (plus == std::string::npos) break;
    start = plus + 3;
  }
  std::sort(parts.begin(), parts.end());
  return text::join(parts, " + ");
}

/// Every reactant pair some template produces from `product`, in template
/// order then bond position, canonicalized.
inline std::vector<std::string> disconnections(const std::string& product, const std::vector<Template>& templates) {
  std::vector<std::string> out;
  for (const auto& t : templates) {
    if (t.bond.empty()) continue;
    for (auto pos = product.find(t.bond); pos != std::string::npos; pos = product.find(t.bond, pos + 1)) {
      if (pos == 0 || pos + t.bond.size() >= product.size()) continue;
      std::string a = product.substr(0, pos) + t.left;
      std::string b = t.right + product.substr(pos + t.bond.size());
      std::string c = canonical_reactants(a + " + " + b);
      if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
    }
  }
  return out;
}

namespace detail {

inline void score_staging(const std::string& output, const ValiditySpec& spec, ValidityResult& r) {
  static const std::regex candidate(R"(\b([A-Z])([0-9][a-z]?)\b)");
  std::map<std::string, std::vector<std::string>> found;
  for (auto it = std::sregex_iterator(output.begin(), output.end(), candidate); it != std::sregex_iterator(); ++it) {
    std::string letter = (*it)[1].str();
    if (!spec.categories.count(letter)) continue;
    std::string cat = letter + (*it)[2].str();
    const auto& legal = spec.categories.at(letter);
    if (std::find(legal.begin(), legal.end(), cat) == legal.end()) {
      r.violations.push_back("illegal " + letter + " category " + cat);
    }
    found[letter].push_back(cat);
  }
  for (const auto& [letter, legal] : spec.categories) {
    auto n = found[letter].size();
    if (n == 0) r.violations.push_back("no " + letter + " category");
    if (n > 1) r.violations.push_back(std::to_string(n) + " " + letter + " categories (" + text::join(found[letter], ", ") + ")");
  }
}

inline std::optional<double> parse_number(const std::string& s) {
  static const std::regex number(R"(^-?\d+(?:\.\d*)?)");
  std::smatch m;
  if (!std::regex_search(s, m, number)) return std::nullopt;
  return std::strtod(m.str().c_str(), nullptr);
}

inline void score_formulation(const std::string& output, const ValiditySpec& spec, ValidityResult& r) {
  std::map<std::string, double> values;
  for (const auto& f : spec.fields) {
    auto raw = labelled_value(output, f.label);
    if (!raw) {
      r.violations.push_back("missing " + f.name);
      continue;
    }
    auto v = parse_number(*raw);
    if (!v) {
      r.violations.push_back(f.name + " is not a number: '" + *raw + "'");
      continue;
    }
    values[f.name] = *v;
    if (f.min && *v < *f.min) r.violations.push_back(f.name + " below " + ir::detail::format_number(*f.min));
    if (f.max && *v > *f.max) r.violations.push_back(f.name + " above " + ir::detail::format_number(*f.max));
  }
  if (!spec.sum_fields.empty()) {
    double sum = 0;
    bool complete = true;
    for (const auto& n : spec.sum_fields) {
      if (!values.count(n)) complete = false;
      sum += values[n];
    }
    if (complete && sum > spec.sum_max + 1e-9) r.violations.push_back("mass fractions exceed 100");
  }
  for (const auto& ratio : spec.ratios) {
    if (!values.count(ratio.numerator) || !values.count(ratio.denominator)) continue;
    double den = values[ratio.denominator];
    double q = den == 0 ? 1e300 : values[ratio.numerator] / den;
    if (q < ratio.min - 1e-9 || q > ratio.max + 1e-9) {
      r.violations.push_back(ratio.numerator + "/" + ratio.denominator + " ratio out of range");
    }
  }
}

inline void score_retrosynthesis(const std::string& output, const ValiditySpec& spec, const Instance* inst,
                                 ValidityResult& r) {
  const std::string* product = inst ? inst->attribute("product") : nullptr;
  if (!product) {
    r.violations.push_back("instance has no product");
    return;
  }
  auto proposal = labelled_value(output, "Proposal 1: ");
  if (!proposal || proposal->empty()) {
    r.violations.push_back("no proposal");
    return;
  }
  auto reachable = disconnections(*product, spec.templates);
  if (std::find(reachable.begin(), reachable.end(), canonical_reactants(*proposal)) == reachable.end()) {
    r.violations.push_back("no template rewrites " + *proposal + " to " + *product);
  }
}

}  // namespace detail

/// Machine check of guideline adherence; `inst` supplies per-instance
/// context (the product for retrosynthesis).
inline ValidityResult score_validity(const std::string& output, const ValiditySpec& spec,
                                     const Instance* inst = nullptr) {
  ValidityResult r;
  if (spec.kind == "staging") {
    detail::score_staging(output, spec, r);
  } else if (spec.kind == "formulation") {
    detail::score_formulation(output, spec, r);
  } else if (spec.kind == "retrosynthesis") {
    detail::score_retrosynthesis(output, spec, inst, r);
  }
  r.valid = r.violations.empty();
  return r;
}

/// Concatenated labelled fields with whitespace removed.
inline std::string canonical_label(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (!std::isspace(static_cast<unsigned char>(c))) out += c;
  }
  return out;
}

inline std::string extract_label(const std::string& output, const std::vector<std::string>& fields) {
  std::string label;
  for (const auto& f : fields) label += labelled_value(output, f).value_or("");
  return canonical_label(label);
}

inline bool exact_match(const std::string& output, const std::string& gold, const AccuracySpec& spec) {
  return extract_label(output, spec.fields) == canonical_label(gold);
}

/// Proposals in order from "<label><n>: <text>" lines.
inline std::vector<std::string> proposals(const std::string& output, const std::string& label) {
  std::vector<std::pair<int, std::string>> found;
  for (const auto& line : text::split_lines(output)) {
    if (!text::starts_with(line, label)) continue;
    auto colon = line.find(": ", label.size());
    if (colon == std::string::npos) continue;
    std::string num = line.substr(label.size(), colon - label.size());
    if (num.empty() || !std::all_of(num.begin(), num.end(), ::isdigit)) continue;
    found.emplace_back(std::stoi(num), text::trim(line.substr(colon + 2)));
  }
  std::stable_sort(found.begin(), found.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::string> out;
  for (auto& [n, p] : found) out.push_back(std::move(p));
  return out;
}

inline bool hit_at_k(const std::vector<std::string>& ranked, const std::string& gold, int k) {
  const std::string g = canonical_reactants(gold);
  for (int i = 0; i < k && i < static_cast<int>(ranked.size()); ++i) {
    if (canonical_reactants(ranked[static_cast<std::size_t>(i)]) == g) return true;
  }
  return false;
}

/// Percentage of true entries; 0 for an empty list.
inline double percentage(const std::vector<bool>& hits) {
  if (hits.empty()) return 0;
  return 100.0 * static_cast<double>(std::count(hits.begin(), hits.end(), true)) / static_cast<double>(hits.size());
}

}  // namespace scidc::eval
