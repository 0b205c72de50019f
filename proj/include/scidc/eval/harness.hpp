#pragma once

/**
 * @file harness.hpp
 * @brief Pack evaluation across ablation arms and seeds.
 *
 * The oracle-following mock writes the instance's attribute value for each
 * generated span of the arm's program, in execution order. Variables listed
 * in the pack's oracle hints get a seed-dependent sloppy suffix
 * (" (or <other category>)") at the hinted rate; token-level constraints
 * cut it off, free generation keeps it. Single-generation arms receive the
 * whole expected answer text as one span.
 */

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "scidc/backend/mock.hpp"
#include "scidc/engine/engine.hpp"
#include "scidc/eval/arms.hpp"
#include "scidc/eval/pack.hpp"
#include "scidc/eval/scorers.hpp"
#include "scidc/ir/predicate.hpp"

namespace scidc::eval {

struct RunContext {
  const TaskPack& pack;
  std::size_t index;
  const Instance& instance;
  const StrippedArm& arm;
  const ir::RuleProgram& original;
  std::uint64_t seed;
};

using BackendFactory = std::function<std::unique_ptr<backend::DecoderBackend>(const RunContext&)>;

/// Suffix decision and wording for one (seed, instance, variable).
inline std::string sloppy_suffix(const TaskPack& pack, std::uint64_t seed, std::size_t index, const std::string& var,
                                 const std::string& value) {
  auto it = pack.oracle.alternatives.find(var);
  if (it == pack.oracle.alternatives.end() || it->second.empty() || pack.oracle.rate <= 0) return {};
  std::uint64_t h = text::splitmix64(seed ^ text::fnv1a(var) ^ (0x9e3779b97f4a7c15ULL * (index + 1)));
  if (static_cast<double>(h % 1000000) >= pack.oracle.rate * 1e6) return {};
  const auto& alts = it->second;
  std::size_t pick = (h >> 20) % alts.size();
  if (alts[pick] == value) pick = (pick + 1) % alts.size();
  if (alts[pick] == value) return {};
  return " (or " + alts[pick] + ")";
}

namespace detail {

inline std::string oracle_value(const RunContext& ctx, const std::string& var) {
  const std::string* v = ctx.instance.attribute(var);
  if (!v) return {};
  return *v + sloppy_suffix(ctx.pack, ctx.seed, ctx.index, var, *v);
}

inline void oracle_walk(const std::vector<ir::Step>& steps, const RunContext& ctx,
                        std::map<std::string, std::string>& bound, std::vector<std::string>& spans,
                        std::string& text) {
  for (const auto& s : steps) {
    switch (s.kind()) {
      case ir::StepKind::EmitFixed: text += s.emit().text; break;
      case ir::StepKind::Gen:
      case ir::StepKind::Select: {
        std::string v = oracle_value(ctx, s.name);
        spans.push_back(v);
        text += v;
        if (const auto* clean = ctx.instance.attribute(s.name)) bound[s.name] = *clean;
        break;
      }
      case ir::StepKind::Branch: {
        const auto& b = s.branch();
        const std::vector<ir::Step>* chosen = b.otherwise ? &*b.otherwise : nullptr;
        for (const auto& arm : b.arms) {
          bool hit = false;
          try {
            hit = ir::evaluate_bool(arm.guard, ir::lookup_in(bound));
          } catch (const Error&) {
          }
          if (hit) {
            chosen = &arm.steps;
            break;
          }
        }
        if (chosen) oracle_walk(*chosen, ctx, bound, spans, text);
        break;
      }
      case ir::StepKind::ValidateLoop: break;
    }
  }
}

}  // namespace detail

/// Mock script for one run; falls back to seeded noise when the instance
/// has no attributes to follow.
inline backend::MockScript oracle_script(const RunContext& ctx) {
  backend::MockScript script;
  if (ctx.instance.attributes.empty()) {
    script.uniform_noise(text::splitmix64(ctx.seed * 1000003ULL + ctx.index));
    return script;
  }
  std::map<std::string, std::string> bound;
  std::vector<std::string> spans;
  std::string text;
  const bool single = ctx.arm.arm == Arm::WoRT || ctx.arm.arm == Arm::Vanilla;
  detail::oracle_walk(single ? ctx.original.steps : ctx.arm.program.steps, ctx, bound, spans, text);
  if (single) {
    script.prefer_text(text);
  } else {
    for (const auto& s : spans) script.prefer_text(s);
  }
  return script;
}

inline BackendFactory oracle_mock_factory(std::shared_ptr<const token::Vocabulary> vocab) {
  return [vocab](const RunContext& ctx) -> std::unique_ptr<backend::DecoderBackend> {
    return std::make_unique<backend::MockBackend>(vocab, oracle_script(ctx));
  };
}

/// Uniformly random scores, seeded per run.
inline BackendFactory noise_mock_factory(std::shared_ptr<const token::Vocabulary> vocab) {
  return [vocab](const RunContext& ctx) -> std::unique_ptr<backend::DecoderBackend> {
    backend::MockScript s;
    s.uniform_noise(text::splitmix64(ctx.seed * 1000003ULL + ctx.index));
    return std::make_unique<backend::MockBackend>(vocab, s);
  };
}

struct ArmMetrics {
  Arm arm = Arm::Full;
  std::vector<double> validity_by_seed;
  std::vector<double> accuracy_by_seed;
  double validity = 0;
  std::optional<double> accuracy;
  double mean_regenerations = 0;
  double mean_output_tokens = 0;
  double mean_discarded_tokens = 0;
  std::size_t runs = 0;
  std::size_t aborted = 0;
  std::vector<std::string> notes;
};

struct MetricsReport {
  std::string pack;
  std::vector<std::uint64_t> seeds;
  std::string accuracy_metric;  // "exact", "hit@k", or empty
  std::vector<ArmMetrics> arms;

  const ArmMetrics* arm(Arm a) const {
    for (const auto& m : arms) {
      if (m.arm == a) return &m;
    }
    return nullptr;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["pack"] = pack;
    j["seeds"] = seeds;
    j["accuracy_metric"] = accuracy_metric.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(accuracy_metric);
    j["arms"] = nlohmann::ordered_json::object();
    for (const auto& m : arms) {
      nlohmann::ordered_json a;
      a["validity"] = m.validity;
      a["accuracy"] = m.accuracy ? nlohmann::ordered_json(*m.accuracy) : nlohmann::ordered_json(nullptr);
      a["validity_by_seed"] = m.validity_by_seed;
      a["accuracy_by_seed"] = m.accuracy_by_seed;
      a["mean_regenerations"] = m.mean_regenerations;
      a["mean_output_tokens"] = m.mean_output_tokens;
      a["mean_discarded_tokens"] = m.mean_discarded_tokens;
      a["runs"] = m.runs;
      a["aborted"] = m.aborted;
      a["notes"] = m.notes;
      j["arms"][arm_name(m.arm)] = a;
    }
    return j;
  }
};

struct RunRecord {
  Arm arm;
  std::uint64_t seed;
  std::size_t index;
  const engine::RunResult& result;
  const ValidityResult& validity;
  std::optional<bool> correct;
};

struct RunPackOptions {
  std::vector<Arm> arms = all_arms();
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  std::function<void(const RunRecord&)> on_run;
};

/// Problems with a pack: empty, lint errors, gold outside the label space.
inline std::vector<std::string> validate_pack(const TaskPack& pack, const token::Vocabulary* vocab = nullptr) {
  std::vector<std::string> out;
  if (pack.instances.empty()) out.push_back("pack has no instances");
  auto lint = [&](const ir::RuleProgram& p, const std::string& where) {
    for (const auto& f : ir::lint_program(p, vocab)) {
      if (f.severity == ir::Severity::Error) out.push_back(where + ": " + ir::format_finding(f));
    }
  };
  lint(pack.program, "program");
  const auto& v = pack.scorer.validity;
  for (std::size_t i = 0; i < pack.instances.size(); ++i) {
    const auto& inst = pack.instances[i];
    const std::string where = "instance " + std::to_string(i);
    if (inst.program) lint(*inst.program, where);
    if (pack.scorer.accuracy.kind != "none" && inst.gold.empty()) out.push_back(where + " has no gold label");
    if (inst.gold.empty()) continue;
    if (v.kind == "staging") {
      std::string spaced;
      for (std::size_t k = 0; k < inst.gold.size(); ++k) {
        if (k > 0 && std::isupper(static_cast<unsigned char>(inst.gold[k]))) spaced += ' ';
        spaced += inst.gold[k];
      }
      if (!score_validity(spaced, v).valid) out.push_back(where + " gold '" + inst.gold + "' is not a legal triple");
    } else if (v.kind == "retrosynthesis") {
      const std::string* product = inst.attribute("product");
      auto reach = product ? disconnections(*product, v.templates) : std::vector<std::string>{};
      if (std::find(reach.begin(), reach.end(), canonical_reactants(inst.gold)) == reach.end()) {
        out.push_back(where + " gold is not reachable by any template");
      }
    }
  }
  return out;
}

/// One engine run per instance, arm and seed; metrics averaged over seeds.
inline MetricsReport run_pack(const TaskPack& pack, std::shared_ptr<const token::Vocabulary> vocab,
                              const BackendFactory& factory, const RunPackOptions& options = {}) {
  if (auto problems = validate_pack(pack, vocab.get()); !problems.empty()) {
    throw Error(ErrorKind::InvalidArgument, "invalid pack: " + text::join(problems, "; "));
  }
  if (options.seeds.empty()) throw Error(ErrorKind::InvalidArgument, "at least one seed is required");
  MetricsReport report;
  report.pack = pack.id;
  report.seeds = options.seeds;
  const auto& acc = pack.scorer.accuracy;
  if (acc.kind == "exact") report.accuracy_metric = "exact";
  if (acc.kind == "hit_at_k") report.accuracy_metric = "hit@" + std::to_string(acc.k);

  engine::EngineOptions eopts;
  eopts.abort_on_error = true;
  eopts.record_masks = false;

  for (Arm arm : options.arms) {
    ArmMetrics m;
    m.arm = arm;
    StrippedArm shared = strip_program(pack.program, arm, pack.question, vocab.get());
    m.notes = shared.notes;
    engine::Engine shared_engine(shared.program, vocab, eopts);
    double regen = 0, out_tokens = 0, discarded = 0;
    for (std::uint64_t seed : options.seeds) {
      std::vector<bool> valid, correct;
      for (std::size_t i = 0; i < pack.instances.size(); ++i) {
        const Instance& inst = pack.instances[i];
        std::optional<StrippedArm> own;
        std::optional<engine::Engine> own_engine;
        if (inst.program) {
          own = strip_program(*inst.program, arm, pack.question, vocab.get());
          own_engine.emplace(own->program, vocab, eopts);
        }
        const StrippedArm& sa = own ? *own : shared;
        engine::Engine& eng = own_engine ? *own_engine : shared_engine;
        RunContext ctx{pack, i, inst, sa, pack.program_for(inst), seed};
        auto backend = factory(ctx);
        const std::string prompt = pack.prompt_prefix + inst.input + "\n" + sa.prompt_suffix;
        engine::RunResult r = eng.run(*backend, prompt, seed);
        ValidityResult vr = r.termination == engine::Termination::Aborted
                                ? ValidityResult{false, {"run aborted: " + r.abort_reason}}
                                : score_validity(r.output, pack.scorer.validity, &inst);
        valid.push_back(vr.valid);
        std::optional<bool> ok;
        if (acc.kind == "exact") ok = exact_match(r.output, inst.gold, acc);
        if (acc.kind == "hit_at_k") ok = hit_at_k(proposals(r.output, acc.label), inst.gold, acc.k);
        if (ok) correct.push_back(*ok);
        m.runs += 1;
        m.aborted += r.termination == engine::Termination::Aborted;
        regen += static_cast<double>(r.trace.counters.regenerations);
        out_tokens += static_cast<double>(r.trace.counters.output);
        discarded += static_cast<double>(r.trace.counters.discarded);
        if (options.on_run) options.on_run(RunRecord{arm, seed, i, r, vr, ok});
      }
      m.validity_by_seed.push_back(percentage(valid));
      if (!report.accuracy_metric.empty()) m.accuracy_by_seed.push_back(percentage(correct));
    }
    auto mean = [](const std::vector<double>& v) {
      double s = 0;
      for (double x : v) s += x;
      return v.empty() ? 0.0 : s / static_cast<double>(v.size());
    };
    m.validity = mean(m.validity_by_seed);
    if (!report.accuracy_metric.empty()) m.accuracy = mean(m.accuracy_by_seed);
    const double n = static_cast<double>(m.runs);
    m.mean_regenerations = regen / n;
    m.mean_output_tokens = out_tokens / n;
    m.mean_discarded_tokens = discarded / n;
    report.arms.push_back(std::move(m));
  }
  return report;
}

}  // namespace scidc::eval
