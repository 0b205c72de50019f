// scidc command-line front end.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "scidc/scidc.hpp"

namespace fs = std::filesystem;
using namespace scidc;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spill(const fs::path& p, const std::string& body) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + p.string());
  out << body;
}

void emit(const std::string& path, const std::string& body) {
  if (path.empty() || path == "-") {
    std::cout << body;
  } else {
    spill(path, body);
  }
}

ir::RuleProgram load_program(const std::string& path) { return ir::parse_program(slurp(path)); }

std::shared_ptr<const token::Vocabulary> load_vocab(const std::string& path) {
  return std::make_shared<const token::Vocabulary>(token::Vocabulary::load(path));
}

struct RemoteFlags {
  std::string endpoint;
  std::string auth_env;
  std::string model = "default";
  double timeout = 30.0;
  int retries = 2;

  void add(CLI::App* app, const std::string& what) {
    app->add_option("--endpoint", endpoint, what + " base URL, e.g. http://127.0.0.1:8080");
    app->add_option("--auth-env", auth_env, "environment variable holding a bearer token");
    app->add_option("--model", model, "model name sent with each request");
    app->add_option("--timeout", timeout, "per-request timeout in seconds");
    app->add_option("--retries", retries, "retries after a transport failure");
  }

  backend::RemoteConfig decoder() const {
    backend::RemoteConfig c;
    c.endpoint = endpoint;
    c.auth_env = auth_env;
    c.model = model;
    c.timeout_s = timeout;
    c.retries = retries;
    return c;
  }

  compiler::GllmConfig gllm() const {
    compiler::GllmConfig c;
    c.endpoint = endpoint;
    c.auth_env = auth_env;
    c.model = model;
    c.timeout_s = timeout;
    c.retries = retries;
    return c;
  }
};

// GLLM selection: replay fixtures when given, else a remote endpoint,
// optionally recording every exchange.
struct GllmFlags {
  std::string fixtures;
  std::string record;
  RemoteFlags remote;

  void add(CLI::App* app) {
    app->add_option("--fixtures", fixtures, "replay recorded replies from this directory");
    app->add_option("--record", record, "record every exchange into this directory");
    remote.add(app, "GLLM server (OpenAI-compatible chat completions)");
  }

  std::unique_ptr<compiler::GllmClient> make(std::unique_ptr<compiler::GllmClient>& inner) const {
    if (!fixtures.empty()) {
      inner = std::make_unique<compiler::FixtureGllm>(fixtures);
    } else if (!remote.endpoint.empty()) {
      inner = std::make_unique<compiler::RemoteGllm>(remote.gllm());
    } else {
      throw Error(ErrorKind::InvalidArgument, "give --fixtures or --endpoint");
    }
    if (record.empty()) return nullptr;
    return std::make_unique<compiler::RecordingGllm>(*inner, record);
  }
};

nlohmann::ordered_json transcript_json(const compiler::VerificationTranscript& t) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& turn : t.turns()) {
    arr.push_back({{"role", turn.kind == compiler::TurnKind::ModelExplanation ? "explanation" : "suggestion"},
                   {"text", turn.text}});
  }
  return {{"turns", arr}};
}

compiler::VerificationTranscript load_transcript(const std::string& path) {
  compiler::VerificationTranscript t;
  if (path.empty() || !fs::exists(path)) return t;
  auto j = nlohmann::json::parse(slurp(path));
  for (const auto& turn : j.at("turns")) {
    const auto role = turn.at("role").get<std::string>();
    if (role == "explanation") {
      t.add_explanation(turn.at("text").get<std::string>());
    } else if (role == "suggestion") {
      t.add_suggestion(turn.at("text").get<std::string>());
    } else {
      throw Error(ErrorKind::InvalidArgument, "unknown transcript role '" + role + "'");
    }
  }
  return t;
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = text::trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"scidc: rule-program constrained decoding"};
  app.require_subcommand(1);
  const std::string default_vocab = std::string(SCIDC_DATA_DIR) + "/vocab/demo.json";
  int exit_code = 0;

  // run
  auto* run = app.add_subcommand("run", "decode a rule program against a backend");
  std::string run_program, run_vocab = default_vocab, run_backend = "mock", run_script, run_prompt, run_prompt_file;
  std::string run_out, run_bindings, run_trace;
  std::uint64_t run_seed = 0;
  bool run_json = false, run_check = false;
  RemoteFlags run_remote;
  run->add_option("program", run_program, "rule program (.ir)")->required();
  run->add_option("--vocab", run_vocab, "vocabulary JSON");
  run->add_option("--backend", run_backend, "mock or remote")->check(CLI::IsMember({"mock", "remote"}));
  run->add_option("--script", run_script, "mock script JSON (default: uniform noise seeded by --seed)");
  run->add_option("--prompt", run_prompt, "prompt text");
  run->add_option("--prompt-file", run_prompt_file, "read the prompt from a file");
  run->add_option("--seed", run_seed, "sampling seed");
  run->add_option("--out", run_out, "write the output text here instead of stdout");
  run->add_option("--bindings", run_bindings, "write the bindings JSON here");
  run->add_option("--trace", run_trace, "write the line-delimited JSON trace here");
  run->add_flag("--json", run_json, "print the full RunResult as JSON");
  run->add_flag("--check", run_check, "re-check the output against the program; exit 1 on violations");
  run_remote.add(run, "decoder server");

  // lint
  auto* lint = app.add_subcommand("lint", "report static problems in a rule program");
  std::string lint_program, lint_vocab;
  lint->add_option("program", lint_program, "rule program (.ir)")->required();
  lint->add_option("--vocab", lint_vocab, "vocabulary JSON for spellability checks");

  // explain
  auto* explain = app.add_subcommand("explain", "describe a rule program in plain sentences");
  std::string explain_program;
  explain->add_option("program", explain_program, "rule program (.ir)")->required();

  // compile
  auto* compile = app.add_subcommand("compile", "compile a knowledge document into a rule program");
  std::string compile_doc, compile_task, compile_out, compile_framework, compile_vocab = default_vocab;
  GllmFlags compile_gllm;
  compile->add_option("--doc", compile_doc, "knowledge document")->required();
  compile->add_option("--task", compile_task, "problem class description")->required();
  compile->add_option("--out", compile_out, "write the program here instead of stdout");
  compile->add_option("--framework-out", compile_framework, "also write the reasoning framework here");
  compile->add_option("--vocab", compile_vocab, "vocabulary JSON used for linting");
  compile_gllm.add(compile);

  // revise
  auto* revise = app.add_subcommand("revise", "apply one expert suggestion to a rule program");
  std::string revise_program, revise_suggestion, revise_out, revise_transcript, revise_vocab = default_vocab;
  GllmFlags revise_gllm;
  revise->add_option("program", revise_program, "rule program (.ir)")->required();
  revise->add_option("--suggestion", revise_suggestion, "expert suggestion (empty keeps the program)")->required();
  revise->add_option("--out", revise_out, "write the revised program here instead of stdout");
  revise->add_option("--transcript", revise_transcript, "verification transcript JSON, read and updated");
  revise->add_option("--vocab", revise_vocab, "vocabulary JSON used for linting");
  revise_gllm.add(revise);

  // eval
  auto* eval = app.add_subcommand("eval", "score ablation arms on a task pack");
  std::string eval_pack, eval_backend = "mock", eval_mock = "oracle", eval_arms = "full,wo_rt,wo_rm,wo_rb,vanilla";
  std::string eval_report, eval_vocab = default_vocab;
  std::size_t eval_seeds = 3;
  std::uint64_t eval_pack_seed = 0;
  RemoteFlags eval_remote;
  eval->add_option("--pack", eval_pack, "pack id (tnm, retro, formulation) or pack JSON file")->required();
  eval->add_option("--backend", eval_backend, "mock or remote")->check(CLI::IsMember({"mock", "remote"}));
  eval->add_option("--mock", eval_mock, "mock flavour: oracle or noise")->check(CLI::IsMember({"oracle", "noise"}));
  eval->add_option("--arms", eval_arms, "comma-separated arms");
  eval->add_option("--seeds", eval_seeds, "number of seeds (0..n-1)")->check(CLI::Range(1, 100));
  eval->add_option("--pack-seed", eval_pack_seed, "seed for built-in pack generation");
  eval->add_option("--report", eval_report, "write the metrics report JSON here instead of stdout");
  eval->add_option("--vocab", eval_vocab, "vocabulary JSON");
  eval_remote.add(eval, "decoder server");

  // pack
  auto* pack = app.add_subcommand("pack", "export a built-in task pack as JSON");
  std::string pack_id, pack_out;
  std::uint64_t pack_seed = 0;
  pack->add_option("id", pack_id, "tnm, retro or formulation")->required();
  pack->add_option("--seed", pack_seed, "generation seed");
  pack->add_option("--out", pack_out, "write here instead of stdout");

  // stub-server
  auto* stub = app.add_subcommand("stub-server", "serve the mock backend over the remote wire protocol");
  std::string stub_host = "127.0.0.1", stub_vocab = default_vocab, stub_script;
  int stub_port = 8080;
  stub->add_option("--host", stub_host, "bind address");
  stub->add_option("--port", stub_port, "port");
  stub->add_option("--vocab", stub_vocab, "vocabulary JSON");
  stub->add_option("--script", stub_script, "mock script JSON (default: uniform noise)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      auto program = load_program(run_program);
      auto vocab = load_vocab(run_vocab);
      std::string prompt = run_prompt_file.empty() ? run_prompt : slurp(run_prompt_file);
      std::unique_ptr<backend::DecoderBackend> be;
      if (run_backend == "remote") {
        be = std::make_unique<backend::RemoteBackend>(run_remote.decoder(), vocab);
      } else {
        backend::MockScript script;
        if (run_script.empty()) {
          script.uniform_noise(run_seed);
        } else {
          script = backend::MockScript::from_json(nlohmann::json::parse(slurp(run_script)));
        }
        be = std::make_unique<backend::MockBackend>(vocab, script);
      }
      engine::EngineOptions opts;
      opts.record_masks = !run_trace.empty() || run_json;
      auto result = engine::run(program, vocab, *be, prompt, run_seed, opts);
      if (run_json) {
        emit(run_out, engine::RunResult::dump(result.to_json(), 2) + "\n");
      } else {
        emit(run_out, result.output);
      }
      if (!run_bindings.empty()) spill(run_bindings, engine::RunResult::dump(result.bindings.to_json(), 2) + "\n");
      if (!run_trace.empty()) spill(run_trace, result.trace_jsonl());
      if (result.termination == engine::Termination::Aborted) {
        std::cerr << "aborted: " << result.abort_reason << "\n";
        exit_code = 1;
      }
      if (run_check) {
        auto report = engine::check_output(program, result);
        for (const auto& v : report.violations) std::cerr << "violation: " << v << "\n";
        if (!report.ok) exit_code = 1;
      }
    } else if (*lint) {
      auto program = load_program(lint_program);
      std::shared_ptr<const token::Vocabulary> vocab;
      if (!lint_vocab.empty()) vocab = load_vocab(lint_vocab);
      auto findings = ir::lint_program(program, vocab.get());
      for (const auto& f : findings) std::cout << ir::format_finding(f) << "\n";
      if (ir::has_errors(findings)) exit_code = 1;
      if (findings.empty()) std::cout << "ok\n";
    } else if (*explain) {
      std::cout << compiler::explain_program(load_program(explain_program));
    } else if (*compile) {
      auto vocab = load_vocab(compile_vocab);
      std::unique_ptr<compiler::GllmClient> inner;
      auto recorder = compile_gllm.make(inner);
      compiler::GllmClient& gllm = recorder ? *recorder : *inner;
      auto r = compiler::compile_knowledge(compiler::KnowledgeDoc::load(compile_doc), compile_task, gllm, vocab.get());
      if (!compile_framework.empty()) spill(compile_framework, compiler::render_framework(r.framework));
      emit(compile_out, ir::serialize_program(r.program));
    } else if (*revise) {
      auto vocab = load_vocab(revise_vocab);
      auto program = load_program(revise_program);
      auto transcript = load_transcript(revise_transcript);
      ir::RuleProgram revised = program;
      if (!text::trim(revise_suggestion).empty()) {
        std::unique_ptr<compiler::GllmClient> inner;
        auto recorder = revise_gllm.make(inner);
        compiler::GllmClient& gllm = recorder ? *recorder : *inner;
        revised = compiler::apply_expert_feedback(program, transcript, revise_suggestion, gllm, vocab.get());
      }
      if (!revise_transcript.empty()) spill(revise_transcript, transcript_json(transcript).dump(2) + "\n");
      emit(revise_out, ir::serialize_program(revised));
    } else if (*eval) {
      auto vocab = load_vocab(eval_vocab);
      eval::TaskPack p = fs::exists(eval_pack) && fs::is_regular_file(eval_pack)
                             ? eval::load_pack(eval_pack)
                             : eval::build_pack(eval_pack, eval_pack_seed);
      eval::RunPackOptions opts;
      opts.arms.clear();
      for (const auto& a : split_commas(eval_arms)) opts.arms.push_back(eval::parse_arm(a));
      opts.seeds.clear();
      for (std::size_t s = 0; s < eval_seeds; ++s) opts.seeds.push_back(s);
      eval::BackendFactory factory;
      if (eval_backend == "remote") {
        auto cfg = eval_remote.decoder();
        factory = [cfg, vocab](const eval::RunContext&) -> std::unique_ptr<backend::DecoderBackend> {
          return std::make_unique<backend::RemoteBackend>(cfg, vocab);
        };
      } else {
        factory = eval_mock == "noise" ? eval::noise_mock_factory(vocab) : eval::oracle_mock_factory(vocab);
      }
      auto report = eval::run_pack(p, vocab, factory, opts);
      emit(eval_report, report.to_json().dump(2) + "\n");
      if (!eval_report.empty()) {
        for (const auto& m : report.arms) {
          std::cout << eval::arm_name(m.arm) << ": validity " << m.validity;
          if (m.accuracy) std::cout << ", " << report.accuracy_metric << " " << *m.accuracy;
          std::cout << "\n";
        }
      }
    } else if (*pack) {
      emit(pack_out, eval::pack_to_json(eval::build_pack(pack_id, pack_seed)).dump(2) + "\n");
    } else if (*stub) {
      auto vocab = load_vocab(stub_vocab);
      backend::MockScript script;
      if (stub_script.empty()) {
        script.uniform_noise(0);
      } else {
        script = backend::MockScript::from_json(nlohmann::json::parse(slurp(stub_script)));
      }
      backend::StubServer server(std::make_shared<backend::MockBackend>(vocab, script), vocab);
      std::cerr << "serving on " << stub_host << ":" << stub_port << "\n";
      server.serve_forever(stub_host, stub_port);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return exit_code;
}
