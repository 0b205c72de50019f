// Regenerates the committed demo vocabulary and the TNM compile fixtures.
// The fixture replies are hand-authored files under data/fixtures/tnm/replies;
// this tool pairs them with the prompts the pipeline renders today.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "scidc/compiler/pipeline.hpp"
#include "scidc/token/vocabulary.hpp"

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

}  // namespace

int main(int argc, char** argv) {
  fs::path root = argc > 1 ? fs::path(argv[1]) : fs::path(SCIDC_DATA_DIR);
  try {
    fs::create_directories(root / "vocab");
    token::make_byte_vocabulary({"Step", "</think>", " category", "within", " the", "distant", " transfer"})
        .save(root / "vocab" / "demo.json");

    const fs::path dir = root / "fixtures" / "tnm";
    const fs::path replies = dir / "replies";
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.path().extension() == ".json") fs::remove(e.path());
    }
    std::vector<std::string> queue = {slurp(replies / "framework.txt"), slurp(replies / "program.txt"),
                                      slurp(replies / "revision.txt")};
    std::size_t next = 0;
    compiler::FunctionGllm scripted([&](const std::string&) { return queue.at(next++); });
    compiler::RecordingGllm rec(scripted, dir);
    auto vocab = token::Vocabulary::load(root / "vocab" / "demo.json");
    auto doc = compiler::KnowledgeDoc::load(root / "knowledge" / "tnm.md");
    auto compiled = compiler::compile_knowledge(doc, slurp(dir / "task.txt"), rec, &vocab);
    compiler::VerificationTranscript transcript;
    auto revised = compiler::apply_expert_feedback(compiled.program, transcript, slurp(dir / "suggestion.txt"), rec,
                                                   &vocab);
    std::cout << "recorded " << next << " exchange(s) in " << dir << "\n";
    std::cout << "revised program has " << revised.steps.size() << " steps\n";
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
  return 0;
}
