#pragma once

/**
 * @file prompts.hpp
 * @brief Prompt templates for the two compilation stages, the repair
 * re-ask, and expert revision. Rendering is plain substitution of the
 * trailing input fields; braces inside the templates are literal.
 */

#include <string>
#include <vector>

#include "scidc/common.hpp"

namespace scidc::compiler {

inline constexpr const char* kDecompositionTemplate =
    R"(# Role Definition
You design reasoning frameworks. Read the knowledge document [DOC] and the problem-class description [Q], then write a Chain-of-Thought framework that every instance of that class can follow.
The framework is instance-independent. It names:
- the items to read off each instance,
- the intermediate conclusions to derive and the earlier items each one uses,
- the rule that turns those items and conclusions into the final answer.

# Input Format
[DOC]: rules, thresholds and background the answer has to respect.
[Q]: the kind of problem to be solved, described in general terms rather than as one case.

# Framework Step Specification
Each step has exactly one of the three types below.
Type 1 · Information Extraction Step (Extract)
- Give every extracted item a VAR_ name (for example VAR_Dose, VAR_Stage).
- State its meaning and its value domain.
- State where it comes from: fixed in [DOC], or varying with the instance.
- Format:
  [Extract] Variable: <VAR_xxx>
  Meaning: <what this variable represents>
  Source: <Document / Problem Instance>
  Domain/Type: <enumeration | numeric range | boolean | text | etc.>
Type 2 · Intermediate Judgment Step (Judge)
- Give the derived conclusion a MID_ name.
- Write its decision rule as a condition, mapping or comparison.
- List its inputs. Inputs are VAR_ or MID_ names introduced by earlier steps.
- Format:
  [Judge] Intermediate Conclusion: <MID_xxx>
  Inference Logic: <if VAR_xx meets condition -> Outcome A; otherwise -> Outcome B>
  Depends On: <VAR_xxx, MID_xxx, ...>
Type 3 · Final Conclusion Step (Conclude)
- There is exactly one, and it comes last.
- List every VAR_ and MID_ name it combines and say how they combine.
- Give the shape of the answer (label, number, yes/no, short text).
- Say what to answer when the document does not cover the case.
- Format:
  [Conclude] Final Answer: <ANS_xxx>
  Synthesis Logic: <how the MID_ and VAR_ values combine into the answer>
  Depends On: <VAR_xxx, MID_xxx, ...>
  Answer Form: <type and format of the answer>
  Fallback Rule: <what to answer when information is missing or not covered>

# Output Format
## Problem Class Understanding
<two or three sentences: the input, the goal, and the hard part>
## Reasoning Framework
Step 1: [Extract] ...
Step 2: [Extract] ...
Step 3: [Judge] ...
...
Step N: [Conclude] ...

)";

inline constexpr const char* kProgramTemplate =
    R"(# Role Definition
You write rule programs in the scidc-ir v1 language. A small language model is decoded under such a program: fixed text is written verbatim, answers are restricted to option lists or patterns, and validation steps send decoding back when a joint constraint fails. Using the domain knowledge [DOMAIN], the domain question [Q] and the ordered Chain-of-Thought [CoT], write one program that walks the model through every step of [CoT].

# Input Format
[DOMAIN]: allowed categories, numeric ranges and the dependency rules between variables.
[Q]: the domain question or problem instance.
[CoT]: the ordered reasoning steps that lead to the answer.

# Code Block Specification
Translate each step of [CoT] into exactly one of the block types below.
Block Type 1 · Reasoning Step (Step Block)
- Format:
  # Step {i}: {step_description}
  step s{i}_q: emit "<|im_start|>user\nStep {i} Question: {question}? Candidates: {candidates}<|im_end|>\n"
  step s{i}_a: emit "<|im_start|>assistant\nStep {i} Analysis: <think>Now I need to answer the question: {question}"
  step analysis_{i}: gen stop="</think>" temperature=0 max_tokens=256
  step s{i}_ans: emit "Step {i} Answer: "
  step answer_{i}: select options=["...", "..."]    # or: gen regex="..." max_tokens=...
  step s{i}_end: emit "<|im_end|>\n"
Block Type 2 · Dynamic Dependency Block
- Format:
  step answer_{i}: select dynamic {
    when answer_{j} == "X" -> ["A", "B"];
    when answer_{j} == "Y" -> ["C", "D"];
    else -> ["E"];
  }
Block Type 3 · Cyclic Validation Block
- Format:
  step check_{i}: validate pred={combined_constraint} max_retries=5 anchor=s{a}_ans retry="[Retry {retry}] Previous attempt failed: answer_{i}={answer_{i}} violated {constraint_desc} (upstream: answer_{a}={answer_{a}}, answer_{b}={answer_{b}}). Adjustment needed.\n" fallback {
    answer_{a} = "{first_valid_option_of_a}";
    answer_{b} = "{first_valid_option_of_b}";
    answer_{i} = "{first_valid_option_of_global_given_fallbacks}";
  }
- Use MAX_RETRIES = 5 (max_retries=5) unless [DOMAIN] calls for another bound.
- The anchor is the first step to run again after a failed check. Every answer produced between the anchor and the check needs a fallback value that satisfies the check.

# Output Format
Reply with one fenced code block holding the whole program:
  scidc-ir v1
  program <name>
  meta conclude = "<comma-separated final answer variables>"
  step ...
Step names are identifiers and are unique. A gen needs max_tokens and a regex, a stop string, or both. Predicates use and, or, not, comparisons (== != < <= > >=), + - * /, parentheses and `x in ["a", "b"]`. Retry text may refer to {retry} and to any bound variable by {name}.

)";

inline constexpr const char* kRepairHeading = "# Repair Request\n";

inline std::string decomposition_prompt(const std::string& domain_doc, const std::string& user_prompt) {
  return std::string(kDecompositionTemplate) + "Knowledge Document [DOC]: " + domain_doc +
         "\nProblem Class [Q]: " + user_prompt + "\n";
}

inline std::string program_prompt(const std::string& domain_knowledge, const std::string& domain_question,
                                  const std::string& chain_of_thought) {
  return std::string(kProgramTemplate) + "Domain Knowledge [DOMAIN]: " + domain_knowledge +
         "\nDomain Question [Q]: " + domain_question + "\nChain of Thought [CoT]: " + chain_of_thought + "\n";
}

/// Original prompt plus the rejected reply and the problems found in it.
inline std::string repair_prompt(const std::string& original, const std::string& reply,
                                 const std::vector<std::string>& problems, const std::string& what) {
  std::string out = original + "\n" + kRepairHeading + "Your previous reply:\n" + reply + "\nProblems found:\n";
  for (const auto& p : problems) out += "- " + p + "\n";
  out += "Reply again with the corrected " + what + " only.\n";
  return out;
}

inline std::string revision_prompt(const std::string& program_text, const std::string& explanation,
                                   const std::string& suggestion) {
  return "# Role Definition\n"
         "You maintain scidc-ir v1 rule programs. A domain expert has read the explanation of the program below "
         "and asks for a change. Apply the change and keep everything else as it is.\n\n"
         "# Current Program\n```\n" +
         program_text + "```\n\n# Program Explanation\n" + explanation + "\n\n# Expert Suggestion\n" + suggestion +
         "\n\n# Output Format\nReply with one fenced code block holding the complete revised program, starting "
         "with the line \"scidc-ir v1\". Keep every step that binds a final answer variable.\n";
}

}  // namespace scidc::compiler
