#include <algorithm>
#include <cctype>

#include "jpo/error.hpp"
#include "jpo/judge.hpp"

namespace jpo::judge {

namespace {

constexpr std::string_view kPreamble =
    R"tmpl(You are a helpful following assistant whose goal is to select the preferred output for a given instruction.
Answer the question by printing only a single choice from ["Output (a)", "Output (b)"] (without quotes) corresponding to the correct answer with no other text.

#### Annotation Guideline

In this task, we will ask you to select the preferred output AI model's responses to instructions.

You will read examples, which are composed of the following:

)tmpl";

constexpr std::string_view kConditionalItems =
    R"tmpl(1. an Instruction we give to the AI system
2. Output (a), the first output from the AI system
3. Output (b), the second output from the AI system

)tmpl";

constexpr std::string_view kJointItems =
    R"tmpl(1. Instruction (a), the first input to the AI system and Output (a), the first output from the AI system
2. Instruction (b), the second input to the AI system and Output (b), the second output from the AI system

)tmpl";

constexpr std::string_view kCriteria =
    R"tmpl(Your task is to decide which response is better for each example. There are several dimensions that you can think along. Consider the following dimensions:

Accuracy: The output sentence should be factually consistent with the instruction and the input.
Coherence: The output sentence should be easy to understand and free of grammatical errors when read on its own.
Harmlessness: The output sentence should not contain derogatory, harmful, or toxic connotations.

You should answer using only Output (a) or Output (b) depending on which response is better.

)tmpl";

constexpr std::string_view kConditionalSlots =
    "### Instruction:\n${instruction}\n\n"
    "### Output (a):\n${output_1}\n\n"
    "### Output (b):\n${output_2}\n\n"
    "## Preferred Output:\n";

constexpr std::string_view kJointSlots =
    "### Instruction (a):\n${instruction_1}\n\n"
    "### Output (a):\n${output_1}\n\n"
    "### Instruction (b):\n${instruction_2}\n\n"
    "### Output (b):\n${output_2}\n\n"
    "## Preferred Output:\n";

constexpr std::string_view kTail = "\n\n## Preferred Output:\n";

// Single left-to-right pass, so placeholder-like text inside a value is
// never expanded again.
std::string substitute(std::string_view tmpl,
                       std::initializer_list<std::pair<std::string_view, std::string_view>> values) {
  std::string out;
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl.compare(i, 2, "${") == 0) {
      const std::size_t close = tmpl.find('}', i);
      const std::string_view name = tmpl.substr(i + 2, close - i - 2);
      for (const auto& [k, v] : values) {
        if (k == name) out += v;
      }
      i = close + 1;
    } else {
      out += tmpl[i++];
    }
  }
  return out;
}

void require(std::string_view value, std::string_view field) {
  if (value.empty()) throw Error(Errc::EmptyField, std::string(field) + " is empty");
}

// Text between `start` (exclusive) and the next occurrence of `stop`.
std::optional<std::string> slot(std::string_view prompt, std::size_t& pos, std::string_view start,
                                std::string_view stop) {
  const std::size_t a = prompt.find(start, pos);
  if (a == std::string_view::npos) return std::nullopt;
  const std::size_t begin = a + start.size();
  const std::size_t b = prompt.find(stop, begin);
  if (b == std::string_view::npos) return std::nullopt;
  pos = b;
  return std::string(prompt.substr(begin, b - begin));
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

std::string render_conditional_prompt(std::string_view instruction, std::string_view output_a,
                                      std::string_view output_b) {
  require(instruction, "instruction");
  require(output_a, "output_a");
  require(output_b, "output_b");
  std::string out(kPreamble);
  out += kConditionalItems;
  out += kCriteria;
  out += substitute(kConditionalSlots,
                    {{"instruction", instruction}, {"output_1", output_a}, {"output_2", output_b}});
  return out;
}

std::string render_joint_prompt(std::string_view instruction_a, std::string_view output_a,
                                std::string_view instruction_b, std::string_view output_b) {
  require(instruction_a, "instruction_a");
  require(output_a, "output_a");
  require(instruction_b, "instruction_b");
  require(output_b, "output_b");
  std::string out(kPreamble);
  out += kJointItems;
  out += kCriteria;
  out += substitute(kJointSlots, {{"instruction_1", instruction_a},
                                  {"output_1", output_a},
                                  {"instruction_2", instruction_b},
                                  {"output_2", output_b}});
  return out;
}

std::string render_prompt(const Comparison& c) {
  if (c.mode == Mode::conditional) return render_conditional_prompt(c.instruction_a, c.output_a, c.output_b);
  return render_joint_prompt(c.instruction_a, c.output_a, c.instruction_b, c.output_b);
}

std::optional<Comparison> parse_prompt(std::string_view prompt) {
  std::size_t pos = 0;
  Comparison c;
  if (prompt.find("### Instruction (a):\n") != std::string_view::npos) {
    c.mode = Mode::joint;
    auto ia = slot(prompt, pos, "### Instruction (a):\n", "\n\n### Output (a):\n");
    auto oa = slot(prompt, pos, "### Output (a):\n", "\n\n### Instruction (b):\n");
    auto ib = slot(prompt, pos, "### Instruction (b):\n", "\n\n### Output (b):\n");
    auto ob = slot(prompt, pos, "### Output (b):\n", kTail);
    if (!ia || !oa || !ib || !ob) return std::nullopt;
    c.instruction_a = *ia;
    c.output_a = *oa;
    c.instruction_b = *ib;
    c.output_b = *ob;
    return c;
  }
  auto i = slot(prompt, pos, "### Instruction:\n", "\n\n### Output (a):\n");
  auto oa = slot(prompt, pos, "### Output (a):\n", "\n\n### Output (b):\n");
  auto ob = slot(prompt, pos, "### Output (b):\n", kTail);
  if (!i || !oa || !ob) return std::nullopt;
  c.mode = Mode::conditional;
  c.instruction_a = *i;
  c.output_a = *oa;
  c.output_b = *ob;
  return c;
}

ParsedChoice parse_choice(std::string_view completion) {
  const std::string_view t = trim(completion);
  if (t == "Output (a)") return ParsedChoice::A;
  if (t == "Output (b)") return ParsedChoice::B;
  const std::string l = lower(t);
  const bool has_a = l.find("output (a)") != std::string::npos;
  const bool has_b = l.find("output (b)") != std::string::npos;
  if (has_a && !has_b) return ParsedChoice::A;
  if (has_b && !has_a) return ParsedChoice::B;
  throw Error(Errc::ParseFailure,
              has_a ? "completion names both outputs" : "completion names neither output");
}

}  // namespace jpo::judge
