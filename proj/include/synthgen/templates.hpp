#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace synthgen::templates {

enum class TemplateId {
  reasoning_cot_solve,
  reasoning_self_instruct,
  reasoning_cot_nosolve,
  reasoning_self_instruct_then_solve,
  if_long_cot,
  if_short_cot,
  if_no_cot,
};

inline constexpr std::array<TemplateId, 7> kAllTemplates = {
    TemplateId::reasoning_cot_solve,
    TemplateId::reasoning_self_instruct,
    TemplateId::reasoning_cot_nosolve,
    TemplateId::reasoning_self_instruct_then_solve,
    TemplateId::if_long_cot,
    TemplateId::if_short_cot,
    TemplateId::if_no_cot,
};

std::string template_name(TemplateId id);
std::optional<TemplateId> template_from_name(const std::string& name);

// Which sentinel blocks the extractor must find in a model output.
enum class OutputGrammar {
  question_block,               // [New Question Begin]...[New Question End]
  question_and_answer_blocks,   // plus [Final Answer ...]\boxed{...}
  begin_end_block,              // <begin>...</end>
  step3_block,                  // after "Step 3 #Synthetic Prompt#:"
};

OutputGrammar expected_output_grammar(TemplateId id);

// True when the template yields a target answer alongside the question.
bool produces_target(TemplateId id);

// Sentinels that must not occur inside seed text fed to this template.
std::vector<std::string> collision_markers(TemplateId id);

struct RenderedPrompt {
  TemplateId template_id;
  std::string text;
};

class TemplateStore {
public:
  explicit TemplateStore(std::filesystem::path fixture_dir);

  // Raw fixture with "{INSTRUCTION 1}" / "{INSTRUCTION 2}" placeholders,
  // line endings normalized to "\n".
  const std::string& fixture(TemplateId id) const;

  // Pure string substitution of both placeholders. Throws DataError with
  // reason marker_collision if a seed text contains a template sentinel,
  // ConfigError if a seed text is empty.
  RenderedPrompt render(TemplateId id, const std::string& seed_a,
                        const std::string& seed_b) const;

private:
  std::array<std::string, 7> fixtures_;
};

}  // namespace synthgen::templates
