#pragma once

#include <optional>
#include <string>

#include "synthgen/answer.hpp"
#include "synthgen/templates.hpp"

namespace synthgen::verify {

enum class MalformedReason {
  missing_block,
  multiple_blocks,
  empty_question,
  unparseable_answer,
};

std::string malformed_reason_name(MalformedReason r);

struct ExtractionResult {
  std::optional<std::string> question;
  std::optional<AnswerForm> answer;
  std::optional<MalformedReason> malformed_reason;

  bool ok() const { return !malformed_reason.has_value(); }
};

// Parse a generator completion according to the template's output grammar.
// Malformation is data, not failure: this never throws on model output.
ExtractionResult extract(const std::string& raw_output,
                         templates::OutputGrammar grammar);

// Final-answer convention: the last \boxed{...} in solution text.
std::optional<AnswerForm> extract_rollout_answer(const std::string& solution_text);

}  // namespace synthgen::verify
