#include "synthgen/extraction.hpp"

#include <vector>

namespace synthgen::verify {
namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::size_t count_occurrences(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto at = s.find(needle); at != std::string::npos; at = s.find(needle, at + needle.size()))
    ++n;
  return n;
}

// Unique delimited block; sets reason on zero or multiple occurrences.
std::optional<std::string> unique_block(const std::string& s, const std::string& open,
                                        const std::string& close,
                                        std::optional<MalformedReason>& reason) {
  const std::size_t opens = count_occurrences(s, open);
  const std::size_t closes = count_occurrences(s, close);
  if (opens == 0 || closes == 0) {
    reason = MalformedReason::missing_block;
    return std::nullopt;
  }
  if (opens > 1 || closes > 1) {
    reason = MalformedReason::multiple_blocks;
    return std::nullopt;
  }
  const std::size_t a = s.find(open) + open.size();
  const std::size_t b = s.find(close);
  if (b < a) {
    reason = MalformedReason::missing_block;
    return std::nullopt;
  }
  return s.substr(a, b - a);
}

// Content of the last \boxed{...}, brace matched.
std::optional<std::string> last_boxed(const std::string& s) {
  const std::string marker = "\\boxed{";
  std::size_t at = s.rfind(marker);
  if (at == std::string::npos) return std::nullopt;
  std::size_t i = at + marker.size();
  int depth = 1;
  std::string content;
  for (; i < s.size(); ++i) {
    if (s[i] == '{') ++depth;
    else if (s[i] == '}') {
      if (--depth == 0) return content;
    }
    content += s[i];
  }
  return std::nullopt;  // unclosed
}

}  // namespace

std::string malformed_reason_name(MalformedReason r) {
  switch (r) {
    case MalformedReason::missing_block: return "missing_block";
    case MalformedReason::multiple_blocks: return "multiple_blocks";
    case MalformedReason::empty_question: return "empty_question";
    case MalformedReason::unparseable_answer: return "unparseable_answer";
  }
  return "missing_block";
}

ExtractionResult extract(const std::string& raw, templates::OutputGrammar grammar) {
  using templates::OutputGrammar;
  ExtractionResult res;

  std::optional<std::string> question;
  switch (grammar) {
    case OutputGrammar::question_block:
    case OutputGrammar::question_and_answer_blocks:
      question = unique_block(raw, "[New Question Begin]", "[New Question End]",
                              res.malformed_reason);
      break;
    case OutputGrammar::begin_end_block:
      question = unique_block(raw, "<begin>", "</end>", res.malformed_reason);
      break;
    case OutputGrammar::step3_block: {
      const std::string marker = "Step 3 #Synthetic Prompt#:";
      const std::size_t n = count_occurrences(raw, marker);
      if (n == 0) res.malformed_reason = MalformedReason::missing_block;
      else if (n > 1) res.malformed_reason = MalformedReason::multiple_blocks;
      else question = raw.substr(raw.find(marker) + marker.size());
      break;
    }
  }
  if (!question) return res;

  std::string q = trim(*question);
  if (q.empty()) {
    res.malformed_reason = MalformedReason::empty_question;
    return res;
  }
  res.question = q;

  if (grammar == OutputGrammar::question_and_answer_blocks) {
    auto block = unique_block(raw, "[Final Answer to New Question Begin]",
                              "[Final Answer to New Question End]", res.malformed_reason);
    if (!block) {
      res.question.reset();
      return res;
    }
    auto boxed = last_boxed(*block);
    auto parsed = boxed ? parse_answer(*boxed) : parse_answer(trim(*block));
    if (!parsed) {
      res.malformed_reason = MalformedReason::unparseable_answer;
      res.question.reset();
      return res;
    }
    res.answer = std::move(parsed);
  }
  return res;
}

std::optional<AnswerForm> extract_rollout_answer(const std::string& solution_text) {
  auto boxed = last_boxed(solution_text);
  if (!boxed) return std::nullopt;
  return parse_answer(*boxed);
}

}  // namespace synthgen::verify
