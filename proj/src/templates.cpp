#include "synthgen/templates.hpp"

#include <fstream>
#include <sstream>

#include "synthgen/errors.hpp"

namespace synthgen::templates {
namespace {

constexpr const char* kPlaceholder1 = "{INSTRUCTION 1}";
constexpr const char* kPlaceholder2 = "{INSTRUCTION 2}";

std::string read_file_lf(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("template fixture not found: " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  std::string raw = ss.str();
  std::string out;
  out.reserve(raw.size());
  for (char c : raw)
    if (c != '\r') out += c;
  return out;
}

void replace_once(std::string& s, const std::string& from, const std::string& to) {
  auto at = s.find(from);
  if (at == std::string::npos)
    throw ConfigError("fixture is missing placeholder " + from);
  s.replace(at, from.size(), to);
}

}  // namespace

std::string template_name(TemplateId id) {
  switch (id) {
    case TemplateId::reasoning_cot_solve: return "reasoning_cot_solve";
    case TemplateId::reasoning_self_instruct: return "reasoning_self_instruct";
    case TemplateId::reasoning_cot_nosolve: return "reasoning_cot_nosolve";
    case TemplateId::reasoning_self_instruct_then_solve:
      return "reasoning_self_instruct_then_solve";
    case TemplateId::if_long_cot: return "if_long_cot";
    case TemplateId::if_short_cot: return "if_short_cot";
    case TemplateId::if_no_cot: return "if_no_cot";
  }
  return "";
}

std::optional<TemplateId> template_from_name(const std::string& name) {
  for (TemplateId id : kAllTemplates)
    if (template_name(id) == name) return id;
  return std::nullopt;
}

OutputGrammar expected_output_grammar(TemplateId id) {
  switch (id) {
    case TemplateId::reasoning_cot_solve:
    case TemplateId::reasoning_self_instruct_then_solve:
      return OutputGrammar::question_and_answer_blocks;
    case TemplateId::reasoning_self_instruct:
    case TemplateId::reasoning_cot_nosolve:
      return OutputGrammar::question_block;
    case TemplateId::if_long_cot:
      return OutputGrammar::step3_block;
    case TemplateId::if_short_cot:
    case TemplateId::if_no_cot:
      return OutputGrammar::begin_end_block;
  }
  return OutputGrammar::question_block;
}

bool produces_target(TemplateId id) {
  return expected_output_grammar(id) == OutputGrammar::question_and_answer_blocks;
}

std::vector<std::string> collision_markers(TemplateId id) {
  std::vector<std::string> m;
  switch (expected_output_grammar(id)) {
    case OutputGrammar::question_and_answer_blocks:
      m.insert(m.end(), {"[New Question Begin]", "[New Question End]",
                         "[Final Answer to New Question Begin]",
                         "[Final Answer to New Question End]"});
      break;
    case OutputGrammar::question_block:
      m.insert(m.end(), {"[New Question Begin]", "[New Question End]"});
      break;
    case OutputGrammar::begin_end_block:
      m.insert(m.end(), {"<begin>", "</end>"});
      break;
    case OutputGrammar::step3_block:
      m.insert(m.end(), {"Step 3 #Synthetic Prompt#:"});
      break;
  }
  return m;
}

TemplateStore::TemplateStore(std::filesystem::path fixture_dir) {
  for (std::size_t i = 0; i < kAllTemplates.size(); ++i)
    fixtures_[i] = read_file_lf(fixture_dir / (template_name(kAllTemplates[i]) + ".txt"));
}

const std::string& TemplateStore::fixture(TemplateId id) const {
  return fixtures_[static_cast<std::size_t>(id)];
}

RenderedPrompt TemplateStore::render(TemplateId id, const std::string& seed_a,
                                     const std::string& seed_b) const {
  auto trimmed = [](const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return std::string();
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  };
  const std::string a = trimmed(seed_a);
  const std::string b = trimmed(seed_b);
  if (a.empty() || b.empty()) throw ConfigError("seed text must be non-empty");
  for (const auto& marker : collision_markers(id)) {
    if (a.find(marker) != std::string::npos || b.find(marker) != std::string::npos)
      throw DataError("marker_collision: seed text contains template sentinel '" +
                      marker + "'");
  }
  // Placeholder 2 sits after placeholder 1 in every fixture; substituting it
  // first keeps a seed text that happens to contain a placeholder literal
  // from shifting the other substitution point.
  std::string text = fixture(id);
  replace_once(text, kPlaceholder2, b);
  replace_once(text, kPlaceholder1, a);
  return RenderedPrompt{id, std::move(text)};
}

}  // namespace synthgen::templates
