#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <fstream>

#include "synthgen/errors.hpp"
#include "synthgen/extraction.hpp"
#include "synthgen/templates.hpp"

using namespace synthgen;
using namespace synthgen::templates;

namespace {

std::string fixtures_dir() {
  const char* v = std::getenv("SYNTHGEN_TEMPLATES_DIR");
  REQUIRE_MESSAGE(v != nullptr, "SYNTHGEN_TEMPLATES_DIR must point at the fixtures");
  return v;
}

}  // namespace

TEST_CASE("template names round-trip") {
  for (auto id : kAllTemplates) {
    auto back = template_from_name(template_name(id));
    REQUIRE(back.has_value());
    CHECK(*back == id);
  }
  CHECK_FALSE(template_from_name("nonsense").has_value());
}

TEST_CASE("every fixture loads and contains both placeholders in order") {
  TemplateStore store(fixtures_dir());
  for (auto id : kAllTemplates) {
    const auto& fx = store.fixture(id);
    auto p1 = fx.find("{INSTRUCTION 1}");
    auto p2 = fx.find("{INSTRUCTION 2}");
    REQUIRE(p1 != std::string::npos);
    REQUIRE(p2 != std::string::npos);
    CHECK(p1 < p2);
    CHECK(fx.find("{INSTRUCTION 1}", p1 + 1) == std::string::npos);
    CHECK(fx.find("{INSTRUCTION 2}", p2 + 1) == std::string::npos);
    CHECK(fx.find('\r') == std::string::npos);  // endings normalized
  }
}

TEST_CASE("render substitutes both seeds and nothing else") {
  TemplateStore store(fixtures_dir());
  auto r = store.render(TemplateId::reasoning_cot_solve, "seed question A?",
                        "seed question B?");
  CHECK(r.text.find("seed question A?") != std::string::npos);
  CHECK(r.text.find("seed question B?") != std::string::npos);
  CHECK(r.text.find("{INSTRUCTION") == std::string::npos);
  // golden fidelity: substituting the placeholder literals reproduces the fixture
  for (auto id : kAllTemplates) {
    auto identity = store.render(id, "{INSTRUCTION 1}", "{INSTRUCTION 2}");
    CHECK(identity.text == store.fixture(id));
  }
}

TEST_CASE("seed text is trimmed; empty and colliding seeds are rejected") {
  TemplateStore store(fixtures_dir());
  auto r = store.render(TemplateId::reasoning_self_instruct, "  padded  ", "b");
  CHECK(r.text.find("  padded  ") == std::string::npos);
  CHECK(r.text.find("padded") != std::string::npos);
  CHECK_THROWS_AS(store.render(TemplateId::reasoning_self_instruct, "", "b"),
                  ConfigError);
  CHECK_THROWS_AS(store.render(TemplateId::reasoning_self_instruct, "   ", "b"),
                  ConfigError);
  CHECK_THROWS_AS(store.render(TemplateId::reasoning_cot_solve,
                               "evil [New Question Begin] seed", "b"),
                  DataError);
}

TEST_CASE("grammar and target mapping per template") {
  CHECK(expected_output_grammar(TemplateId::reasoning_cot_solve) ==
        OutputGrammar::question_and_answer_blocks);
  CHECK(expected_output_grammar(TemplateId::reasoning_self_instruct_then_solve) ==
        OutputGrammar::question_and_answer_blocks);
  CHECK(expected_output_grammar(TemplateId::reasoning_self_instruct) ==
        OutputGrammar::question_block);
  CHECK(expected_output_grammar(TemplateId::reasoning_cot_nosolve) ==
        OutputGrammar::question_block);
  CHECK(expected_output_grammar(TemplateId::if_long_cot) == OutputGrammar::step3_block);
  CHECK(expected_output_grammar(TemplateId::if_short_cot) == OutputGrammar::begin_end_block);
  CHECK(expected_output_grammar(TemplateId::if_no_cot) == OutputGrammar::begin_end_block);

  CHECK(produces_target(TemplateId::reasoning_cot_solve));
  CHECK(produces_target(TemplateId::reasoning_self_instruct_then_solve));
  CHECK_FALSE(produces_target(TemplateId::reasoning_self_instruct));
  CHECK_FALSE(produces_target(TemplateId::if_long_cot));
}

TEST_CASE("missing fixture directory is a configuration error") {
  CHECK_THROWS_AS(TemplateStore("/nonexistent/dir"), ConfigError);
}

TEST_CASE("extraction: question and answer blocks") {
  using verify::extract;
  const std::string good =
      "Some planning text.\n"
      "[New Question Begin]What is 2+2?[New Question End]\n"
      "[Final Answer to New Question Begin]\\boxed{4}[Final Answer to New Question End]";
  auto r = extract(good, OutputGrammar::question_and_answer_blocks);
  REQUIRE(r.ok());
  CHECK(*r.question == "What is 2+2?");
  REQUIRE(r.answer.has_value());
  CHECK(r.answer->canonical == "4");

  auto missing = extract("no blocks here", OutputGrammar::question_and_answer_blocks);
  REQUIRE_FALSE(missing.ok());
  CHECK(*missing.malformed_reason == verify::MalformedReason::missing_block);

  auto dupe = extract(good + "\n" + good, OutputGrammar::question_and_answer_blocks);
  REQUIRE_FALSE(dupe.ok());
  CHECK(*dupe.malformed_reason == verify::MalformedReason::multiple_blocks);

  auto empty = extract(
      "[New Question Begin]  [New Question End]\n"
      "[Final Answer to New Question Begin]\\boxed{4}[Final Answer to New Question End]",
      OutputGrammar::question_and_answer_blocks);
  REQUIRE_FALSE(empty.ok());
  CHECK(*empty.malformed_reason == verify::MalformedReason::empty_question);

  auto bad_ans = extract(
      "[New Question Begin]q?[New Question End]\n"
      "[Final Answer to New Question Begin]dunno[Final Answer to New Question End]",
      OutputGrammar::question_and_answer_blocks);
  REQUIRE_FALSE(bad_ans.ok());
  CHECK(*bad_ans.malformed_reason == verify::MalformedReason::unparseable_answer);
}

TEST_CASE("extraction: begin/end and step-3 grammars") {
  using verify::extract;
  auto be = extract("preamble <begin>Write a haiku.</end>", OutputGrammar::begin_end_block);
  REQUIRE(be.ok());
  CHECK(*be.question == "Write a haiku.");
  CHECK_FALSE(be.answer.has_value());

  auto s3 = extract(
      "- Step 1 #Common Elements List#: things.\n"
      "- Step 2 #Plan#: a plan.\n"
      "- Step 3 #Synthetic Prompt#: Draft a pitch for a hiking app.",
      OutputGrammar::step3_block);
  REQUIRE(s3.ok());
  CHECK(*s3.question == "Draft a pitch for a hiking app.");

  auto nos3 = extract("- Step 1: only", OutputGrammar::step3_block);
  REQUIRE_FALSE(nos3.ok());
  CHECK(*nos3.malformed_reason == verify::MalformedReason::missing_block);
}

TEST_CASE("rollout answers come from the last boxed expression") {
  auto a = verify::extract_rollout_answer(
      "First I thought \\boxed{3} but actually the result is \\boxed{5}.");
  REQUIRE(a.has_value());
  CHECK(a->canonical == "5");
  CHECK_FALSE(verify::extract_rollout_answer("no boxed here").has_value());
  // nested braces survive
  auto frac = verify::extract_rollout_answer("final: \\boxed{\\frac{n(n+1)}{2}}");
  REQUIRE(frac.has_value());
}
