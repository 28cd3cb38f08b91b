// synthgen: synthetic instruction generation and curation pipeline CLI.
//
// Stages operate on a run directory and checkpoint into its manifest, so any
// stage can be killed and re-invoked without redoing finished work.

#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "synthgen/answer.hpp"
#include "synthgen/errors.hpp"
#include "synthgen/pipeline.hpp"

namespace sp = synthgen::pipeline;

namespace {

struct CliOverrides {
  std::string config_file;
  std::string output_dir;
  std::string seed_pool;
  std::string templates_dir;
  std::string template_id;
  std::string mode;
  std::uint64_t rng_seed = 0;
  bool rng_seed_set = false;
  std::size_t target_count = 0;
  bool target_count_set = false;
  long long fail_after = -1;
};

void add_common(CLI::App* cmd, CliOverrides& o) {
  cmd->add_option("--config", o.config_file, "JSON config file");
  cmd->add_option("--output-dir", o.output_dir, "run directory (overrides config)");
  cmd->add_option("--seed-pool", o.seed_pool, "seed pool JSONL (overrides config)");
  cmd->add_option("--templates-dir", o.templates_dir, "prompt template fixtures dir");
  cmd->add_option("--template", o.template_id, "template id (overrides config)");
  cmd->add_option("--mode", o.mode, "reasoning | instruction_following");
  cmd->add_option("--rng-seed", o.rng_seed, "global RNG seed")
      ->each([&](const std::string&) { o.rng_seed_set = true; });
  cmd->add_option("--target-count", o.target_count, "records to generate")
      ->each([&](const std::string&) { o.target_count_set = true; });
}

sp::RunConfig resolve_config(const CliOverrides& o) {
  sp::RunConfig cfg;
  if (!o.config_file.empty()) cfg = sp::load_config(o.config_file);
  if (!o.mode.empty()) {
    if (o.mode == "reasoning")
      cfg.mode = synthgen::seeds::PoolMode::reasoning;
    else if (o.mode == "instruction_following")
      cfg.mode = synthgen::seeds::PoolMode::instruction_following;
    else
      throw synthgen::ConfigError("unknown mode: " + o.mode);
  }
  if (!o.template_id.empty()) {
    auto id = synthgen::templates::template_from_name(o.template_id);
    if (!id) throw synthgen::ConfigError("unknown template: " + o.template_id);
    cfg.template_id = *id;
  }
  if (!o.output_dir.empty()) cfg.output_dir = o.output_dir;
  if (!o.seed_pool.empty()) cfg.seed_pool_path = o.seed_pool;
  if (!o.templates_dir.empty()) cfg.templates_dir = o.templates_dir;
  if (o.rng_seed_set) cfg.rng_seed = o.rng_seed;
  if (o.target_count_set) cfg.target_count = o.target_count;
  cfg.fail_after_rollout_records = o.fail_after;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"synthetic instruction generation and curation pipeline"};
  app.require_subcommand(1);

  CliOverrides o;
  auto* generate = app.add_subcommand("generate", "draw seeds, render prompts, emit records");
  auto* rollout = app.add_subcommand("rollout", "sample K responses per record");
  auto* score = app.add_subcommand("score", "sample and reward-score responses per record");
  auto* filter = app.add_subcommand("filter", "apply the configured curation filter chain");
  auto* pairs = app.add_subcommand("pairs", "build length-normalized preference pairs");
  auto* stats = app.add_subcommand("stats", "write retention / distribution report");
  for (auto* cmd : {generate, rollout, score, filter, pairs, stats}) add_common(cmd, o);
  rollout
      ->add_option("--fail-after", o.fail_after,
                   "abort with exit 42 after N rollout records (testing)")
      ->group("");

  auto* verify_cmd = app.add_subcommand("verify", "check two answer strings for equivalence");
  std::string ans_a, ans_b;
  verify_cmd->add_option("a", ans_a, "first answer")->required();
  verify_cmd->add_option("b", ans_b, "second answer")->required();

  auto* render = app.add_subcommand("render-template", "render a template with two seed texts");
  std::string r_template, r_seed_a, r_seed_b, r_templates_dir = "templates";
  render->add_option("--template", r_template, "template id")->required();
  render->add_option("--seed-a", r_seed_a, "first seed text")->required();
  render->add_option("--seed-b", r_seed_b, "second seed text")->required();
  render->add_option("--templates-dir", r_templates_dir, "prompt template fixtures dir");

  auto* categories = app.add_subcommand("categories", "list the instruction taxonomy");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*verify_cmd) {
      auto fa = synthgen::verify::parse_answer(ans_a);
      auto fb = synthgen::verify::parse_answer(ans_b);
      if (!fa || !fb) {
        std::cout << "unparseable\n";
        return 1;
      }
      const bool eq = synthgen::verify::answers_equivalent(*fa, *fb);
      std::cout << (eq ? "equivalent" : "different") << "  [" << fa->canonical
                << "] vs [" << fb->canonical << "]\n";
      return eq ? 0 : 1;
    }
    if (*render) {
      auto id = synthgen::templates::template_from_name(r_template);
      if (!id) throw synthgen::ConfigError("unknown template: " + r_template);
      synthgen::templates::TemplateStore store(r_templates_dir);
      std::cout << store.render(*id, r_seed_a, r_seed_b).text;
      return 0;
    }
    if (*categories) {
      for (const auto& c : synthgen::seeds::category_names()) std::cout << c << "\n";
      return 0;
    }

    sp::Runner runner(resolve_config(o));
    if (*generate) {
      std::cout << "generated " << runner.run_generate() << " records\n";
    } else if (*rollout) {
      std::cout << "wrote " << runner.run_rollout() << " rollout samples\n";
    } else if (*score) {
      std::cout << "wrote " << runner.run_score() << " scored samples\n";
    } else if (*filter) {
      std::cout << "kept " << runner.run_filter() << " records\n";
    } else if (*pairs) {
      std::cout << "wrote " << runner.run_pairs() << " preference pairs\n";
    } else if (*stats) {
      std::cout << runner.run_stats();
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return sp::exit_code_for_current_exception();
  }
}
