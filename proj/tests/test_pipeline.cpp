#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "synthgen/errors.hpp"
#include "synthgen/extraction.hpp"
#include "synthgen/pipeline.hpp"

using namespace synthgen;
using namespace synthgen::pipeline;

namespace {

std::filesystem::path fresh_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "synthgen_test_pipeline" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::filesystem::path write_seed_pool(const std::filesystem::path& dir, int n) {
  auto path = dir / "seeds.jsonl";
  std::ofstream out(path, std::ios::binary);
  for (int i = 0; i < n; ++i)
    out << "{\"schema\":1,\"id\":\"s" << i << "\",\"text\":\"Compute the sum of "
        << (10 + i) << " and " << (20 + i) << ".\",\"gold_answer\":\"" << (30 + 2 * i)
        << "\"}\n";
  return path;
}

RunConfig base_config(const std::filesystem::path& dir) {
  RunConfig c;
  c.mode = seeds::PoolMode::reasoning;
  c.template_id = templates::TemplateId::reasoning_cot_solve;
  c.seed_pool_path = write_seed_pool(dir, 15);
  c.output_dir = dir / "run";
  c.templates_dir = std::getenv("SYNTHGEN_TEMPLATES_DIR");
  c.target_count = 20;
  c.k_rollout = 16;
  c.rng_seed = 5;
  return c;
}

}  // namespace

TEST_CASE("config validation catches chain/mode mismatches") {
  auto dir = fresh_dir("validate");
  auto c = base_config(dir);
  c.template_id = templates::TemplateId::if_short_cot;  // IF template, reasoning mode
  CHECK_THROWS_AS(Runner{c}, ConfigError);

  c = base_config(dir);
  c.template_id = templates::TemplateId::reasoning_self_instruct;  // no target
  c.filter_chain = {FilterKind::answer_consistency};
  CHECK_THROWS_AS(Runner{c}, ConfigError);

  c = base_config(dir);
  c.mode = seeds::PoolMode::instruction_following;
  c.template_id = templates::TemplateId::if_short_cot;
  c.filter_chain = {FilterKind::self_consistency};  // needs verifiable answers
  CHECK_THROWS_AS(Runner{c}, ConfigError);
}

TEST_CASE("config hash pins semantics, not file locations") {
  auto dir = fresh_dir("hash");
  auto a = base_config(dir);
  auto b = a;
  b.output_dir = dir / "elsewhere";
  CHECK(config_hash(a) == config_hash(b));
  b = a;
  b.rng_seed = 6;
  CHECK(config_hash(a) != config_hash(b));
  b = a;
  b.filter_chain = {FilterKind::self_consistency};
  CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("config file loads with overridable defaults") {
  auto dir = fresh_dir("cfgfile");
  auto path = dir / "cfg.json";
  std::ofstream(path) << R"({
    "mode": "reasoning",
    "template_id": "reasoning_cot_solve",
    "seed_pool": "seeds.jsonl",
    "target_count": 10,
    "filter_chain": ["self_consistency", "rip"],
    "sc_threshold": 0.6,
    "backend": {"kind": "mock", "seed": 3}
  })";
  auto c = load_config(path);
  CHECK(c.target_count == 10);
  CHECK(c.k_rollout == 16);
  CHECK(c.k_score == 32);
  CHECK(c.k_pairs == 64);
  CHECK(c.sc_threshold == 0.6);
  CHECK(c.dpo_rho == 0.2);
  CHECK_FALSE(c.dedup_enabled);
  REQUIRE(c.filter_chain.size() == 2);
  CHECK(c.filter_chain[0] == FilterKind::self_consistency);
  CHECK(c.backend.mock.seed == 3);

  std::ofstream(path) << R"({"mode": "sideways"})";
  CHECK_THROWS_AS(load_config(path), ConfigError);
  std::ofstream(path) << "not json";
  CHECK_THROWS_AS(load_config(path), ConfigError);
}

TEST_CASE("generate produces exactly target_count well-formed records") {
  auto dir = fresh_dir("generate");
  auto c = base_config(dir);
  c.backend.mock.malformed_permille = 300;  // some draws must be replaced
  Runner runner(c);
  CHECK(runner.run_generate() == 20);
  auto recs = data::read_records<data::SyntheticRecord>(stage_paths(c.output_dir).records);
  REQUIRE(recs.size() == 20);
  std::set<std::string> ids;
  for (const auto& r : recs) {
    ids.insert(r.id);
    CHECK(r.seed_ids.size() == 2);
    CHECK_FALSE(r.question.empty());
    REQUIRE(r.target_answer.has_value());
    CHECK(r.template_id == "reasoning_cot_solve");
  }
  CHECK(ids.size() == 20);  // ids unique
  // re-running the stage is a no-op
  Runner again(c);
  CHECK(again.run_generate() == 20);
  auto recs2 = data::read_records<data::SyntheticRecord>(stage_paths(c.output_dir).records);
  CHECK(recs2.size() == 20);
  CHECK(recs2[0].id == recs[0].id);
}

TEST_CASE("a hopeless malformation rate aborts with a data error") {
  auto dir = fresh_dir("malformed");
  auto c = base_config(dir);
  c.backend.mock.malformed_permille = 1000;  // every reply malformed
  Runner runner(c);
  CHECK_THROWS_AS(runner.run_generate(), DataError);
}

TEST_CASE("filter chain composes over the rollout artifacts") {
  auto dir = fresh_dir("chain");
  auto c = base_config(dir);
  c.backend.mock.rollout_wrong_permille = 350;
  c.backend.mock.wrong_target_permille = 250;
  c.filter_chain = {FilterKind::self_consistency, FilterKind::answer_consistency,
                    FilterKind::rip};
  Runner runner(c);
  runner.run_generate();
  runner.run_rollout();
  runner.run_score();
  const std::size_t kept = runner.run_filter();

  auto paths = stage_paths(c.output_dir);
  auto verdicts = data::read_records<data::CurationVerdict>(paths.verdicts);
  auto kept_recs = data::read_records<data::SyntheticRecord>(paths.kept);
  CHECK(verdicts.size() == 20);
  CHECK(kept_recs.size() == kept);
  CHECK(kept < 20);  // with those knobs something must fall out
  std::size_t keeps = 0;
  for (const auto& v : verdicts) {
    if (v.decision == "keep") {
      ++keeps;
      CHECK(v.reason == "kept");
      REQUIRE(v.sc_rate.has_value());
      CHECK(*v.sc_rate >= 0.5);
      CHECK(v.rip_score.has_value());  // survived until rip
    } else {
      CHECK((v.reason == "sc_below_threshold" || v.reason == "majority_target_mismatch" ||
             v.reason == "rip_below_quantile" || v.reason == "malformed"));
    }
  }
  CHECK(keeps == kept);
  // every kept record passed AC, so its target equals the rollout majority
  for (const auto& r : kept_recs) CHECK(r.target_answer.has_value());
}

TEST_CASE("filter without rollout artifacts is a config error") {
  auto dir = fresh_dir("nofilter");
  auto c = base_config(dir);
  c.filter_chain = {FilterKind::self_consistency};
  Runner runner(c);
  runner.run_generate();
  CHECK_THROWS_AS(runner.run_filter(), ConfigError);
}

TEST_CASE("majority-vote target mode rewrites targets from rollouts") {
  auto dir = fresh_dir("majority");
  auto c = base_config(dir);
  c.filter_chain = {FilterKind::self_consistency};
  c.target_mode = TargetMode::majority_vote;
  Runner runner(c);
  runner.run_generate();
  runner.run_rollout();
  runner.run_filter();
  auto paths = stage_paths(c.output_dir);
  auto kept = data::read_records<data::SyntheticRecord>(paths.kept);
  auto verdicts = data::read_records<data::CurationVerdict>(paths.verdicts);
  std::map<std::string, std::string> majority;
  for (const auto& v : verdicts)
    if (v.majority_answer) majority[v.record_id] = *v.majority_answer;
  REQUIRE_FALSE(kept.empty());
  for (const auto& r : kept) CHECK(*r.target_answer == majority.at(r.id));
}

TEST_CASE("best-of-K target mode adopts the top-reward response's answer") {
  auto dir = fresh_dir("bestofk");
  auto c = base_config(dir);
  c.filter_chain = {FilterKind::self_consistency};
  c.target_mode = TargetMode::best_of_k;
  c.k_score = 8;
  Runner runner(c);
  runner.run_generate();
  runner.run_rollout();
  runner.run_score();
  runner.run_filter();
  auto paths = stage_paths(c.output_dir);
  std::map<std::string, std::vector<data::ResponseSample>> scored;
  for (auto& s : data::read_records<data::ResponseSample>(paths.scored))
    scored[s.record_id].push_back(std::move(s));
  auto kept = data::read_records<data::SyntheticRecord>(paths.kept);
  REQUIRE_FALSE(kept.empty());
  for (const auto& r : kept) {
    const auto& group = scored.at(r.id);
    const auto& best = group[curation::best_of_k_target(group)];
    auto ans = verify::extract_rollout_answer(best.text);
    REQUIRE(ans.has_value());
    CHECK(*r.target_answer == ans->canonical);
  }
}

TEST_CASE("preference pairs for instruction-following prompts") {
  auto dir = fresh_dir("pairs");
  RunConfig c;
  c.mode = seeds::PoolMode::instruction_following;
  c.template_id = templates::TemplateId::if_short_cot;
  c.generation_profile = gateway::SamplingProfile::if_generation;
  c.seed_pool_path = dir / "seeds.jsonl";
  {
    std::ofstream out(c.seed_pool_path, std::ios::binary);
    for (int i = 0; i < 10; ++i)
      out << "{\"schema\":1,\"id\":\"s" << i << "\",\"text\":\"Write a limerick about item "
          << i << ".\"}\n";
  }
  c.output_dir = dir / "run";
  c.templates_dir = std::getenv("SYNTHGEN_TEMPLATES_DIR");
  c.target_count = 8;
  c.k_pairs = 16;
  c.rng_seed = 77;
  Runner runner(c);
  runner.run_generate();
  const std::size_t n = runner.run_pairs();
  CHECK(n > 0);
  std::ifstream in(stage_paths(c.output_dir).pairs);
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) {
    ++lines;
    auto j = data::ordered_json::parse(line);
    CHECK(j.at("chosen_reward").get<double>() >= j.at("rejected_reward").get<double>());
    CHECK(j.at("chosen") != j.at("rejected"));
  }
  CHECK(lines == n);
}

TEST_CASE("pairs stage rejects reasoning mode") {
  auto dir = fresh_dir("pairsmode");
  auto c = base_config(dir);
  Runner runner(c);
  CHECK_THROWS_AS(runner.run_pairs(), ConfigError);
}

TEST_CASE("a stale run directory from another config is refused") {
  auto dir = fresh_dir("stale");
  auto c = base_config(dir);
  Runner runner(c);
  runner.run_generate();
  auto other = c;
  other.rng_seed = 999;
  Runner clash(other);
  CHECK_THROWS_AS(clash.run_generate(), ConfigError);
}

TEST_CASE("stats reports the funnel and distributions") {
  auto dir = fresh_dir("stats");
  auto c = base_config(dir);
  c.filter_chain = {FilterKind::self_consistency};
  Runner runner(c);
  runner.run_generate();
  runner.run_rollout();
  runner.run_filter();
  const std::string report = runner.run_stats();
  CHECK(report.find("generated: 20") != std::string::npos);
  CHECK(report.find("kept_after_filters") != std::string::npos);
  CHECK(report.find("integer") != std::string::npos);

  auto paths = stage_paths(c.output_dir);
  std::ifstream in(paths.stats_json);
  auto j = data::ordered_json::parse(in);
  CHECK(j.at("schema") == 1);
  CHECK(j.at("funnel")[0].at("count") == 20);
  CHECK(j.at("dataset").at("answer_kinds").at("integer") == 20);
}

TEST_CASE("rollout resume does not re-request finished records") {
  // Two mock gateways: run rollout halfway by truncating the checkpoint, then
  // verify a fresh runner only requests the remainder.
  auto dir = fresh_dir("resume");
  auto c = base_config(dir);
  Runner first(c);
  first.run_generate();
  first.run_rollout();
  auto paths = stage_paths(c.output_dir);
  auto full = data::read_records<data::ResponseSample>(paths.samples);
  REQUIRE(full.size() == 20 * 16);

  // rewind: keep 12 records' worth of samples plus a torn half-line
  {
    std::filesystem::remove(paths.samples);
    std::ofstream out(paths.samples.string() + ".partial", std::ios::binary);
    for (std::size_t i = 0; i < 12 * 16; ++i)
      out << data::encode_line(data::to_json(full[i]));
    out << "{\"schema\":1,\"record_id\":\"torn";
    auto m = data::load_manifest(c.output_dir);
    m.stage_checkpoints["rollout_records"] = 12;
    data::store_manifest(c.output_dir, m);
  }
  Runner second(c);
  second.run_rollout();
  auto resumed = data::read_records<data::ResponseSample>(paths.samples);
  REQUIRE(resumed.size() == full.size());
  for (std::size_t i = 0; i < full.size(); ++i) {
    CHECK(resumed[i].record_id == full[i].record_id);
    CHECK(resumed[i].text == full[i].text);
  }
}
