#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "synthgen/curation.hpp"
#include "synthgen/gateway.hpp"
#include "synthgen/records.hpp"
#include "synthgen/seed_pool.hpp"
#include "synthgen/templates.hpp"

namespace synthgen::pipeline {

enum class FilterKind { self_consistency, answer_consistency, rip };
std::optional<FilterKind> filter_from_name(const std::string&);
std::string filter_name(FilterKind);

enum class TargetMode { generated, majority_vote, best_of_k };

struct BackendConfig {
  std::string kind = "mock";  // mock | http
  gateway::SimBackendOptions mock;
  gateway::HttpBackendConfig http;
};

struct RunConfig {
  seeds::PoolMode mode = seeds::PoolMode::reasoning;
  templates::TemplateId template_id = templates::TemplateId::reasoning_cot_solve;
  std::filesystem::path seed_pool_path;
  std::filesystem::path output_dir;
  std::filesystem::path templates_dir = "templates";
  std::size_t target_count = 0;
  int k_rollout = 16;
  int k_score = 32;
  int k_pairs = 64;
  std::vector<FilterKind> filter_chain;
  double sc_threshold = curation::kDefaultScThreshold;
  double rip_keep_quantile = curation::kDefaultRipKeepQuantile;
  double dpo_rho = curation::kDefaultDpoRho;
  TargetMode target_mode = TargetMode::generated;
  std::uint64_t rng_seed = 0;
  gateway::SamplingProfile generation_profile = gateway::SamplingProfile::gen_think;
  gateway::ThinkMode think_mode = gateway::ThinkMode::not_applicable;
  bool dedup_enabled = false;  // off by default
  double dedup_threshold = 0.7;
  BackendConfig backend;
  gateway::GatewayOptions gateway_opts;

  // Test-only fault injection: abort (exit code 42) after this many records
  // complete in the rollout stage. -1 disables.
  long long fail_after_rollout_records = -1;

  void validate() const;  // chain/mode consistency; throws ConfigError
};

RunConfig load_config(const std::filesystem::path& file);
// Flag overrides are applied before hashing; the resolved config is what the
// manifest pins.
std::string config_hash(const RunConfig&);

data::ordered_json config_to_json(const RunConfig&);

struct StagePaths {
  std::filesystem::path records;        // generate output
  std::filesystem::path samples;        // rollout output
  std::filesystem::path scored;         // score output
  std::filesystem::path kept;           // filter output
  std::filesystem::path verdicts;       // filter sidecar
  std::filesystem::path pairs;          // pairs output
  std::filesystem::path stats_json;
  std::filesystem::path stats_txt;
};
StagePaths stage_paths(const std::filesystem::path& output_dir);

class Runner {
public:
  explicit Runner(RunConfig config);

  std::size_t run_generate();
  std::size_t run_rollout();
  std::size_t run_score();
  std::size_t run_filter();
  std::size_t run_pairs();
  std::string run_stats();  // returns the human-readable report

  gateway::Gateway& gw() { return *gateway_; }

private:
  data::PipelineManifest load_or_init_manifest();
  void checkpoint(const std::string& stage, std::uint64_t count);
  std::string record_id_for(const seeds::FewShotDraw& draw, std::uint64_t draw_index) const;

  RunConfig cfg_;
  StagePaths paths_;
  std::unique_ptr<gateway::Gateway> gateway_;
  std::unique_ptr<templates::TemplateStore> templates_;
};

int exit_code_for_current_exception();

}  // namespace synthgen::pipeline
