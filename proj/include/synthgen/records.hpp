#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "synthgen/answer.hpp"

namespace synthgen::data {

using ordered_json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kToolVersion = "synthgen 0.1.0";

struct SamplingParams {
  double temperature = 0.6;
  double top_p = 0.95;
  int max_tokens = 4096;
  int n = 1;
  std::uint64_t rng_seed = 0;

  void validate() const;  // throws ConfigError on bound violations
};

struct SeedInstruction {
  std::string id;
  std::string text;
  std::optional<std::string> category;
  std::optional<std::string> gold_answer;  // raw answer text; parsed on demand
};

struct SyntheticRecord {
  std::string id;
  std::string template_id;
  std::vector<std::string> seed_ids;  // exactly 2
  std::string question;
  std::optional<std::string> target_answer;  // canonical answer text
  std::string raw_output;
  std::optional<std::string> creation_cot;
  SamplingParams sampling;
};

struct ResponseSample {
  std::string record_id;
  std::string text;
  std::optional<std::string> answer;  // canonical, verifiable mode only
  std::uint64_t length_chars = 0;
  bool truncated = false;
  std::optional<double> reward;
};

struct CurationVerdict {
  std::string record_id;
  std::string decision;  // keep | drop
  // kept | sc_below_threshold | majority_target_mismatch | rip_below_quantile
  // | malformed | duplicate
  std::string reason;
  std::optional<double> sc_rate;
  std::optional<std::string> majority_answer;
  std::optional<double> rip_score;
};

struct PipelineManifest {
  std::string tool_version = kToolVersion;
  std::string config_hash;
  std::uint64_t global_rng_seed = 0;
  std::map<std::string, std::uint64_t> stage_checkpoints;
};

// Canonical JSON encoding: insertion key order, no extra whitespace,
// floats printed with 17 significant digits. Identical values yield
// identical bytes on every platform.
std::string canonical_dump(const ordered_json& j);
std::string format_double(double v);

ordered_json to_json(const SeedInstruction&);
ordered_json to_json(const SyntheticRecord&);
ordered_json to_json(const ResponseSample&);
ordered_json to_json(const CurationVerdict&);
ordered_json to_json(const PipelineManifest&);

void from_json_record(const ordered_json&, SeedInstruction&);
void from_json_record(const ordered_json&, SyntheticRecord&);
void from_json_record(const ordered_json&, ResponseSample&);
void from_json_record(const ordered_json&, CurationVerdict&);
void from_json_record(const ordered_json&, PipelineManifest&);

// Line-delimited record IO. Malformed lines raise ParseError with the
// 1-based line number and byte offset of the line start.
template <typename T>
std::vector<T> read_records(const std::filesystem::path& path);

// Atomic write (temp file + rename). Returns the record count.
template <typename T>
std::size_t write_records(const std::vector<T>& records,
                          const std::filesystem::path& path,
                          bool sort_by_id = false);

std::string encode_line(const ordered_json& j);

struct DatasetStats {
  std::uint64_t total = 0;
  std::map<std::string, std::uint64_t> per_template;
  std::map<std::string, std::uint64_t> per_category;
  std::map<std::string, std::uint64_t> answer_kinds;
  std::vector<std::uint64_t> lengths;             // raw question lengths, for merging
  std::vector<std::uint64_t> length_percentiles;  // p10,p25,p50,p75,p90 of question length

  DatasetStats& merge(const DatasetStats& other);
};

DatasetStats dataset_stats(const std::vector<SyntheticRecord>& records);
DatasetStats dataset_stats(const std::vector<SeedInstruction>& seeds);

// Nearest-rank percentile: p in (0,100], smallest value with at least
// ceil(p/100 * N) values <= it. Returns 0 on empty input.
std::uint64_t nearest_rank(std::vector<std::uint64_t> values, double p);

std::string manifest_path_for(const std::filesystem::path& run_dir);
PipelineManifest load_manifest(const std::filesystem::path& run_dir);
void store_manifest(const std::filesystem::path& run_dir, const PipelineManifest&);

}  // namespace synthgen::data
