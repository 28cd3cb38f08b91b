#include "synthgen/records.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "synthgen/errors.hpp"

namespace synthgen::data {
namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw DataError(msg);
}

std::string get_string(const ordered_json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_string())
    throw DataError(std::string("missing or non-string field '") + key + "'");
  return j[key].get<std::string>();
}

std::optional<std::string> get_opt_string(const ordered_json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  if (!j[key].is_string())
    throw DataError(std::string("field '") + key + "' must be a string");
  return j[key].get<std::string>();
}

std::optional<double> get_opt_double(const ordered_json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  if (!j[key].is_number())
    throw DataError(std::string("field '") + key + "' must be a number");
  return j[key].get<double>();
}

void check_schema(const ordered_json& j) {
  if (!j.is_object()) throw DataError("record is not a JSON object");
  if (!j.contains("schema") || !j["schema"].is_number_integer() ||
      j["schema"].get<int>() != kSchemaVersion)
    throw DataError("missing or unsupported schema version");
}

ordered_json sampling_to_json(const SamplingParams& p) {
  ordered_json j;
  j["temperature"] = p.temperature;
  j["top_p"] = p.top_p;
  j["max_tokens"] = p.max_tokens;
  j["n"] = p.n;
  j["rng_seed"] = p.rng_seed;
  return j;
}

SamplingParams sampling_from_json(const ordered_json& j) {
  SamplingParams p;
  p.temperature = j.at("temperature").get<double>();
  p.top_p = j.at("top_p").get<double>();
  p.max_tokens = j.at("max_tokens").get<int>();
  p.n = j.at("n").get<int>();
  p.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  p.validate();
  return p;
}

void dump_value(const ordered_json& j, std::string& out) {
  switch (j.type()) {
    case ordered_json::value_t::object: {
      out += '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ',';
        first = false;
        out += ordered_json(it.key()).dump();
        out += ':';
        dump_value(it.value(), out);
      }
      out += '}';
      break;
    }
    case ordered_json::value_t::array: {
      out += '[';
      bool first = true;
      for (const auto& v : j) {
        if (!first) out += ',';
        first = false;
        dump_value(v, out);
      }
      out += ']';
      break;
    }
    case ordered_json::value_t::number_float:
      out += format_double(j.get<double>());
      break;
    default:
      out += j.dump();
  }
}

}  // namespace

void SamplingParams::validate() const {
  if (temperature < 0) throw ConfigError("temperature must be >= 0");
  if (!(top_p > 0 && top_p <= 1)) throw ConfigError("top_p must be in (0,1]");
  if (max_tokens <= 0) throw ConfigError("max_tokens must be positive");
  if (n <= 0) throw ConfigError("n must be positive");
}

std::string format_double(double v) {
  if (v == static_cast<std::int64_t>(v) && std::abs(v) < 1e15) {
    // integral values print without exponent noise
    return std::to_string(static_cast<std::int64_t>(v)) + ".0";
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string canonical_dump(const ordered_json& j) {
  std::string out;
  dump_value(j, out);
  return out;
}

std::string encode_line(const ordered_json& j) { return canonical_dump(j) + "\n"; }

ordered_json to_json(const SeedInstruction& r) {
  ordered_json j;
  j["schema"] = kSchemaVersion;
  j["id"] = r.id;
  j["text"] = r.text;
  if (r.category) j["category"] = *r.category;
  if (r.gold_answer) j["gold_answer"] = *r.gold_answer;
  return j;
}

void from_json_record(const ordered_json& j, SeedInstruction& r) {
  check_schema(j);
  r.id = get_string(j, "id");
  r.text = get_string(j, "text");
  r.category = get_opt_string(j, "category");
  r.gold_answer = get_opt_string(j, "gold_answer");
  std::string trimmed = r.text;
  trimmed.erase(0, trimmed.find_first_not_of(" \t\r\n"));
  require(!trimmed.empty(), "seed text empty after trimming");
}

ordered_json to_json(const SyntheticRecord& r) {
  ordered_json j;
  j["schema"] = kSchemaVersion;
  j["id"] = r.id;
  j["template_id"] = r.template_id;
  j["seed_ids"] = r.seed_ids;
  j["question"] = r.question;
  if (r.target_answer) j["target_answer"] = *r.target_answer;
  j["raw_output"] = r.raw_output;
  if (r.creation_cot) j["creation_cot"] = *r.creation_cot;
  j["sampling"] = sampling_to_json(r.sampling);
  return j;
}

void from_json_record(const ordered_json& j, SyntheticRecord& r) {
  check_schema(j);
  r.id = get_string(j, "id");
  r.template_id = get_string(j, "template_id");
  if (!j.contains("seed_ids") || !j["seed_ids"].is_array())
    throw DataError("missing seed_ids array");
  r.seed_ids = j["seed_ids"].get<std::vector<std::string>>();
  require(r.seed_ids.size() == 2, "seed_ids must have exactly 2 entries");
  r.question = get_string(j, "question");
  require(!r.question.empty(), "question must be non-empty");
  r.target_answer = get_opt_string(j, "target_answer");
  r.raw_output = get_string(j, "raw_output");
  r.creation_cot = get_opt_string(j, "creation_cot");
  r.sampling = sampling_from_json(j.at("sampling"));
}

ordered_json to_json(const ResponseSample& r) {
  ordered_json j;
  j["schema"] = kSchemaVersion;
  j["record_id"] = r.record_id;
  j["text"] = r.text;
  if (r.answer) j["answer"] = *r.answer;
  j["length_chars"] = r.length_chars;
  j["truncated"] = r.truncated;
  if (r.reward) j["reward"] = *r.reward;
  return j;
}

void from_json_record(const ordered_json& j, ResponseSample& r) {
  check_schema(j);
  r.record_id = get_string(j, "record_id");
  r.text = get_string(j, "text");
  r.answer = get_opt_string(j, "answer");
  r.length_chars = j.at("length_chars").get<std::uint64_t>();
  r.truncated = j.value("truncated", false);
  r.reward = get_opt_double(j, "reward");
  require(r.length_chars == r.text.size(), "length_chars does not match text");
}

ordered_json to_json(const CurationVerdict& r) {
  ordered_json j;
  j["schema"] = kSchemaVersion;
  j["record_id"] = r.record_id;
  j["decision"] = r.decision;
  j["reason"] = r.reason;
  if (r.sc_rate) j["sc_rate"] = *r.sc_rate;
  if (r.majority_answer) j["majority_answer"] = *r.majority_answer;
  if (r.rip_score) j["rip_score"] = *r.rip_score;
  return j;
}

void from_json_record(const ordered_json& j, CurationVerdict& r) {
  check_schema(j);
  r.record_id = get_string(j, "record_id");
  r.decision = get_string(j, "decision");
  r.reason = get_string(j, "reason");
  require(r.decision == "keep" || r.decision == "drop", "bad decision value");
  require(r.decision != "drop" || r.reason != "kept", "drop verdict with reason 'kept'");
  r.sc_rate = get_opt_double(j, "sc_rate");
  r.majority_answer = get_opt_string(j, "majority_answer");
  r.rip_score = get_opt_double(j, "rip_score");
}

ordered_json to_json(const PipelineManifest& m) {
  ordered_json j;
  j["schema"] = kSchemaVersion;
  j["tool_version"] = m.tool_version;
  j["config_hash"] = m.config_hash;
  j["global_rng_seed"] = m.global_rng_seed;
  ordered_json cp = ordered_json::object();
  for (const auto& [k, v] : m.stage_checkpoints) cp[k] = v;  // std::map: sorted keys
  j["stage_checkpoints"] = cp;
  return j;
}

void from_json_record(const ordered_json& j, PipelineManifest& m) {
  check_schema(j);
  m.tool_version = get_string(j, "tool_version");
  m.config_hash = get_string(j, "config_hash");
  m.global_rng_seed = j.at("global_rng_seed").get<std::uint64_t>();
  m.stage_checkpoints.clear();
  for (auto it = j.at("stage_checkpoints").begin(); it != j.at("stage_checkpoints").end(); ++it)
    m.stage_checkpoints[it.key()] = it.value().get<std::uint64_t>();
}

template <typename T>
std::vector<T> read_records(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<T> out;
  std::string line;
  std::size_t line_no = 0;
  std::size_t byte_offset = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t line_start = byte_offset;
    byte_offset += line.size() + 1;
    if (line.empty()) continue;
    try {
      ordered_json j = ordered_json::parse(line);
      T rec;
      from_json_record(j, rec);
      out.push_back(std::move(rec));
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError(e.what(), line_no, line_start);
    }
  }
  return out;
}

template <typename T>
std::size_t write_records(const std::vector<T>& records,
                          const std::filesystem::path& path, bool sort_by_id) {
  std::vector<const T*> ordered;
  ordered.reserve(records.size());
  for (const auto& r : records) ordered.push_back(&r);
  if (sort_by_id) {
    std::stable_sort(ordered.begin(), ordered.end(), [](const T* a, const T* b) {
      if constexpr (requires { a->id; }) return a->id < b->id;
      else return a->record_id < b->record_id;
    });
  }
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    for (const T* r : ordered) out << encode_line(to_json(*r));
    out.flush();
    if (!out) throw DataError("I/O failure writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
  return records.size();
}

template std::vector<SeedInstruction> read_records<SeedInstruction>(const std::filesystem::path&);
template std::vector<SyntheticRecord> read_records<SyntheticRecord>(const std::filesystem::path&);
template std::vector<ResponseSample> read_records<ResponseSample>(const std::filesystem::path&);
template std::vector<CurationVerdict> read_records<CurationVerdict>(const std::filesystem::path&);

template std::size_t write_records<SeedInstruction>(const std::vector<SeedInstruction>&, const std::filesystem::path&, bool);
template std::size_t write_records<SyntheticRecord>(const std::vector<SyntheticRecord>&, const std::filesystem::path&, bool);
template std::size_t write_records<ResponseSample>(const std::vector<ResponseSample>&, const std::filesystem::path&, bool);
template std::size_t write_records<CurationVerdict>(const std::vector<CurationVerdict>&, const std::filesystem::path&, bool);

std::uint64_t nearest_rank(std::vector<std::uint64_t> values, double p) {
  if (values.empty()) return 0;
  std::sort(values.begin(), values.end());
  std::size_t rank = static_cast<std::size_t>(std::ceil(p * values.size()));
  if (rank < 1) rank = 1;
  if (rank > values.size()) rank = values.size();
  return values[rank - 1];
}

namespace {

std::vector<std::uint64_t> percentile_summary(std::vector<std::uint64_t> lengths) {
  std::vector<std::uint64_t> out;
  for (double p : {0.10, 0.25, 0.50, 0.75, 0.90}) out.push_back(nearest_rank(lengths, p));
  return out;
}

}  // namespace

DatasetStats& DatasetStats::merge(const DatasetStats& other) {
  total += other.total;
  for (const auto& [k, v] : other.per_template) per_template[k] += v;
  for (const auto& [k, v] : other.per_category) per_category[k] += v;
  for (const auto& [k, v] : other.answer_kinds) answer_kinds[k] += v;
  lengths.insert(lengths.end(), other.lengths.begin(), other.lengths.end());
  length_percentiles = percentile_summary(lengths);  // percentiles are not additive
  return *this;
}

DatasetStats dataset_stats(const std::vector<SyntheticRecord>& records) {
  DatasetStats s;
  std::vector<std::uint64_t> lengths;
  for (const auto& r : records) {
    ++s.total;
    ++s.per_template[r.template_id];
    lengths.push_back(r.question.size());
    if (r.target_answer) {
      auto parsed = verify::parse_answer(*r.target_answer);
      ++s.answer_kinds[parsed ? verify::answer_kind_name(parsed->kind) : "unparseable"];
    }
  }
  s.length_percentiles = percentile_summary(lengths);
  s.lengths = std::move(lengths);
  return s;
}

DatasetStats dataset_stats(const std::vector<SeedInstruction>& seeds) {
  DatasetStats s;
  std::vector<std::uint64_t> lengths;
  for (const auto& r : seeds) {
    ++s.total;
    if (r.category) ++s.per_category[*r.category];
    lengths.push_back(r.text.size());
    if (r.gold_answer) {
      auto parsed = verify::parse_answer(*r.gold_answer);
      ++s.answer_kinds[parsed ? verify::answer_kind_name(parsed->kind) : "unparseable"];
    }
  }
  s.length_percentiles = percentile_summary(lengths);
  s.lengths = std::move(lengths);
  return s;
}

std::string manifest_path_for(const std::filesystem::path& run_dir) {
  return (run_dir / "manifest.json").string();
}

PipelineManifest load_manifest(const std::filesystem::path& run_dir) {
  std::ifstream in(manifest_path_for(run_dir), std::ios::binary);
  if (!in) throw DataError("cannot open manifest in " + run_dir.string());
  ordered_json j = ordered_json::parse(in, nullptr, true);
  PipelineManifest m;
  from_json_record(j, m);
  return m;
}

void store_manifest(const std::filesystem::path& run_dir, const PipelineManifest& m) {
  const std::filesystem::path path = manifest_path_for(run_dir);
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write manifest " + tmp.string());
    out << encode_line(to_json(m));
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace synthgen::data
