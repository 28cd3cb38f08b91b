#include "synthgen/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <deque>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "synthgen/errors.hpp"
#include "synthgen/extraction.hpp"
#include "synthgen/rng.hpp"

namespace synthgen::pipeline {

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
  x ^= x >> 33;
  x *= 0xff51afd7ed558ccdULL;
  x ^= x >> 33;
  return x;
}

std::string hex16(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Append complete JSONL lines; used by the resumable stages.
void append_lines(const std::filesystem::path& p, const std::vector<std::string>& lines) {
  std::ofstream out(p, std::ios::binary | std::ios::app);
  if (!out) throw DataError("cannot append to " + p.string());
  for (const auto& l : lines) out << l;
  out.flush();
  if (!out) throw DataError("I/O failure appending to " + p.string());
}

// Reads complete lines only (a trailing unterminated line from a crash is
// discarded).
std::vector<std::string> read_complete_lines(const std::filesystem::path& p) {
  std::vector<std::string> lines;
  std::ifstream in(p, std::ios::binary);
  if (!in) return lines;
  std::string content((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  std::size_t start = 0;
  for (std::size_t i = 0; i < content.size(); ++i) {
    if (content[i] == '\n') {
      lines.push_back(content.substr(start, i - start + 1));
      start = i + 1;
    }
  }
  return lines;
}

void write_all_lines(const std::filesystem::path& p, const std::vector<std::string>& lines) {
  const std::filesystem::path tmp = p.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    for (const auto& l : lines) out << l;
  }
  std::filesystem::rename(tmp, p);
}

}  // namespace

std::optional<FilterKind> filter_from_name(const std::string& name) {
  if (name == "self_consistency") return FilterKind::self_consistency;
  if (name == "answer_consistency") return FilterKind::answer_consistency;
  if (name == "rip") return FilterKind::rip;
  return std::nullopt;
}

std::string filter_name(FilterKind k) {
  switch (k) {
    case FilterKind::self_consistency: return "self_consistency";
    case FilterKind::answer_consistency: return "answer_consistency";
    case FilterKind::rip: return "rip";
  }
  return "";
}

void RunConfig::validate() const {
  if (k_rollout < 1 || k_score < 1 || k_pairs < 2)
    throw ConfigError("K parameters out of range");
  if (!(sc_threshold >= 0 && sc_threshold <= 1))
    throw ConfigError("sc_threshold must be in [0,1]");
  const bool reasoning = mode == seeds::PoolMode::reasoning;
  const bool reasoning_template =
      template_id == templates::TemplateId::reasoning_cot_solve ||
      template_id == templates::TemplateId::reasoning_self_instruct ||
      template_id == templates::TemplateId::reasoning_cot_nosolve ||
      template_id == templates::TemplateId::reasoning_self_instruct_then_solve;
  if (reasoning != reasoning_template)
    throw ConfigError("template " + templates::template_name(template_id) +
                      " does not match mode");
  for (FilterKind f : filter_chain) {
    if (f == FilterKind::answer_consistency &&
        !templates::produces_target(template_id))
      throw ConfigError("answer_consistency filter requires a solve template");
    if ((f == FilterKind::self_consistency || f == FilterKind::answer_consistency) &&
        !reasoning)
      throw ConfigError(filter_name(f) + " filter requires reasoning mode");
    if (f == FilterKind::rip && backend.kind == "http" && backend.http.score_path.empty())
      throw ConfigError("rip filter requires a scoring endpoint");
  }
}

namespace {

const char* pool_mode_name(seeds::PoolMode m) {
  return m == seeds::PoolMode::reasoning ? "reasoning" : "instruction_following";
}

const char* target_mode_name(TargetMode m) {
  switch (m) {
    case TargetMode::generated: return "generated";
    case TargetMode::majority_vote: return "majority_vote";
    case TargetMode::best_of_k: return "best_of_k";
  }
  return "generated";
}

const char* profile_name(gateway::SamplingProfile p) {
  switch (p) {
    case gateway::SamplingProfile::gen_base_or_nothink: return "gen_base_or_nothink";
    case gateway::SamplingProfile::gen_think: return "gen_think";
    case gateway::SamplingProfile::rollout: return "rollout";
    case gateway::SamplingProfile::if_generation: return "if_generation";
  }
  return "gen_think";
}

}  // namespace

data::ordered_json config_to_json(const RunConfig& c) {
  data::ordered_json j;
  j["mode"] = pool_mode_name(c.mode);
  j["template_id"] = templates::template_name(c.template_id);
  j["target_count"] = c.target_count;
  j["k_rollout"] = c.k_rollout;
  j["k_score"] = c.k_score;
  j["k_pairs"] = c.k_pairs;
  data::ordered_json chain = data::ordered_json::array();
  for (FilterKind f : c.filter_chain) chain.push_back(filter_name(f));
  j["filter_chain"] = chain;
  j["sc_threshold"] = c.sc_threshold;
  j["rip_keep_quantile"] = c.rip_keep_quantile;
  j["dpo_rho"] = c.dpo_rho;
  j["target_mode"] = target_mode_name(c.target_mode);
  j["rng_seed"] = c.rng_seed;
  j["generation_profile"] = profile_name(c.generation_profile);
  j["think_mode"] = static_cast<int>(c.think_mode);
  j["dedup_enabled"] = c.dedup_enabled;
  j["dedup_threshold"] = c.dedup_threshold;
  data::ordered_json backend;
  backend["kind"] = c.backend.kind;
  if (c.backend.kind == "mock") {
    backend["seed"] = c.backend.mock.seed;
    backend["malformed_permille"] = c.backend.mock.malformed_permille;
    backend["wrong_target_permille"] = c.backend.mock.wrong_target_permille;
    backend["rollout_wrong_permille"] = c.backend.mock.rollout_wrong_permille;
  } else {
    backend["base_url"] = c.backend.http.base_url;
    backend["model"] = c.backend.http.model;
  }
  j["backend"] = backend;
  return j;
}

// The hash pins generation semantics; file locations and fault-injection
// flags deliberately stay out so a resumed or relocated run replays cleanly.
std::string config_hash(const RunConfig& c) {
  return hex16(fnv1a64(data::canonical_dump(config_to_json(c))));
}

RunConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + file.string());
  data::ordered_json j;
  try {
    j = data::ordered_json::parse(in);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }

  RunConfig c;
  const std::string mode = j.value("mode", "reasoning");
  if (mode == "reasoning") c.mode = seeds::PoolMode::reasoning;
  else if (mode == "instruction_following") c.mode = seeds::PoolMode::instruction_following;
  else throw ConfigError("unknown mode: " + mode);

  if (j.contains("template_id")) {
    auto id = templates::template_from_name(j["template_id"].get<std::string>());
    if (!id) throw ConfigError("unknown template_id");
    c.template_id = *id;
  } else if (c.mode == seeds::PoolMode::instruction_following) {
    c.template_id = templates::TemplateId::if_long_cot;
  }

  c.seed_pool_path = j.value("seed_pool", "");
  c.output_dir = j.value("output_dir", "run");
  c.templates_dir = j.value("templates_dir", "templates");
  c.target_count = j.value("target_count", std::size_t{0});
  c.k_rollout = j.value("k_rollout", 16);
  c.k_score = j.value("k_score", 32);
  c.k_pairs = j.value("k_pairs", 64);
  if (j.contains("filter_chain")) {
    for (const auto& f : j["filter_chain"]) {
      auto k = filter_from_name(f.get<std::string>());
      if (!k) throw ConfigError("unknown filter: " + f.get<std::string>());
      c.filter_chain.push_back(*k);
    }
  }
  c.sc_threshold = j.value("sc_threshold", curation::kDefaultScThreshold);
  c.rip_keep_quantile = j.value("rip_keep_quantile", curation::kDefaultRipKeepQuantile);
  c.dpo_rho = j.value("dpo_rho", curation::kDefaultDpoRho);
  const std::string tm = j.value("target_mode", "generated");
  if (tm == "generated") c.target_mode = TargetMode::generated;
  else if (tm == "majority_vote") c.target_mode = TargetMode::majority_vote;
  else if (tm == "best_of_k") c.target_mode = TargetMode::best_of_k;
  else throw ConfigError("unknown target_mode: " + tm);
  c.rng_seed = j.value("rng_seed", std::uint64_t{0});
  if (j.contains("generation_profile")) {
    auto p = gateway::sampling_profile_from_name(j["generation_profile"].get<std::string>());
    if (!p) throw ConfigError("unknown generation_profile");
    c.generation_profile = *p;
  } else if (c.mode == seeds::PoolMode::instruction_following) {
    c.generation_profile = gateway::SamplingProfile::if_generation;
  }
  const std::string think = j.value("think_mode", "n/a");
  if (think == "on") c.think_mode = gateway::ThinkMode::on;
  else if (think == "off") c.think_mode = gateway::ThinkMode::off;
  else c.think_mode = gateway::ThinkMode::not_applicable;
  if (j.contains("dedup")) {
    c.dedup_enabled = j["dedup"].value("enabled", false);
    c.dedup_threshold = j["dedup"].value("threshold", 0.7);
  }

  if (j.contains("backend")) {
    const auto& b = j["backend"];
    c.backend.kind = b.value("kind", "mock");
    if (c.backend.kind == "mock") {
      c.backend.mock.seed = b.value("seed", std::uint64_t{0});
      c.backend.mock.malformed_permille = b.value("malformed_permille", 0);
      c.backend.mock.wrong_target_permille = b.value("wrong_target_permille", 0);
      c.backend.mock.rollout_wrong_permille = b.value("rollout_wrong_permille", 200);
    } else if (c.backend.kind == "http") {
      c.backend.http.base_url = b.value("base_url", "");
      c.backend.http.model = b.value("model", "");
      c.backend.http.completion_path = b.value("completion_path", "/v1/chat/completions");
      c.backend.http.score_path = b.value("score_path", "");
      c.backend.http.score_model = b.value("score_model", "");
      if (b.contains("api_key_env")) {
        const char* v = std::getenv(b["api_key_env"].get<std::string>().c_str());
        if (v) c.backend.http.api_key = v;
      }
    } else {
      throw ConfigError("unknown backend kind: " + c.backend.kind);
    }
  }
  if (j.contains("gateway")) {
    const auto& g = j["gateway"];
    c.gateway_opts.in_flight_cap = g.value("in_flight_cap", 8);
    c.gateway_opts.retry_budget = g.value("retry_budget", 3);
    c.gateway_opts.backoff_base_ms = g.value("backoff_base_ms", 100);
  }
  return c;
}

StagePaths stage_paths(const std::filesystem::path& dir) {
  StagePaths p;
  p.records = dir / "records.jsonl";
  p.samples = dir / "samples.jsonl";
  p.scored = dir / "scored.jsonl";
  p.kept = dir / "kept.jsonl";
  p.verdicts = dir / "verdicts.jsonl";
  p.pairs = dir / "pairs.jsonl";
  p.stats_json = dir / "stats.json";
  p.stats_txt = dir / "stats.txt";
  return p;
}

Runner::Runner(RunConfig config) : cfg_(std::move(config)), paths_(stage_paths(cfg_.output_dir)) {
  cfg_.validate();
  std::filesystem::create_directories(cfg_.output_dir);
  templates_ = std::make_unique<templates::TemplateStore>(cfg_.templates_dir);

  std::shared_ptr<gateway::CompletionBackend> completion;
  std::shared_ptr<gateway::ScoringBackend> scoring;
  if (cfg_.backend.kind == "mock") {
    auto sim = std::make_shared<gateway::SimBackend>(cfg_.backend.mock);
    completion = sim;
    scoring = sim;
  } else {
    completion = gateway::make_http_completion_backend(cfg_.backend.http);
    if (!cfg_.backend.http.score_path.empty())
      scoring = gateway::make_http_scoring_backend(cfg_.backend.http);
    else
      scoring = nullptr;
  }
  if (!scoring) {
    // scoring calls will fail loudly rather than silently degrade
    class NoScoring : public gateway::ScoringBackend {
      double score(const gateway::RewardRequest&) override {
        throw ConfigError("no scoring endpoint configured");
      }
    };
    scoring = std::make_shared<NoScoring>();
  }
  gateway_ = std::make_unique<gateway::Gateway>(completion, scoring, cfg_.gateway_opts);
}

data::PipelineManifest Runner::load_or_init_manifest() {
  const auto mpath = data::manifest_path_for(cfg_.output_dir);
  if (std::filesystem::exists(mpath)) {
    auto m = data::load_manifest(cfg_.output_dir);
    if (m.config_hash != config_hash(cfg_))
      throw ConfigError("manifest in " + cfg_.output_dir.string() +
                        " was produced by a different configuration");
    return m;
  }
  data::PipelineManifest m;
  m.config_hash = config_hash(cfg_);
  m.global_rng_seed = cfg_.rng_seed;
  data::store_manifest(cfg_.output_dir, m);
  return m;
}

void Runner::checkpoint(const std::string& stage, std::uint64_t count) {
  auto m = data::load_manifest(cfg_.output_dir);
  m.stage_checkpoints[stage] = count;
  data::store_manifest(cfg_.output_dir, m);
}

std::string Runner::record_id_for(const seeds::FewShotDraw& draw,
                                  std::uint64_t draw_index) const {
  const std::string blob = templates::template_name(cfg_.template_id) + "|" +
                           draw.seed_a.id + "|" + draw.seed_b.id + "|" +
                           std::to_string(cfg_.rng_seed) + "|" +
                           std::to_string(draw_index);
  return hex16(fnv1a64(blob));
}

std::size_t Runner::run_generate() {
  if (cfg_.target_count == 0) throw ConfigError("target_count must be positive");
  auto manifest = load_or_init_manifest();
  auto pool = seeds::load_seed_pool(cfg_.seed_pool_path, cfg_.mode);
  const seeds::DrawMode draw_mode = cfg_.mode == seeds::PoolMode::instruction_following
                                        ? seeds::DrawMode::same_category
                                        : seeds::DrawMode::uniform;

  const std::filesystem::path partial = paths_.records.string() + ".partial";
  std::uint64_t records_done = manifest.stage_checkpoints["generate_records"];
  std::uint64_t draws_done = manifest.stage_checkpoints["generate_draws"];

  // stage already finalized: nothing to redo
  if (records_done >= cfg_.target_count && std::filesystem::exists(paths_.records) &&
      !std::filesystem::exists(partial))
    return records_done;

  std::vector<std::string> done_lines = read_complete_lines(partial);
  if (done_lines.size() > records_done) done_lines.resize(records_done);
  if (done_lines.size() < records_done)
    throw DataError("generate partial file is behind its checkpoint; run dir corrupt");
  write_all_lines(partial, done_lines);

  // Reference texts for optional dedup (pool + already-accepted questions).
  std::vector<std::string> dedup_refs;
  if (cfg_.dedup_enabled) {
    for (const auto& s : pool.seeds) dedup_refs.push_back(s.text);
    for (const auto& line : done_lines) {
      data::SyntheticRecord r;
      data::from_json_record(data::ordered_json::parse(line), r);
      dedup_refs.push_back(r.question);
    }
  }

  // Sliding malformation window: a sustained > 50% malformation rate means
  // the template and backend disagree; abort rather than spin.
  std::deque<bool> window;
  std::size_t window_malformed = 0;
  auto note_outcome = [&](bool malformed) {
    window.push_back(malformed);
    window_malformed += malformed ? 1 : 0;
    if (window.size() > 200) {
      window_malformed -= window.front() ? 1 : 0;
      window.pop_front();
    }
    if (window.size() == 200 && window_malformed * 2 > window.size())
      throw DataError("malformation rate above 50% over the last 200 generations; "
                      "check template/backend pairing");
  };

  const auto grammar = templates::expected_output_grammar(cfg_.template_id);
  const data::SamplingParams profile = gateway::preset_sampling(cfg_.generation_profile);

  std::vector<seeds::FewShotDraw> draws;  // prefix re-drawn deterministically
  auto draw_at = [&](std::uint64_t index) -> const seeds::FewShotDraw& {
    while (draws.size() <= index) {
      const std::size_t want = std::max<std::size_t>(draws.size() * 2, 64);
      draws = seeds::sample_fewshot(pool, draw_mode, cfg_.rng_seed, want);
    }
    return draws[index];
  };

  const std::size_t batch = std::max(1, cfg_.gateway_opts.in_flight_cap);
  while (records_done < cfg_.target_count) {
    const std::size_t need = cfg_.target_count - records_done;
    const std::size_t n = std::min(batch, need);

    std::vector<std::uint64_t> indices;
    std::vector<gateway::CompletionRequest> requests;
    for (std::size_t k = 0; k < n; ++k) {
      const std::uint64_t idx = draws_done + k;
      const auto& draw = draw_at(idx);
      gateway::CompletionRequest req;
      req.prompt = templates_->render(cfg_.template_id, draw.seed_a.text, draw.seed_b.text).text;
      req.sampling = profile;
      req.sampling.n = 1;
      req.sampling.rng_seed = mix(cfg_.rng_seed, idx);
      req.think = cfg_.think_mode;
      indices.push_back(idx);
      requests.push_back(std::move(req));
    }
    auto results = gateway_->complete_batch(requests);

    for (std::size_t k = 0; k < n; ++k) {
      const std::uint64_t idx = indices[k];
      const auto& completion = results[k].front();
      ++draws_done;

      auto handle_reject = [&](const std::string& why) {
        std::cerr << "generate: draw " << idx << " rejected (" << why << ")\n";
        note_outcome(true);
        checkpoint("generate_draws", draws_done);
      };

      if (completion.truncated) {
        handle_reject("truncated");
        continue;
      }
      auto extraction = verify::extract(completion.text, grammar);
      if (!extraction.ok()) {
        handle_reject(verify::malformed_reason_name(*extraction.malformed_reason));
        continue;
      }
      if (cfg_.dedup_enabled) {
        double max_sim = 0.0;
        for (const auto& ref : dedup_refs)
          max_sim = std::max(max_sim, seeds::rouge_l_f1(*extraction.question, ref));
        if (max_sim >= cfg_.dedup_threshold) {
          handle_reject("duplicate");
          continue;
        }
      }

      const auto& draw = draw_at(idx);
      data::SyntheticRecord rec;
      rec.id = record_id_for(draw, idx);
      rec.template_id = templates::template_name(cfg_.template_id);
      rec.seed_ids = {draw.seed_a.id, draw.seed_b.id};
      rec.question = *extraction.question;
      if (extraction.answer) rec.target_answer = extraction.answer->canonical;
      rec.raw_output = completion.text;
      rec.sampling = requests[k].sampling;
      // Anything the model emitted before the first structured block is its
      // planning trace; keep it when present.
      std::size_t block_at = std::string::npos;
      for (const auto& m : templates::collision_markers(cfg_.template_id)) {
        const auto at = completion.text.find(m);
        if (at != std::string::npos) block_at = std::min(block_at, at);
      }
      if (block_at != std::string::npos && block_at > 0) {
        std::string cot = completion.text.substr(0, block_at);
        const auto b = cot.find_first_not_of(" \t\r\n");
        const auto end = cot.find_last_not_of(" \t\r\n");
        if (b != std::string::npos) rec.creation_cot = cot.substr(b, end - b + 1);
      }

      if (cfg_.dedup_enabled) dedup_refs.push_back(rec.question);
      note_outcome(false);
      append_lines(partial, {data::encode_line(data::to_json(rec))});
      ++records_done;
      checkpoint("generate_records", records_done);
      checkpoint("generate_draws", draws_done);
      if (records_done >= cfg_.target_count) break;
    }
  }

  // finalize: partial lines become the stage output
  write_all_lines(paths_.records, read_complete_lines(partial));
  std::filesystem::remove(partial);
  return records_done;
}

std::size_t Runner::run_rollout() {
  load_or_init_manifest();
  auto records = data::read_records<data::SyntheticRecord>(paths_.records);
  const int k = cfg_.k_rollout;
  const bool verifiable = cfg_.mode == seeds::PoolMode::reasoning;

  const std::filesystem::path partial = paths_.samples.string() + ".partial";
  auto manifest = data::load_manifest(cfg_.output_dir);
  std::uint64_t done = manifest.stage_checkpoints["rollout_records"];
  if (done > records.size()) throw DataError("rollout checkpoint exceeds record count");
  if (done == records.size() && std::filesystem::exists(paths_.samples) &&
      !std::filesystem::exists(partial))
    return done * k;

  // keep only checkpointed complete records in the partial file
  std::vector<std::string> lines = read_complete_lines(partial);
  if (lines.size() > done * k) lines.resize(done * k);
  if (lines.size() < done * k)
    throw DataError("rollout partial file is behind its checkpoint; run dir corrupt");
  write_all_lines(partial, lines);

  const data::SamplingParams profile =
      gateway::preset_sampling(gateway::SamplingProfile::rollout);
  const std::size_t batch = std::max(1, cfg_.gateway_opts.in_flight_cap);

  while (done < records.size()) {
    const std::size_t base = done;
    const std::size_t n = std::min<std::size_t>(batch, records.size() - base);
    std::vector<gateway::CompletionRequest> requests;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& rec = records[base + i];
      gateway::CompletionRequest req;
      req.prompt = rec.question;
      req.sampling = profile;
      req.sampling.n = k;
      req.sampling.rng_seed = fnv1a64(rec.id);
      requests.push_back(std::move(req));
    }
    auto results = gateway_->complete_batch(requests);

    for (std::size_t i = 0; i < n; ++i) {
      const auto& rec = records[base + i];

      if (cfg_.fail_after_rollout_records >= 0 &&
          done == static_cast<std::uint64_t>(cfg_.fail_after_rollout_records)) {
        // fault injection: leave an unterminated line, then die hard
        std::ofstream out(partial, std::ios::binary | std::ios::app);
        out << "{\"schema\":1,\"record_id\":\"" << rec.id << "\",\"text\":\"interru";
        out.flush();
        std::_Exit(42);
      }

      std::vector<std::string> out_lines;
      for (const auto& completion : results[i]) {
        data::ResponseSample s;
        s.record_id = rec.id;
        s.text = completion.text;
        s.length_chars = s.text.size();
        s.truncated = completion.truncated;
        if (verifiable && !completion.truncated) {
          if (auto ans = verify::extract_rollout_answer(s.text)) s.answer = ans->canonical;
        }
        out_lines.push_back(data::encode_line(data::to_json(s)));
      }
      append_lines(partial, out_lines);
      ++done;
      checkpoint("rollout_records", done);
    }
  }

  write_all_lines(paths_.samples, read_complete_lines(partial));
  std::filesystem::remove(partial);
  return done * k;
}

std::size_t Runner::run_score() {
  load_or_init_manifest();
  auto records = data::read_records<data::SyntheticRecord>(paths_.records);
  const int k = cfg_.k_score;

  const std::filesystem::path partial = paths_.scored.string() + ".partial";
  auto manifest = data::load_manifest(cfg_.output_dir);
  std::uint64_t done = manifest.stage_checkpoints["score_records"];
  if (done == records.size() && std::filesystem::exists(paths_.scored) &&
      !std::filesystem::exists(partial))
    return done * k;
  std::vector<std::string> lines = read_complete_lines(partial);
  if (lines.size() > done * k) lines.resize(done * k);
  write_all_lines(partial, lines);

  const data::SamplingParams profile =
      gateway::preset_sampling(gateway::SamplingProfile::rollout);

  while (done < records.size()) {
    const auto& rec = records[done];
    gateway::CompletionRequest req;
    req.prompt = rec.question;
    req.sampling = profile;
    req.sampling.n = k;
    req.sampling.rng_seed = mix(fnv1a64(rec.id), 0x5c03eULL);
    auto completions = gateway_->complete(req);

    std::vector<gateway::RewardRequest> reward_reqs;
    for (const auto& c : completions) reward_reqs.push_back({rec.question, c.text});
    auto rewards = gateway_->score_batch(reward_reqs);

    std::vector<std::string> out_lines;
    for (std::size_t i = 0; i < completions.size(); ++i) {
      data::ResponseSample s;
      s.record_id = rec.id;
      s.text = completions[i].text;
      s.length_chars = s.text.size();
      s.truncated = completions[i].truncated;
      s.reward = rewards[i];
      out_lines.push_back(data::encode_line(data::to_json(s)));
    }
    append_lines(partial, out_lines);
    ++done;
    checkpoint("score_records", done);
  }

  write_all_lines(paths_.scored, read_complete_lines(partial));
  std::filesystem::remove(partial);
  return done * k;
}

std::size_t Runner::run_filter() {
  load_or_init_manifest();
  auto records = data::read_records<data::SyntheticRecord>(paths_.records);

  const bool needs_votes =
      std::find(cfg_.filter_chain.begin(), cfg_.filter_chain.end(),
                FilterKind::self_consistency) != cfg_.filter_chain.end() ||
      std::find(cfg_.filter_chain.begin(), cfg_.filter_chain.end(),
                FilterKind::answer_consistency) != cfg_.filter_chain.end();
  const bool needs_scores = std::find(cfg_.filter_chain.begin(), cfg_.filter_chain.end(),
                                      FilterKind::rip) != cfg_.filter_chain.end() ||
                            cfg_.target_mode == TargetMode::best_of_k;

  std::map<std::string, std::vector<data::ResponseSample>> by_record;
  if (needs_votes) {
    if (!std::filesystem::exists(paths_.samples))
      throw ConfigError("filter chain needs rollout samples; run rollout first");
    for (auto& s : data::read_records<data::ResponseSample>(paths_.samples))
      by_record[s.record_id].push_back(std::move(s));
  }
  std::map<std::string, std::vector<double>> rewards_by_record;
  std::map<std::string, std::vector<data::ResponseSample>> scored_by_record;
  if (needs_scores) {
    if (!std::filesystem::exists(paths_.scored))
      throw ConfigError("filter configuration needs scored samples; run score first");
    for (auto& s : data::read_records<data::ResponseSample>(paths_.scored)) {
      if (!s.reward) throw ConfigError("scored samples file has samples without rewards");
      rewards_by_record[s.record_id].push_back(*s.reward);
      if (cfg_.target_mode == TargetMode::best_of_k)
        scored_by_record[s.record_id].push_back(std::move(s));
    }
  }

  std::map<std::string, curation::VoteTally> tallies;
  if (needs_votes) {
    for (const auto& rec : records) {
      auto it = by_record.find(rec.id);
      if (it == by_record.end())
        throw ConfigError("record " + rec.id + " has no rollout samples; run rollout first");
      tallies.emplace(rec.id, curation::tally_votes(it->second));
    }
  }

  std::vector<data::SyntheticRecord> kept = records;
  std::map<std::string, data::CurationVerdict> verdicts;
  for (const auto& rec : records) {
    data::CurationVerdict v;
    v.record_id = rec.id;
    v.decision = "keep";
    v.reason = "kept";
    verdicts[rec.id] = v;
  }

  for (FilterKind f : cfg_.filter_chain) {
    std::vector<data::SyntheticRecord> next;
    if (f == FilterKind::rip) {
      std::vector<curation::RipInput> batch;
      for (const auto& rec : kept) {
        auto it = rewards_by_record.find(rec.id);
        if (it == rewards_by_record.end())
          throw ConfigError("record " + rec.id + " has no scored samples; run score first");
        batch.push_back({rec.id, it->second});
      }
      auto rip = curation::rip_filter(batch, cfg_.rip_keep_quantile);
      for (std::size_t i = 0; i < kept.size(); ++i) {
        verdicts[kept[i].id].rip_score = rip[i].prompt_score;
        if (rip[i].kept) {
          next.push_back(kept[i]);
        } else {
          verdicts[kept[i].id].decision = "drop";
          verdicts[kept[i].id].reason = "rip_below_quantile";
        }
      }
    } else {
      for (auto& rec : kept) {
        const auto& tally = tallies.at(rec.id);
        data::CurationVerdict v =
            f == FilterKind::self_consistency
                ? curation::self_consistency_filter(rec, tally, cfg_.sc_threshold)
                : curation::answer_consistency_filter(rec, tally);
        auto& slot = verdicts[rec.id];
        if (v.sc_rate) slot.sc_rate = v.sc_rate;
        if (v.majority_answer) slot.majority_answer = v.majority_answer;
        if (v.decision == "keep") {
          if (f == FilterKind::self_consistency &&
              cfg_.target_mode == TargetMode::majority_vote && v.majority_answer)
            rec.target_answer = v.majority_answer;
          next.push_back(rec);
        } else {
          slot.decision = "drop";
          slot.reason = v.reason;
        }
      }
    }
    kept = std::move(next);
  }

  if (cfg_.target_mode == TargetMode::best_of_k) {
    for (auto& rec : kept) {
      auto it = scored_by_record.find(rec.id);
      if (it == scored_by_record.end() || it->second.empty())
        throw ConfigError("record " + rec.id + " has no scored samples; run score first");
      const auto& best = it->second[curation::best_of_k_target(it->second)];
      if (auto ans = verify::extract_rollout_answer(best.text))
        rec.target_answer = ans->canonical;
    }
  }

  data::write_records(kept, paths_.kept);
  std::vector<data::CurationVerdict> verdict_list;
  for (const auto& rec : records) verdict_list.push_back(verdicts.at(rec.id));
  data::write_records(verdict_list, paths_.verdicts);
  checkpoint("filter_kept", kept.size());
  return kept.size();
}

std::size_t Runner::run_pairs() {
  load_or_init_manifest();
  if (cfg_.mode != seeds::PoolMode::instruction_following)
    throw ConfigError("pairs stage requires instruction_following mode");
  const auto source =
      std::filesystem::exists(paths_.kept) ? paths_.kept : paths_.records;
  auto records = data::read_records<data::SyntheticRecord>(source);

  const data::SamplingParams profile =
      gateway::preset_sampling(gateway::SamplingProfile::rollout);
  std::vector<std::string> lines;
  std::size_t written = 0;
  for (const auto& rec : records) {
    gateway::CompletionRequest req;
    req.prompt = rec.question;
    req.sampling = profile;
    req.sampling.n = cfg_.k_pairs;
    req.sampling.rng_seed = mix(fnv1a64(rec.id), 0xda1a5ULL);
    auto completions = gateway_->complete(req);

    std::vector<gateway::RewardRequest> reward_reqs;
    for (const auto& c : completions) reward_reqs.push_back({rec.question, c.text});
    auto rewards = gateway_->score_batch(reward_reqs);

    std::vector<data::ResponseSample> samples;
    for (std::size_t i = 0; i < completions.size(); ++i) {
      data::ResponseSample s;
      s.record_id = rec.id;
      s.text = completions[i].text;
      s.length_chars = s.text.size();
      s.truncated = completions[i].truncated;
      s.reward = rewards[i];
      samples.push_back(std::move(s));
    }
    auto pair = curation::build_dpo_pair(samples, cfg_.dpo_rho);
    if (!pair) {
      std::cerr << "pairs: record " << rec.id << " skipped (degenerate rewards)\n";
      continue;
    }
    data::ordered_json j;
    j["schema"] = data::kSchemaVersion;
    j["record_id"] = rec.id;
    j["prompt"] = rec.question;
    j["chosen"] = samples[pair->chosen_index].text;
    j["chosen_reward"] = *samples[pair->chosen_index].reward;
    j["rejected"] = samples[pair->rejected_index].text;
    j["rejected_reward"] = *samples[pair->rejected_index].reward;
    j["rho"] = pair->rho;
    lines.push_back(data::encode_line(j));
    ++written;
  }
  write_all_lines(paths_.pairs, lines);
  checkpoint("pairs_written", written);
  return written;
}

std::string Runner::run_stats() {
  std::ostringstream txt;
  data::ordered_json js;
  js["schema"] = data::kSchemaVersion;

  auto funnel = data::ordered_json::array();
  txt << "retention funnel\n";
  auto add_stage = [&](const std::string& name, std::uint64_t count,
                       std::optional<std::uint64_t> prev) {
    data::ordered_json e;
    e["stage"] = name;
    e["count"] = count;
    txt << "  " << name << ": " << count;
    if (prev && *prev > 0) {
      const double ratio = static_cast<double>(count) / static_cast<double>(*prev);
      e["ratio"] = ratio;
      char buf[32];
      std::snprintf(buf, sizeof(buf), " (%.1f%%)", ratio * 100.0);
      txt << buf;
    }
    txt << "\n";
    funnel.push_back(e);
  };

  std::optional<std::uint64_t> generated;
  if (std::filesystem::exists(paths_.records)) {
    auto records = data::read_records<data::SyntheticRecord>(paths_.records);
    generated = records.size();
    add_stage("generated", records.size(), std::nullopt);

    auto stats = data::dataset_stats(records);
    data::ordered_json ds;
    ds["total"] = stats.total;
    data::ordered_json per_template = data::ordered_json::object();
    for (const auto& [k, v] : stats.per_template) per_template[k] = v;
    ds["per_template"] = per_template;
    data::ordered_json kinds = data::ordered_json::object();
    for (const auto& [k, v] : stats.answer_kinds) kinds[k] = v;
    ds["answer_kinds"] = kinds;
    ds["question_length_percentiles"] = stats.length_percentiles;
    js["dataset"] = ds;

    txt << "answer kinds\n";
    for (const auto& [k, v] : stats.answer_kinds) txt << "  " << k << ": " << v << "\n";
    txt << "question length percentiles (p10,p25,p50,p75,p90):";
    for (auto v : stats.length_percentiles) txt << " " << v;
    txt << "\n";
  }
  if (std::filesystem::exists(paths_.verdicts)) {
    auto verdicts = data::read_records<data::CurationVerdict>(paths_.verdicts);
    std::map<std::string, std::uint64_t> reasons;
    std::uint64_t kept_count = 0;
    for (const auto& v : verdicts) {
      ++reasons[v.reason];
      if (v.decision == "keep") ++kept_count;
    }
    add_stage("kept_after_filters", kept_count, generated);
    data::ordered_json rj = data::ordered_json::object();
    for (const auto& [k, v] : reasons) rj[k] = v;
    js["verdict_reasons"] = rj;
    txt << "verdict reasons\n";
    for (const auto& [k, v] : reasons) txt << "  " << k << ": " << v << "\n";
  }
  if (std::filesystem::exists(paths_.pairs)) {
    const auto lines = read_complete_lines(paths_.pairs);
    add_stage("preference_pairs", lines.size(), generated);
  }
  js["funnel"] = funnel;

  write_all_lines(paths_.stats_json, {data::encode_line(js)});
  write_all_lines(paths_.stats_txt, {txt.str()});
  return txt.str();
}

int exit_code_for_current_exception() {
  try {
    throw;
  } catch (const ConfigError&) {
    return 2;
  } catch (const TransportError&) {
    return 3;
  } catch (const DataError&) {
    return 4;
  } catch (...) {
    return 1;
  }
}

}  // namespace synthgen::pipeline
