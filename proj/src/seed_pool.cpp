#include "synthgen/seed_pool.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <unordered_map>

#include "synthgen/answer.hpp"
#include "synthgen/errors.hpp"
#include "synthgen/gateway.hpp"
#include "synthgen/rng.hpp"

namespace synthgen::seeds {

const std::array<std::string, 8>& category_names() {
  static const std::array<std::string, 8> names = {
      "Writing & Storytelling", "Technical & Programming", "Creative & Design",
      "Data & Analysis",        "Education & Research",    "Communication & Support",
      "Business & Marketing",   "Miscellaneous",
  };
  return names;
}

bool is_valid_category(const std::string& name) {
  const auto& names = category_names();
  return std::find(names.begin(), names.end(), name) != names.end();
}

bool verifiable_filter(const SeedInstruction& seed) {
  if (!seed.gold_answer) return false;
  return verify::parse_answer(*seed.gold_answer).has_value();
}

SeedPool load_seed_pool(const std::filesystem::path& path, PoolMode mode) {
  auto raw = data::read_records<SeedInstruction>(path);

  std::unordered_map<std::string, std::size_t> seen;  // id -> 1-based line
  for (std::size_t i = 0; i < raw.size(); ++i) {
    auto [it, inserted] = seen.emplace(raw[i].id, i + 1);
    if (!inserted)
      throw DataError("duplicate seed id '" + raw[i].id + "' at lines " +
                      std::to_string(it->second) + " and " + std::to_string(i + 1));
    if (raw[i].category && !is_valid_category(*raw[i].category))
      throw DataError("unknown category '" + *raw[i].category + "' at line " +
                      std::to_string(i + 1));
  }

  SeedPool pool;
  pool.mode = mode;
  if (mode == PoolMode::reasoning) {
    for (auto& s : raw) {
      if (verifiable_filter(s))
        pool.seeds.push_back(std::move(s));
      else
        pool.rejected.emplace_back(s.id, s.gold_answer
                                             ? "gold answer is not a verifiable form"
                                             : "missing gold answer");
    }
  } else {
    pool.seeds = std::move(raw);
  }
  return pool;
}

std::vector<FewShotDraw> sample_fewshot(const SeedPool& pool, DrawMode mode,
                                        std::uint64_t rng_seed, std::size_t count) {
  if (pool.seeds.size() < 2) throw ConfigError("seed pool must have at least 2 seeds");
  Rng rng(rng_seed);
  std::vector<FewShotDraw> out;
  out.reserve(count);

  if (mode == DrawMode::uniform) {
    for (std::size_t k = 0; k < count; ++k) {
      const std::size_t a = rng.below(pool.seeds.size());
      std::size_t b = rng.below(pool.seeds.size() - 1);
      if (b >= a) ++b;
      out.push_back({pool.seeds[a], pool.seeds[b], mode, rng_seed});
    }
    return out;
  }

  // same_category: categories with fewer than 2 members are ineligible.
  std::map<std::string, std::vector<std::size_t>> by_category;
  for (std::size_t i = 0; i < pool.seeds.size(); ++i) {
    const auto& c = pool.seeds[i].category;
    by_category[c ? *c : std::string(kFallbackCategory)].push_back(i);
  }
  std::vector<const std::vector<std::size_t>*> eligible;
  for (const auto& name : category_names()) {
    auto it = by_category.find(name);
    if (it != by_category.end() && it->second.size() >= 2)
      eligible.push_back(&it->second);
  }
  if (eligible.empty())
    throw ConfigError("no category has 2 or more seeds; cannot draw same-category pairs");

  for (std::size_t k = 0; k < count; ++k) {
    const auto& members = *eligible[rng.below(eligible.size())];
    const std::size_t a = rng.below(members.size());
    std::size_t b = rng.below(members.size() - 1);
    if (b >= a) ++b;
    out.push_back({pool.seeds[members[a]], pool.seeds[members[b]], mode, rng_seed});
  }
  return out;
}

std::string category_prompt(const std::string& seed_text) {
  std::ostringstream ss;
  ss << "Classify the following user instruction into exactly one of these "
        "categories:\n";
  for (const auto& name : category_names()) ss << "- " << name << "\n";
  ss << "Reply with the category name only.\n\nInstruction:\n" << seed_text;
  return ss.str();
}

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

void assign_categories(SeedPool& pool, gateway::Gateway& gw) {
  std::vector<std::size_t> pending;
  std::vector<gateway::CompletionRequest> requests;
  for (std::size_t i = 0; i < pool.seeds.size(); ++i) {
    if (pool.seeds[i].category) continue;  // idempotent on labeled pools
    gateway::CompletionRequest req;
    req.prompt = category_prompt(pool.seeds[i].text);
    req.sampling.temperature = 0.0;
    req.sampling.top_p = 1.0;
    req.sampling.max_tokens = 32;
    req.sampling.n = 1;
    pending.push_back(i);
    requests.push_back(std::move(req));
  }
  if (requests.empty()) return;
  auto results = gw.complete_batch(requests);
  for (std::size_t k = 0; k < pending.size(); ++k) {
    const std::string label = trim(results[k].front().text);
    pool.seeds[pending[k]].category =
        is_valid_category(label) ? label : std::string(kFallbackCategory);
  }
}

namespace {

std::vector<std::string> tokenize_ws(const std::string& s) {
  std::vector<std::string> toks;
  std::istringstream ss(s);
  std::string t;
  while (ss >> t) toks.push_back(t);
  return toks;
}

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace

double rouge_l_f1(const std::string& candidate, const std::string& reference) {
  const auto c = tokenize_ws(candidate);
  const auto r = tokenize_ws(reference);
  const std::size_t lcs = lcs_length(c, r);
  if (lcs == 0) return 0.0;
  const double p = static_cast<double>(lcs) / static_cast<double>(c.size());
  const double rec = static_cast<double>(lcs) / static_cast<double>(r.size());
  return 2.0 * p * rec / (p + rec);
}

std::vector<std::string> dedup_rouge_l(const std::vector<std::string>& candidates,
                                       const std::vector<std::string>& references,
                                       double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0))
    throw ConfigError("dedup threshold must be in (0,1]");
  std::vector<std::string> kept;
  for (const auto& cand : candidates) {
    double max_sim = 0.0;
    for (const auto& ref : references)
      max_sim = std::max(max_sim, rouge_l_f1(cand, ref));
    for (const auto& acc : kept)
      max_sim = std::max(max_sim, rouge_l_f1(cand, acc));
    if (max_sim < threshold) kept.push_back(cand);
  }
  return kept;
}

}  // namespace synthgen::seeds
