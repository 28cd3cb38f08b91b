#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "synthgen/records.hpp"

namespace synthgen::gateway {
class Gateway;
}

namespace synthgen::seeds {

using data::SeedInstruction;

enum class PoolMode { reasoning, instruction_following };

// The closed 8-category taxonomy for instruction-following seeds.
const std::array<std::string, 8>& category_names();
bool is_valid_category(const std::string& name);
inline constexpr const char* kFallbackCategory = "Miscellaneous";

struct SeedPool {
  PoolMode mode;
  std::vector<SeedInstruction> seeds;
  // reasoning mode: seeds rejected for lacking a verifiable answer form
  std::vector<std::pair<std::string, std::string>> rejected;  // id, reason
};

// True iff the gold answer parses as a verifiable form (scalar, fraction,
// decimal, radical, yes/no, choice A-D, or single-variable closed form).
bool verifiable_filter(const SeedInstruction& seed);

// Loads and validates a pool. Duplicate ids raise DataError naming both
// lines; reasoning seeds without a verifiable gold answer are set aside in
// `rejected`.
SeedPool load_seed_pool(const std::filesystem::path& path, PoolMode mode);

enum class DrawMode { uniform, same_category };

struct FewShotDraw {
  SeedInstruction seed_a;
  SeedInstruction seed_b;
  DrawMode mode;
  std::uint64_t rng_seed;
};

// Deterministic few-shot pair sampling: without replacement within a draw,
// with replacement across draws. same_category draws a category uniformly
// over categories with >= 2 members, then 2 distinct seeds within it.
std::vector<FewShotDraw> sample_fewshot(const SeedPool& pool, DrawMode mode,
                                        std::uint64_t rng_seed, std::size_t count);

// One backend call per seed with a fixed single-label prompt; labels outside
// the taxonomy fall back to Miscellaneous. Already-labeled seeds are kept.
std::string category_prompt(const std::string& seed_text);
void assign_categories(SeedPool& pool, gateway::Gateway& gw);

// ROUGE-L F1 over whitespace tokens (LCS based).
double rouge_l_f1(const std::string& candidate, const std::string& reference);

// Greedy dedup in input order: a candidate is dropped iff its max ROUGE-L F1
// against the pool or any previously accepted candidate is >= threshold.
std::vector<std::string> dedup_rouge_l(const std::vector<std::string>& candidates,
                                       const std::vector<std::string>& references,
                                       double threshold);

}  // namespace synthgen::seeds
