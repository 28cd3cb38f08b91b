#pragma once

#include <optional>
#include <string>
#include <vector>

#include "synthgen/answer.hpp"
#include "synthgen/records.hpp"

namespace synthgen::curation {

using data::CurationVerdict;
using data::ResponseSample;
using data::SyntheticRecord;
using verify::AnswerForm;

struct VoteCluster {
  AnswerForm representative;
  std::size_t count = 0;
  std::vector<std::size_t> member_indices;
};

struct VoteTally {
  std::vector<VoteCluster> clusters;
  std::size_t total = 0;  // K, including unparseable / truncated samples
  std::optional<std::size_t> majority_cluster;  // largest; earliest founded wins ties
};

// Greedy first-fit clustering in sample order: each parseable answer joins
// the first cluster whose representative it is equivalent to, else founds a
// new one. Truncated samples count toward K but never vote.
VoteTally tally_votes(const std::vector<ResponseSample>& samples);

inline constexpr double kDefaultScThreshold = 0.5;
inline constexpr double kDefaultRipKeepQuantile = 0.5;
inline constexpr double kDefaultDpoRho = 0.2;

// Keep iff a majority exists and majority_count / K >= threshold (boundary
// inclusive).
CurationVerdict self_consistency_filter(const SyntheticRecord& record,
                                        const VoteTally& tally,
                                        double threshold = kDefaultScThreshold);

// Keep iff the rollout majority answer matches the record's generated target.
// Requires a solve-template record (target present); else ConfigError.
CurationVerdict answer_consistency_filter(const SyntheticRecord& record,
                                          const VoteTally& tally);

struct RipInput {
  std::string record_id;
  std::vector<double> rewards;  // >= 1 finite reward each
};

struct RipVerdict {
  std::string record_id;
  double prompt_score = 0;   // min of the K rewards
  double quantile_rank = 0;  // fraction of batch scores <= this one
  bool kept = false;
};

// Batch-empirical cut: drop the lowest floor(keep_quantile * N) prompt
// scores; scores tied with the first kept one are all kept.
std::vector<RipVerdict> rip_filter(const std::vector<RipInput>& batch,
                                   double keep_quantile = kDefaultRipKeepQuantile);

// Highest reward wins; ties prefer the shorter response, then earlier index.
std::size_t best_of_k_target(const std::vector<ResponseSample>& samples);

struct PreferencePair {
  std::size_t chosen_index = 0;
  std::size_t rejected_index = 0;
  double rho = kDefaultDpoRho;
};

// Length-normalized pair selection: chosen is the shortest sample whose
// reward is within rho * (max - min) of the max; rejected is the lowest
// reward (ties: longest, then earliest). Degenerate prompts yield nullopt.
std::optional<PreferencePair> build_dpo_pair(const std::vector<ResponseSample>& samples,
                                             double rho = kDefaultDpoRho);

}  // namespace synthgen::curation
