#include "synthgen/curation.hpp"

#include <algorithm>
#include <cmath>

#include "synthgen/errors.hpp"

namespace synthgen::curation {

VoteTally tally_votes(const std::vector<ResponseSample>& samples) {
  VoteTally tally;
  tally.total = samples.size();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].truncated || !samples[i].answer) continue;
    auto parsed = verify::parse_answer(*samples[i].answer);
    if (!parsed) continue;
    bool placed = false;
    for (auto& cluster : tally.clusters) {
      if (verify::answers_equivalent(cluster.representative, *parsed)) {
        ++cluster.count;
        cluster.member_indices.push_back(i);
        placed = true;
        break;
      }
    }
    if (!placed) {
      VoteCluster c;
      c.representative = std::move(*parsed);
      c.count = 1;
      c.member_indices.push_back(i);
      tally.clusters.push_back(std::move(c));
    }
  }
  for (std::size_t i = 0; i < tally.clusters.size(); ++i) {
    if (!tally.majority_cluster ||
        tally.clusters[i].count > tally.clusters[*tally.majority_cluster].count)
      tally.majority_cluster = i;  // strict > keeps the earliest-founded on ties
  }
  return tally;
}

CurationVerdict self_consistency_filter(const SyntheticRecord& record,
                                        const VoteTally& tally, double threshold) {
  CurationVerdict v;
  v.record_id = record.id;
  if (tally.total == 0 || !tally.majority_cluster) {
    // nothing parseable voted at all
    v.decision = "drop";
    v.reason = "malformed";
    v.sc_rate = 0.0;
    return v;
  }
  const auto& majority = tally.clusters[*tally.majority_cluster];
  const double sc = static_cast<double>(majority.count) / static_cast<double>(tally.total);
  v.sc_rate = sc;
  v.majority_answer = majority.representative.canonical;
  if (sc >= threshold) {
    v.decision = "keep";
    v.reason = "kept";
  } else {
    v.decision = "drop";
    v.reason = "sc_below_threshold";
  }
  return v;
}

CurationVerdict answer_consistency_filter(const SyntheticRecord& record,
                                          const VoteTally& tally) {
  if (!record.target_answer)
    throw ConfigError("answer-consistency filter requires a solve-template record "
                      "with a target answer (record " + record.id + ")");
  auto target = verify::parse_answer(*record.target_answer);

  CurationVerdict v;
  v.record_id = record.id;
  if (tally.majority_cluster && tally.total > 0)
    v.sc_rate = static_cast<double>(tally.clusters[*tally.majority_cluster].count) /
                static_cast<double>(tally.total);
  if (!tally.majority_cluster || !target) {
    v.decision = "drop";
    v.reason = !target ? "malformed" : "majority_target_mismatch";
    return v;
  }
  const auto& majority = tally.clusters[*tally.majority_cluster];
  v.majority_answer = majority.representative.canonical;
  if (verify::answers_equivalent(majority.representative, *target)) {
    v.decision = "keep";
    v.reason = "kept";
  } else {
    v.decision = "drop";
    v.reason = "majority_target_mismatch";
  }
  return v;
}

std::vector<RipVerdict> rip_filter(const std::vector<RipInput>& batch,
                                   double keep_quantile) {
  if (!(keep_quantile >= 0.0 && keep_quantile <= 1.0))
    throw ConfigError("rip keep_quantile must be in [0,1]");
  std::vector<RipVerdict> out;
  out.reserve(batch.size());
  for (const auto& rec : batch) {
    if (rec.rewards.empty())
      throw ConfigError("rip filter requires at least one reward per record (record " +
                        rec.record_id + ")");
    for (double r : rec.rewards)
      if (!std::isfinite(r))
        throw DataError("non-finite reward for record " + rec.record_id);
    RipVerdict v;
    v.record_id = rec.record_id;
    v.prompt_score = *std::min_element(rec.rewards.begin(), rec.rewards.end());
    out.push_back(v);
  }
  if (out.empty()) return out;

  std::vector<double> sorted;
  sorted.reserve(out.size());
  for (const auto& v : out) sorted.push_back(v.prompt_score);
  std::sort(sorted.begin(), sorted.end());

  // Nominally drop the lowest floor(q*N); the cut value itself stays kept,
  // so ties at the cut survive.
  const std::size_t drop =
      std::min<std::size_t>(static_cast<std::size_t>(keep_quantile * sorted.size()),
                            sorted.size() - 1);
  const double cut = sorted[drop];
  for (auto& v : out) {
    const auto at_or_below =
        std::upper_bound(sorted.begin(), sorted.end(), v.prompt_score) - sorted.begin();
    v.quantile_rank = static_cast<double>(at_or_below) / static_cast<double>(sorted.size());
    v.kept = v.prompt_score >= cut;
  }
  return out;
}

std::size_t best_of_k_target(const std::vector<ResponseSample>& samples) {
  if (samples.empty()) throw ConfigError("best-of-k requires at least one sample");
  std::size_t best = 0;
  for (std::size_t i = 1; i < samples.size(); ++i) {
    const double ri = samples[i].reward.value_or(-HUGE_VAL);
    const double rb = samples[best].reward.value_or(-HUGE_VAL);
    if (ri > rb || (ri == rb && samples[i].length_chars < samples[best].length_chars))
      best = i;
  }
  return best;
}

std::optional<PreferencePair> build_dpo_pair(const std::vector<ResponseSample>& samples,
                                             double rho) {
  if (samples.size() < 2)
    throw ConfigError("dpo pair selection requires at least 2 samples");
  for (const auto& s : samples)
    if (!s.reward || !std::isfinite(*s.reward))
      throw DataError("dpo pair selection requires a finite reward on every sample");

  double max_r = *samples[0].reward, min_r = *samples[0].reward;
  for (const auto& s : samples) {
    max_r = std::max(max_r, *s.reward);
    min_r = std::min(min_r, *s.reward);
  }
  const double band = max_r - rho * (max_r - min_r);

  // chosen: shortest within the band, earliest on length ties
  std::optional<std::size_t> chosen;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (*samples[i].reward < band) continue;
    if (!chosen || samples[i].length_chars < samples[*chosen].length_chars) chosen = i;
  }

  // rejected: lowest reward; ties -> longest, then earliest
  std::size_t rejected = 0;
  for (std::size_t i = 1; i < samples.size(); ++i) {
    const double ri = *samples[i].reward, rr = *samples[rejected].reward;
    if (ri < rr || (ri == rr && samples[i].length_chars > samples[rejected].length_chars))
      rejected = i;
  }

  if (!chosen || *chosen == rejected) return std::nullopt;  // degenerate prompt
  PreferencePair pair;
  pair.chosen_index = *chosen;
  pair.rejected_index = rejected;
  pair.rho = rho;
  return pair;
}

}  // namespace synthgen::curation
