#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "synthgen/records.hpp"

namespace synthgen::gateway {

using data::SamplingParams;

enum class ThinkMode { on, off, not_applicable };

struct CompletionRequest {
  std::string prompt;
  SamplingParams sampling;
  ThinkMode think = ThinkMode::not_applicable;
};

struct Completion {
  std::string text;
  std::string finish_reason;  // "stop" | "length" | backend-specific
  bool truncated = false;     // finish_reason == "length"
};

struct RewardRequest {
  std::string prompt_text;
  std::string response_text;
};

// Narrow backend interfaces; every remote model sits behind one of these.
class CompletionBackend {
public:
  virtual ~CompletionBackend() = default;
  // Returns exactly request.sampling.n completions, in generation order.
  virtual std::vector<Completion> complete(const CompletionRequest&) = 0;
};

class ScoringBackend {
public:
  virtual ~ScoringBackend() = default;
  virtual double score(const RewardRequest&) = 0;
};

// Named sampling profiles.
enum class SamplingProfile { gen_base_or_nothink, gen_think, rollout, if_generation };
std::optional<SamplingProfile> sampling_profile_from_name(const std::string&);
SamplingParams preset_sampling(SamplingProfile profile);

struct GatewayOptions {
  int in_flight_cap = 8;
  int retry_budget = 3;
  int backoff_base_ms = 100;
};

// Shared front door: bounded concurrent fan-out, exponential-backoff retries,
// results delivered in request order.
class Gateway {
public:
  Gateway(std::shared_ptr<CompletionBackend> completion,
          std::shared_ptr<ScoringBackend> scoring, GatewayOptions opts);

  std::vector<std::vector<Completion>> complete_batch(
      const std::vector<CompletionRequest>& requests);
  std::vector<Completion> complete(const CompletionRequest& request);

  std::vector<double> score_batch(const std::vector<RewardRequest>& requests);
  double score(const RewardRequest& request);

private:
  template <typename Req, typename Out>
  std::vector<Out> run_batch(const std::vector<Req>& requests,
                             std::function<Out(const Req&)> one);
  template <typename Fn>
  auto with_retries(const std::string& what, Fn fn) -> decltype(fn());

  std::shared_ptr<CompletionBackend> completion_;
  std::shared_ptr<ScoringBackend> scoring_;
  GatewayOptions opts_;
};

// ---- test backends ----

// Scripted FIFO mock; also tracks observed concurrency so tests can assert
// the in-flight bound.
class QueueMockBackend : public CompletionBackend, public ScoringBackend {
public:
  void enqueue_completion(std::vector<Completion> batch);
  void enqueue_completion_texts(const std::vector<std::string>& texts);
  void enqueue_transport_error(const std::string& msg);
  void enqueue_score(double v);

  std::vector<Completion> complete(const CompletionRequest&) override;
  double score(const RewardRequest&) override;

  int call_count() const { return calls_.load(); }
  int max_observed_concurrency() const { return max_concurrency_.load(); }
  const std::vector<std::string>& prompts_seen() const { return prompts_seen_; }

private:
  struct Item {
    std::vector<Completion> batch;
    std::optional<std::string> error;
  };
  void track_enter();
  void track_exit();

  std::mutex mu_;
  std::vector<Item> completions_;
  std::vector<double> scores_;
  std::size_t completion_next_ = 0, score_next_ = 0;
  std::vector<std::string> prompts_seen_;
  std::atomic<int> calls_{0};
  std::atomic<int> in_flight_{0};
  std::atomic<int> max_concurrency_{0};
};

struct SimBackendOptions {
  std::uint64_t seed = 0;
  int malformed_permille = 0;      // generator outputs missing the end sentinel
  int wrong_target_permille = 0;   // generator targets off by one
  int rollout_wrong_permille = 200;  // rollout answers that miss the truth
};

// Deterministic simulated model: output is a pure function of
// (prompt, sampling rng_seed, sample index). Recognizes the prompt shapes the
// pipeline produces (generation templates, rollouts of its own questions,
// category labeling) and replies in the matching format.
class SimBackend : public CompletionBackend, public ScoringBackend {
public:
  explicit SimBackend(SimBackendOptions opts) : opts_(opts) {}
  std::vector<Completion> complete(const CompletionRequest&) override;
  double score(const RewardRequest&) override;

private:
  std::string one_completion(const std::string& prompt, std::uint64_t h) const;
  SimBackendOptions opts_;
};

// ---- record / replay ----

// Wraps a live backend and persists every (request, response) pair keyed by a
// request digest; in replay mode serves responses from the transcript and
// fails on a miss. Enables hermetic tests against recorded traffic.
class TranscriptStore {
public:
  static std::shared_ptr<TranscriptStore> record_into(std::filesystem::path file);
  static std::shared_ptr<TranscriptStore> replay_from(const std::filesystem::path& file);

  std::shared_ptr<CompletionBackend> wrap_completion(std::shared_ptr<CompletionBackend>);
  std::shared_ptr<ScoringBackend> wrap_scoring(std::shared_ptr<ScoringBackend>);
  void flush();

private:
  friend class TranscriptCompletion;
  friend class TranscriptScoring;
  TranscriptStore() = default;

  bool replay_ = false;
  std::filesystem::path file_;
  std::mutex mu_;
  std::map<std::string, data::ordered_json> entries_;
};

// ---- HTTP backend (chat-completions wire format) ----

struct HttpBackendConfig {
  std::string base_url;        // e.g. http://host:8000
  std::string completion_path = "/v1/chat/completions";
  std::string model;
  std::string api_key;         // empty: no auth header
  std::string score_path;      // classifier-style scoring endpoint; optional
  std::string score_model;
  // Fallback when the backend lacks a think toggle: prepend this directive.
  std::string nothink_directive = "/no_think";
  int timeout_seconds = 120;
};

std::shared_ptr<CompletionBackend> make_http_completion_backend(HttpBackendConfig);
std::shared_ptr<ScoringBackend> make_http_scoring_backend(HttpBackendConfig);

// Request body builders, exposed for wire-format tests.
data::ordered_json build_chat_request(const HttpBackendConfig&, const CompletionRequest&);
std::vector<Completion> parse_chat_response(const std::string& body, int expected_n);

}  // namespace synthgen::gateway
