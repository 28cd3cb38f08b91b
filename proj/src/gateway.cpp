#include "synthgen/gateway.hpp"

#include <cctype>
#include <chrono>
#include <cmath>
#include <fstream>
#include <thread>

#include "synthgen/errors.hpp"
#include "synthgen/rng.hpp"
#include "synthgen/seed_pool.hpp"

namespace synthgen::gateway {

std::optional<SamplingProfile> sampling_profile_from_name(const std::string& name) {
  if (name == "gen_base_or_nothink") return SamplingProfile::gen_base_or_nothink;
  if (name == "gen_think") return SamplingProfile::gen_think;
  if (name == "rollout") return SamplingProfile::rollout;
  if (name == "if_generation") return SamplingProfile::if_generation;
  return std::nullopt;
}

SamplingParams preset_sampling(SamplingProfile profile) {
  SamplingParams p;
  switch (profile) {
    case SamplingProfile::gen_base_or_nothink:
      p.temperature = 0.7;
      p.top_p = 0.8;
      p.max_tokens = 8192;
      break;
    case SamplingProfile::gen_think:
      p.temperature = 0.6;
      p.top_p = 0.95;
      p.max_tokens = 8192;
      break;
    case SamplingProfile::rollout:
      p.temperature = 0.6;
      p.top_p = 0.95;
      p.max_tokens = 4096;
      break;
    case SamplingProfile::if_generation:
      // Not pinned by any source; our documented default.
      p.temperature = 0.9;
      p.top_p = 0.95;
      p.max_tokens = 4096;
      break;
  }
  return p;
}

Gateway::Gateway(std::shared_ptr<CompletionBackend> completion,
                 std::shared_ptr<ScoringBackend> scoring, GatewayOptions opts)
    : completion_(std::move(completion)), scoring_(std::move(scoring)), opts_(opts) {
  if (opts_.in_flight_cap < 1) throw ConfigError("in_flight_cap must be >= 1");
  if (opts_.retry_budget < 0) throw ConfigError("retry_budget must be >= 0");
}

template <typename Fn>
auto Gateway::with_retries(const std::string& what, Fn fn) -> decltype(fn()) {
  for (int attempt = 0;; ++attempt) {
    try {
      return fn();
    } catch (const TransportError& e) {
      if (!e.retryable() || attempt >= opts_.retry_budget)
        throw TransportError("retry budget exhausted for " + what + ": " + e.what(),
                             e.retryable());
      const auto delay =
          std::chrono::milliseconds(opts_.backoff_base_ms * (1LL << attempt));
      if (delay.count() > 0) std::this_thread::sleep_for(delay);
    }
  }
}

template <typename Req, typename Out>
std::vector<Out> Gateway::run_batch(const std::vector<Req>& requests,
                                    std::function<Out(const Req&)> one) {
  std::vector<Out> results(requests.size());
  std::vector<std::exception_ptr> errors(requests.size());
  std::atomic<std::size_t> next{0};
  const int workers =
      static_cast<int>(std::min<std::size_t>(opts_.in_flight_cap, requests.size()));

  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= requests.size()) return;
      try {
        results[i] = one(requests[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };

  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> threads;
    for (int w = 0; w < workers; ++w) threads.emplace_back(work);
    for (auto& t : threads) t.join();
  }
  for (std::size_t i = 0; i < errors.size(); ++i)
    if (errors[i]) std::rethrow_exception(errors[i]);
  return results;
}

std::vector<std::vector<Completion>> Gateway::complete_batch(
    const std::vector<CompletionRequest>& requests) {
  for (const auto& r : requests) r.sampling.validate();
  return run_batch<CompletionRequest, std::vector<Completion>>(
      requests, [this](const CompletionRequest& req) {
        auto out = with_retries("completion request",
                                [&] { return completion_->complete(req); });
        if (static_cast<int>(out.size()) != req.sampling.n)
          throw DataError("backend returned " + std::to_string(out.size()) +
                          " completions, expected " + std::to_string(req.sampling.n));
        return out;
      });
}

std::vector<Completion> Gateway::complete(const CompletionRequest& request) {
  return complete_batch({request}).front();
}

std::vector<double> Gateway::score_batch(const std::vector<RewardRequest>& requests) {
  for (const auto& r : requests)
    if (r.prompt_text.empty() || r.response_text.empty())
      throw ConfigError("reward request fields must be non-empty");
  return run_batch<RewardRequest, double>(requests, [this](const RewardRequest& req) {
    const double v =
        with_retries("scoring request", [&] { return scoring_->score(req); });
    if (!std::isfinite(v))
      throw DataError("scoring backend returned a non-finite reward for prompt: " +
                      req.prompt_text.substr(0, 80));
    return v;
  });
}

double Gateway::score(const RewardRequest& request) {
  return score_batch({request}).front();
}

// ---- QueueMockBackend ----

void QueueMockBackend::enqueue_completion(std::vector<Completion> batch) {
  std::lock_guard lk(mu_);
  completions_.push_back({std::move(batch), std::nullopt});
}

void QueueMockBackend::enqueue_completion_texts(const std::vector<std::string>& texts) {
  std::vector<Completion> batch;
  for (const auto& t : texts) batch.push_back({t, "stop", false});
  enqueue_completion(std::move(batch));
}

void QueueMockBackend::enqueue_transport_error(const std::string& msg) {
  std::lock_guard lk(mu_);
  completions_.push_back({{}, msg});
}

void QueueMockBackend::enqueue_score(double v) {
  std::lock_guard lk(mu_);
  scores_.push_back(v);
}

void QueueMockBackend::track_enter() {
  const int now = in_flight_.fetch_add(1) + 1;
  int prev = max_concurrency_.load();
  while (now > prev && !max_concurrency_.compare_exchange_weak(prev, now)) {
  }
}

void QueueMockBackend::track_exit() { in_flight_.fetch_sub(1); }

std::vector<Completion> QueueMockBackend::complete(const CompletionRequest& req) {
  track_enter();
  calls_.fetch_add(1);
  // hold the slot briefly so concurrent callers overlap measurably
  std::this_thread::sleep_for(std::chrono::milliseconds(1));
  std::lock_guard lk(mu_);
  prompts_seen_.push_back(req.prompt);
  if (completion_next_ >= completions_.size()) {
    track_exit();
    throw DataError("QueueMockBackend: completion queue underflow");
  }
  Item item = completions_[completion_next_++];
  track_exit();
  if (item.error) throw TransportError(*item.error);
  return item.batch;
}

double QueueMockBackend::score(const RewardRequest&) {
  std::lock_guard lk(mu_);
  calls_.fetch_add(1);
  if (score_next_ >= scores_.size())
    throw DataError("QueueMockBackend: score queue underflow");
  return scores_[score_next_++];
}

// ---- SimBackend ----

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
  x ^= x >> 33;
  x *= 0xff51afd7ed558ccdULL;
  x ^= x >> 33;
  return x;
}

// "Compute the sum of X and Y." -> (X, Y)
std::optional<std::pair<long long, long long>> parse_sum_question(const std::string& q) {
  const std::string prefix = "Compute the sum of ";
  auto at = q.find(prefix);
  if (at == std::string::npos) return std::nullopt;
  std::size_t i = at + prefix.size();
  auto read_int = [&](std::size_t& j) -> std::optional<long long> {
    std::string d;
    while (j < q.size() && std::isdigit(static_cast<unsigned char>(q[j]))) d += q[j++];
    if (d.empty()) return std::nullopt;
    return std::stoll(d);
  };
  auto x = read_int(i);
  if (!x || q.compare(i, 5, " and ") != 0) return std::nullopt;
  i += 5;
  auto y = read_int(i);
  if (!y) return std::nullopt;
  return std::make_pair(*x, *y);
}

}  // namespace

std::string SimBackend::one_completion(const std::string& prompt, std::uint64_t h) const {
  // Generation prompts embed seed questions, so a rollout is recognized only
  // when the prompt *is* a bare question rather than merely containing one.
  const bool has_sentinel = prompt.find("[New Question Begin]") != std::string::npos ||
                            prompt.find("#Synthetic Prompt#") != std::string::npos ||
                            prompt.find("<begin>") != std::string::npos;
  std::optional<std::pair<long long, long long>> xy;
  if (!has_sentinel && prompt.rfind("Compute the sum of ", 0) == 0)
    xy = parse_sum_question(prompt);
  if (xy) {
    long long truth = xy->first + xy->second;
    long long ans = truth;
    if ((h >> 32) % 1000 < static_cast<std::uint64_t>(opts_.rollout_wrong_permille))
      ans = truth + 1 + static_cast<long long>(h % 3);
    return "Adding the two numbers step by step gives the total.\nThe final answer is "
           "\\boxed{" + std::to_string(ans) + "}.";
  }

  // Category labeling.
  if (prompt.rfind("Classify the following", 0) == 0) {
    const auto& names = seeds::category_names();
    return names[h % names.size()];
  }

  // Instruction generation, by the format the prompt demands.
  const long long x = 10 + static_cast<long long>(h % 90);
  const long long y = 10 + static_cast<long long>((h >> 8) % 90);
  const std::string question =
      "Compute the sum of " + std::to_string(x) + " and " + std::to_string(y) + ".";
  const bool malformed =
      (h >> 16) % 1000 < static_cast<std::uint64_t>(opts_.malformed_permille);

  if (prompt.find("[Final Answer to New Question Begin]") != std::string::npos) {
    long long target = x + y;
    if ((h >> 24) % 1000 < static_cast<std::uint64_t>(opts_.wrong_target_permille))
      target += 1;
    std::string out = "Considering the seed questions, a comparable arithmetic task "
                      "follows.\n[New Question Begin]" + question;
    out += malformed ? "\n" : "[New Question End]\n";
    out += "[Final Answer to New Question Begin]\\boxed{" + std::to_string(target) +
           "}[Final Answer to New Question End]";
    return out;
  }
  if (prompt.find("[New Question Begin]") != std::string::npos) {
    std::string out = "Considering the seed questions, a comparable arithmetic task "
                      "follows.\n[New Question Begin]" + question;
    out += malformed ? "\n" : "[New Question End]";
    return out;
  }
  if (prompt.find("#Synthetic Prompt#") != std::string::npos) {
    if (malformed) return "- Step 1: nothing in common.\n- Step 2: no plan.";
    return "- Step 1 #Common Elements List#: short user tasks.\n"
           "- Step 2 #Plan#: combine the shared theme into one request.\n"
           "- Step 3 #Synthetic Prompt#: Write a short note about topic " +
           std::to_string(h % 1000) + ".";
  }
  if (prompt.find("<begin>") != std::string::npos) {
    if (malformed) return "A new task without wrapping.";
    return "<begin>Write a short note about topic " + std::to_string(h % 1000) +
           ".</end>";
  }
  return "Echo " + std::to_string(h % 100000);
}

std::vector<Completion> SimBackend::complete(const CompletionRequest& req) {
  std::vector<Completion> out;
  const std::uint64_t base = mix(fnv1a64(req.prompt), mix(opts_.seed, req.sampling.rng_seed));
  for (int i = 0; i < req.sampling.n; ++i) {
    const std::uint64_t h = mix(base, static_cast<std::uint64_t>(i) + 1);
    std::string text = one_completion(req.prompt, h);
    bool truncated = false;
    if (static_cast<int>(text.size()) > req.sampling.max_tokens * 4) {
      text.resize(static_cast<std::size_t>(req.sampling.max_tokens) * 4);
      truncated = true;
    }
    out.push_back({std::move(text), truncated ? "length" : "stop", truncated});
  }
  return out;
}

double SimBackend::score(const RewardRequest& req) {
  const std::uint64_t h =
      mix(fnv1a64(req.prompt_text), mix(opts_.seed ^ 0xabcdULL, fnv1a64(req.response_text)));
  return static_cast<double>(h % 1000000) / 1000000.0;
}

// ---- TranscriptStore ----

namespace {

std::string request_digest(const std::string& kind, const data::ordered_json& payload) {
  const std::string blob = kind + "\x1f" + data::canonical_dump(payload);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(blob)));
  return buf;
}

data::ordered_json completion_request_json(const CompletionRequest& req) {
  data::ordered_json j;
  j["prompt"] = req.prompt;
  j["temperature"] = req.sampling.temperature;
  j["top_p"] = req.sampling.top_p;
  j["max_tokens"] = req.sampling.max_tokens;
  j["n"] = req.sampling.n;
  j["rng_seed"] = req.sampling.rng_seed;
  j["think"] = static_cast<int>(req.think);
  return j;
}

}  // namespace

class TranscriptCompletion : public CompletionBackend {
public:
  TranscriptCompletion(TranscriptStore* store, std::shared_ptr<CompletionBackend> inner)
      : store_(store), inner_(std::move(inner)) {}

  std::vector<Completion> complete(const CompletionRequest& req) override {
    const std::string key = request_digest("complete", completion_request_json(req));
    {
      std::lock_guard lk(store_->mu_);
      auto it = store_->entries_.find(key);
      if (it != store_->entries_.end()) return decode(it->second);
      if (store_->replay_)
        throw DataError("transcript miss for completion request " + key);
    }
    auto out = inner_->complete(req);
    data::ordered_json enc = data::ordered_json::array();
    for (const auto& c : out) {
      data::ordered_json e;
      e["text"] = c.text;
      e["finish_reason"] = c.finish_reason;
      e["truncated"] = c.truncated;
      enc.push_back(e);
    }
    std::lock_guard lk(store_->mu_);
    store_->entries_[key] = enc;
    return out;
  }

private:
  static std::vector<Completion> decode(const data::ordered_json& enc) {
    std::vector<Completion> out;
    for (const auto& e : enc)
      out.push_back({e.at("text").get<std::string>(),
                     e.at("finish_reason").get<std::string>(),
                     e.at("truncated").get<bool>()});
    return out;
  }
  TranscriptStore* store_;
  std::shared_ptr<CompletionBackend> inner_;
};

class TranscriptScoring : public ScoringBackend {
public:
  TranscriptScoring(TranscriptStore* store, std::shared_ptr<ScoringBackend> inner)
      : store_(store), inner_(std::move(inner)) {}

  double score(const RewardRequest& req) override {
    data::ordered_json payload;
    payload["prompt"] = req.prompt_text;
    payload["response"] = req.response_text;
    const std::string key = request_digest("score", payload);
    {
      std::lock_guard lk(store_->mu_);
      auto it = store_->entries_.find(key);
      if (it != store_->entries_.end()) return it->second.get<double>();
      if (store_->replay_) throw DataError("transcript miss for score request " + key);
    }
    const double v = inner_->score(req);
    std::lock_guard lk(store_->mu_);
    store_->entries_[key] = v;
    return v;
  }

private:
  TranscriptStore* store_;
  std::shared_ptr<ScoringBackend> inner_;
};

std::shared_ptr<TranscriptStore> TranscriptStore::record_into(std::filesystem::path file) {
  auto s = std::shared_ptr<TranscriptStore>(new TranscriptStore());
  s->file_ = std::move(file);
  return s;
}

std::shared_ptr<TranscriptStore> TranscriptStore::replay_from(const std::filesystem::path& file) {
  auto s = std::shared_ptr<TranscriptStore>(new TranscriptStore());
  s->replay_ = true;
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ConfigError("transcript file not found: " + file.string());
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto j = data::ordered_json::parse(line);
    s->entries_[j.at("key").get<std::string>()] = j.at("response");
  }
  return s;
}

void TranscriptStore::flush() {
  if (replay_ || file_.empty()) return;
  std::lock_guard lk(mu_);
  std::ofstream out(file_, std::ios::binary | std::ios::trunc);
  for (const auto& [key, response] : entries_) {
    data::ordered_json j;
    j["key"] = key;
    j["response"] = response;
    out << data::encode_line(j);
  }
}

std::shared_ptr<CompletionBackend> TranscriptStore::wrap_completion(
    std::shared_ptr<CompletionBackend> inner) {
  return std::make_shared<TranscriptCompletion>(this, std::move(inner));
}

std::shared_ptr<ScoringBackend> TranscriptStore::wrap_scoring(
    std::shared_ptr<ScoringBackend> inner) {
  return std::make_shared<TranscriptScoring>(this, std::move(inner));
}

}  // namespace synthgen::gateway
