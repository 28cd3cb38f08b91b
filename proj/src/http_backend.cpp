#include <memory>

#include <httplib.h>

#include "synthgen/errors.hpp"
#include "synthgen/gateway.hpp"

namespace synthgen::gateway {

data::ordered_json build_chat_request(const HttpBackendConfig& cfg,
                                      const CompletionRequest& req) {
  data::ordered_json body;
  body["model"] = cfg.model;
  data::ordered_json msg;
  msg["role"] = "user";
  // Fallback for backends without a native reasoning toggle: a directive
  // prefix on the user message.
  msg["content"] = req.think == ThinkMode::off ? cfg.nothink_directive + " " + req.prompt
                                               : req.prompt;
  body["messages"] = data::ordered_json::array({msg});
  body["temperature"] = req.sampling.temperature;
  body["top_p"] = req.sampling.top_p;
  body["max_tokens"] = req.sampling.max_tokens;
  body["n"] = req.sampling.n;
  body["seed"] = req.sampling.rng_seed;
  if (req.think == ThinkMode::on || req.think == ThinkMode::off) {
    data::ordered_json extra;
    extra["enable_thinking"] = req.think == ThinkMode::on;
    body["chat_template_kwargs"] = extra;
  }
  return body;
}

std::vector<Completion> parse_chat_response(const std::string& body, int expected_n) {
  data::ordered_json j;
  try {
    j = data::ordered_json::parse(body);
  } catch (const std::exception& e) {
    throw TransportError(std::string("unparseable completion response: ") + e.what());
  }
  if (!j.contains("choices") || !j["choices"].is_array())
    throw DataError("completion response missing choices");
  std::vector<Completion> out;
  for (const auto& choice : j["choices"]) {
    Completion c;
    c.text = choice.at("message").at("content").get<std::string>();
    c.finish_reason = choice.value("finish_reason", "stop");
    c.truncated = c.finish_reason == "length";
    out.push_back(std::move(c));
  }
  if (static_cast<int>(out.size()) != expected_n)
    throw DataError("completion response has " + std::to_string(out.size()) +
                    " choices, expected " + std::to_string(expected_n));
  return out;
}

namespace {

class HttpBase {
protected:
  explicit HttpBase(HttpBackendConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.base_url.empty()) throw ConfigError("http backend requires base_url");
  }

  std::string post(const std::string& path, const std::string& body) {
    httplib::Client client(cfg_.base_url);
    client.set_read_timeout(cfg_.timeout_seconds, 0);
    client.set_connection_timeout(cfg_.timeout_seconds, 0);
    httplib::Headers headers;
    if (!cfg_.api_key.empty())
      headers.emplace("Authorization", "Bearer " + cfg_.api_key);
    auto res = client.Post(path, headers, body, "application/json");
    if (!res)
      throw TransportError("transport failure: " + httplib::to_string(res.error()));
    if (res->status >= 400 && res->status < 500)
      throw TransportError("HTTP " + std::to_string(res->status) + ": " + res->body,
                           /*retryable=*/false);
    if (res->status >= 500)
      throw TransportError("HTTP " + std::to_string(res->status) + ": " + res->body);
    return res->body;
  }

  HttpBackendConfig cfg_;
};

class HttpCompletionBackend final : public CompletionBackend, HttpBase {
public:
  explicit HttpCompletionBackend(HttpBackendConfig cfg) : HttpBase(std::move(cfg)) {}

  std::vector<Completion> complete(const CompletionRequest& req) override {
    const auto body = build_chat_request(cfg_, req);
    return parse_chat_response(post(cfg_.completion_path, data::canonical_dump(body)),
                               req.sampling.n);
  }
};

class HttpScoringBackend final : public ScoringBackend, HttpBase {
public:
  explicit HttpScoringBackend(HttpBackendConfig cfg) : HttpBase(std::move(cfg)) {
    if (cfg_.score_path.empty())
      throw ConfigError("http scoring backend requires score_path");
  }

  double score(const RewardRequest& req) override {
    data::ordered_json body;
    body["model"] = cfg_.score_model.empty() ? cfg_.model : cfg_.score_model;
    body["prompt"] = req.prompt_text;
    body["response"] = req.response_text;
    const std::string raw = post(cfg_.score_path, data::canonical_dump(body));
    data::ordered_json j;
    try {
      j = data::ordered_json::parse(raw);
    } catch (const std::exception& e) {
      throw TransportError(std::string("unparseable score response: ") + e.what());
    }
    if (j.contains("score") && j["score"].is_number()) return j["score"].get<double>();
    if (j.contains("reward") && j["reward"].is_number()) return j["reward"].get<double>();
    throw DataError("score response missing a numeric score field");
  }
};

}  // namespace

std::shared_ptr<CompletionBackend> make_http_completion_backend(HttpBackendConfig cfg) {
  return std::make_shared<HttpCompletionBackend>(std::move(cfg));
}

std::shared_ptr<ScoringBackend> make_http_scoring_backend(HttpBackendConfig cfg) {
  return std::make_shared<HttpScoringBackend>(std::move(cfg));
}

}  // namespace synthgen::gateway
