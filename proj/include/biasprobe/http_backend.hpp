#pragma once

#include <chrono>
#include <memory>
#include <mutex>
#include <string>

#include "biasprobe/backend.hpp"
#include "json.hpp"

namespace biasprobe {

struct RetryPolicy {
  int max_attempts = 4;  // including the first
  std::chrono::milliseconds initial_backoff{500};
  double multiplier = 2.0;
  std::chrono::milliseconds max_backoff{30000};

  // Delay before attempt `attempt` (2 = first retry).
  std::chrono::milliseconds backoff(int attempt) const;
};

// 429, 5xx, and transport failures (status 0).
bool is_transient_status(int status);

// Client-side token bucket. A rate of 0 disables limiting.
class TokenBucket {
 public:
  explicit TokenBucket(double requests_per_minute, double burst = 1.0);
  void acquire();

 private:
  double rate_per_sec_;
  double capacity_;
  double tokens_;
  std::chrono::steady_clock::time_point last_;
  std::mutex mutex_;
};

struct HttpOptions {
  std::string url;  // e.g. https://api.example.com/v1/chat/completions
  std::string model;
  int max_in_flight = 4;
  double requests_per_minute = 0;
  RetryPolicy retry;
  std::chrono::seconds timeout{60};
  std::string api_key_env = "BIASPROBE_API_KEY";
};

nlohmann::json chat_request_body(const std::string& model, const CompletionRequest& request);
// choices[0].message.content; throws BackendError when absent. A JSON null
// content is an explicit empty completion.
std::string extract_completion_text(const nlohmann::json& response);

class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(HttpOptions options);
  ~HttpBackend() override;

  CompletionResult complete(const CompletionRequest& request, const NotablePerson& truth) override;
  std::string descriptor() const override;

  long attempts() const noexcept;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace biasprobe
