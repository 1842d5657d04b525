#include "biasprobe/http_backend.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <semaphore>
#include <thread>

#include "biasprobe/error.hpp"
#include "httplib.h"

namespace biasprobe {

std::chrono::milliseconds RetryPolicy::backoff(int attempt) const {
  if (attempt <= 1) return std::chrono::milliseconds{0};
  const double ms = static_cast<double>(initial_backoff.count()) * std::pow(multiplier, attempt - 2);
  return std::chrono::milliseconds{
      static_cast<long long>(std::min(ms, static_cast<double>(max_backoff.count())))};
}

bool is_transient_status(int status) { return status == 0 || status == 429 || status >= 500; }

TokenBucket::TokenBucket(double requests_per_minute, double burst)
    : rate_per_sec_(requests_per_minute / 60.0),
      capacity_(std::max(1.0, burst)),
      tokens_(capacity_),
      last_(std::chrono::steady_clock::now()) {}

void TokenBucket::acquire() {
  if (rate_per_sec_ <= 0) return;
  for (;;) {
    std::chrono::duration<double> wait{0};
    {
      std::lock_guard lock(mutex_);
      const auto now = std::chrono::steady_clock::now();
      tokens_ = std::min(capacity_,
                         tokens_ + std::chrono::duration<double>(now - last_).count() * rate_per_sec_);
      last_ = now;
      if (tokens_ >= 1.0) {
        tokens_ -= 1.0;
        return;
      }
      wait = std::chrono::duration<double>((1.0 - tokens_) / rate_per_sec_);
    }
    std::this_thread::sleep_for(wait);
  }
}

nlohmann::json chat_request_body(const std::string& model, const CompletionRequest& request) {
  return {{"model", model},
          {"temperature", request.temperature},
          {"messages", nlohmann::json::array({{{"role", "user"}, {"content", request.prompt}}})}};
}

std::string extract_completion_text(const nlohmann::json& response) {
  const auto* choices = response.is_object() && response.contains("choices") ? &response["choices"] : nullptr;
  if (!choices || !choices->is_array() || choices->empty())
    throw BackendError("response has no choices", 200);
  const auto& first = (*choices)[0];
  if (!first.is_object() || !first.contains("message") || !first["message"].is_object())
    throw BackendError("first choice has no message", 200);
  const auto& msg = first["message"];
  if (!msg.contains("content")) throw BackendError("message has no content", 200);
  if (msg["content"].is_null()) return {};
  if (!msg["content"].is_string()) throw BackendError("message content is not text", 200);
  return msg["content"].get<std::string>();
}

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Endpoint split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw UsageError("backend url needs a scheme: " + url);
  const auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") throw UsageError("unsupported url scheme: " + scheme);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

struct HttpBackend::Impl {
  HttpOptions options;
  Endpoint endpoint;
  std::string api_key;
  std::counting_semaphore<> in_flight;
  TokenBucket bucket;
  std::atomic<long> attempts{0};

  explicit Impl(HttpOptions o)
      : options(std::move(o)),
        endpoint(split_url(options.url)),
        in_flight(std::max(1, options.max_in_flight)),
        bucket(options.requests_per_minute) {
    if (const char* key = std::getenv(options.api_key_env.c_str())) api_key = key;
  }

  // One HTTP exchange. Returns (status, body); status 0 on transport error.
  std::pair<int, std::string> post(const std::string& body) {
    bucket.acquire();
    in_flight.acquire();
    struct Release {
      std::counting_semaphore<>& s;
      ~Release() { s.release(); }
    } release{in_flight};
    ++attempts;

    httplib::Client client(endpoint.origin);
    client.set_connection_timeout(options.timeout);
    client.set_read_timeout(options.timeout);
    client.set_write_timeout(options.timeout);
    httplib::Headers headers;
    if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);
    auto res = client.Post(endpoint.path, headers, body, "application/json");
    if (!res) return {0, httplib::to_string(res.error())};
    return {res->status, res->body};
  }
};

HttpBackend::HttpBackend(HttpOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {
  if (impl_->options.model.empty()) throw UsageError("http backend needs a model name");
}

HttpBackend::~HttpBackend() = default;

long HttpBackend::attempts() const noexcept { return impl_->attempts.load(); }

std::string HttpBackend::descriptor() const {
  return "http(url=" + impl_->options.url + ",model=" + impl_->options.model + ")";
}

CompletionResult HttpBackend::complete(const CompletionRequest& request, const NotablePerson&) {
  const std::string body = chat_request_body(impl_->options.model, request).dump();
  const auto& retry = impl_->options.retry;
  const int max_attempts = std::max(1, retry.max_attempts);

  int status = 0;
  std::string detail;
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    if (attempt > 1) std::this_thread::sleep_for(retry.backoff(attempt));
    auto [code, text] = impl_->post(body);
    status = code;
    if (code >= 200 && code < 300) {
      nlohmann::json parsed;
      try {
        parsed = nlohmann::json::parse(text);
      } catch (const nlohmann::json::parse_error& e) {
        throw BackendError(std::string("response is not JSON: ") + e.what(), code);
      }
      return {extract_completion_text(parsed), "http", fingerprint(request)};
    }
    detail = text.substr(0, 200);
    if (!is_transient_status(code)) break;
  }
  throw BackendError("request failed" + (status ? " with HTTP " + std::to_string(status) : std::string()) +
                         (detail.empty() ? "" : ": " + detail),
                     status);
}

}  // namespace biasprobe
