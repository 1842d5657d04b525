#pragma once

#include <atomic>
#include <string>

#include "biasprobe/corpus.hpp"

namespace biasprobe {

class ResponseCache;

inline constexpr int kMaxRunIndex = 5;

struct CompletionRequest {
  std::string prompt;
  double temperature = 0;
  int run_index = 1;
  std::string engine;
};

// 0, 0.5 or 1.
bool is_protocol_temperature(double t);

// Throws ValidationError. Non-protocol temperatures in [0, 2] and run indices
// above 5 are accepted only when `relaxed` is set (config override).
void validate(const CompletionRequest& request, bool relaxed = false);

// SHA-256 over the canonical JSON array [engine, prompt, temperature, run_index].
std::string fingerprint(const CompletionRequest& request);

struct CompletionResult {
  std::string raw_text;
  std::string backend;
  std::string request_fingerprint;

  bool operator==(const CompletionResult&) const = default;
};

// Uniform completion contract. `truth` is the ground-truth row the prompt was
// rendered from; only the simulator reads it.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual CompletionResult complete(const CompletionRequest& request, const NotablePerson& truth) = 0;
  virtual std::string descriptor() const = 0;
};

// Serves cached completions and forwards misses to `inner`, recording them.
class CachedBackend final : public Backend {
 public:
  CachedBackend(Backend& inner, ResponseCache& cache) : inner_(inner), cache_(cache) {}

  CompletionResult complete(const CompletionRequest& request, const NotablePerson& truth) override;
  std::string descriptor() const override;

  // Number of requests forwarded to the inner backend.
  long forwarded() const noexcept { return forwarded_.load(); }

 private:
  Backend& inner_;
  ResponseCache& cache_;
  std::atomic<long> forwarded_{0};
};

// Answers only from the cache; a miss throws CacheMissError.
class ReplayBackend final : public Backend {
 public:
  explicit ReplayBackend(const ResponseCache& cache) : cache_(cache) {}

  CompletionResult complete(const CompletionRequest& request, const NotablePerson& truth) override;
  std::string descriptor() const override { return "replay"; }

 private:
  const ResponseCache& cache_;
};

}  // namespace biasprobe
