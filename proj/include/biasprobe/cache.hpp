#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "biasprobe/backend.hpp"

namespace biasprobe {

enum class CacheMode { Lenient, Strict };

// Append-only JSONL store of completions keyed by request fingerprint.
// Line fields: fingerprint, prompt, temperature, run_index, engine, raw_text,
// backend, timestamp. The first record for a fingerprint wins.
class ResponseCache {
 public:
  // Loads an existing file (creating it if absent) and appends to it. Corrupt
  // lines are skipped with a warning (Lenient) or raise ParseError (Strict).
  static ResponseCache open(const std::filesystem::path& path, CacheMode mode = CacheMode::Lenient);
  // Unbacked cache, for tests and dry runs.
  static ResponseCache in_memory();

  ResponseCache(ResponseCache&&) noexcept;
  ResponseCache& operator=(ResponseCache&&) noexcept;
  ~ResponseCache();

  // Appends one line and flushes it. Safe to call from several threads.
  void record(const CompletionRequest& request, const CompletionResult& result);
  std::optional<CompletionResult> lookup(const std::string& fingerprint) const;

  std::size_t size() const;
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  ResponseCache() = default;

  std::filesystem::path path_;
  std::ofstream out_;
  std::unordered_map<std::string, CompletionResult> index_;
  std::vector<std::string> warnings_;
  mutable std::unique_ptr<std::mutex> mutex_ = std::make_unique<std::mutex>();
};

}  // namespace biasprobe
