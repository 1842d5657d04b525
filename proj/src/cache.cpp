#include "biasprobe/cache.hpp"

#include "json.hpp"

#include "biasprobe/error.hpp"
#include "biasprobe/text.hpp"

namespace biasprobe {
ResponseCache::ResponseCache(ResponseCache&&) noexcept = default;
ResponseCache& ResponseCache::operator=(ResponseCache&&) noexcept = default;
ResponseCache::~ResponseCache() = default;

ResponseCache ResponseCache::in_memory() { return ResponseCache(); }

ResponseCache ResponseCache::open(const std::filesystem::path& path, CacheMode mode) {
  ResponseCache cache;
  cache.path_ = path;
  if (std::filesystem::exists(path)) {
    std::ifstream in(path);
    if (!in) throw PathError("cannot read cache file: " + path.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        const auto j = nlohmann::json::parse(line);
        CompletionResult r;
        r.request_fingerprint = j.at("fingerprint").get<std::string>();
        r.raw_text = j.at("raw_text").get<std::string>();
        r.backend = j.value("backend", "");
        cache.index_.try_emplace(r.request_fingerprint, std::move(r));
      } catch (const nlohmann::json::exception& e) {
        if (mode == CacheMode::Strict) throw ParseError(std::string("corrupt cache line: ") + e.what(), line_no);
        cache.warnings_.push_back(path.string() + ":" + std::to_string(line_no) +
                                  ": skipped corrupt cache line");
      }
    }
  } else if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  cache.out_.open(path, std::ios::app | std::ios::binary);
  if (!cache.out_) throw PathError("cannot open cache file for append: " + path.string());
  return cache;
}

void ResponseCache::record(const CompletionRequest& request, const CompletionResult& result) {
  nlohmann::ordered_json j;
  j["fingerprint"] = result.request_fingerprint;
  j["prompt"] = request.prompt;
  j["temperature"] = request.temperature;
  j["run_index"] = request.run_index;
  j["engine"] = request.engine;
  j["raw_text"] = result.raw_text;
  j["backend"] = result.backend;
  j["timestamp"] = text::utc_timestamp();
  const std::string line = j.dump() + "\n";

  std::lock_guard lock(*mutex_);
  if (out_.is_open()) {
    out_.write(line.data(), static_cast<std::streamsize>(line.size()));
    out_.flush();
    if (!out_) throw Error("failed to append to cache file " + path_.string());
  }
  index_.try_emplace(result.request_fingerprint, result);
}

std::optional<CompletionResult> ResponseCache::lookup(const std::string& fp) const {
  std::lock_guard lock(*mutex_);
  auto it = index_.find(fp);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t ResponseCache::size() const {
  std::lock_guard lock(*mutex_);
  return index_.size();
}

}  // namespace biasprobe
