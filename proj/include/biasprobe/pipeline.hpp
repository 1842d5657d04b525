#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "biasprobe/backend.hpp"
#include "biasprobe/config.hpp"
#include "biasprobe/metrics.hpp"

namespace biasprobe {

// File names inside a run directory.
inline constexpr std::string_view kRunsFile = "runs.jsonl";
inline constexpr std::string_view kCacheFile = "cache.jsonl";
inline constexpr std::string_view kManifestFile = "manifest.json";
inline constexpr std::string_view kMetricsFile = "metrics.json";

// The manifest hash covers every field except "timestamps" and "hash".
std::string manifest_hash(const nlohmann::json& manifest);
nlohmann::json read_manifest(const std::filesystem::path& path);

// CSV outputs start with this line.
std::string manifest_comment(const std::string& hash);

struct IngestSummary {
  std::size_t persons = 0;
  std::size_t prompts = 0;
  std::vector<std::string> warnings;
};

// Validates every configured corpus and writes <out>/prompts.jsonl.
IngestSummary cmd_ingest(const Config& config);

struct RunSummary {
  std::size_t jobs = 0;            // prompt group x temperature x run
  std::size_t completed_jobs = 0;
  std::size_t records = 0;         // one per person per completed job
  long backend_calls = 0;          // requests that missed the replay cache
  int failures = 0;                // failed records
  bool interrupted = false;        // stopped by runtime.max_requests
  std::string manifest_hash;
  std::vector<std::string> warnings;
};

// Executes every prompt group x temperature x run through the configured
// backend (or `backend` when given), resuming from <out>/cache.jsonl, and
// writes <out>/runs.jsonl and <out>/manifest.json.
RunSummary cmd_run(const Config& config, Backend* backend = nullptr);

struct ScoreOptions {
  std::vector<std::filesystem::path> runs;
  std::optional<std::filesystem::path> ssa;
  std::filesystem::path out;
  InferenceOptions inference;
  std::optional<TaskKind> task;                   // requested slices
  std::optional<std::vector<double>> temperatures;
  bool strict_gender_table = false;
};

struct ScoreSummary {
  std::string manifest_hash;
  std::vector<SliceMetrics> slices;
  std::vector<std::string> warnings;
};

// Writes metrics.json and miss_rate.csv / fairness.csv / name_gender.csv into `out`.
ScoreSummary cmd_score(const ScoreOptions& options);

struct AssociateOptions {
  std::vector<std::filesystem::path> runs;
  std::vector<CorpusSpec> corpora;  // optional ground truth; records are used when empty
  std::filesystem::path embeddings;
  std::optional<std::filesystem::path> ssa;
  std::filesystem::path out;
  InferenceOptions inference;
  int min_names = 5;
};

struct AssociateSummary {
  std::string manifest_hash;
  std::size_t rows = 0;
  std::vector<std::string> warnings;
};

// Writes association.csv and correlation.csv into `out`.
AssociateSummary cmd_associate(const AssociateOptions& options);

// Loads runs, checks they share one manifest (and agree with a manifest.json
// next to them), and returns the successful ones as scoring records.
struct LoadedRuns {
  std::string manifest_hash;
  std::optional<nlohmann::json> manifest;
  std::vector<RunRecord> records;
  std::size_t failed = 0;
};
LoadedRuns load_scoring_records(const std::vector<std::filesystem::path>& runs, const GenderTable& table,
                                const InferenceOptions& inference);

}  // namespace biasprobe
