#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "biasprobe/gender.hpp"
#include "biasprobe/http_backend.hpp"
#include "biasprobe/simulator.hpp"
#include "biasprobe/types.hpp"

namespace biasprobe {

enum class BackendKind { Sim, Http, Replay };
std::string_view to_string(BackendKind k);
std::optional<BackendKind> parse_backend_kind(std::string_view s);

struct BackendConfig {
  BackendKind kind = BackendKind::Sim;
  std::string engine;  // label stored in records; defaults to "sim" or the model name
  std::string url;
  std::string model;
  int max_in_flight = 4;
  double requests_per_minute = 0;
  RetryPolicy retry;
  int timeout_seconds = 60;

  std::string effective_engine() const;
};

struct ExperimentConfig {
  std::vector<double> temperatures{0.0, 0.5, 1.0};
  int runs = 5;
  bool strict = false;
  std::vector<std::string> declination_patterns;  // empty: built-in list
  std::optional<std::pair<double, double>> ambiguity_band;
  int min_context_names = 5;

  // Non-protocol temperatures or more than five runs were requested.
  bool relaxed() const;
};

struct CorpusSpec {
  TaskKind task = TaskKind::Entrepreneurs;
  std::filesystem::path path;
};

struct PathsConfig {
  std::vector<CorpusSpec> corpora;
  std::optional<std::filesystem::path> ssa;
  std::optional<std::filesystem::path> embeddings;
  std::optional<std::filesystem::path> name_pool;
  std::optional<std::filesystem::path> replay_cache;  // defaults to <out>/cache.jsonl
  std::filesystem::path out = "out";
};

// Settings that change how a run executes but not what it produces; they stay
// out of the config hash so an interrupted and a resumed run share a manifest.
struct RuntimeConfig {
  int workers = 4;
  std::optional<long> max_requests;  // stop after this many backend calls
};

struct Config {
  BackendConfig backend;
  ExperimentConfig experiment;
  SimulatorParams simulator;
  PathsConfig paths;
  RuntimeConfig runtime;
  std::vector<std::string> warnings;
};

// Relative paths inside the file resolve against the file's directory.
// Accepts TOML (.toml) or JSON (anything else, or TOML if JSON fails to parse).
Config load_config(const std::filesystem::path& path);
Config config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});

// Validates invariants and appends warnings (e.g. non-protocol temperatures).
// With `check_backend`, also checks the backend section and loads the
// simulator's name pool. Throws UsageError / ValidationError / SimulatorConfigError.
void finalize(Config& config, bool check_backend = true);

// Canonical form used for the config hash (runtime section excluded).
nlohmann::json to_json(const Config& config);
std::string config_hash(const Config& config);

std::vector<double> parse_temperature_list(std::string_view csv);

}  // namespace biasprobe
