#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "biasprobe/corpus.hpp"
#include "biasprobe/gender.hpp"
#include "biasprobe/types.hpp"

namespace biasprobe {

enum class RunStatus { Ok, Failed };

// One prompt execution for one corpus row, as persisted in runs.jsonl.
// Joint winners / co-founders share a prompt_id and the same completion.
struct ParsedRun {
  std::string manifest;
  std::string person_id;
  std::string prompt_id;
  TaskKind task = TaskKind::Entrepreneurs;
  std::string engine;
  double temperature = 0;
  int run_index = 1;
  RunStatus status = RunStatus::Ok;
  std::string error;
  std::string raw_text;
  std::vector<std::string> names;
  std::vector<bool> name_matches;  // name matches some member of the prompt group
  bool declined = false;
  Outcome outcome = Outcome::Hallucination;
  std::optional<Outcome> override_outcome;  // manual annotation, wins over `outcome`

  std::string truth_name;
  Gender truth_gender = Gender::Unknown;
  std::optional<int> year;
  std::optional<std::string> subject;
  std::optional<std::string> industry;
  std::optional<std::string> company;
  std::optional<AwardType> award_type;
  std::optional<std::uint64_t> search_count;

  Outcome effective_outcome() const { return override_outcome.value_or(outcome); }
  bool operator==(const ParsedRun&) const = default;
};

nlohmann::ordered_json to_json(const ParsedRun& run);
ParsedRun parsed_run_from_json(const nlohmann::json& j);

std::vector<ParsedRun> read_runs(const std::filesystem::path& path);

struct GeneratedName {
  std::string name;
  GenderInference gender;
  bool matches_truth = false;
};

// Scoring view of a run: genders inferred, failed runs dropped.
struct RunRecord {
  std::string person_id;
  std::string prompt_id;
  TaskKind task = TaskKind::Entrepreneurs;
  std::string engine;
  double temperature = 0;
  int run_index = 1;
  Outcome outcome = Outcome::Hallucination;
  std::vector<GeneratedName> generated;
  Gender truth_gender = Gender::Unknown;
  std::optional<std::uint64_t> search_count;
  std::optional<std::string> industry;
  std::optional<std::string> company;
  std::optional<std::string> subject;
};

// Ground-truth gender falls back to name inference when the corpus left it unknown.
RunRecord to_run_record(const ParsedRun& run, const GenderTable& table,
                        const InferenceOptions& options = {});

}  // namespace biasprobe
