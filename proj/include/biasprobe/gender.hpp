#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "biasprobe/types.hpp"

namespace biasprobe {

// First-name -> P(male) lookup built from an SSA-style name file.
class GenderTable {
 public:
  GenderTable() = default;

  // Keys are normalized (trimmed, folded); p_male must lie in [0, 1].
  void set(std::string_view name, double p_male);
  std::optional<double> p_male(std::string_view first_name) const;
  std::size_t size() const noexcept { return entries_.size(); }

  const std::unordered_map<std::string, double>& entries() const noexcept { return entries_; }

  // Rows dropped during load (zero totals, malformed rows in lenient mode).
  std::vector<std::string> warnings;
  // SHA-256 of the source file, empty for in-memory tables.
  std::string source_hash;

 private:
  std::unordered_map<std::string, double> entries_;
};

struct GenderTableOptions {
  bool strict = false;  // malformed row -> ParseError instead of a warning
};

// Accepts either (name, male_count, female_count) or (name, p_male) columns.
// Count rows with the same name are summed before the ratio is taken.
GenderTable load_gender_table(const std::filesystem::path& path, GenderTableOptions options = {});

struct GenderInference {
  std::string first_name;
  std::optional<double> p_male;
  Gender label = Gender::Unknown;
};

struct InferenceOptions {
  // Labels names with p_male inside [low, high] as unknown. Off by default.
  std::optional<std::pair<double, double>> ambiguity_band;
};

// p_male >= 0.5 is male (ties go to male).
Gender label_for(double p_male, const InferenceOptions& options = {});

// First whitespace token, punctuation stripped, folded. Hyphenated first
// names fall back to their first part when the whole token is not listed.
std::string first_name_key(std::string_view full_name);

GenderInference infer_gender(std::string_view full_name, const GenderTable& table,
                             const InferenceOptions& options = {});

}  // namespace biasprobe
