#include "biasprobe/gender.hpp"

#include <charconv>
#include <cmath>
#include <map>
#include <sstream>

#include "biasprobe/error.hpp"
#include "biasprobe/hash.hpp"
#include "biasprobe/text.hpp"

namespace biasprobe {
namespace {

std::optional<double> parse_number(std::string_view s) {
  s = text::trim(s);
  if (s.empty()) return std::nullopt;
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::string normalize_key(std::string_view name) { return text::fold(text::trim(name)); }

}  // namespace

void GenderTable::set(std::string_view name, double p_male) {
  if (!(p_male >= 0.0 && p_male <= 1.0))
    throw ValidationError("p_male for '" + std::string(name) + "' outside [0, 1]");
  entries_[normalize_key(name)] = p_male;
}

std::optional<double> GenderTable::p_male(std::string_view first_name) const {
  auto it = entries_.find(normalize_key(first_name));
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

GenderTable load_gender_table(const std::filesystem::path& path, GenderTableOptions options) {
  const std::string content = text::read_file(path);
  std::istringstream in(content);
  const text::CsvTable csv = text::read_csv(in);

  GenderTable table;
  table.source_hash = sha256_hex(content);

  const auto col_name = csv.column("name");
  const auto col_male = csv.column("male_count");
  const auto col_female = csv.column("female_count");
  const auto col_p = csv.column("p_male");
  if (!col_name) throw SchemaError("gender table needs a 'name' column", "name");
  const bool counts = col_male && col_female;
  if (!counts && !col_p)
    throw SchemaError("gender table needs male_count,female_count or p_male columns",
                      col_male ? "female_count" : "male_count");

  auto reject = [&](std::size_t line, const std::string& why) {
    if (options.strict) throw ParseError(why, line);
    table.warnings.push_back("line " + std::to_string(line) + ": " + why);
  };

  // Counts are aggregated per key first; order of first appearance is irrelevant.
  std::map<std::string, std::pair<double, double>> totals;
  std::map<std::string, std::pair<double, int>> probabilities;
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const auto& row = csv.rows[r];
    const std::size_t line = csv.row_lines[r];
    auto cell = [&](std::size_t col) -> std::string_view {
      return col < row.size() ? std::string_view(row[col]) : std::string_view{};
    };
    const std::string key = normalize_key(cell(*col_name));
    if (key.empty()) {
      reject(line, "empty name");
      continue;
    }
    if (counts) {
      auto m = parse_number(cell(*col_male));
      auto f = parse_number(cell(*col_female));
      if (!m || !f || *m < 0 || *f < 0) {
        reject(line, "malformed counts for '" + key + "'");
        continue;
      }
      auto& t = totals[key];
      t.first += *m;
      t.second += *f;
    } else {
      auto p = parse_number(cell(*col_p));
      if (!p || *p < 0 || *p > 1) {
        reject(line, "malformed p_male for '" + key + "'");
        continue;
      }
      auto& acc = probabilities[key];
      acc.first += *p;
      acc.second += 1;
    }
  }

  for (const auto& [key, t] : totals) {
    const double total = t.first + t.second;
    if (total <= 0) {
      table.warnings.push_back("name '" + key + "' has zero total count; skipped");
      continue;
    }
    table.set(key, t.first / total);
  }
  for (const auto& [key, acc] : probabilities) table.set(key, acc.first / acc.second);
  return table;
}

Gender label_for(double p_male, const InferenceOptions& options) {
  if (options.ambiguity_band && p_male >= options.ambiguity_band->first &&
      p_male <= options.ambiguity_band->second)
    return Gender::Unknown;
  return p_male >= 0.5 ? Gender::Male : Gender::Female;
}

std::string first_name_key(std::string_view full_name) {
  const auto tokens = text::split_whitespace(full_name);
  for (const auto& tok : tokens) {
    std::string key = text::fold(text::strip_punctuation(tok));
    if (!key.empty()) return key;
  }
  return {};
}

GenderInference infer_gender(std::string_view full_name, const GenderTable& table,
                             const InferenceOptions& options) {
  GenderInference out;
  out.first_name = first_name_key(full_name);
  if (out.first_name.empty()) return out;

  out.p_male = table.p_male(out.first_name);
  if (!out.p_male) {
    auto hyphen = out.first_name.find('-');
    if (hyphen != std::string::npos && hyphen > 0)
      out.p_male = table.p_male(out.first_name.substr(0, hyphen));
  }
  if (out.p_male) {
    out.label = label_for(*out.p_male, options);
    // An ambiguity-band hit keeps the label and p_male consistent: unknown <=> absent.
    if (out.label == Gender::Unknown) out.p_male.reset();
  }
  return out;
}

}  // namespace biasprobe
