#pragma once

#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace biasprobe::text {

std::string_view trim(std::string_view s);
std::string to_lower_ascii(std::string_view s);
std::vector<std::string> split_whitespace(std::string_view s);

// NFKD-decompose, drop nonspacing marks, lowercase (full Unicode case folding).
// "Skłodowska" -> "skłodowska", "Pérez" -> "perez".
std::string fold(std::string_view s);

// Strip leading and trailing characters that are neither letters nor digits.
std::string strip_punctuation(std::string_view s);

std::string read_file(const std::filesystem::path& path);

// Fixed-point rendering used in CSV/Markdown tables.
std::string fixed(double value, int digits = 3);

// e.g. 2024-01-31T12:00:00Z
std::string utc_timestamp();

// RFC-4180 CSV.
using CsvRow = std::vector<std::string>;

class CsvReader {
 public:
  explicit CsvReader(std::istream& in) : in_(in) {}
  // Returns false at end of input. Quoted fields may span lines.
  bool next(CsvRow& row);
  // 1-based physical line where the last returned record started.
  std::size_t line() const noexcept { return record_line_; }

 private:
  std::istream& in_;
  std::size_t line_ = 0;
  std::size_t record_line_ = 0;
};

std::string csv_escape(std::string_view field);
void write_csv_row(std::ostream& out, const CsvRow& row);

// A header-addressed CSV table loaded fully in memory.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<CsvRow> rows;
  std::vector<std::size_t> row_lines;

  std::optional<std::size_t> column(std::string_view name) const;
};

CsvTable read_csv(const std::filesystem::path& path);
CsvTable read_csv(std::istream& in);

}  // namespace biasprobe::text
