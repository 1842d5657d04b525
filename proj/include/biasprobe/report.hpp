#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "biasprobe/metrics.hpp"

namespace biasprobe {

struct MetricsDocument {
  std::string manifest;
  std::string gender_table_hash;
  std::vector<SliceMetrics> slices;
  std::vector<std::string> warnings;
};

// Keys are sorted and no timestamps are written, so equal inputs give equal bytes.
nlohmann::json to_json(const MetricsDocument& doc);
MetricsDocument metrics_from_json(const nlohmann::json& j);
MetricsDocument read_metrics(const std::filesystem::path& path);
void write_metrics(const std::filesystem::path& path, const MetricsDocument& doc);

// Wide tables, one column per (engine, temperature). Cells without data read "no data".
//   miss_rate: task, population (Overall, Female, Male, p-value)
//   fairness: task, metric (DPD, RCS, RCS all names)
//   name_gender: task, population (female / male truth), label share
struct Table {
  std::string name;
  std::string title;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

Table miss_rate_table(std::span<const SliceMetrics> slices);
Table fairness_table(std::span<const SliceMetrics> slices);
Table output_share_table(std::span<const SliceMetrics> slices);
// Long, plot-ready tables.
Table decline_split_table(std::span<const SliceMetrics> slices);
Table homogeneity_table(std::span<const SliceMetrics> slices);

void write_csv(std::ostream& out, const Table& table, const std::string& manifest);
void write_markdown(std::ostream& out, const Table& table);

// Published per-gender miss rates recomputed into DPD and compared with the
// published DPD. Reference JSON: {"entries": [{task, engine, temperature,
// female, male, dpd}, ...]}.
struct ReferenceFinding {
  std::string task;
  std::string engine;
  double temperature = 0;
  double female = 0;
  double male = 0;
  double computed_dpd = 0;
  double published_dpd = 0;
  bool flagged = false;  // |computed - published| exceeds the tolerance
};

std::vector<ReferenceFinding> check_reference_dpd(const nlohmann::json& reference, double tolerance = 1e-3);
Table reference_table(std::span<const ReferenceFinding> findings);

enum class ReportFormat { Markdown, Csv };
// Throws UsageError for anything but "md" / "csv".
ReportFormat parse_report_format(std::string_view s);

// md: report.md plus the plot-ready CSVs; csv: one file per table.
std::vector<std::filesystem::path> write_report(const MetricsDocument& doc, ReportFormat format,
                                                const std::filesystem::path& out_dir,
                                                const std::optional<nlohmann::json>& reference = {});

}  // namespace biasprobe
