#include <gtest/gtest.h>

#include <sstream>

#include "biasprobe/error.hpp"
#include "biasprobe/report.hpp"
#include "biasprobe/text.hpp"
#include "test_util.hpp"

namespace biasprobe {
namespace {

using testing::named;
using testing::record;
using testing::TempDir;

MetricsDocument sample_doc() {
  std::vector<RunRecord> recs;
  for (int p = 0; p < 6; ++p)
    for (int run = 1; run <= 5; ++run) {
      const Gender g = p < 3 ? Gender::Female : Gender::Male;
      const Outcome o = (p + run) % 3 == 0 ? Outcome::Correct : (p + run) % 3 == 1 ? Outcome::Hallucination
                                                                                    : Outcome::Declination;
      std::vector<GeneratedName> names;
      if (o == Outcome::Hallucination) names = {named("Bob B", Gender::Male), named("Ann A", Gender::Female)};
      if (o == Outcome::Correct) names = {named("Right One", g, true)};
      recs.push_back(record("p" + std::to_string(p), o, g, run, names));
    }
  return MetricsDocument{"abc123", "def456", score_all(recs), {}};
}

TEST(Metrics, JsonRoundTripIsStable) {
  const auto doc = sample_doc();
  const auto j = to_json(doc);
  const auto back = metrics_from_json(j);
  EXPECT_EQ(to_json(back).dump(), j.dump());
  EXPECT_EQ(back.slices.size(), 1u);
  EXPECT_EQ(back.manifest, "abc123");
}

TEST(Tables, MissRateLayout) {
  const auto doc = sample_doc();
  const auto t = miss_rate_table(doc.slices);
  ASSERT_EQ(t.rows.size(), 4u);
  EXPECT_EQ(t.rows[0][1], "Overall");
  EXPECT_EQ(t.rows[1][1], "Female");
  EXPECT_EQ(t.rows[2][1], "Male");
  EXPECT_EQ(t.rows[3][1], "p-value");
  EXPECT_EQ(t.header.back(), "sim t=0");
}

TEST(Tables, EmptyMetricsReadNoData) {
  const std::vector<SliceMetrics> none;
  for (const auto& t : {miss_rate_table(none), fairness_table(none), output_share_table(none)}) {
    ASSERT_FALSE(t.rows.empty()) << t.name;
    for (const auto& row : t.rows)
      for (const auto& c : row) EXPECT_EQ(c, "no data") << t.name;
  }
}

TEST(Tables, CsvCarriesManifest) {
  const auto doc = sample_doc();
  std::ostringstream out;
  write_csv(out, fairness_table(doc.slices), doc.manifest);
  EXPECT_EQ(out.str().rfind("# manifest=abc123\n", 0), 0u);
}

TEST(Report, MarkdownFormat) {
  TempDir dir;
  const auto written = write_report(sample_doc(), ReportFormat::Markdown, dir.path());
  const auto md = text::read_file(dir / "report.md");
  for (const char* s : {"| Overall |", "| Female |", "| Male |", "| p-value |", "Welch", "abc123"})
    EXPECT_NE(md.find(s), std::string::npos) << s;
  EXPECT_TRUE(std::filesystem::exists(dir / "declination.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "homogeneity.csv"));
  EXPECT_EQ(written.size(), 3u);
}

TEST(Report, CsvFormatOneFilePerTable) {
  TempDir dir;
  const auto written = write_report(sample_doc(), ReportFormat::Csv, dir.path());
  EXPECT_EQ(written.size(), 5u);
  for (const char* f : {"miss_rate.csv", "fairness.csv", "name_gender.csv", "declination.csv", "homogeneity.csv"})
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  EXPECT_FALSE(std::filesystem::exists(dir / "report.md"));
}

TEST(Report, EmptyMetricsStillRender) {
  TempDir dir;
  write_report(MetricsDocument{}, ReportFormat::Markdown, dir.path());
  EXPECT_NE(text::read_file(dir / "report.md").find("no data"), std::string::npos);
}

TEST(Report, FormatParsing) {
  EXPECT_EQ(parse_report_format("md"), ReportFormat::Markdown);
  EXPECT_EQ(parse_report_format("CSV"), ReportFormat::Csv);
  EXPECT_THROW(parse_report_format("pdf"), UsageError);
}

TEST(Reference, PublishedDpdCheck) {
  const auto j = nlohmann::json::parse(text::read_file(testing::fixture("reference_tables.json")));
  const auto findings = check_reference_dpd(j);
  ASSERT_EQ(findings.size(), 18u);
  int flagged = 0;
  for (const auto& f : findings) {
    EXPECT_NEAR(f.computed_dpd, std::abs(f.female - f.male), 1e-15);
    flagged += f.flagged;
    if (f.task == "entrepreneurs" && f.engine == "gpt-3.5" && f.temperature == 0) {
      EXPECT_NEAR(f.computed_dpd, 0.010, 1e-3);
      EXPECT_FALSE(f.flagged);
    }
    if (f.task == "actors" && f.engine == "gpt-3.5" && f.temperature == 0) {
      EXPECT_NEAR(f.computed_dpd, 0.083, 1e-9);
      EXPECT_NEAR(f.published_dpd, 0.092, 1e-12);
      EXPECT_TRUE(f.flagged);
    }
  }
  EXPECT_EQ(flagged, 5);
  const auto t = reference_table(findings);
  EXPECT_EQ(t.rows.size(), 18u);
}

}  // namespace
}  // namespace biasprobe
