#include <gtest/gtest.h>

#include <sstream>

#include "biasprobe/cli.hpp"
#include "biasprobe/error.hpp"
#include "biasprobe/pipeline.hpp"
#include "biasprobe/report.hpp"
#include "biasprobe/simulator.hpp"
#include "test_util.hpp"

namespace biasprobe {
namespace {

using testing::TempDir;
using testing::write_text;

// Ten founders of ten distinct companies.
std::filesystem::path ten_person_corpus(const TempDir& dir) {
  std::string csv = "id,full_name,industry,company,gender\n";
  const char* industries[] = {"Nursing", "Mining", "Retail", "Media", "Energy"};
  for (int i = 0; i < 10; ++i)
    csv += "e" + std::to_string(i) + ",Person" + std::to_string(i) + " Founder" + std::to_string(i) + "," +
           industries[i % 5] + ",Company" + std::to_string(i) + "," + (i < 4 ? "female" : "male") + "\n";
  const auto path = dir / "ten.csv";
  write_text(path, csv);
  return path;
}

Config sim_config(const TempDir& dir, const std::string& out) {
  Config c;
  c.paths.corpora = {{TaskKind::Entrepreneurs, ten_person_corpus(dir)}};
  c.paths.name_pool = testing::fixture("name_pool.csv");
  c.paths.ssa = testing::fixture("ssa_fixture.csv");
  c.paths.out = dir / out;
  c.simulator.actual_female_share = 0.4;
  c.simulator.correct_prob = 0.2;
  c.simulator.decline_prob = 0.1;
  c.simulator.seed = 17;
  finalize(c);
  return c;
}

ScoreOptions score_options(const Config& c) {
  ScoreOptions o;
  o.runs = {c.paths.out / kRunsFile};
  o.ssa = c.paths.ssa;
  o.out = c.paths.out;
  return o;
}

TEST(Run, Cardinality) {
  TempDir dir;
  const auto c = sim_config(dir, "out");
  const auto s = cmd_run(c);
  EXPECT_EQ(s.jobs, 150u);
  EXPECT_EQ(s.records, 150u);
  EXPECT_EQ(s.backend_calls, 150);
  EXPECT_EQ(s.failures, 0);
  EXPECT_FALSE(s.interrupted);
  const auto runs = read_runs(c.paths.out / kRunsFile);
  ASSERT_EQ(runs.size(), 150u);
  for (const auto& r : runs) {
    EXPECT_EQ(r.manifest, s.manifest_hash);
    if (r.declined) EXPECT_TRUE(r.names.empty());
  }
  const auto manifest = read_manifest(c.paths.out / kManifestFile);
  EXPECT_EQ(manifest["hash"], s.manifest_hash);
  EXPECT_EQ(manifest["corpora"].size(), 1u);
  EXPECT_FALSE(manifest["gender_table_hash"].is_null());
}

TEST(Run, RerunHitsCacheOnly) {
  TempDir dir;
  const auto c = sim_config(dir, "out");
  cmd_run(c);
  const auto second = cmd_run(c);
  EXPECT_EQ(second.backend_calls, 0);
  EXPECT_EQ(second.records, 150u);
}

TEST(Run, InterruptAndResume) {
  TempDir dir;
  const auto full_cfg = sim_config(dir, "full");
  cmd_run(full_cfg);

  auto cut = sim_config(dir, "cut");
  cut.runtime.max_requests = 80;
  const auto first = cmd_run(cut);
  EXPECT_TRUE(first.interrupted);
  EXPECT_EQ(first.backend_calls, 80);
  EXPECT_EQ(first.records, 80u);

  cut.runtime.max_requests.reset();
  const auto resumed = cmd_run(cut);
  EXPECT_EQ(resumed.backend_calls, 70);
  EXPECT_EQ(resumed.records, 150u);
  EXPECT_EQ(text::read_file(full_cfg.paths.out / kRunsFile), text::read_file(cut.paths.out / kRunsFile));
}

TEST(Run, ReplayMissesAreFailures) {
  TempDir dir;
  auto c = sim_config(dir, "out");
  cmd_run(c);
  c.backend.kind = BackendKind::Replay;
  c.backend.engine = "sim";
  c.experiment.runs = 6;
  c.paths.out = dir / "replay";
  c.paths.replay_cache = dir / "out" / std::string(kCacheFile);
  finalize(c);
  const auto s = cmd_run(c);
  EXPECT_EQ(s.failures, 10 * 3);  // run 6 was never recorded
  EXPECT_EQ(s.backend_calls, 180);

  c.paths.replay_cache = dir / "nope.jsonl";
  EXPECT_THROW(cmd_run(c), PathError);
}

class FlakyBackend final : public Backend {
 public:
  explicit FlakyBackend(SimulatorParams p) : sim_(std::move(p)) {}
  CompletionResult complete(const CompletionRequest& r, const NotablePerson& truth) override {
    if (truth.id == "e3" && r.run_index == 2 && r.temperature == 0.5) throw BackendError("HTTP 500", 500);
    return sim_.complete(r, truth);
  }
  std::string descriptor() const override { return "flaky"; }

 private:
  SimulatorBackend sim_;
};

TEST(Run, FailedRecordsAreKeptAndExcluded) {
  TempDir dir;
  const auto c = sim_config(dir, "out");
  FlakyBackend flaky(c.simulator);
  const auto s = cmd_run(c, &flaky);
  EXPECT_EQ(s.failures, 1);
  EXPECT_EQ(s.records, 150u);
  const auto score = cmd_score(score_options(c));
  int records = 0;
  for (const auto& slice : score.slices) records += slice.records;
  EXPECT_EQ(records, 149);
}

TEST(Run, StrictCliExitsThree) {
  TempDir dir;
  const auto corpus = ten_person_corpus(dir);
  write_text(dir / "http.toml", "[backend]\nkind = \"http\"\nurl = \"http://127.0.0.1:1/v1/chat/completions\"\n"
                                "model = \"m\"\n[backend.retry]\nmax_attempts = 1\n[experiment]\nruns = 1\n"
                                "temperatures = [0]\nstrict = true\n[paths]\ncorpus = { entrepreneurs = \"ten.csv\" }\n"
                                "out = \"o\"\n");
  std::ostringstream out, err;
  const std::string cfg_path = (dir / "http.toml").string(), out2 = (dir / "o2").string();
  const char* argv[] = {"biasprobe", "run", "--config", cfg_path.c_str()};
  EXPECT_EQ(run_cli(4, argv, out, err), 3) << err.str();

  const char* lenient[] = {"biasprobe", "run", "--config", cfg_path.c_str(), "--out", out2.c_str()};
  // Without strict the same failures exit 0.
  std::string cfg = text::read_file(dir / "http.toml");
  cfg.replace(cfg.find("strict = true"), 13, "strict = false");
  write_text(dir / "http.toml", cfg);
  EXPECT_EQ(run_cli(6, lenient, out, err), 0) << err.str();
}

TEST(Score, ManifestMismatchIsAnError) {
  TempDir dir;
  auto a = sim_config(dir, "a");
  auto b = sim_config(dir, "b");
  b.simulator.seed = 18;
  cmd_run(a);
  cmd_run(b);
  auto o = score_options(a);
  o.runs.push_back(b.paths.out / kRunsFile);
  EXPECT_THROW(cmd_score(o), ValidationError);

  // A runs file whose records disagree with the manifest next to it.
  std::filesystem::copy_file(b.paths.out / kRunsFile, a.paths.out / "other.jsonl");
  o.runs = {a.paths.out / "other.jsonl"};
  EXPECT_THROW(cmd_score(o), ValidationError);
}

TEST(Score, GenderTableMustMatchManifest) {
  TempDir dir;
  const auto c = sim_config(dir, "out");
  cmd_run(c);
  write_text(dir / "other_ssa.csv", "name,p_male\nmary,0.01\n");
  auto o = score_options(c);
  o.ssa = dir / "other_ssa.csv";
  EXPECT_THROW(cmd_score(o), ValidationError);
}

TEST(Score, OutputsCarryManifest) {
  TempDir dir;
  const auto c = sim_config(dir, "out");
  const auto run = cmd_run(c);
  auto o = score_options(c);
  o.temperatures = std::vector<double>{0.0, 0.7};
  const auto s = cmd_score(o);
  EXPECT_EQ(s.slices.size(), 1u);
  EXPECT_EQ(s.manifest_hash, run.manifest_hash);
  bool warned = false;
  for (const auto& w : s.warnings) warned = warned || w.find("t=0.70") != std::string::npos;
  EXPECT_TRUE(warned);
  for (const char* f : {"miss_rate.csv", "fairness.csv", "name_gender.csv"})
    EXPECT_EQ(text::read_file(c.paths.out / f).rfind(manifest_comment(run.manifest_hash), 0), 0u) << f;
  EXPECT_EQ(read_metrics(c.paths.out / kMetricsFile).manifest, run.manifest_hash);
}

TEST(Score, NobelReplayFixture) {
  TempDir dir;
  Config c;
  c.backend.kind = BackendKind::Replay;
  c.backend.engine = "gpt-3.5";
  c.experiment.temperatures = {0};
  c.paths.corpora = {{TaskKind::NobelPrize, testing::fixture("nobel_replay_corpus.csv")}};
  c.paths.replay_cache = testing::fixture("nobel_replay_cache.jsonl");
  c.paths.ssa = testing::fixture("ssa_fixture.csv");
  c.paths.out = dir / "out";
  finalize(c);
  const auto run = cmd_run(c);
  EXPECT_EQ(run.failures, 0);
  const auto s = cmd_score(score_options(c));
  ASSERT_EQ(s.slices.size(), 1u);
  const auto& m = s.slices[0];
  EXPECT_NEAR(*m.miss.female, 0.241, 5e-4);
  EXPECT_NEAR(*m.miss.male, 0.352, 5e-4);
  EXPECT_NEAR(*m.dpd, 0.111, 1e-3);
}

TEST(Associate, OneRowPerIndustryAndPathErrors) {
  TempDir dir;
  auto c = sim_config(dir, "out");
  c.paths.embeddings = testing::fixture("embeddings_fixture.txt");
  cmd_run(c);
  AssociateOptions o;
  o.runs = {c.paths.out / kRunsFile};
  o.corpora = c.paths.corpora;
  o.embeddings = *c.paths.embeddings;
  o.ssa = c.paths.ssa;
  o.out = c.paths.out;
  o.min_names = 1;
  const auto s = cmd_associate(o);
  EXPECT_GT(s.rows, 0u);

  const auto table = text::read_csv(c.paths.out / "association.csv");
  // header row follows the manifest comment line
  std::set<std::string> industries;
  int industry_rows_t0 = 0;
  for (const auto& row : table.rows) {
    if (row.size() < 4 || row[2] != "industry") continue;
    if (row[1] == "0.00") ++industry_rows_t0;
    industries.insert(row[3]);
  }
  EXPECT_EQ(industries.size(), 5u);
  EXPECT_EQ(industry_rows_t0, 5);

  o.embeddings = dir / "missing.txt";
  EXPECT_THROW(cmd_associate(o), PathError);

  std::ostringstream out, err;
  const auto missing = (dir / "missing.txt").string();
  const auto runs = (c.paths.out / kRunsFile).string();
  const char* argv[] = {"biasprobe", "associate", "--runs-file", runs.c_str(), "--embeddings", missing.c_str()};
  EXPECT_EQ(run_cli(6, argv, out, err), 1);
  EXPECT_NE(err.str().find("missing.txt"), std::string::npos);
}

TEST(Associate, EmbeddingMustMatchManifest) {
  TempDir dir;
  auto c = sim_config(dir, "out");
  c.paths.embeddings = testing::fixture("embeddings_fixture.txt");
  cmd_run(c);
  write_text(dir / "emb.txt", text::read_file(*c.paths.embeddings) + "extra 0 0 0 0 0 1\n");
  AssociateOptions o;
  o.runs = {c.paths.out / kRunsFile};
  o.embeddings = dir / "emb.txt";
  o.ssa = c.paths.ssa;
  o.out = c.paths.out;
  EXPECT_THROW(cmd_associate(o), ValidationError);
}

TEST(Cli, UsageErrors) {
  std::ostringstream out, err;
  const char* none[] = {"biasprobe"};
  EXPECT_EQ(run_cli(1, none, out, err), 1);
  const char* bad_backend[] = {"biasprobe", "run", "--backend", "pigeon", "--corpus", "x.csv"};
  EXPECT_EQ(run_cli(6, bad_backend, out, err), 1);
  const char* bad_format[] = {"biasprobe", "report", "--format", "pdf"};
  EXPECT_EQ(run_cli(4, bad_format, out, err), 1);
}

TEST(Cli, IngestWritesPrompts) {
  TempDir dir;
  const auto corpus = ten_person_corpus(dir).string();
  const auto out_dir = (dir / "o").string();
  std::ostringstream out, err;
  const char* argv[] = {"biasprobe", "ingest", "--corpus", corpus.c_str(), "--task", "entrepreneurs", "--out",
                        out_dir.c_str()};
  EXPECT_EQ(run_cli(8, argv, out, err), 0) << err.str();
  EXPECT_NE(out.str().find("10 persons, 10 prompts"), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(dir / "o" / "prompts.jsonl"));

  write_text(dir / "bad.csv", "full_name,year,subject\nA B,2023,Physics\n");
  const auto arg = "nobel_prize=" + (dir / "bad.csv").string();
  const char* invalid[] = {"biasprobe", "ingest", "--corpus", arg.c_str()};
  EXPECT_EQ(run_cli(4, invalid, out, err), 2);
}

}  // namespace
}  // namespace biasprobe
