#include "biasprobe/cli.hpp"

#include <filesystem>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"

#include "biasprobe/config.hpp"
#include "biasprobe/error.hpp"
#include "biasprobe/pipeline.hpp"
#include "biasprobe/report.hpp"
#include "biasprobe/text.hpp"

#ifndef BIASPROBE_VERSION
#define BIASPROBE_VERSION "0.0.0"
#endif

namespace biasprobe {
namespace {

namespace fs = std::filesystem;

// Flags shared by the subcommands; each one overrides the config file.
struct Flags {
  std::string config;
  std::vector<std::string> corpus;  // "path" (with --task) or "task=path"
  std::string task;
  std::string backend;
  std::string engine;
  std::string temps;
  int runs = 0;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string ssa;
  std::string embeddings;
  std::string name_pool;
  std::string process;
  std::string replay_cache;
  bool strict = false;
  int workers = 0;
  long max_requests = -1;
  std::vector<std::string> runs_files;
  std::string metrics;
  std::string format = "md";
  std::string reference;
  int min_names = 0;
};

std::vector<CorpusSpec> corpus_specs(const Flags& f) {
  std::vector<CorpusSpec> out;
  for (const auto& c : f.corpus) {
    const auto eq = c.find('=');
    if (eq != std::string::npos) {
      if (auto t = parse_task(c.substr(0, eq))) {
        out.push_back({*t, c.substr(eq + 1)});
        continue;
      }
    }
    const auto t = parse_task(f.task);
    if (!t) throw UsageError("--corpus " + c + " needs --task entrepreneurs|nobel_prize|actors (or task=path)");
    out.push_back({*t, c});
  }
  return out;
}

Config build_config(const Flags& f, bool for_run = false) {
  Config c = f.config.empty() ? Config{} : load_config(f.config);
  if (!f.corpus.empty()) c.paths.corpora = corpus_specs(f);
  if (!f.backend.empty()) {
    auto k = parse_backend_kind(f.backend);
    if (!k) throw UsageError("--backend must be sim, http or replay");
    c.backend.kind = *k;
  }
  if (!f.engine.empty()) c.backend.engine = f.engine;
  if (!f.temps.empty()) c.experiment.temperatures = parse_temperature_list(f.temps);
  if (f.runs) c.experiment.runs = f.runs;
  if (f.seed) c.simulator.seed = *f.seed;
  if (!f.out.empty()) c.paths.out = f.out;
  if (!f.ssa.empty()) c.paths.ssa = f.ssa;
  if (!f.embeddings.empty()) c.paths.embeddings = f.embeddings;
  if (!f.name_pool.empty()) {
    c.paths.name_pool = f.name_pool;
    c.simulator.name_pool.clear();
  }
  if (!f.process.empty()) {
    auto p = parse_process(f.process);
    if (!p) throw UsageError("--process must be true_representation, association_based or prejudice");
    c.simulator.process = *p;
  }
  if (!f.replay_cache.empty()) c.paths.replay_cache = f.replay_cache;
  if (f.strict) c.experiment.strict = true;
  if (f.workers) c.runtime.workers = f.workers;
  if (f.max_requests >= 0) c.runtime.max_requests = f.max_requests;
  if (f.min_names) c.experiment.min_context_names = f.min_names;
  finalize(c, for_run);
  return c;
}

InferenceOptions inference_of(const Config& c) { return {c.experiment.ambiguity_band}; }

std::vector<fs::path> runs_paths(const Flags& f, const Config& c) {
  if (f.runs_files.empty()) return {c.paths.out / kRunsFile};
  return {f.runs_files.begin(), f.runs_files.end()};
}

void print_warnings(std::ostream& err, const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) err << "warning: " << w << '\n';
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Gender fairness audit of factual recall in language models", "biasprobe"};
  app.set_version_flag("--version", BIASPROBE_VERSION);
  app.require_subcommand(1);
  Flags f;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "TOML or JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--out", f.out, "output directory");
  };
  auto corpus_opts = [&](CLI::App* sub) {
    sub->add_option("--corpus", f.corpus, "corpus CSV, as PATH (with --task) or TASK=PATH");
    sub->add_option("--task", f.task, "entrepreneurs | nobel_prize | actors");
  };

  auto* ingest = app.add_subcommand("ingest", "validate corpora and write the prompt list");
  common(ingest);
  corpus_opts(ingest);

  auto* run = app.add_subcommand("run", "query the backend for every prompt, temperature and run");
  common(run);
  corpus_opts(run);
  run->add_option("--backend", f.backend, "sim | http | replay");
  run->add_option("--engine", f.engine, "engine label stored in records and fingerprints");
  run->add_option("--temps", f.temps, "comma-separated temperatures, e.g. 0,0.5,1");
  run->add_option("--runs", f.runs, "runs per prompt and temperature");
  run->add_option("--seed", f.seed, "simulator seed");
  run->add_option("--ssa", f.ssa, "gender table, recorded in the manifest");
  run->add_option("--embeddings", f.embeddings, "embedding file, recorded in the manifest");
  run->add_option("--name-pool", f.name_pool, "simulator name pool CSV (full_name, gender)");
  run->add_option("--process", f.process, "simulator process");
  run->add_option("--replay-cache", f.replay_cache, "cache file for --backend replay");
  run->add_flag("--strict", f.strict, "exit 3 when any record failed");
  run->add_option("--workers", f.workers, "worker threads");
  run->add_option("--max-requests", f.max_requests, "stop after this many backend calls");

  auto* score = app.add_subcommand("score", "compute metrics from runs");
  common(score);
  score->add_option("--runs-file", f.runs_files, "runs JSONL (default <out>/runs.jsonl)");
  score->add_option("--ssa", f.ssa, "gender table CSV");
  score->add_option("--task", f.task, "restrict to one task");
  score->add_option("--temps", f.temps, "restrict to these temperatures");
  score->add_flag("--strict", f.strict, "malformed gender-table rows are errors");

  auto* associate = app.add_subcommand("associate", "correlate context gender association with hallucinations");
  common(associate);
  corpus_opts(associate);
  associate->add_option("--runs-file", f.runs_files, "runs JSONL (default <out>/runs.jsonl)");
  associate->add_option("--embeddings", f.embeddings, "GloVe text file");
  associate->add_option("--ssa", f.ssa, "gender table CSV");
  associate->add_option("--min-names", f.min_names, "minimum hallucinated names per context");

  auto* report = app.add_subcommand("report", "render metrics as tables");
  common(report);
  report->add_option("--metrics", f.metrics, "metrics JSON (default <out>/metrics.json)");
  report->add_option("--format", f.format, "md | csv");
  report->add_option("--reference", f.reference, "published tables JSON to check DPD against");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : static_cast<int>(ExitCode::Usage);
  }

  try {
    if (*ingest) {
      const Config c = build_config(f);
      const auto s = cmd_ingest(c);
      print_warnings(err, c.warnings);
      print_warnings(err, s.warnings);
      out << s.persons << " persons, " << s.prompts << " prompts\n";
      return 0;
    }
    if (*run) {
      const Config c = build_config(f, true);
      const auto s = cmd_run(c);
      print_warnings(err, s.warnings);
      out << s.records << " records (" << s.completed_jobs << "/" << s.jobs << " prompts), " << s.backend_calls
          << " backend calls, " << s.failures << " failed\nmanifest " << s.manifest_hash << '\n';
      if (s.failures && c.experiment.strict) return static_cast<int>(ExitCode::Backend);
      return 0;
    }
    if (*score) {
      // Score and associate only read the experiment and path settings.
      Flags g = f;
      g.corpus.clear();
      g.temps.clear();
      Config c = build_config(g);
      ScoreOptions o;
      o.runs = runs_paths(f, c);
      o.ssa = c.paths.ssa;
      o.out = c.paths.out;
      o.inference = inference_of(c);
      o.strict_gender_table = f.strict;
      if (!f.task.empty()) {
        o.task = parse_task(f.task);
        if (!o.task) throw UsageError("unknown task '" + f.task + "'");
      }
      if (!f.temps.empty()) o.temperatures = parse_temperature_list(f.temps);
      const auto s = cmd_score(o);
      print_warnings(err, s.warnings);
      out << s.slices.size() << " slices scored\nmanifest " << s.manifest_hash << '\n';
      return 0;
    }
    if (*associate) {
      Config c = build_config(f);
      AssociateOptions o;
      o.runs = runs_paths(f, c);
      o.corpora = c.paths.corpora;
      if (!c.paths.embeddings) throw UsageError("associate needs --embeddings or paths.embeddings");
      o.embeddings = *c.paths.embeddings;
      o.ssa = c.paths.ssa;
      o.out = c.paths.out;
      o.inference = inference_of(c);
      o.min_names = c.experiment.min_context_names;
      const auto s = cmd_associate(o);
      print_warnings(err, s.warnings);
      out << s.rows << " context rows\nmanifest " << s.manifest_hash << '\n';
      return 0;
    }
    if (*report) {
      const auto format = parse_report_format(f.format);
      Flags g;
      g.config = f.config;
      g.out = f.out;
      Config c = build_config(g);
      const fs::path metrics = f.metrics.empty() ? c.paths.out / kMetricsFile : fs::path(f.metrics);
      const auto doc = read_metrics(metrics);
      std::optional<nlohmann::json> reference;
      if (!f.reference.empty()) {
        reference = nlohmann::json::parse(text::read_file(f.reference), nullptr, false);
        if (reference->is_discarded()) throw ParseError(f.reference + " is not valid JSON");
      }
      for (const auto& p : write_report(doc, format, c.paths.out, reference)) out << p.string() << '\n';
      return 0;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::Usage);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::Validation);
  }
  return static_cast<int>(ExitCode::Usage);
}

}  // namespace biasprobe
