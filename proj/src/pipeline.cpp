#include "biasprobe/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "biasprobe/association.hpp"
#include "biasprobe/cache.hpp"
#include "biasprobe/error.hpp"
#include "biasprobe/hash.hpp"
#include "biasprobe/http_backend.hpp"
#include "biasprobe/parsing.hpp"
#include "biasprobe/records.hpp"
#include "biasprobe/report.hpp"
#include "biasprobe/simulator.hpp"
#include "biasprobe/text.hpp"

#ifndef BIASPROBE_VERSION
#define BIASPROBE_VERSION "0.0.0"
#endif

namespace biasprobe {

using nlohmann::json;
namespace fs = std::filesystem;

std::string manifest_hash(const json& manifest) {
  json core = manifest;
  for (const char* key : {"hash", "timestamps", "status"}) core.erase(key);
  return sha256_hex(core.dump());
}

json read_manifest(const fs::path& path) {
  const json j = json::parse(text::read_file(path), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ParseError(path.string() + " is not a manifest");
  if (!j.contains("hash") || j["hash"] != manifest_hash(j))
    throw ValidationError(path.string() + ": manifest hash does not match its contents");
  return j;
}

std::string manifest_comment(const std::string& hash) { return "# manifest=" + hash; }

namespace {

struct LoadedCorpus {
  CorpusSpec spec;
  std::vector<NotablePerson> persons;
  std::vector<PromptGroup> groups;
};

std::vector<LoadedCorpus> load_corpora(const std::vector<CorpusSpec>& specs) {
  if (specs.empty()) throw UsageError("no corpus given (--corpus or paths.corpus)");
  std::vector<LoadedCorpus> out;
  std::set<std::string> ids;
  for (const auto& spec : specs) {
    LoadedCorpus c{spec, load_corpus(spec.path, spec.task), {}};
    for (const auto& p : c.persons)
      if (!ids.insert(p.id).second) throw ValidationError("duplicate person id '" + p.id + "' across corpora");
    c.groups = group_prompts(c.persons);
    out.push_back(std::move(c));
  }
  return out;
}

void write_atomically(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw PathError("cannot write " + tmp.string());
    out << content;
    if (!out.flush()) throw PathError("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

// Raised when the request budget (runtime.max_requests) is used up.
struct Interrupted {};

class BudgetBackend final : public Backend {
 public:
  BudgetBackend(Backend& inner, std::optional<long> limit) : inner_(inner), limit_(limit) {}

  CompletionResult complete(const CompletionRequest& request, const NotablePerson& truth) override {
    if (limit_ && reserved_.fetch_add(1) >= *limit_) throw Interrupted{};
    ++calls_;
    return inner_.complete(request, truth);
  }
  std::string descriptor() const override { return inner_.descriptor(); }
  long calls() const noexcept { return calls_.load(); }

 private:
  Backend& inner_;
  std::optional<long> limit_;
  std::atomic<long> reserved_{0};
  std::atomic<long> calls_{0};
};

struct Job {
  const LoadedCorpus* corpus;
  const PromptGroup* group;
  double temperature;
  int run_index;
};

struct JobResult {
  bool done = false;
  bool ok = false;
  std::string raw_text;
  std::string error;
};

ParsedRun make_run(const std::string& manifest, const std::string& engine, const Job& job,
                   const NotablePerson& person, const JobResult& result, const DeclinationMatcher& matcher) {
  ParsedRun r;
  r.manifest = manifest;
  r.person_id = person.id;
  r.prompt_id = job.group->prompt_id;
  r.task = person.task;
  r.engine = engine;
  r.temperature = job.temperature;
  r.run_index = job.run_index;
  r.truth_name = person.full_name;
  r.truth_gender = person.gender;
  r.year = person.year;
  r.subject = person.subject;
  r.industry = person.industry;
  r.company = person.company;
  r.award_type = person.award_type;
  r.search_count = person.search_count;
  if (!result.ok) {
    r.status = RunStatus::Failed;
    r.error = result.error;
    return r;
  }
  r.raw_text = result.raw_text;
  const ParsedResponse parsed = parse_response(result.raw_text, matcher);
  r.names = parsed.names;
  r.declined = parsed.declined;
  for (const auto& name : parsed.names) {
    bool match = false;
    for (std::size_t m : job.group->members) match = match || names_match(name, job.corpus->persons[m].full_name);
    r.name_matches.push_back(match);
  }
  r.outcome = classify_outcome(parsed, person);
  return r;
}

std::unique_ptr<Backend> make_backend(const Config& config, const ResponseCache& cache) {
  switch (config.backend.kind) {
    case BackendKind::Sim: return std::make_unique<SimulatorBackend>(config.simulator);
    case BackendKind::Replay: return std::make_unique<ReplayBackend>(cache);
    case BackendKind::Http: {
      HttpOptions o;
      o.url = config.backend.url;
      o.model = config.backend.model;
      o.max_in_flight = config.backend.max_in_flight;
      o.requests_per_minute = config.backend.requests_per_minute;
      o.retry = config.backend.retry;
      o.timeout = std::chrono::seconds{config.backend.timeout_seconds};
      return std::make_unique<HttpBackend>(o);
    }
  }
  throw UsageError("unknown backend");
}

std::vector<std::string> slurp_hashes(const std::vector<LoadedCorpus>& corpora, json& out) {
  std::vector<std::string> hashes;
  out = json::array();
  for (const auto& c : corpora) {
    hashes.push_back(sha256_file(c.spec.path));
    out.push_back({{"task", to_string(c.spec.task)},
                   {"file", c.spec.path.filename().string()},
                   {"sha256", hashes.back()}});
  }
  return hashes;
}

}  // namespace

IngestSummary cmd_ingest(const Config& config) {
  const auto corpora = load_corpora(config.paths.corpora);
  IngestSummary s;
  std::string lines;
  for (const auto& c : corpora) {
    s.persons += c.persons.size();
    s.prompts += c.groups.size();
    for (const auto& g : c.groups) {
      json members = json::array();
      for (std::size_t m : g.members) members.push_back(c.persons[m].id);
      if (g.members.size() > 1)
        s.warnings.push_back("prompt " + g.prompt_id + " is shared by " + std::to_string(g.members.size()) +
                             " persons");
      lines += json{{"prompt_id", g.prompt_id},
                    {"task", to_string(c.spec.task)},
                    {"prompt", g.prompt.text},
                    {"members", members}}
                   .dump() +
               '\n';
    }
  }
  fs::create_directories(config.paths.out);
  write_atomically(config.paths.out / "prompts.jsonl", lines);
  return s;
}

RunSummary cmd_run(const Config& config, Backend* injected) {
  RunSummary summary;
  summary.warnings = config.warnings;
  const auto corpora = load_corpora(config.paths.corpora);
  const fs::path out_dir = config.paths.out;
  fs::create_directories(out_dir);

  const bool replay = config.backend.kind == BackendKind::Replay && !injected;
  const fs::path cache_path =
      replay && config.paths.replay_cache ? *config.paths.replay_cache : out_dir / kCacheFile;
  if (replay && !fs::exists(cache_path)) throw PathError("replay cache not found: " + cache_path.string());
  ResponseCache cache = ResponseCache::open(cache_path);
  for (const auto& w : cache.warnings()) summary.warnings.push_back(w);

  std::unique_ptr<Backend> owned;
  Backend* inner = injected;
  if (!inner) {
    owned = make_backend(config, cache);
    inner = owned.get();
  }
  BudgetBackend budget(*inner, config.runtime.max_requests);
  CachedBackend cached(budget, cache);
  Backend& backend = replay ? static_cast<Backend&>(budget) : static_cast<Backend&>(cached);

  const std::string engine = config.backend.effective_engine();
  const std::string started = text::utc_timestamp();

  json manifest;
  json corpus_json;
  slurp_hashes(corpora, corpus_json);
  manifest["tool_version"] = BIASPROBE_VERSION;
  manifest["config_hash"] = config_hash(config);
  manifest["corpora"] = corpus_json;
  manifest["backend"] = inner->descriptor();
  manifest["engine"] = engine;
  manifest["temperatures"] = config.experiment.temperatures;
  manifest["runs"] = config.experiment.runs;
  manifest["seed"] = config.backend.kind == BackendKind::Sim ? json(config.simulator.seed) : json(nullptr);
  manifest["gender_table_hash"] = config.paths.ssa ? json(sha256_file(*config.paths.ssa)) : json(nullptr);
  manifest["embedding_hash"] =
      config.paths.embeddings ? json(sha256_file(*config.paths.embeddings)) : json(nullptr);
  const std::string hash = manifest_hash(manifest);
  summary.manifest_hash = hash;

  std::vector<Job> jobs;
  for (const auto& c : corpora)
    for (const auto& g : c.groups)
      for (double t : config.experiment.temperatures)
        for (int run = 1; run <= config.experiment.runs; ++run) jobs.push_back({&c, &g, t, run});
  summary.jobs = jobs.size();

  const bool relaxed = config.experiment.relaxed();
  const DeclinationMatcher matcher = config.experiment.declination_patterns.empty()
                                         ? DeclinationMatcher()
                                         : DeclinationMatcher(config.experiment.declination_patterns);
  std::vector<JobResult> results(jobs.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr fatal;
  std::mutex fatal_mutex;

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size() || stop.load()) return;
      const Job& job = jobs[i];
      const NotablePerson& truth = job.corpus->persons[job.group->members.front()];
      CompletionRequest request{job.group->prompt.text, job.temperature, job.run_index, engine};
      JobResult& r = results[i];
      try {
        validate(request, relaxed);
        r.raw_text = backend.complete(request, truth).raw_text;
        r.ok = true;
        r.done = true;
      } catch (const Interrupted&) {
        stop = true;
        return;
      } catch (const BackendError& e) {
        r.error = e.what();
        r.done = true;
      } catch (...) {
        std::lock_guard lock(fatal_mutex);
        if (!fatal) fatal = std::current_exception();
        stop = true;
        return;
      }
    }
  };
  {
    const int n = std::max(1, std::min<int>(config.runtime.workers, static_cast<int>(jobs.size())));
    std::vector<std::jthread> pool;
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
  }
  if (fatal) std::rethrow_exception(fatal);

  std::string lines;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const JobResult& r = results[i];
    if (!r.done) {
      summary.interrupted = true;
      continue;
    }
    ++summary.completed_jobs;
    for (std::size_t m : jobs[i].group->members) {
      const ParsedRun run = make_run(hash, engine, jobs[i], jobs[i].corpus->persons[m], r, matcher);
      if (run.status == RunStatus::Failed) ++summary.failures;
      lines += to_json(run).dump() + '\n';
      ++summary.records;
    }
  }
  summary.backend_calls = budget.calls();
  write_atomically(out_dir / kRunsFile, lines);

  manifest["hash"] = hash;
  manifest["timestamps"] = {{"started", started}, {"finished", text::utc_timestamp()}};
  manifest["status"] = {{"jobs", summary.jobs},
                        {"completed_jobs", summary.completed_jobs},
                        {"records", summary.records},
                        {"failures", summary.failures},
                        {"interrupted", summary.interrupted}};
  write_atomically(out_dir / kManifestFile, manifest.dump(2) + '\n');

  if (summary.interrupted)
    summary.warnings.push_back("stopped after " + std::to_string(summary.backend_calls) +
                               " backend calls; rerun to resume from the cache");
  if (summary.failures)
    summary.warnings.push_back(std::to_string(summary.failures) + " records failed; see status/error in " +
                               std::string(kRunsFile));
  return summary;
}

LoadedRuns load_scoring_records(const std::vector<fs::path>& runs, const GenderTable& table,
                                const InferenceOptions& inference) {
  if (runs.empty()) throw UsageError("no runs file given");
  LoadedRuns out;
  std::set<std::string> hashes;
  for (const auto& path : runs) {
    if (!fs::exists(path)) throw PathError("runs file not found: " + path.string());
    const fs::path manifest_path = path.parent_path() / kManifestFile;
    if (fs::exists(manifest_path)) {
      auto m = read_manifest(manifest_path);
      hashes.insert(m["hash"].get<std::string>());
      if (!out.manifest) out.manifest = std::move(m);
    }
    for (const auto& run : read_runs(path)) {
      hashes.insert(run.manifest);
      if (run.status == RunStatus::Failed) {
        ++out.failed;
        continue;
      }
      out.records.push_back(to_run_record(run, table, inference));
    }
  }
  if (hashes.size() > 1) {
    std::string list;
    for (const auto& h : hashes) list += (list.empty() ? "" : ", ") + h.substr(0, 12);
    throw ValidationError("inputs carry different manifest hashes (" + list + ")");
  }
  if (!hashes.empty()) out.manifest_hash = *hashes.begin();
  return out;
}

namespace {

GenderTable load_optional_table(const std::optional<fs::path>& ssa, bool strict, std::vector<std::string>& warnings) {
  if (!ssa) {
    warnings.push_back("no gender table given; generated names are labeled unknown");
    return {};
  }
  GenderTable table = load_gender_table(*ssa, {strict});
  for (const auto& w : table.warnings) warnings.push_back(w);
  return table;
}

void check_manifest_field(const std::optional<json>& manifest, const char* field, const std::string& actual,
                          const std::string& what) {
  if (!manifest || !manifest->contains(field) || (*manifest)[field].is_null() || actual.empty()) return;
  if ((*manifest)[field].get<std::string>() != actual)
    throw ValidationError(what + " differs from the one recorded in the run manifest");
}

void write_table_csv(const fs::path& path, const Table& t, const std::string& manifest) {
  std::ostringstream s;
  write_csv(s, t, manifest);
  write_atomically(path, s.str());
}

std::string opt_cell(const std::optional<double>& v) { return v ? text::fixed(*v, 6) : ""; }

}  // namespace

ScoreSummary cmd_score(const ScoreOptions& o) {
  ScoreSummary summary;
  GenderTable table = load_optional_table(o.ssa, o.strict_gender_table, summary.warnings);
  LoadedRuns loaded = load_scoring_records(o.runs, table, o.inference);
  check_manifest_field(loaded.manifest, "gender_table_hash", table.source_hash, "gender table");
  summary.manifest_hash = loaded.manifest_hash;
  if (loaded.failed)
    summary.warnings.push_back(std::to_string(loaded.failed) + " failed records excluded from scoring");

  std::vector<RunRecord> selected;
  for (auto& r : loaded.records) {
    if (o.task && r.task != *o.task) continue;
    if (o.temperatures &&
        std::find(o.temperatures->begin(), o.temperatures->end(), r.temperature) == o.temperatures->end())
      continue;
    selected.push_back(std::move(r));
  }
  summary.slices = score_all(selected);

  if (o.task || o.temperatures) {
    std::set<std::string> engines;
    for (const auto& s : summary.slices) engines.insert(s.key.engine);
    for (const auto& r : loaded.records) engines.insert(r.engine);
    std::vector<TaskKind> tasks = o.task ? std::vector<TaskKind>{*o.task}
                                         : std::vector<TaskKind>(kAllTasks.begin(), kAllTasks.end());
    if (!o.task) {
      std::set<TaskKind> present;
      for (const auto& s : summary.slices) present.insert(s.key.task);
      tasks.assign(present.begin(), present.end());
    }
    const auto temps = o.temperatures.value_or(std::vector<double>{});
    for (TaskKind task : tasks)
      for (const auto& engine : engines)
        for (double t : temps) {
          const bool found = std::any_of(summary.slices.begin(), summary.slices.end(), [&](const SliceMetrics& s) {
            return s.key.task == task && s.key.engine == engine && s.key.temperature == t;
          });
          if (!found)
            summary.warnings.push_back("no records for " + std::string(to_string(task)) + " / " + engine +
                                       " / t=" + text::fixed(t, 2) + "; slice omitted");
        }
    if (engines.empty() && o.task)
      summary.warnings.push_back("no records for " + std::string(to_string(*o.task)) + "; slice omitted");
  }

  fs::create_directories(o.out);
  MetricsDocument doc{summary.manifest_hash, table.source_hash, summary.slices, summary.warnings};
  {
    std::ostringstream s;
    s << to_json(doc).dump(2) << '\n';
    write_atomically(o.out / kMetricsFile, s.str());
  }
  write_table_csv(o.out / "miss_rate.csv", miss_rate_table(summary.slices), summary.manifest_hash);
  write_table_csv(o.out / "fairness.csv", fairness_table(summary.slices), summary.manifest_hash);
  write_table_csv(o.out / "name_gender.csv", output_share_table(summary.slices), summary.manifest_hash);
  return summary;
}

AssociateSummary cmd_associate(const AssociateOptions& o) {
  AssociateSummary summary;
  if (!fs::exists(o.embeddings)) throw PathError("embedding file not found: " + o.embeddings.string());
  GenderTable table = load_optional_table(o.ssa, false, summary.warnings);
  LoadedRuns loaded = load_scoring_records(o.runs, table, o.inference);
  check_manifest_field(loaded.manifest, "gender_table_hash", table.source_hash, "gender table");
  summary.manifest_hash = loaded.manifest_hash;

  std::vector<NotablePerson> corpus;
  for (const auto& spec : o.corpora) {
    if (loaded.manifest && loaded.manifest->contains("corpora")) {
      const std::string h = sha256_file(spec.path);
      bool known = false;
      for (const auto& c : (*loaded.manifest)["corpora"]) known = known || c.value("sha256", "") == h;
      if (!known)
        throw ValidationError("corpus " + spec.path.string() + " is not one of the corpora in the run manifest");
    }
    auto persons = load_corpus(spec.path, spec.task);
    corpus.insert(corpus.end(), persons.begin(), persons.end());
  }

  std::set<std::string> vocabulary;
  auto add_phrase = [&](const std::optional<std::string>& s) {
    if (!s) return;
    for (auto& t : phrase_tokens(*s)) vocabulary.insert(std::move(t));
  };
  for (const auto& r : loaded.records) {
    add_phrase(r.industry);
    add_phrase(r.company);
    add_phrase(r.subject);
  }
  for (const auto& p : corpus) {
    add_phrase(p.industry);
    add_phrase(p.company);
    add_phrase(p.subject);
  }
  for (auto w : kFemaleWords) vocabulary.insert(std::string(w));
  for (auto w : kMaleWords) vocabulary.insert(std::string(w));

  const auto embeddings = load_embeddings<double>(o.embeddings, vocabulary);
  check_manifest_field(loaded.manifest, "embedding_hash", sha256_file(o.embeddings), "embedding file");
  const auto gv = gender_vectors(embeddings);
  const auto report = association_report<double>(loaded.records, corpus, embeddings, gv, {o.min_names});
  summary.rows = report.rows.size();

  auto temp_cell = [](const std::optional<double>& t) { return t ? text::fixed(*t, 2) : std::string("pooled"); };
  Table rows{"association",
             "Context association",
             {"engine", "temperature", "kind", "context", "female_names", "male_names", "unknown_names",
              "female_hallucination_share", "actual_female_share", "persons", "female_sim", "male_sim",
              "net_female", "coverage"},
             {}};
  for (const auto& row : report.rows) {
    const auto& c = row.counts;
    rows.rows.push_back({c.engine, temp_cell(c.temperature), std::string(to_string(c.kind)), c.context_key,
                         std::to_string(c.female), std::to_string(c.male), std::to_string(c.unknown),
                         opt_cell(c.female_hallucination_share()), opt_cell(c.actual_female_share()),
                         std::to_string(c.persons), opt_cell(row.score.female_sim), opt_cell(row.score.male_sim),
                         opt_cell(row.score.net_female), text::fixed(row.score.coverage, 6)});
  }
  Table corr{"correlation",
             "Correlation of association with female hallucination share",
             {"engine", "temperature", "kind", "contexts", "r_female_sim", "r_net_female", "note"},
             {}};
  for (const auto& c : report.correlations)
    corr.rows.push_back({c.engine, temp_cell(c.temperature), std::string(to_string(c.kind)),
                         std::to_string(c.contexts), opt_cell(c.r_female_sim), opt_cell(c.r_net_female), c.note});

  fs::create_directories(o.out);
  write_table_csv(o.out / "association.csv", rows, summary.manifest_hash);
  write_table_csv(o.out / "correlation.csv", corr, summary.manifest_hash);
  return summary;
}

}  // namespace biasprobe
