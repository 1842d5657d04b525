// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <boost/math/distributions/students_t.hpp>

#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

#include "biasprobe/association.hpp"
#include "biasprobe/config.hpp"
#include "biasprobe/metrics.hpp"
#include "biasprobe/parsing.hpp"
#include "biasprobe/pipeline.hpp"
#include "biasprobe/report.hpp"
#include "biasprobe/stats.hpp"
#include "biasprobe/text.hpp"
#include "test_util.hpp"

namespace biasprobe {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;
using testing::write_text;

struct Outcome_ {
  bool ok = true;
  std::string detail;

  void check(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

std::string num(double v, int digits = 4) { return text::fixed(v, digits); }

fs::path config_path(const std::string& name) { return fs::path(BIASPROBE_FIXTURES) / "../../configs" / name; }

// CSV written by the pipeline, minus its manifest comment line.
text::CsvTable read_pipeline_csv(const fs::path& path) {
  std::string content = text::read_file(path);
  if (content.rfind("# ", 0) == 0) content.erase(0, content.find('\n') + 1);
  std::istringstream in(content);
  return text::read_csv(in);
}

// 1. Published miss rates recomputed into DPD.
Outcome_ dpd_recomputation() {
  Outcome_ o;
  const auto reference = nlohmann::json::parse(text::read_file(testing::fixture("reference_tables.json")));
  const auto findings = check_reference_dpd(reference);
  auto find = [&](const std::string& task) -> const ReferenceFinding* {
    for (const auto& f : findings)
      if (f.task == task && f.engine == "gpt-3.5" && f.temperature == 0) return &f;
    return nullptr;
  };
  const auto* ent = find("entrepreneurs");
  const auto* nobel = find("nobel_prize");
  const auto* actors = find("actors");
  if (!ent || !nobel || !actors) {
    o.check(false, "reference entries missing");
    return o;
  }
  o.check(std::abs(ent->computed_dpd - 0.010) <= 1e-3 && !ent->flagged, "entrepreneurs dpd " + num(ent->computed_dpd));
  o.check(std::abs(nobel->computed_dpd - 0.111) <= 1e-3 && !nobel->flagged, "nobel dpd " + num(nobel->computed_dpd));
  o.check(std::abs(actors->computed_dpd - 0.083) <= 1e-3, "actors dpd " + num(actors->computed_dpd));
  o.check(actors->flagged, "actors divergence from 0.092 not flagged");

  TempDir dir;
  write_report(MetricsDocument{}, ReportFormat::Csv, dir.path(), reference);
  const auto csv = text::read_file(dir / "reference_check.csv");
  o.check(csv.find("actors,gpt-3.5,0,0.375,0.292,0.083,0.092,INCONSISTENT") != std::string::npos,
          "report row for actors t=0 not marked INCONSISTENT");
  o.detail = "entrepreneurs " + num(ent->computed_dpd, 3) + ", nobel " + num(nobel->computed_dpd, 3) +
             ", actors " + num(actors->computed_dpd, 3) + " (published 0.092, flagged)" +
             (o.detail.empty() ? "" : " | " + o.detail);
  return o;
}

// 2. RCS formula suite.
Outcome_ rcs_suite() {
  Outcome_ o;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 1);
  double worst_self = 0;
  for (int i = 0; i < 100; ++i) {
    Eigen::VectorXd d = Eigen::VectorXd::NullaryExpr(2 + i % 5, [&] { return u(rng); });
    d /= d.sum();
    worst_self = std::max(worst_self, std::abs(rcs(d, d) - 1.0));
  }
  o.check(worst_self <= 1e-12, "rcs(d,d) off by " + num(worst_self, 15));
  const double a = rcs(GenderDistribution::binary(0.9, 0.1), GenderDistribution::binary(0.6, 0.4));
  const double b = rcs(GenderDistribution::binary(1, 0), GenderDistribution::binary(0.6, 0.4));
  o.check(std::abs(a - 0.7) <= 1e-9, "rcs((0.9,0.1),(0.6,0.4)) = " + num(a, 12));
  o.check(std::abs(b - 0.6) <= 1e-9, "rcs((1,0),(0.6,0.4)) = " + num(b, 12));
  int violations = 0;
  for (int i = 0; i < 1000; ++i) {
    const int k = 2 + i % 4;
    Eigen::VectorXd actual = Eigen::VectorXd::NullaryExpr(k, [&] { return u(rng); });
    actual /= actual.sum();
    const auto coord = static_cast<Eigen::Index>(rng() % static_cast<unsigned>(k));
    const double sign = rng() % 2 ? 1.0 : -1.0;
    const double small = u(rng) * 0.5, large = small + u(rng) * 0.5;
    Eigen::VectorXd near = actual, far = actual;
    near(coord) += sign * small;
    far(coord) += sign * large;
    if (rcs(far, actual) > rcs(near, actual)) ++violations;
  }
  o.check(violations == 0, std::to_string(violations) + " monotonicity violations");
  o.detail = "self max dev " + num(worst_self, 15) + ", 0.7 case " + num(a, 12) + ", 0.6 case " + num(b, 12) +
             ", monotone on 1000 pairs" + (o.detail.empty() ? "" : " | " + o.detail);
  return o;
}

// 3. recall + hallucination + declination = 1 for every person of a fuzzed run set.
Outcome_ miss_identity() {
  Outcome_ o;
  std::mt19937_64 rng(3);
  std::vector<RunRecord> records;
  int person = 0;
  while (records.size() < 10000) {
    const int runs = 1 + static_cast<int>(rng() % 5);
    const double t = std::array{0.0, 0.5, 1.0}[rng() % 3];
    for (int r = 1; r <= runs && records.size() < 10000; ++r) {
      auto rec = testing::record("p" + std::to_string(person), static_cast<Outcome>(rng() % 3),
                                 rng() % 2 ? Gender::Female : Gender::Male, r);
      rec.temperature = t;
      records.push_back(std::move(rec));
    }
    ++person;
  }
  std::map<std::tuple<std::string, double>, std::vector<RunRecord>> by_person;
  for (const auto& r : records) by_person[{r.person_id, r.temperature}].push_back(r);
  int bad = 0;
  for (const auto& [key, recs] : by_person) {
    const auto p = person_outcomes(recs);
    if (p.recall() + p.hallucination_rate() + p.declination_rate() != 1.0) ++bad;
    if (p.miss() != static_cast<double>(p.hallucinated + p.declined) / p.runs) ++bad;
    if (p.correct + p.hallucinated + p.declined != p.runs) ++bad;
  }
  // And through the slice scorer.
  for (const auto& s : score_all(records))
    if (!(s.miss.overall >= 0 && s.miss.overall <= 1)) ++bad;
  o.check(bad == 0, std::to_string(bad) + " identity violations");
  o.detail = std::to_string(records.size()) + " records, " + std::to_string(by_person.size()) +
             " person slices, exact identity" + (o.detail.empty() ? "" : " | " + o.detail);
  return o;
}

// 4. Welch t-test against Boost's Student t.
Outcome_ welch_oracle() {
  Outcome_ o;
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> size(3, 50);
  std::normal_distribution<double> n01(0, 1);
  double worst = 0;
  for (int k = 0; k < 20; ++k) {
    std::vector<double> a(size(rng)), b(size(rng));
    for (auto& v : a) v = n01(rng);
    for (auto& v : b) v = (0.5 + k * 0.1) * n01(rng) + 0.05 * k;
    double ma = 0, mb = 0, va = 0, vb = 0;
    for (double v : a) ma += v / a.size();
    for (double v : b) mb += v / b.size();
    for (double v : a) va += (v - ma) * (v - ma) / (a.size() - 1);
    for (double v : b) vb += (v - mb) * (v - mb) / (b.size() - 1);
    const double sa = va / a.size(), sb = vb / b.size();
    const double t = (ma - mb) / std::sqrt(sa + sb);
    const double df = (sa + sb) * (sa + sb) / (sa * sa / (a.size() - 1) + sb * sb / (b.size() - 1));
    const double p = 2 * boost::math::cdf(boost::math::complement(boost::math::students_t(df), std::abs(t)));
    const auto r = stats::welch_t_test(a, b);
    worst = std::max({worst, std::abs(r.t - t), std::abs(r.df - df), std::abs(r.p_two_sided - p)});
  }
  o.check(worst <= 1e-6, "max deviation " + num(worst, 12));
  const auto hand = stats::welch_t_test(std::vector<double>{0.1, 0.2, 0.3}, std::vector<double>{0.2, 0.3, 0.4});
  o.check(std::abs(hand.t + 1.2247) <= 1e-4, "hand t " + num(hand.t));
  o.check(std::abs(hand.df - 4.0) <= 1e-9, "hand df " + num(hand.df));
  o.check(std::abs(hand.p_two_sided - 0.288) <= 1e-3, "hand p " + num(hand.p_two_sided));
  o.detail = "20 pairs max dev " + num(worst, 12) + "; hand t=" + num(hand.t) + " df=" + num(hand.df, 2) +
             " p=" + num(hand.p_two_sided) + (o.detail.empty() ? "" : " | " + o.detail);
  return o;
}

struct SimRun {
  ScoreSummary score;
  double female_share = 0;
  int names = 0;
  double min_rcs = 1, max_rcs = 0;
};

SimRun run_and_score(Config c) {
  cmd_run(c);
  ScoreOptions so;
  so.runs = {c.paths.out / kRunsFile};
  so.ssa = c.paths.ssa;
  so.out = c.paths.out;
  SimRun out{cmd_score(so)};
  int f = 0, m = 0;
  for (const auto& s : out.score.slices) {
    f += s.rcs_hallucinated.female_names;
    m += s.rcs_hallucinated.male_names;
    const double v = s.rcs_hallucinated.value.value_or(-1);
    out.min_rcs = std::min(out.min_rcs, v);
    out.max_rcs = std::max(out.max_rcs, v);
  }
  out.names = f + m;
  out.female_share = out.names ? static_cast<double>(f) / out.names : -1;
  return out;
}

Config load_sim(const std::string& name, const fs::path& out) {
  Config c = load_config(config_path(name));
  c.paths.out = out;
  finalize(c);
  return c;
}

// 5. The three simulated processes separate end to end on 200 entrepreneurs.
Outcome_ process_separation() {
  Outcome_ o;
  TempDir dir;
  const auto tr = run_and_score(load_sim("sim_true_representation.toml", dir / "tr"));
  const auto ab = run_and_score(load_sim("sim_association.toml", dir / "ab"));
  const auto pr = run_and_score(load_sim("sim_prejudice.toml", dir / "pr"));
  for (const auto* r : {&tr, &ab, &pr})
    o.check(r->score.slices.size() == 3 && r->score.slices[0].persons == 200, "expected 3 slices of 200 persons");
  o.check(std::abs(tr.female_share - 0.40) <= 0.02, "true representation share " + num(tr.female_share));
  o.check(tr.min_rcs >= 0.97, "true representation rcs " + num(tr.min_rcs));
  o.check(std::abs(ab.female_share - 0.10) <= 0.02, "association share " + num(ab.female_share));
  o.check(pr.female_share == 0.0, "prejudice share " + num(pr.female_share));
  o.check(std::abs(pr.min_rcs - 0.6) <= 0.02 && std::abs(pr.max_rcs - 0.6) <= 0.02,
          "prejudice rcs " + num(pr.min_rcs) + ".." + num(pr.max_rcs));
  o.detail = "true_rep share " + num(tr.female_share, 3) + " rcs>=" + num(tr.min_rcs, 3) + "; association share " +
             num(ab.female_share, 3) + "; prejudice share " + num(pr.female_share, 3) + " rcs " +
             num(pr.min_rcs, 3) + " (" + std::to_string(tr.names + ab.names + pr.names) + " names)" +
             (o.detail.empty() ? "" : " | " + o.detail);
  return o;
}

// 6. Parsing fixture labels.
Outcome_ parsing_corpus() {
  Outcome_ o;
  const auto rows = testing::load_parsing_fixture();
  int agree = 0, declinations = 0;
  bool march = false, quoted_a = false, quoted_b = false;
  for (const auto& r : rows) {
    const auto parsed = parse_response(r.raw_text);
    const bool ok = classify_outcome(parsed, r.truth) == r.expected &&
                    (parsed.declined || parsed.names == r.expected_names);
    agree += ok;
    if (!ok) o.check(false, r.id);
    declinations += r.category == "declination";
    if (r.raw_text.find("Fredric March") != std::string::npos && r.truth.year == 1932 &&
        r.truth.award_type == AwardType::Actress && r.expected == Outcome::Hallucination)
      march = true;
    quoted_a = quoted_a || r.raw_text.find("I do not know that information") != std::string::npos;
    quoted_b = quoted_b || r.raw_text.find("outside of my training data") != std::string::npos;
  }
  o.check(rows.size() == 60 && declinations == 20, "fixture shape");
  o.check(march, "Fredric March 1932 case missing");
  o.check(quoted_a && quoted_b, "quoted declination phrases missing");
  o.detail = std::to_string(agree) + "/" + std::to_string(rows.size()) + " labels agree" +
             (o.detail.empty() ? "" : " | " + o.detail);
  return o;
}

// Simulator run over one entrepreneur per (context, index) with fixed context shares,
// followed by associate; returns pooled industry r.
std::optional<double> pooled_industry_r(const fs::path& dir, const std::vector<std::string>& contexts,
                                        const SimulatorParams& base, int persons_per_context, std::string& note) {
  std::string csv = "id,full_name,industry,company,gender\n";
  for (std::size_t c = 0; c < contexts.size(); ++c)
    for (int i = 0; i < persons_per_context; ++i)
      csv += "c" + std::to_string(c) + "p" + std::to_string(i) + ",Truth Zq" + std::to_string(c) + "x" +
             std::to_string(i) + "," + contexts[c] + ",Firm" + std::to_string(c) + "x" + std::to_string(i) + "," +
             (i % 5 < 2 ? "female" : "male") + "\n";
  fs::create_directories(dir);
  write_text(dir / "corpus.csv", csv);

  Config c;
  c.simulator = base;
  c.paths.corpora = {{TaskKind::Entrepreneurs, dir / "corpus.csv"}};
  c.paths.name_pool = testing::fixture("name_pool.csv");
  c.paths.ssa = testing::fixture("ssa_fixture.csv");
  c.paths.embeddings = testing::fixture("embeddings_fixture.txt");
  c.paths.out = dir / "out";
  finalize(c);
  cmd_run(c);

  AssociateOptions ao;
  ao.runs = {c.paths.out / kRunsFile};
  ao.corpora = c.paths.corpora;
  ao.embeddings = *c.paths.embeddings;
  ao.ssa = c.paths.ssa;
  ao.out = c.paths.out;
  cmd_associate(ao);
  const auto t = read_pipeline_csv(c.paths.out / "correlation.csv");
  const auto col = [&](const char* name) { return *t.column(name); };
  for (const auto& row : t.rows) {
    if (row[col("temperature")] != "pooled" || row[col("kind")] != "industry") continue;
    note = row[col("contexts")] + " contexts";
    if (row[col("r_female_sim")].empty()) return std::nullopt;
    return std::stod(row[col("r_female_sim")]);
  }
  return std::nullopt;
}

// 7. Embedding geometry, Pearson, and the two end-to-end constructions.
Outcome_ association_geometry() {
  Outcome_ o;
  const auto table = load_embeddings<double>(testing::fixture("embeddings_fixture.txt"));
  const auto gv = gender_vectors(table);
  const auto& unit = *table.find("unit");
  const double parallel = cosine(unit, *table.find("twice"));
  const double orth = cosine(unit, *table.find("orth"));
  const double diag = cosine(unit, *table.find("diag"));
  o.check(std::abs(parallel - 1) <= 1e-5, "parallel " + num(parallel, 8));
  o.check(std::abs(orth) <= 1e-5, "orthogonal " + num(orth, 8));
  o.check(std::abs(diag - 1 / std::sqrt(2.0)) <= 1e-5, "diagonal " + num(diag, 8));
  const auto nursing = gender_association("Nursing", table, gv);
  o.check(nursing.female_sim && *nursing.female_sim > *nursing.male_sim, "nursing not female-leaning");
  const double hand = stats::pearson(std::vector<double>{1, 2, 3}, std::vector<double>{2, 4, 7});
  o.check(std::abs(hand - 0.9934) <= 1e-3, "pearson hand " + num(hand));

  TempDir dir;
  // Correlated: each industry's female share is a linear map of its female similarity.
  const std::vector<std::string> industries{"Nursing", "Cosmetics", "Fashion", "Education", "Retail", "Media",
                                            "Finance", "Software", "Logistics", "Energy", "Construction", "Mining"};
  double lo = 1, hi = -1;
  std::map<std::string, double> sims;
  for (const auto& ind : industries) {
    sims[ind] = *gender_association(ind, table, gv).female_sim;
    lo = std::min(lo, sims[ind]);
    hi = std::max(hi, sims[ind]);
  }
  SimulatorParams correlated;
  correlated.process = RepresentationProcess::AssociationBased;
  correlated.seed = 42;
  for (const auto& ind : industries) correlated.context_female_share[ind] = 0.05 + 0.9 * (sims[ind] - lo) / (hi - lo);
  std::string corr_note;
  const auto r_corr = pooled_industry_r(dir / "correlated", industries, correlated, 20, corr_note);
  o.check(r_corr && *r_corr >= 0.99, "correlated r " + (r_corr ? num(*r_corr) : std::string("absent")));

  // Independent: constant share over 50 two-token contexts. Seed fixed in advance.
  const std::vector<std::string> tokens{"Nursing", "Cosmetics", "Fashion", "Education", "Retail", "Media",
                                        "Finance", "Software", "Logistics", "Energy", "Construction", "Mining",
                                        "Law", "Policy", "Health", "Care"};
  std::vector<std::string> pairs;
  for (std::size_t i = 0; i < tokens.size() && pairs.size() < 50; ++i)
    for (std::size_t j = i + 1; j < tokens.size() && pairs.size() < 50; ++j) pairs.push_back(tokens[i] + " " + tokens[j]);
  SimulatorParams independent;
  independent.process = RepresentationProcess::TrueRepresentation;
  independent.actual_female_share = 0.4;
  independent.seed = 42;
  std::string ind_note;
  const auto r_ind = pooled_industry_r(dir / "independent", pairs, independent, 10, ind_note);
  o.check(r_ind && std::abs(*r_ind) <= 0.1, "independent r " + (r_ind ? num(*r_ind) : std::string("absent")));

  o.detail = "cosines " + num(parallel, 6) + "/" + num(orth, 6) + "/" + num(diag, 6) + ", nursing f=" +
             num(*nursing.female_sim, 3) + " m=" + num(*nursing.male_sim, 3) + ", pearson " + num(hand) +
             ", correlated r " + (r_corr ? num(*r_corr) : "absent") + " (" + corr_note + "), independent r " +
             (r_ind ? num(*r_ind) : "absent") + " (" + ind_note + ")" + (o.detail.empty() ? "" : " | " + o.detail);
  return o;
}

// 8. Repeated runs give identical metrics; an interrupted run resumes to the same records.
Outcome_ determinism_and_resume() {
  Outcome_ o;
  TempDir dir;
  auto a = load_sim("sim_true_representation.toml", dir / "a");
  auto b = load_sim("sim_true_representation.toml", dir / "b");
  run_and_score(a);
  run_and_score(b);
  const bool same_metrics = text::read_file(a.paths.out / kMetricsFile) == text::read_file(b.paths.out / kMetricsFile);
  o.check(same_metrics, "metrics.json differs between identical runs");

  auto cut = load_sim("sim_true_representation.toml", dir / "cut");
  cut.runtime.max_requests = 1234;
  const auto first = cmd_run(cut);
  o.check(first.interrupted && first.backend_calls == 1234, "interrupt did not stop at 1234 calls");
  cut.runtime.max_requests.reset();
  const auto resumed = cmd_run(cut);
  const long expected_new = static_cast<long>(resumed.jobs) - 1234;
  o.check(resumed.backend_calls == expected_new, "resume made " + std::to_string(resumed.backend_calls) +
                                                     " calls, expected " + std::to_string(expected_new));
  const bool same_runs = text::read_file(a.paths.out / kRunsFile) == text::read_file(cut.paths.out / kRunsFile);
  o.check(same_runs, "resumed runs.jsonl differs from the uninterrupted one");

  // The small case: 10 persons x 3 temperatures x 5 runs, cut at 80.
  std::string csv = "id,full_name,industry,company,gender\n";
  for (int i = 0; i < 10; ++i)
    csv += "s" + std::to_string(i) + ",Small Founder" + std::to_string(i) + ",Retail,Shop" + std::to_string(i) + "," +
           (i < 4 ? "female" : "male") + "\n";
  write_text(dir / "small.csv", csv);
  auto small = load_sim("sim_true_representation.toml", dir / "small");
  small.paths.corpora = {{TaskKind::Entrepreneurs, dir / "small.csv"}};
  small.runtime.max_requests = 80;
  const auto s1 = cmd_run(small);
  small.runtime.max_requests.reset();
  const auto s2 = cmd_run(small);
  o.check(s1.records == 80 && s2.records == 150 && s2.backend_calls == 70,
          "small case: " + std::to_string(s1.records) + " then " + std::to_string(s2.backend_calls) + " new calls");

  o.detail = std::string("metrics bytes ") + (same_metrics ? "identical" : "differ") + ", resumed records " +
             (same_runs ? "identical" : "differ") + " (" + std::to_string(resumed.jobs) + " jobs), small case " +
             std::to_string(s1.records) + "+" + std::to_string(s2.backend_calls) + " calls" +
             (o.detail.empty() ? "" : " | " + o.detail);
  return o;
}

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;
  std::function<Outcome_()> run;
};

}  // namespace
}  // namespace biasprobe

int main() {
  using namespace biasprobe;
  const std::vector<Criterion> criteria = {
      {1, "DPD recomputation from published miss rates", 1, dpd_recomputation},
      {2, "RCS formula suite", 1, rcs_suite},
      {3, "miss-rate identity on fuzzed runs", 5, miss_identity},
      {4, "Welch t-test against reference", 1, welch_oracle},
      {5, "simulator process separation", 60, process_separation},
      {6, "parsing corpus labels", 1, parsing_corpus},
      {7, "association geometry and correlation", 2, association_geometry},
      {8, "determinism and resume", 30, determinism_and_resume},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome_ o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.ok = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs > c.budget_seconds) {
      o.ok = false;
      o.detail += " | over time budget";
    }
    failed += !o.ok;
    std::cout << (o.ok ? "PASS" : "FAIL") << " [" << c.id << "] " << c.name << ": " << o.detail << " ("
              << std::fixed << std::setprecision(2) << secs << " s of " << c.budget_seconds << " s)\n";
  }
  std::cout << (failed ? std::to_string(failed) + " criteria failed" : std::string("all criteria passed")) << '\n';
  return failed ? 1 : 0;
}
