#include "biasprobe/report.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "biasprobe/error.hpp"
#include "biasprobe/text.hpp"

namespace biasprobe {

using nlohmann::json;

namespace {

constexpr const char* kNoData = "no data";

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> opt_double(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<double>();
}

json dist_json(const std::optional<GenderDistribution>& d) {
  if (!d) return nullptr;
  return {{"categories", d->categories},
          {"shares", std::vector<double>(d->shares.data(), d->shares.data() + d->shares.size())}};
}

std::optional<GenderDistribution> dist_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  GenderDistribution d;
  d.categories = j.at("categories").get<std::vector<std::string>>();
  const auto shares = j.at("shares").get<std::vector<double>>();
  d.shares = Eigen::Map<const Eigen::VectorXd>(shares.data(), static_cast<Eigen::Index>(shares.size()));
  return d;
}

json rcs_json(const RcsResult& r) {
  return {{"mode", to_string(r.mode)},         {"value", opt(r.value)},
          {"response", dist_json(r.response)}, {"actual", dist_json(r.actual)},
          {"female_names", r.female_names},    {"male_names", r.male_names},
          {"unknown_names", r.unknown_names}};
}

RcsResult rcs_from(const json& j) {
  RcsResult r;
  r.mode = j.at("mode").get<std::string>() == "all_generated" ? RcsMode::AllGenerated : RcsMode::Hallucinated;
  r.value = opt_double(j, "value");
  r.response = dist_from(j.at("response"));
  r.actual = dist_from(j.at("actual"));
  r.female_names = j.at("female_names").get<int>();
  r.male_names = j.at("male_names").get<int>();
  r.unknown_names = j.at("unknown_names").get<int>();
  return r;
}

json split_json(const DeclineSplit& s) {
  return {{"hallucination_rate", opt(s.hallucination_rate)},
          {"declination_rate", opt(s.declination_rate)},
          {"persons", s.persons}};
}

DeclineSplit split_from(const json& j) {
  return {opt_double(j, "hallucination_rate"), opt_double(j, "declination_rate"), j.at("persons").get<int>()};
}

json shares_json(const OutputShares& s) {
  return {{"female", s.female}, {"male", s.male}, {"unknown", s.unknown}, {"responses", s.responses}};
}

OutputShares shares_from(const json& j) {
  return {j.at("female").get<double>(), j.at("male").get<double>(), j.at("unknown").get<double>(),
          j.at("responses").get<int>()};
}

json slice_json(const SliceMetrics& s) {
  json t = nullptr;
  if (s.t_test)
    t = {{"t", s.t_test->t},
         {"df", s.t_test->df},
         {"p_two_sided", s.t_test->p_two_sided},
         {"n_female", s.t_test->n_a},
         {"n_male", s.t_test->n_b}};
  json curve = json::array();
  for (const auto& p : s.homogeneity)
    curve.push_back({{"names_returned", p.names_returned},
                     {"female_share", p.female_share},
                     {"male_share", p.male_share},
                     {"responses", p.responses}});
  return {
      {"task", to_string(s.key.task)},
      {"engine", s.key.engine},
      {"temperature", s.key.temperature},
      {"persons", s.persons},
      {"records", s.records},
      {"miss",
       {{"overall", s.miss.overall},
        {"female", opt(s.miss.female)},
        {"male", opt(s.miss.male)},
        {"n_female", s.miss.n_female},
        {"n_male", s.miss.n_male},
        {"n_unknown", s.miss.n_unknown}}},
      {"t_test", t},
      {"t_test_note", s.t_test_note},
      {"dpd", opt(s.dpd)},
      {"rcs", {{"hallucinated", rcs_json(s.rcs_hallucinated)}, {"all_generated", rcs_json(s.rcs_all)}}},
      {"declination_split", {{"female", split_json(s.female_split)}, {"male", split_json(s.male_split)}}},
      {"output_shares",
       {{"female_population", shares_json(s.output_shares.female_population)},
        {"male_population", shares_json(s.output_shares.male_population)}}},
      {"homogeneity", curve},
      {"prominence_pct", opt(s.prominence_pct)},
  };
}

SliceMetrics slice_from(const json& j) {
  SliceMetrics s;
  const auto task = parse_task(j.at("task").get<std::string>());
  if (!task) throw ValidationError("metrics: unknown task " + j.at("task").dump());
  s.key = {*task, j.at("engine").get<std::string>(), j.at("temperature").get<double>()};
  s.persons = j.at("persons").get<int>();
  s.records = j.at("records").get<int>();
  const auto& m = j.at("miss");
  s.miss.overall = m.at("overall").get<double>();
  s.miss.female = opt_double(m, "female");
  s.miss.male = opt_double(m, "male");
  s.miss.n_female = m.at("n_female").get<int>();
  s.miss.n_male = m.at("n_male").get<int>();
  s.miss.n_unknown = m.at("n_unknown").get<int>();
  if (const auto& t = j.at("t_test"); !t.is_null())
    s.t_test = stats::TTestResult{t.at("t").get<double>(), t.at("df").get<double>(),
                                  t.at("p_two_sided").get<double>(), t.at("n_female").get<int>(),
                                  t.at("n_male").get<int>()};
  s.t_test_note = j.value("t_test_note", "");
  s.dpd = opt_double(j, "dpd");
  s.rcs_hallucinated = rcs_from(j.at("rcs").at("hallucinated"));
  s.rcs_all = rcs_from(j.at("rcs").at("all_generated"));
  s.female_split = split_from(j.at("declination_split").at("female"));
  s.male_split = split_from(j.at("declination_split").at("male"));
  s.output_shares.female_population = shares_from(j.at("output_shares").at("female_population"));
  s.output_shares.male_population = shares_from(j.at("output_shares").at("male_population"));
  for (const auto& p : j.at("homogeneity"))
    s.homogeneity.push_back({p.at("names_returned").get<int>(), p.at("female_share").get<double>(),
                             p.at("male_share").get<double>(), p.at("responses").get<int>()});
  s.prominence_pct = opt_double(j, "prominence_pct");
  return s;
}

std::string cell(const std::optional<double>& v, int digits = 3) { return v ? text::fixed(*v, digits) : kNoData; }

std::string task_label(TaskKind t) {
  switch (t) {
    case TaskKind::Entrepreneurs: return "Entrepreneurs";
    case TaskKind::NobelPrize: return "Nobel Prize";
    case TaskKind::Actors: return "Actors";
  }
  return "";
}

std::string temp_label(double t) {
  std::string s = text::fixed(t, 2);
  while (s.back() == '0') s.pop_back();
  if (s.back() == '.') s.pop_back();
  return s;
}

// Column layout shared by the wide tables.
struct Grid {
  std::vector<std::pair<std::string, double>> columns;
  std::vector<TaskKind> tasks;
  std::map<std::tuple<TaskKind, std::string, double>, const SliceMetrics*> cells;

  explicit Grid(std::span<const SliceMetrics> slices) {
    std::set<std::pair<std::string, double>> cols;
    std::set<TaskKind> present;
    for (const auto& s : slices) {
      cols.insert({s.key.engine, s.key.temperature});
      present.insert(s.key.task);
      cells[{s.key.task, s.key.engine, s.key.temperature}] = &s;
    }
    columns.assign(cols.begin(), cols.end());
    for (TaskKind t : kAllTasks)
      if (present.count(t)) tasks.push_back(t);
  }

  std::vector<std::string> header(std::vector<std::string> lead) const {
    for (const auto& [engine, t] : columns) lead.push_back(engine + " t=" + temp_label(t));
    return lead;
  }

  template <typename F>
  std::vector<std::string> row(std::vector<std::string> lead, TaskKind task, F value) const {
    for (const auto& [engine, t] : columns) {
      auto it = cells.find({task, engine, t});
      lead.push_back(it == cells.end() ? std::string(kNoData) : value(*it->second));
    }
    return lead;
  }
};

void no_data_row(Table& t) {
  if (!t.rows.empty()) return;
  std::vector<std::string> row(t.header.size(), kNoData);
  t.rows.push_back(std::move(row));
}

}  // namespace

json to_json(const MetricsDocument& doc) {
  json slices = json::array();
  for (const auto& s : doc.slices) slices.push_back(slice_json(s));
  return {{"manifest", doc.manifest},
          {"gender_table_hash", doc.gender_table_hash},
          {"slices", slices},
          {"warnings", doc.warnings}};
}

MetricsDocument metrics_from_json(const json& j) {
  try {
    MetricsDocument doc;
    doc.manifest = j.at("manifest").get<std::string>();
    doc.gender_table_hash = j.value("gender_table_hash", "");
    for (const auto& s : j.at("slices")) doc.slices.push_back(slice_from(s));
    doc.warnings = j.value("warnings", std::vector<std::string>{});
    return doc;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("metrics JSON: ") + e.what());
  }
}

MetricsDocument read_metrics(const std::filesystem::path& path) {
  const json j = json::parse(text::read_file(path), nullptr, false);
  if (j.is_discarded()) throw ParseError(path.string() + " is not valid JSON");
  return metrics_from_json(j);
}

void write_metrics(const std::filesystem::path& path, const MetricsDocument& doc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw PathError("cannot write " + path.string());
  out << to_json(doc).dump(2) << '\n';
}

Table miss_rate_table(std::span<const SliceMetrics> slices) {
  Grid g(slices);
  Table t{"miss_rate", "Miss rate", g.header({"task", "population"}), {}};
  for (TaskKind task : g.tasks) {
    const auto name = task_label(task);
    t.rows.push_back(g.row({name, "Overall"}, task, [](const SliceMetrics& s) { return text::fixed(s.miss.overall); }));
    t.rows.push_back(g.row({name, "Female"}, task, [](const SliceMetrics& s) { return cell(s.miss.female); }));
    t.rows.push_back(g.row({name, "Male"}, task, [](const SliceMetrics& s) { return cell(s.miss.male); }));
    t.rows.push_back(g.row({name, "p-value"}, task, [](const SliceMetrics& s) {
      return s.t_test ? text::fixed(s.t_test->p_two_sided) : std::string(kNoData);
    }));
  }
  no_data_row(t);
  return t;
}

Table fairness_table(std::span<const SliceMetrics> slices) {
  Grid g(slices);
  Table t{"fairness", "Fairness metrics", g.header({"task", "metric"}), {}};
  for (TaskKind task : g.tasks) {
    const auto name = task_label(task);
    t.rows.push_back(g.row({name, "DPD"}, task, [](const SliceMetrics& s) { return cell(s.dpd); }));
    t.rows.push_back(g.row({name, "RCS"}, task, [](const SliceMetrics& s) { return cell(s.rcs_hallucinated.value); }));
    t.rows.push_back(
        g.row({name, "RCS all names"}, task, [](const SliceMetrics& s) { return cell(s.rcs_all.value); }));
  }
  no_data_row(t);
  return t;
}

Table output_share_table(std::span<const SliceMetrics> slices) {
  Grid g(slices);
  Table t{"name_gender", "Gender of generated names", g.header({"task", "population", "label"}), {}};
  auto share_cell = [](const OutputShares& o, double v) {
    return o.responses ? text::fixed(v) : std::string(kNoData);
  };
  for (TaskKind task : g.tasks) {
    const auto name = task_label(task);
    for (bool female_pop : {true, false}) {
      const std::string pop = female_pop ? "Female" : "Male";
      auto pick = [female_pop](const SliceMetrics& s) -> const OutputShares& {
        return female_pop ? s.output_shares.female_population : s.output_shares.male_population;
      };
      t.rows.push_back(g.row({name, pop, "female"}, task, [&](const SliceMetrics& s) {
        return share_cell(pick(s), pick(s).female);
      }));
      t.rows.push_back(g.row({name, pop, "male"}, task, [&](const SliceMetrics& s) {
        return share_cell(pick(s), pick(s).male);
      }));
      t.rows.push_back(g.row({name, pop, "unknown"}, task, [&](const SliceMetrics& s) {
        return share_cell(pick(s), pick(s).unknown);
      }));
    }
  }
  no_data_row(t);
  return t;
}

Table decline_split_table(std::span<const SliceMetrics> slices) {
  Table t{"declination",
          "Hallucination and declination by gender",
          {"task", "engine", "temperature", "gender", "persons", "hallucination_rate", "declination_rate"},
          {}};
  for (const auto& s : slices) {
    for (const auto& [label, split] : {std::pair{"female", &s.female_split}, std::pair{"male", &s.male_split}}) {
      t.rows.push_back({std::string(to_string(s.key.task)), s.key.engine, temp_label(s.key.temperature), label,
                        std::to_string(split->persons), cell(split->hallucination_rate),
                        cell(split->declination_rate)});
    }
  }
  no_data_row(t);
  return t;
}

Table homogeneity_table(std::span<const SliceMetrics> slices) {
  Table t{"homogeneity",
          "Female share by number of names returned",
          {"task", "engine", "temperature", "names_returned", "responses", "female_share", "male_share"},
          {}};
  for (const auto& s : slices)
    for (const auto& p : s.homogeneity)
      t.rows.push_back({std::string(to_string(s.key.task)), s.key.engine, temp_label(s.key.temperature),
                        std::to_string(p.names_returned), std::to_string(p.responses),
                        text::fixed(p.female_share), text::fixed(p.male_share)});
  no_data_row(t);
  return t;
}

void write_csv(std::ostream& out, const Table& table, const std::string& manifest) {
  out << "# manifest=" << manifest << '\n';
  text::write_csv_row(out, table.header);
  for (const auto& row : table.rows) text::write_csv_row(out, row);
}

void write_markdown(std::ostream& out, const Table& table) {
  out << "## " << table.title << "\n\n|";
  for (const auto& h : table.header) out << ' ' << h << " |";
  out << "\n|";
  for (std::size_t i = 0; i < table.header.size(); ++i) out << " --- |";
  out << '\n';
  for (const auto& row : table.rows) {
    out << '|';
    for (const auto& c : row) out << ' ' << c << " |";
    out << '\n';
  }
  out << '\n';
}

std::vector<ReferenceFinding> check_reference_dpd(const json& reference, double tolerance) {
  std::vector<ReferenceFinding> out;
  try {
    for (const auto& e : reference.at("entries")) {
      ReferenceFinding f;
      f.task = e.at("task").get<std::string>();
      f.engine = e.at("engine").get<std::string>();
      f.temperature = e.at("temperature").get<double>();
      f.female = e.at("female").get<double>();
      f.male = e.at("male").get<double>();
      f.published_dpd = e.at("dpd").get<double>();
      f.computed_dpd = dpd(f.female, f.male);
      // Slack for the binary representation of three-decimal inputs.
      f.flagged = std::abs(f.computed_dpd - f.published_dpd) > tolerance + 1e-9;
      out.push_back(std::move(f));
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("reference tables: ") + e.what());
  }
  return out;
}

Table reference_table(std::span<const ReferenceFinding> findings) {
  Table t{"reference_check",
          "Published DPD recomputed from published miss rates",
          {"task", "engine", "temperature", "female", "male", "computed_dpd", "published_dpd", "status"},
          {}};
  for (const auto& f : findings)
    t.rows.push_back({f.task, f.engine, temp_label(f.temperature), text::fixed(f.female), text::fixed(f.male),
                      text::fixed(f.computed_dpd), text::fixed(f.published_dpd),
                      f.flagged ? "INCONSISTENT" : "ok"});
  no_data_row(t);
  return t;
}

ReportFormat parse_report_format(std::string_view s) {
  const auto key = text::to_lower_ascii(text::trim(s));
  if (key == "md" || key == "markdown") return ReportFormat::Markdown;
  if (key == "csv") return ReportFormat::Csv;
  throw UsageError("unknown report format '" + std::string(s) + "' (expected md or csv)");
}

std::vector<std::filesystem::path> write_report(const MetricsDocument& doc, ReportFormat format,
                                                const std::filesystem::path& out_dir,
                                                const std::optional<json>& reference) {
  std::filesystem::create_directories(out_dir);
  std::vector<Table> tables = {miss_rate_table(doc.slices), fairness_table(doc.slices),
                               output_share_table(doc.slices), decline_split_table(doc.slices),
                               homogeneity_table(doc.slices)};
  if (reference) {
    const auto findings = check_reference_dpd(*reference);
    tables.push_back(reference_table(findings));
  }

  std::vector<std::filesystem::path> written;
  auto open = [&](const std::filesystem::path& p) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw PathError("cannot write " + p.string());
    written.push_back(p);
    return out;
  };
  auto csv = [&](const Table& t) {
    auto out = open(out_dir / (t.name + ".csv"));
    write_csv(out, t, doc.manifest);
  };

  if (format == ReportFormat::Csv) {
    for (const auto& t : tables) csv(t);
    return written;
  }
  {
    auto out = open(out_dir / "report.md");
    out << "# Fairness report\n\nManifest: `" << doc.manifest << "`\n\n"
        << "- p-value: Welch (unequal variance) t-test of per-person miss rates, female vs male.\n"
        << "- RCS: response shares from hallucinated names; \"RCS all names\" uses every generated name.\n"
        << "- Names with unknown gender are left out of RCS and DPD and counted in the share tables.\n\n";
    if (doc.slices.empty()) out << "No scored slices: every table below reads \"no data\".\n\n";
    for (const auto& t : tables) write_markdown(out, t);
    for (const auto& s : doc.slices)
      if (s.prominence_pct)
        out << "Prominence (" << to_string(s.key.task) << ", " << s.key.engine << " t=" << temp_label(s.key.temperature)
            << "): female search counts " << text::fixed(*s.prominence_pct, 1) << "% relative to male\n";
  }
  // Figure data stays machine readable in markdown mode as well.
  csv(tables[3]);
  csv(tables[4]);
  return written;
}

}  // namespace biasprobe
