#include "biasprobe/records.hpp"

#include <fstream>

#include "biasprobe/error.hpp"

namespace biasprobe {
namespace {

template <typename T>
std::optional<T> optional_field(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

}  // namespace

nlohmann::ordered_json to_json(const ParsedRun& r) {
  nlohmann::ordered_json j;
  j["manifest"] = r.manifest;
  j["person_id"] = r.person_id;
  j["prompt_id"] = r.prompt_id;
  j["task"] = to_string(r.task);
  j["engine"] = r.engine;
  j["temperature"] = r.temperature;
  j["run_index"] = r.run_index;
  j["status"] = r.status == RunStatus::Ok ? "ok" : "failed";
  if (!r.error.empty()) j["error"] = r.error;
  j["raw_text"] = r.raw_text;
  j["names"] = r.names;
  j["name_matches"] = r.name_matches;
  j["declined"] = r.declined;
  j["outcome"] = to_string(r.outcome);
  j["override"] = r.override_outcome ? nlohmann::ordered_json(to_string(*r.override_outcome))
                                     : nlohmann::ordered_json(nullptr);
  j["truth_name"] = r.truth_name;
  j["truth_gender"] = to_string(r.truth_gender);
  if (r.year) j["year"] = *r.year;
  if (r.subject) j["subject"] = *r.subject;
  if (r.industry) j["industry"] = *r.industry;
  if (r.company) j["company"] = *r.company;
  if (r.award_type) j["award_type"] = to_string(*r.award_type);
  if (r.search_count) j["search_count"] = *r.search_count;
  return j;
}

ParsedRun parsed_run_from_json(const nlohmann::json& j) {
  ParsedRun r;
  r.manifest = j.value("manifest", "");
  r.person_id = j.at("person_id").get<std::string>();
  r.prompt_id = j.value("prompt_id", r.person_id);
  auto task = parse_task(j.at("task").get<std::string>());
  if (!task) throw ParseError("unknown task '" + j.at("task").get<std::string>() + "'");
  r.task = *task;
  r.engine = j.at("engine").get<std::string>();
  r.temperature = j.at("temperature").get<double>();
  r.run_index = j.at("run_index").get<int>();
  r.status = j.value("status", "ok") == "failed" ? RunStatus::Failed : RunStatus::Ok;
  r.error = j.value("error", "");
  r.raw_text = j.value("raw_text", "");
  r.names = j.value("names", std::vector<std::string>{});
  r.name_matches = j.value("name_matches", std::vector<bool>(r.names.size(), false));
  if (r.name_matches.size() != r.names.size())
    throw ParseError("name_matches length differs from names for " + r.person_id);
  r.declined = j.value("declined", false);
  auto outcome = parse_outcome(j.value("outcome", "hallucination"));
  if (!outcome) throw ParseError("unknown outcome for " + r.person_id);
  r.outcome = *outcome;
  if (auto ov = optional_field<std::string>(j, "override"); ov && !ov->empty()) {
    auto parsed = parse_outcome(*ov);
    if (!parsed) throw ParseError("unknown override '" + *ov + "' for " + r.person_id);
    r.override_outcome = *parsed;
  }
  r.truth_name = j.value("truth_name", "");
  r.truth_gender = parse_gender(j.value("truth_gender", "unknown")).value_or(Gender::Unknown);
  r.year = optional_field<int>(j, "year");
  r.subject = optional_field<std::string>(j, "subject");
  r.industry = optional_field<std::string>(j, "industry");
  r.company = optional_field<std::string>(j, "company");
  if (auto a = optional_field<std::string>(j, "award_type"))
    r.award_type = *a == "Actor" ? AwardType::Actor : AwardType::Actress;
  r.search_count = optional_field<std::uint64_t>(j, "search_count");
  return r;
}

std::vector<ParsedRun> read_runs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw PathError("cannot open runs file: " + path.string());
  std::vector<ParsedRun> runs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      runs.push_back(parsed_run_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("invalid run record: ") + e.what(), line_no);
    } catch (const ParseError& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return runs;
}

RunRecord to_run_record(const ParsedRun& run, const GenderTable& table,
                        const InferenceOptions& options) {
  RunRecord rec;
  rec.person_id = run.person_id;
  rec.prompt_id = run.prompt_id;
  rec.task = run.task;
  rec.engine = run.engine;
  rec.temperature = run.temperature;
  rec.run_index = run.run_index;
  rec.outcome = run.effective_outcome();
  if (rec.outcome != Outcome::Declination) {
    for (std::size_t i = 0; i < run.names.size(); ++i)
      rec.generated.push_back(
          GeneratedName{run.names[i], infer_gender(run.names[i], table, options),
                        i < run.name_matches.size() && run.name_matches[i]});
  }
  rec.truth_gender = run.truth_gender;
  if (rec.truth_gender == Gender::Unknown && run.task == TaskKind::Entrepreneurs &&
      !run.truth_name.empty())
    rec.truth_gender = infer_gender(run.truth_name, table, options).label;
  rec.search_count = run.search_count;
  rec.industry = run.industry;
  rec.company = run.company;
  rec.subject = run.subject;
  return rec;
}

}  // namespace biasprobe
