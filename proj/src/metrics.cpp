#include "biasprobe/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <set>

namespace biasprobe {

PersonOutcome person_outcomes(std::span<const RunRecord> records) {
  if (records.empty()) throw DomainError("person_outcomes: no records");
  PersonOutcome out;
  const RunRecord& first = records.front();
  out.person_id = first.person_id;
  for (const auto& r : records) {
    if (r.person_id != first.person_id || r.engine != first.engine ||
        r.temperature != first.temperature)
      throw DomainError("person_outcomes: records mix persons, engines or temperatures");
    ++out.runs;
    switch (r.outcome) {
      case Outcome::Correct: ++out.correct; break;
      case Outcome::Hallucination: ++out.hallucinated; break;
      case Outcome::Declination: ++out.declined; break;
    }
  }
  return out;
}

GroupMissRates group_miss_rates(std::span<const PersonOutcome> outcomes,
                                const std::map<std::string, Gender>& genders) {
  if (outcomes.empty()) throw DomainError("group_miss_rates: no persons");
  GroupMissRates out;
  double sum_all = 0, sum_f = 0, sum_m = 0;
  for (const auto& o : outcomes) {
    const double miss = o.miss();
    sum_all += miss;
    auto it = genders.find(o.person_id);
    const Gender g = it == genders.end() ? Gender::Unknown : it->second;
    if (g == Gender::Female) {
      sum_f += miss;
      ++out.n_female;
    } else if (g == Gender::Male) {
      sum_m += miss;
      ++out.n_male;
    } else {
      ++out.n_unknown;
    }
  }
  out.overall = sum_all / static_cast<double>(outcomes.size());
  if (out.n_female) out.female = sum_f / out.n_female;
  if (out.n_male) out.male = sum_m / out.n_male;
  return out;
}

double dpd(double rate_a, double rate_b) {
  if (!(rate_a >= 0 && rate_a <= 1) || !(rate_b >= 0 && rate_b <= 1))
    throw DomainError("dpd: rates must lie in [0, 1]");
  return std::fabs(rate_a - rate_b);
}

double rcs(const GenderDistribution& response, const GenderDistribution& actual) {
  if (response.categories != actual.categories)
    throw DomainError("rcs: response and actual use different categories");
  if (static_cast<std::size_t>(response.shares.size()) != response.categories.size() ||
      static_cast<std::size_t>(actual.shares.size()) != actual.categories.size())
    throw DomainError("rcs: share vector does not match its category list");
  return rcs(response.shares, actual.shares);
}

std::string_view to_string(RcsMode mode) {
  return mode == RcsMode::Hallucinated ? "hallucinated" : "all_generated";
}

std::vector<const RunRecord*> unique_responses(std::span<const RunRecord> records) {
  std::map<std::pair<std::string, int>, const RunRecord*> first;
  for (const auto& r : records) {
    auto key = std::make_pair(r.prompt_id, r.run_index);
    auto [it, inserted] = first.try_emplace(key, &r);
    // Keep the lexicographically smallest person_id so the pick is order-independent.
    if (!inserted && r.person_id < it->second->person_id) it->second = &r;
  }
  std::vector<const RunRecord*> out;
  out.reserve(first.size());
  for (const auto& [key, rec] : first) out.push_back(rec);
  return out;
}

namespace {

std::map<std::string, Gender> person_genders(std::span<const RunRecord> records) {
  std::map<std::string, Gender> genders;
  for (const auto& r : records) genders.try_emplace(r.person_id, r.truth_gender);
  return genders;
}

// Female when any member is female, male when all members are male.
std::map<std::string, Gender> prompt_populations(std::span<const RunRecord> records) {
  std::map<std::string, std::set<Gender>> members;
  for (const auto& r : records) members[r.prompt_id].insert(r.truth_gender);
  std::map<std::string, Gender> out;
  for (const auto& [prompt, genders] : members) {
    if (genders.count(Gender::Female)) out[prompt] = Gender::Female;
    else if (genders.size() == 1 && *genders.begin() == Gender::Male) out[prompt] = Gender::Male;
    else out[prompt] = Gender::Unknown;
  }
  return out;
}

}  // namespace

RcsResult slice_rcs(std::span<const RunRecord> records, RcsMode mode) {
  RcsResult out;
  out.mode = mode;
  for (const RunRecord* r : unique_responses(records)) {
    for (const auto& g : r->generated) {
      if (mode == RcsMode::Hallucinated && g.matches_truth) continue;
      switch (g.gender.label) {
        case Gender::Female: ++out.female_names; break;
        case Gender::Male: ++out.male_names; break;
        case Gender::Unknown: ++out.unknown_names; break;
      }
    }
  }
  int female_persons = 0, male_persons = 0;
  for (const auto& [id, g] : person_genders(records)) {
    if (g == Gender::Female) ++female_persons;
    if (g == Gender::Male) ++male_persons;
  }
  const int named = out.female_names + out.male_names;
  const int persons = female_persons + male_persons;
  if (named > 0)
    out.response = GenderDistribution::binary(static_cast<double>(out.female_names) / named,
                                              static_cast<double>(out.male_names) / named);
  if (persons > 0)
    out.actual = GenderDistribution::binary(static_cast<double>(female_persons) / persons,
                                            static_cast<double>(male_persons) / persons);
  if (out.response && out.actual) out.value = rcs(*out.response, *out.actual);
  return out;
}

PopulationShares gender_output_shares(std::span<const RunRecord> records) {
  const auto populations = prompt_populations(records);
  struct Acc {
    double f = 0, m = 0, u = 0;
    int n = 0;
  } female_pop, male_pop;

  for (const RunRecord* r : unique_responses(records)) {
    if (r->generated.empty()) continue;
    const Gender pop = populations.at(r->prompt_id);
    if (pop == Gender::Unknown) continue;
    Acc& acc = pop == Gender::Female ? female_pop : male_pop;
    double f = 0, m = 0, u = 0;
    for (const auto& g : r->generated) {
      if (g.gender.label == Gender::Female) ++f;
      else if (g.gender.label == Gender::Male) ++m;
      else ++u;
    }
    const double n = static_cast<double>(r->generated.size());
    acc.f += f / n;
    acc.m += m / n;
    acc.u += u / n;
    ++acc.n;
  }
  auto finish = [](const Acc& a) {
    OutputShares s;
    s.responses = a.n;
    if (a.n) {
      s.female = a.f / a.n;
      s.male = a.m / a.n;
      s.unknown = a.u / a.n;
    }
    return s;
  };
  return PopulationShares{finish(female_pop), finish(male_pop)};
}

std::vector<HomogeneityPoint> homogeneity_curve(std::span<const RunRecord> records) {
  std::map<int, HomogeneityPoint> by_count;
  for (const RunRecord* r : unique_responses(records)) {
    const int n = static_cast<int>(r->generated.size());
    if (n == 0) continue;
    int f = 0, m = 0;
    for (const auto& g : r->generated) {
      if (g.gender.label == Gender::Female) ++f;
      else if (g.gender.label == Gender::Male) ++m;
    }
    HomogeneityPoint& p = by_count[n];
    p.names_returned = n;
    p.female_share += static_cast<double>(f) / n;
    p.male_share += static_cast<double>(m) / n;
    ++p.responses;
  }
  std::vector<HomogeneityPoint> out;
  for (auto& [n, p] : by_count) {
    p.female_share /= p.responses;
    p.male_share /= p.responses;
    out.push_back(p);
  }
  return out;
}

std::optional<double> prominence_ratio(std::span<const NotablePerson> corpus) {
  double sum_f = 0, sum_m = 0;
  int n_f = 0, n_m = 0;
  for (const auto& p : corpus) {
    if (!p.search_count) continue;
    if (p.gender == Gender::Female) {
      sum_f += static_cast<double>(*p.search_count);
      ++n_f;
    } else if (p.gender == Gender::Male) {
      sum_m += static_cast<double>(*p.search_count);
      ++n_m;
    }
  }
  if (n_f == 0 || n_m == 0 || sum_m == 0) return std::nullopt;
  return ((sum_f / n_f) / (sum_m / n_m) - 1.0) * 100.0;
}

SliceMetrics score_slice(const SliceKey& key, std::span<const RunRecord> records) {
  SliceMetrics out;
  out.key = key;
  out.records = static_cast<int>(records.size());
  if (records.empty()) throw DomainError("score_slice: empty slice");

  std::map<std::string, std::vector<RunRecord>> by_person;
  for (const auto& r : records) {
    if (r.task != key.task || r.engine != key.engine || r.temperature != key.temperature)
      throw DomainError("score_slice: record " + r.person_id + " does not belong to the slice");
    by_person[r.person_id].push_back(r);
  }
  const auto genders = person_genders(records);

  std::vector<PersonOutcome> outcomes;
  for (const auto& [id, recs] : by_person) outcomes.push_back(person_outcomes(recs));
  out.persons = static_cast<int>(outcomes.size());
  out.miss = group_miss_rates(outcomes, genders);

  std::vector<double> female_miss, male_miss;
  struct SplitAcc {
    double h = 0, d = 0;
    int n = 0;
  } female_acc, male_acc;
  for (const auto& o : outcomes) {
    const Gender g = genders.at(o.person_id);
    if (g == Gender::Unknown) continue;
    (g == Gender::Female ? female_miss : male_miss).push_back(o.miss());
    SplitAcc& acc = g == Gender::Female ? female_acc : male_acc;
    acc.h += o.hallucination_rate();
    acc.d += o.declination_rate();
    ++acc.n;
  }
  auto split = [](const SplitAcc& a) {
    DeclineSplit s;
    s.persons = a.n;
    if (a.n) {
      s.hallucination_rate = a.h / a.n;
      s.declination_rate = a.d / a.n;
    }
    return s;
  };
  out.female_split = split(female_acc);
  out.male_split = split(male_acc);

  if (female_miss.size() < 2 || male_miss.size() < 2) {
    out.t_test_note = "fewer than two persons in a gender group";
  } else {
    try {
      out.t_test = stats::welch_t_test(std::span<const double>(female_miss),
                                       std::span<const double>(male_miss));
    } catch (const DomainError& e) {
      out.t_test_note = e.what();
    }
  }
  if (out.miss.female && out.miss.male) out.dpd = dpd(*out.miss.female, *out.miss.male);

  out.rcs_hallucinated = slice_rcs(records, RcsMode::Hallucinated);
  out.rcs_all = slice_rcs(records, RcsMode::AllGenerated);
  out.output_shares = gender_output_shares(records);
  out.homogeneity = homogeneity_curve(records);

  std::vector<NotablePerson> prominence;
  for (const auto& [id, recs] : by_person) {
    NotablePerson p;
    p.id = id;
    p.gender = genders.at(id);
    p.search_count = recs.front().search_count;
    prominence.push_back(std::move(p));
  }
  out.prominence_pct = prominence_ratio(prominence);
  return out;
}

std::vector<SliceMetrics> score_all(std::span<const RunRecord> records) {
  std::map<SliceKey, std::vector<RunRecord>> slices;
  for (const auto& r : records) slices[SliceKey{r.task, r.engine, r.temperature}].push_back(r);
  std::vector<SliceMetrics> out;
  for (const auto& [key, recs] : slices) out.push_back(score_slice(key, recs));
  return out;
}

}  // namespace biasprobe
