#include "biasprobe/association.hpp"

#include <cctype>
#include <map>
#include <tuple>

#include "biasprobe/metrics.hpp"

namespace biasprobe {

std::vector<std::string> phrase_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (c >= 0x80 || std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

std::string_view to_string(ContextKind kind) {
  switch (kind) {
    case ContextKind::Industry: return "industry";
    case ContextKind::CompanyIndustry: return "company_industry";
    case ContextKind::Subject: return "subject";
  }
  return "unknown";
}

namespace {

struct Context {
  ContextKind kind;
  std::string key;
};

std::vector<Context> contexts_of(TaskKind task, const std::optional<std::string>& industry,
                                 const std::optional<std::string>& company,
                                 const std::optional<std::string>& subject) {
  std::vector<Context> out;
  if (task == TaskKind::Entrepreneurs && industry) {
    out.push_back({ContextKind::Industry, *industry});
    if (company) out.push_back({ContextKind::CompanyIndustry, *company + " " + *industry});
  }
  if (task == TaskKind::NobelPrize && subject) out.push_back({ContextKind::Subject, *subject});
  return out;
}

// Sorts real temperatures ascending with the pooled group last.
using TemperatureKey = std::pair<bool, double>;
TemperatureKey temperature_key(std::optional<double> t) { return {!t.has_value(), t.value_or(0)}; }

using GroupKey = std::tuple<std::string, TemperatureKey, ContextKind, std::string>;

}  // namespace

std::vector<ContextCounts> count_contexts(std::span<const RunRecord> records,
                                          std::span<const NotablePerson> corpus) {
  std::map<GroupKey, ContextCounts> groups;
  auto slot = [&](const std::string& engine, std::optional<double> t, const Context& ctx)
      -> ContextCounts& {
    auto [it, inserted] =
        groups.try_emplace(GroupKey{engine, temperature_key(t), ctx.kind, ctx.key});
    if (inserted) {
      it->second.engine = engine;
      it->second.temperature = t;
      it->second.kind = ctx.kind;
      it->second.context_key = ctx.key;
    }
    return it->second;
  };

  // Distinct responses per (engine, temperature); co-members share one completion.
  std::map<std::tuple<std::string, double, std::string, int>, const RunRecord*> responses;
  for (const auto& r : records) {
    auto key = std::make_tuple(r.engine, r.temperature, r.prompt_id, r.run_index);
    auto [it, inserted] = responses.try_emplace(key, &r);
    if (!inserted && r.person_id < it->second->person_id) it->second = &r;
  }
  for (const auto& [key, r] : responses) {
    for (const auto& ctx : contexts_of(r->task, r->industry, r->company, r->subject)) {
      for (std::optional<double> t : {std::optional<double>(r->temperature), std::optional<double>()}) {
        ContextCounts& c = slot(r->engine, t, ctx);
        for (const auto& g : r->generated) {
          if (g.matches_truth) continue;
          if (g.gender.label == Gender::Female) ++c.female;
          else if (g.gender.label == Gender::Male) ++c.male;
          else ++c.unknown;
        }
      }
    }
  }

  // Ground-truth composition per context, from the corpus when given.
  std::map<std::pair<ContextKind, std::string>, std::pair<int, std::pair<int, int>>> truth;
  auto add_truth = [&](const Context& ctx, Gender g) {
    auto& t = truth[{ctx.kind, ctx.key}];
    ++t.first;
    if (g == Gender::Female) ++t.second.first;
    if (g == Gender::Male) ++t.second.second;
  };
  if (!corpus.empty()) {
    for (const auto& p : corpus)
      for (const auto& ctx : contexts_of(p.task, p.industry, p.company, p.subject))
        add_truth(ctx, p.gender);
  } else {
    std::map<std::string, const RunRecord*> persons;
    for (const auto& r : records) persons.try_emplace(r.person_id, &r);
    for (const auto& [id, r] : persons)
      for (const auto& ctx : contexts_of(r->task, r->industry, r->company, r->subject))
        add_truth(ctx, r->truth_gender);
  }

  std::vector<ContextCounts> out;
  out.reserve(groups.size());
  for (auto& [key, c] : groups) {
    if (auto it = truth.find({c.kind, c.context_key}); it != truth.end()) {
      c.persons = it->second.first;
      c.female_persons = it->second.second.first;
      c.male_persons = it->second.second.second;
    }
    out.push_back(std::move(c));
  }
  return out;
}

CorrelationSummary correlate(std::span<const AssociationRow> group, const AssociationOptions& options) {
  CorrelationSummary s;
  if (group.empty()) return s;
  s.engine = group.front().counts.engine;
  s.temperature = group.front().counts.temperature;
  s.kind = group.front().counts.kind;

  std::vector<double> female_sim, net_female, share;
  for (const auto& row : group) {
    const auto y = row.counts.female_hallucination_share();
    if (row.counts.hallucinated() < options.min_names || !y || !row.score.female_sim) continue;
    female_sim.push_back(*row.score.female_sim);
    net_female.push_back(*row.score.net_female);
    share.push_back(*y);
  }
  s.contexts = static_cast<int>(share.size());
  if (share.size() < 3) {
    s.note = "fewer than 3 eligible contexts";
    return s;
  }
  try {
    s.r_female_sim = stats::pearson(std::span<const double>(female_sim), std::span<const double>(share));
  } catch (const DomainError& e) {
    s.note = e.what();
  }
  try {
    s.r_net_female = stats::pearson(std::span<const double>(net_female), std::span<const double>(share));
  } catch (const DomainError& e) {
    if (s.note.empty()) s.note = e.what();
  }
  return s;
}

}  // namespace biasprobe
