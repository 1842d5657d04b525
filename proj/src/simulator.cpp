#include "biasprobe/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "biasprobe/error.hpp"
#include "biasprobe/parsing.hpp"
#include "biasprobe/text.hpp"

namespace biasprobe {
namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Portable stream: mt19937_64 output is fixed by the standard, and the
// conversion to [0, 1) below does not depend on the library's distributions.
class Stream {
 public:
  explicit Stream(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  std::size_t below(std::size_t n) {
    return std::min(n - 1, static_cast<std::size_t>(uniform() * static_cast<double>(n)));
  }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t stream_seed(std::uint64_t seed, std::string_view person_id, double temperature,
                          int run_index) {
  char temp[32];
  std::snprintf(temp, sizeof temp, "%.6f", temperature);
  std::string key = std::to_string(seed);
  key.push_back('\x1f');
  key.append(person_id);
  key.push_back('\x1f');
  key.append(temp);
  key.push_back('\x1f');
  key.append(std::to_string(run_index));
  return fnv1a(key);
}

std::optional<std::string> context_key(const NotablePerson& p) {
  if (p.task == TaskKind::Entrepreneurs) return p.industry;
  if (p.task == TaskKind::NobelPrize) return p.subject;
  return std::nullopt;
}

double female_probability(const SimulatorParams& params, const NotablePerson& truth) {
  if (params.process == RepresentationProcess::AssociationBased) {
    if (auto key = context_key(truth)) {
      auto it = params.context_female_share.find(*key);
      if (it != params.context_female_share.end()) return it->second;
    }
    return params.association_skew;
  }
  return params.actual_female_share;
}

Gender draw_gender(Stream& rng, const SimulatorParams& params, double p_female) {
  auto draw = [&] { return rng.uniform() < p_female ? Gender::Female : Gender::Male; };
  Gender g = draw();
  if (params.process != RepresentationProcess::Prejudice) return g;
  const double p_rejected = params.rejected_gender == Gender::Female ? p_female : 1.0 - p_female;
  if (p_rejected >= 1.0)
    throw SimulatorConfigError("prejudice process rejects the only gender that can be drawn");
  while (g == params.rejected_gender) g = draw();
  return g;
}

bool check_probability(double p) { return p >= 0.0 && p <= 1.0; }

}  // namespace

std::string_view to_string(RepresentationProcess p) {
  switch (p) {
    case RepresentationProcess::TrueRepresentation: return "true_representation";
    case RepresentationProcess::AssociationBased: return "association_based";
    case RepresentationProcess::Prejudice: return "prejudice";
  }
  return "unknown";
}

std::optional<RepresentationProcess> parse_process(std::string_view s) {
  std::string key;
  for (char c : text::to_lower_ascii(text::trim(s)))
    if (c != '_' && c != '-' && c != ' ') key.push_back(c);
  if (key == "truerepresentation" || key == "true") return RepresentationProcess::TrueRepresentation;
  if (key == "associationbased" || key == "association") return RepresentationProcess::AssociationBased;
  if (key == "prejudice") return RepresentationProcess::Prejudice;
  return std::nullopt;
}

void validate(const SimulatorParams& p) {
  if (!check_probability(p.correct_prob) || !check_probability(p.decline_prob))
    throw SimulatorConfigError("correct_prob and decline_prob must lie in [0, 1]");
  if (p.correct_prob + p.decline_prob > 1.0 + 1e-12)
    throw SimulatorConfigError("correct_prob + decline_prob must not exceed 1");
  if (!check_probability(p.actual_female_share) || !check_probability(p.association_skew))
    throw SimulatorConfigError("female shares must lie in [0, 1]");
  for (const auto& [key, share] : p.context_female_share)
    if (!check_probability(share))
      throw SimulatorConfigError("context female share for '" + key + "' outside [0, 1]");
  if (p.rejected_gender == Gender::Unknown)
    throw SimulatorConfigError("rejected_gender must be female or male");

  if (p.correct_prob + p.decline_prob >= 1.0) return;  // never hallucinates

  auto pool_size = [&](Gender g) {
    auto it = p.name_pool.find(g);
    return it == p.name_pool.end() ? std::size_t{0} : it->second.size();
  };
  auto require = [&](Gender g) {
    if (pool_size(g) == 0)
      throw SimulatorConfigError("name_pool has no " + std::string(to_string(g)) + " names");
  };
  switch (p.process) {
    case RepresentationProcess::TrueRepresentation:
      if (p.actual_female_share > 0) require(Gender::Female);
      if (p.actual_female_share < 1) require(Gender::Male);
      break;
    case RepresentationProcess::AssociationBased: {
      std::vector<double> shares{p.association_skew};
      for (const auto& [key, share] : p.context_female_share) shares.push_back(share);
      for (double s : shares) {
        if (s > 0) require(Gender::Female);
        if (s < 1) require(Gender::Male);
      }
      break;
    }
    case RepresentationProcess::Prejudice: {
      const Gender kept = p.rejected_gender == Gender::Female ? Gender::Male : Gender::Female;
      const double p_kept = kept == Gender::Female ? p.actual_female_share : 1 - p.actual_female_share;
      if (p_kept <= 0)
        throw SimulatorConfigError("prejudice process rejects the only gender that can be drawn");
      require(kept);
      break;
    }
  }
}

int max_names_for_temperature(double temperature) {
  const double t = std::clamp(temperature, 0.0, 1.0);
  return std::clamp(1 + static_cast<int>(std::lround(3.0 * t)), 1, 4);
}

NamePoolIndex::NamePoolIndex(const std::map<Gender, std::vector<std::string>>& pool) {
  for (const auto& [g, names] : pool) {
    auto& keys = keys_[g];
    keys.reserve(names.size());
    for (const auto& n : names) keys.push_back(last_name_keys(n));
  }
}

CompletionResult simulate_complete(const CompletionRequest& request, const NotablePerson& truth,
                                   const SimulatorParams& params, const NamePoolIndex* index) {
  Stream rng(stream_seed(params.seed, truth.id, request.temperature, request.run_index));
  CompletionResult result;
  result.backend = "sim";
  result.request_fingerprint = fingerprint(request);

  const double u = rng.uniform();
  if (u < params.correct_prob) {
    result.raw_text = truth.full_name;
    return result;
  }
  if (u < params.correct_prob + params.decline_prob) {
    result.raw_text = std::string(kSimulatedDeclination);
    return result;
  }

  const int max_names = max_names_for_temperature(request.temperature);
  const int count = max_names == 1 ? 1 : 1 + static_cast<int>(rng.below(static_cast<std::size_t>(max_names)));
  const double p_female = female_probability(params, truth);
  // Lower temperatures sample from a narrower head of each pool.
  const double breadth = 0.25 + 0.75 * std::clamp(request.temperature, 0.0, 1.0);

  const auto truth_keys = last_name_keys(truth.full_name);
  std::vector<std::string> chosen;
  for (int i = 0; i < count; ++i) {
    const Gender g = draw_gender(rng, params, p_female);
    auto it = params.name_pool.find(g);
    if (it == params.name_pool.end() || it->second.empty())
      throw SimulatorConfigError("name_pool has no " + std::string(to_string(g)) + " names");
    const auto& pool = it->second;

    auto shares_last_name = [&](std::size_t k) {
      if (!index) return names_match(pool[k], truth.full_name);
      for (const auto& key : index->keys(g, k))
        if (std::find(truth_keys.begin(), truth_keys.end(), key) != truth_keys.end()) return true;
      return false;
    };
    auto eligible_from = [&](std::size_t limit, bool allow_repeat) {
      std::vector<const std::string*> out;
      for (std::size_t k = 0; k < limit; ++k) {
        const std::string& name = pool[k];
        if (shares_last_name(k)) continue;
        if (!allow_repeat && std::find(chosen.begin(), chosen.end(), name) != chosen.end()) continue;
        out.push_back(&name);
      }
      return out;
    };
    const std::size_t head = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::ceil(breadth * static_cast<double>(pool.size()))), 1, pool.size());
    auto eligible = eligible_from(head, false);
    if (eligible.empty()) eligible = eligible_from(pool.size(), false);
    if (eligible.empty()) eligible = eligible_from(pool.size(), true);
    if (eligible.empty())
      throw SimulatorConfigError("every " + std::string(to_string(g)) +
                                 " pool name shares the truth's last name (" + truth.id + ")");
    chosen.push_back(*eligible[rng.below(eligible.size())]);
  }

  for (std::size_t i = 0; i < chosen.size(); ++i) {
    if (i) result.raw_text += ", ";
    result.raw_text += chosen[i];
  }
  return result;
}

SimulatorBackend::SimulatorBackend(SimulatorParams params)
    : params_(std::move(params)), index_(params_.name_pool) {
  validate(params_);
}

std::string SimulatorBackend::descriptor() const {
  return "sim(process=" + std::string(to_string(params_.process)) +
         ",seed=" + std::to_string(params_.seed) + ")";
}

std::map<Gender, std::vector<std::string>> load_name_pool(const std::filesystem::path& path) {
  const auto table = text::read_csv(path);
  const auto col_name = table.column("full_name");
  const auto col_gender = table.column("gender");
  if (!col_name) throw SchemaError("name pool needs a 'full_name' column", "full_name");
  if (!col_gender) throw SchemaError("name pool needs a 'gender' column", "gender");
  std::map<Gender, std::vector<std::string>> pool;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (*col_name >= row.size() || *col_gender >= row.size())
      throw ValidationError("short row in name pool", r + 1);
    const std::string name(text::trim(row[*col_name]));
    const auto g = parse_gender(row[*col_gender]);
    if (name.empty() || !g || *g == Gender::Unknown)
      throw ValidationError("name pool rows need a name and gender female|male", r + 1);
    pool[*g].push_back(name);
  }
  return pool;
}

}  // namespace biasprobe
