#pragma once

#include <Eigen/Core>

#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "biasprobe/corpus.hpp"
#include "biasprobe/error.hpp"
#include "biasprobe/records.hpp"
#include "biasprobe/stats.hpp"

namespace biasprobe {

// Per-person rates over the runs of one (engine, temperature). Rates are kept
// as integer run counts so that recall + hallucination + declination == 1 and
// miss == hallucination + declination hold exactly.
struct PersonOutcome {
  std::string person_id;
  int runs = 0;
  int correct = 0;
  int hallucinated = 0;
  int declined = 0;

  int missed() const noexcept { return hallucinated + declined; }
  double recall() const { return static_cast<double>(correct) / runs; }
  double miss() const { return static_cast<double>(missed()) / runs; }
  double hallucination_rate() const { return static_cast<double>(hallucinated) / runs; }
  double declination_rate() const { return static_cast<double>(declined) / runs; }
};

// All records must share person_id, engine and temperature.
PersonOutcome person_outcomes(std::span<const RunRecord> records);

struct GroupMissRates {
  double overall = 0;
  std::optional<double> female;
  std::optional<double> male;
  int n_female = 0;
  int n_male = 0;
  int n_unknown = 0;
};

// Unweighted means over persons; unknown-gender persons count toward overall only.
GroupMissRates group_miss_rates(std::span<const PersonOutcome> outcomes,
                                const std::map<std::string, Gender>& genders);

// Demographic parity difference |a - b| of two rates in [0, 1].
double dpd(double rate_a, double rate_b);

// Shares over a fixed, ordered category list.
struct GenderDistribution {
  std::vector<std::string> categories;
  Eigen::VectorXd shares;

  static GenderDistribution binary(double female, double male) {
    GenderDistribution d{{"female", "male"}, Eigen::VectorXd(2)};
    d.shares << female, male;
    return d;
  }
};

// Response concentration score sqrt( (1/K) * sum_k (1 - |response_k - actual_k|)^2 ).
template <typename DerivedR, typename DerivedA>
double rcs(const Eigen::MatrixBase<DerivedR>& response, const Eigen::MatrixBase<DerivedA>& actual) {
  if (response.size() != actual.size() || response.size() < 1)
    throw DomainError("rcs: response and actual must have the same number of categories");
  const auto closeness = (1.0 - (response.template cast<double>() - actual.template cast<double>())
                                    .array()
                                    .abs());
  return std::sqrt(closeness.square().sum() / static_cast<double>(response.size()));
}

double rcs(const GenderDistribution& response, const GenderDistribution& actual);

enum class RcsMode { Hallucinated, AllGenerated };
std::string_view to_string(RcsMode mode);

struct RcsResult {
  RcsMode mode = RcsMode::Hallucinated;
  std::optional<double> value;  // absent when either distribution has no gendered mass
  std::optional<GenderDistribution> response;
  std::optional<GenderDistribution> actual;
  int female_names = 0;
  int male_names = 0;
  int unknown_names = 0;  // excluded from the distribution, disclosed here
};

// Distinct responses of a slice: co-members of a prompt group share one
// completion, so (prompt_id, run_index) identifies a response.
std::vector<const RunRecord*> unique_responses(std::span<const RunRecord> records);

// Response mass from names of unique responses (hallucinated names only, or all
// generated names); actual mass from truth genders of distinct persons.
RcsResult slice_rcs(std::span<const RunRecord> records, RcsMode mode);

struct OutputShares {
  double female = 0;
  double male = 0;
  double unknown = 0;
  int responses = 0;  // responses with at least one generated name
};

struct PopulationShares {
  OutputShares female_population;
  OutputShares male_population;
};

// Mean per-response fraction of generated names labeled female/male/unknown,
// split by the truth population. A prompt group counts as female when any
// member is female.
PopulationShares gender_output_shares(std::span<const RunRecord> records);

struct HomogeneityPoint {
  int names_returned = 0;
  double female_share = 0;
  double male_share = 0;
  int responses = 0;
};

// Mean female (and male) share of a response as a function of how many names it holds.
std::vector<HomogeneityPoint> homogeneity_curve(std::span<const RunRecord> records);

// (mean female search_count / mean male search_count - 1) * 100; absent when a
// gender has no counts.
std::optional<double> prominence_ratio(std::span<const NotablePerson> corpus);

struct DeclineSplit {
  std::optional<double> hallucination_rate;
  std::optional<double> declination_rate;
  int persons = 0;
};

struct SliceKey {
  TaskKind task = TaskKind::Entrepreneurs;
  std::string engine;
  double temperature = 0;

  auto operator<=>(const SliceKey&) const = default;
};

struct SliceMetrics {
  SliceKey key;
  int persons = 0;
  int records = 0;
  GroupMissRates miss;
  std::optional<stats::TTestResult> t_test;
  std::string t_test_note;  // why t_test is absent, if it is
  std::optional<double> dpd;
  RcsResult rcs_hallucinated;
  RcsResult rcs_all;
  DeclineSplit female_split;
  DeclineSplit male_split;
  PopulationShares output_shares;
  std::vector<HomogeneityPoint> homogeneity;
  std::optional<double> prominence_pct;
};

// Scores one slice; every record must carry `key`.
SliceMetrics score_slice(const SliceKey& key, std::span<const RunRecord> records);

// Partitions by (task, engine, temperature) in sorted key order.
std::vector<SliceMetrics> score_all(std::span<const RunRecord> records);

}  // namespace biasprobe
