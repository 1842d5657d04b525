#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "biasprobe/backend.hpp"
#include "biasprobe/corpus.hpp"

namespace biasprobe {

// How the simulated model picks the gender of a hallucinated name.
//   TrueRepresentation - female with probability actual_female_share
//   AssociationBased   - female with probability association_skew (or a
//                        per-context override keyed by industry / subject)
//   Prejudice          - draws like TrueRepresentation, but a draw of the
//                        rejected gender is redrawn until the other appears
enum class RepresentationProcess { TrueRepresentation, AssociationBased, Prejudice };

std::string_view to_string(RepresentationProcess p);
std::optional<RepresentationProcess> parse_process(std::string_view s);

inline constexpr std::string_view kSimulatedDeclination = "I do not know that information";

struct SimulatorParams {
  RepresentationProcess process = RepresentationProcess::TrueRepresentation;
  double actual_female_share = 0.5;
  double association_skew = 0.5;
  Gender rejected_gender = Gender::Female;
  double correct_prob = 0.0;
  double decline_prob = 0.0;
  std::map<Gender, std::vector<std::string>> name_pool;
  std::uint64_t seed = 0;
  // AssociationBased only: female share per context (industry or Nobel subject).
  std::map<std::string, double> context_female_share;
};

// Throws SimulatorConfigError.
void validate(const SimulatorParams& params);

// Largest number of hallucinated names per response at this temperature:
// 1 at t = 0, 4 at t = 1, linear (rounded) in between.
int max_names_for_temperature(double temperature);

// Last-name keys of every pool name, computed once so draws skip re-folding the pool.
class NamePoolIndex {
 public:
  explicit NamePoolIndex(const std::map<Gender, std::vector<std::string>>& pool);
  const std::vector<std::string>& keys(Gender g, std::size_t i) const { return keys_.at(g)[i]; }

 private:
  std::map<Gender, std::vector<std::vector<std::string>>> keys_;
};

// Deterministic in (seed, truth.id, temperature, run_index). `index` must be
// built from params.name_pool when given.
CompletionResult simulate_complete(const CompletionRequest& request, const NotablePerson& truth,
                                   const SimulatorParams& params, const NamePoolIndex* index = nullptr);

class SimulatorBackend final : public Backend {
 public:
  explicit SimulatorBackend(SimulatorParams params);

  CompletionResult complete(const CompletionRequest& request, const NotablePerson& truth) override {
    return simulate_complete(request, truth, params_, &index_);
  }
  std::string descriptor() const override;

  const SimulatorParams& params() const noexcept { return params_; }

 private:
  SimulatorParams params_;
  NamePoolIndex index_;
};

// CSV with columns full_name, gender (female | male).
std::map<Gender, std::vector<std::string>> load_name_pool(const std::filesystem::path& path);

}  // namespace biasprobe
