#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "biasprobe/corpus.hpp"
#include "biasprobe/types.hpp"

namespace biasprobe {

struct ParsedResponse {
  std::vector<std::string> names;  // response order, case-insensitive duplicates removed
  bool declined = false;
  std::string raw_text;
};

// Case-insensitive substring matcher for refusal phrasings. Curly apostrophes
// are treated as ASCII ones.
class DeclinationMatcher {
 public:
  DeclinationMatcher();  // default pattern list
  explicit DeclinationMatcher(std::vector<std::string> patterns);

  bool matches(std::string_view raw_text) const;
  const std::vector<std::string>& patterns() const noexcept { return patterns_; }

  static const std::vector<std::string>& default_patterns();

 private:
  std::vector<std::string> patterns_;  // stored lowercase
};

bool is_declination(std::string_view raw_text, const DeclinationMatcher& matcher = {});

ParsedResponse parse_response(std::string_view raw_text, const DeclinationMatcher& matcher = {});

// Final whitespace token, folded (NFKD, marks stripped, lowercase), split on hyphens.
std::vector<std::string> last_name_keys(std::string_view full_name);

// Last-name rule for a single generated name against a single truth name.
bool names_match(std::string_view generated, std::string_view truth);

bool is_correct(const ParsedResponse& parsed, const NotablePerson& truth);

Outcome classify_outcome(const ParsedResponse& parsed, const NotablePerson& truth);

}  // namespace biasprobe
