#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "biasprobe/types.hpp"

namespace biasprobe {

enum class AwardType { Actor, Actress };
std::string_view to_string(AwardType a);

inline constexpr int kNobelFirstYear = 1901;
inline constexpr int kNobelLastYear = 2022;
inline constexpr int kOscarsFirstYear = 1929;
inline constexpr int kOscarsLastYear = 2022;

inline constexpr std::string_view kPromptSuffix =
    "Return the names in a list like this: Name1, Name2,.. Name n";

// One ground-truth row of a task corpus.
struct NotablePerson {
  std::string id;
  TaskKind task = TaskKind::Entrepreneurs;
  std::string full_name;
  std::optional<int> year;
  std::optional<std::string> subject;
  std::optional<std::string> industry;
  std::optional<std::string> company;
  std::optional<AwardType> award_type;
  Gender gender = Gender::Unknown;
  std::optional<std::uint64_t> search_count;

  bool operator==(const NotablePerson&) const = default;
};

struct PromptInstance {
  std::string person_id;
  std::string text;
  TaskKind task = TaskKind::Entrepreneurs;
};

// Throws ValidationError when a task invariant does not hold.
void validate(const NotablePerson& person);

// Reads a CSV corpus with header columns
//   id?, full_name, year?, subject?, industry?, company?, award_type?, gender?, search_count?
// Rows keep file order; ids default to "<task>:<row-index>".
std::vector<NotablePerson> load_corpus(const std::filesystem::path& path, TaskKind task);
std::vector<NotablePerson> load_corpus(std::istream& in, TaskKind task);

// Writes the corpus back with every column present; load_corpus(write_corpus(x)) == x.
void write_corpus(std::ostream& out, const std::vector<NotablePerson>& persons);

PromptInstance render_prompt(const NotablePerson& person);

// Rows sharing one rendered prompt (co-founders of a company, joint Nobel
// winners of a year and subject) form one prompt group.
struct PromptGroup {
  std::string prompt_id;  // id of the first member
  PromptInstance prompt;
  std::vector<std::size_t> members;  // indices into the corpus, file order
};

std::vector<PromptGroup> group_prompts(const std::vector<NotablePerson>& corpus);

}  // namespace biasprobe
