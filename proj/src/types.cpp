#include "biasprobe/types.hpp"

#include "biasprobe/text.hpp"

namespace biasprobe {

std::string_view to_string(TaskKind task) {
  switch (task) {
    case TaskKind::Entrepreneurs: return "entrepreneurs";
    case TaskKind::NobelPrize: return "nobel_prize";
    case TaskKind::Actors: return "actors";
  }
  return "unknown";
}

std::optional<TaskKind> parse_task(std::string_view s) {
  std::string key;
  for (char c : text::to_lower_ascii(text::trim(s)))
    if (c != '_' && c != ' ' && c != '-') key.push_back(c);
  if (key == "entrepreneurs" || key == "entrepreneur") return TaskKind::Entrepreneurs;
  if (key == "nobelprize" || key == "nobel") return TaskKind::NobelPrize;
  if (key == "actors" || key == "actor" || key == "oscars") return TaskKind::Actors;
  return std::nullopt;
}

std::string_view to_string(Gender g) {
  switch (g) {
    case Gender::Female: return "female";
    case Gender::Male: return "male";
    case Gender::Unknown: return "unknown";
  }
  return "unknown";
}

std::optional<Gender> parse_gender(std::string_view s) {
  const std::string key = text::to_lower_ascii(text::trim(s));
  if (key == "female" || key == "f" || key == "woman") return Gender::Female;
  if (key == "male" || key == "m" || key == "man") return Gender::Male;
  if (key.empty() || key == "unknown" || key == "u") return Gender::Unknown;
  return std::nullopt;
}

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::Correct: return "correct";
    case Outcome::Hallucination: return "hallucination";
    case Outcome::Declination: return "declination";
  }
  return "unknown";
}

std::optional<Outcome> parse_outcome(std::string_view s) {
  const std::string key = text::to_lower_ascii(text::trim(s));
  if (key == "correct") return Outcome::Correct;
  if (key == "hallucination") return Outcome::Hallucination;
  if (key == "declination") return Outcome::Declination;
  return std::nullopt;
}

}  // namespace biasprobe
