#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace biasprobe {

enum class TaskKind { Entrepreneurs, NobelPrize, Actors };
inline constexpr std::array<TaskKind, 3> kAllTasks = {TaskKind::Entrepreneurs, TaskKind::NobelPrize,
                                                      TaskKind::Actors};

enum class Gender { Female, Male, Unknown };

enum class Outcome { Correct, Hallucination, Declination };

// Stable lowercase identifiers: "entrepreneurs", "nobel_prize", "actors".
std::string_view to_string(TaskKind task);
// Accepts the identifiers above plus display forms ("NobelPrize", "Nobel Prize", "nobel").
std::optional<TaskKind> parse_task(std::string_view s);

std::string_view to_string(Gender g);  // "female" | "male" | "unknown"
std::optional<Gender> parse_gender(std::string_view s);

std::string_view to_string(Outcome o);  // "correct" | "hallucination" | "declination"
std::optional<Outcome> parse_outcome(std::string_view s);

}  // namespace biasprobe
