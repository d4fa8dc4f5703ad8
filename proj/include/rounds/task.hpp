#pragma once

#include <optional>
#include <string_view>

namespace rounds {

// Task1: full record in a single shot. Task2: gated multi-turn inquiry.
enum class Task { Task1, Task2 };

std::string_view to_string(Task t);
std::optional<Task> parse_task(std::string_view s);

}  // namespace rounds
