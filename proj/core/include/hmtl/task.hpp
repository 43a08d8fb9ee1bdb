#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace hmtl {

enum class Task { kNer, kEmd, kCoref, kRelation };

inline constexpr std::array<Task, 4> kAllTasks = {Task::kNer, Task::kEmd, Task::kRelation,
                                                  Task::kCoref};

// Short lowercase names used in configs and reports: ner, emd, re, cr.
std::string_view task_name(Task task);
std::optional<Task> parse_task(std::string_view name);

// Parameter groups. Each group belongs to exactly one hierarchy level; the
// embedding group is always level 0.
enum class Group { kEmbeddings, kNer, kEmd, kCoref, kRelation };

std::string_view group_name(Group group);
std::optional<Group> parse_group(std::string_view name);
Group group_of(Task task);

}  // namespace hmtl
