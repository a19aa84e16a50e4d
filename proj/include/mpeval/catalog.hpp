#pragma once

#include <filesystem>
#include <vector>

#include "mpeval/task.hpp"

namespace mpeval {

// The ten built-in NLU tasks (GLUE, SuperGLUE, BLUE, LexGLUE selections).
// Stable: repeated calls return structurally equal specs.
std::vector<TaskSpec> builtin_catalog();

// Looks up a task by id in the built-in catalog.
const TaskSpec& builtin_task(const std::string& task_id);

// Loads a TaskSpec from a JSON file (schema: schemas/task_spec.schema.json).
TaskSpec load_task_spec(const std::filesystem::path& path);

// Digest over the serialized catalog, recorded in run manifests.
std::string catalog_digest(const std::vector<TaskSpec>& specs);

}  // namespace mpeval
