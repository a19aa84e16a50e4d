#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "mpeval/task.hpp"

namespace mpeval {

enum class DatasetFormat { jsonl, tsv };
std::string to_string(DatasetFormat f);
DatasetFormat dataset_format_from_string(const std::string& s);

// Loads instances from a JSONL or TSV-with-header file; the spec's field
// mapping binds file columns to template slots and gold. Order preserved.
std::vector<Instance> load_dataset(const std::filesystem::path& path, DatasetFormat format,
                                   const TaskSpec& spec, const std::string& split = "");

// Native instance serialization (slot names used directly, gold as an array);
// load_dataset round-trips these through an identity mapping.
void write_instances_jsonl(const std::filesystem::path& path, const std::vector<Instance>& list);
std::vector<Instance> read_instances_jsonl(const std::filesystem::path& path,
                                           const TaskSpec& spec);

// Unbiased draw in [0, bound) from a standard-specified engine; avoids
// std::uniform_int_distribution, whose output is implementation-defined.
uint64_t bounded_uniform(std::mt19937_64& rng, uint64_t bound);

// Draws n distinct instances without replacement via a seeded partial
// Fisher-Yates shuffle over mt19937_64. Identical inputs give identical
// output, including order, on every platform.
std::vector<Instance> sample_eval_subset(const std::vector<Instance>& instances, size_t n,
                                         uint64_t seed);

// Draws k training instances (same sampler) and attaches their human-annotated
// worked answers. Deterministic given (train, k, seed).
ExemplarSet select_exemplars(const TaskSpec& spec, const std::vector<Instance>& train, size_t k,
                             uint64_t seed, const std::map<std::string, std::string>& answers);

// answers files: JSONL of {"instance_id": ..., "worked_answer": ...}.
std::map<std::string, std::string> read_worked_answers(const std::filesystem::path& path);

}  // namespace mpeval
