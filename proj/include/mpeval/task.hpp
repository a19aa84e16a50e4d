#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace mpeval {

using json = nlohmann::ordered_json;

enum class Benchmark { glue, super_glue, blue, lex_glue };
enum class TaskKind { pair_classification, qa, wsd, nli, ner, re, multi_class, multi_label };
enum class LabelKind { binary, multi_class, multi_label, tag_sequence };

std::string to_string(Benchmark b);
std::string to_string(TaskKind k);
std::string to_string(LabelKind k);
Benchmark benchmark_from_string(const std::string& s);
TaskKind task_kind_from_string(const std::string& s);
LabelKind label_kind_from_string(const std::string& s);

struct LabelSpace {
    LabelKind kind = LabelKind::binary;
    std::vector<std::string> labels;             // canonical forms, menu order
    std::optional<std::string> none_label;       // "no class applies" (UNFAIR-ToS)

    // Normalized lookup; returns the canonical form.
    std::optional<std::string> resolve(const std::string& raw) const;
    void validate() const;
    bool operator==(const LabelSpace&) const = default;
};

enum class ContractKind { single_label, multi_label, tag_sequence };

// The fixed final-answer sentence a prompt instructs the model to emit,
// e.g. "The status is {}". Parsing locates the frame and reads the hole.
struct AnswerContract {
    std::string pattern;                         // frame with exactly one {} hole
    std::string hole_display = "{}";             // hole text shown in the instruction
    bool show_menu = false;                      // append " (A / B / C)" in the instruction
    ContractKind kind = ContractKind::single_label;
    std::vector<std::string> allowed_labels;     // canonical forms
    std::optional<std::string> none_label;
    std::string list_separator = ", ";
    std::optional<std::string> positive_label;   // f1-binary positive class

    std::string frame_prefix() const;            // text before the hole
    std::string frame_suffix() const;            // text after the hole
    // 'Provide the answer in your final response as "..."'.
    std::string instruction() const;
    // The frame instantiated with the given label(s), as a model would emit it.
    std::string instantiate(const std::vector<std::string>& labels) const;
    void validate() const;
    bool operator==(const AnswerContract&) const = default;
};

struct Instance {
    std::string instance_id;
    std::map<std::string, std::string> slot_values;  // keys = TaskSpec.template_slots
    // Canonical gold labels: sorted set for classification tasks, token-order
    // tag list for tag-sequence tasks.
    std::vector<std::string> gold;

    bool operator==(const Instance&) const = default;
};

struct ExemplarSet {
    std::string task_id;
    std::vector<std::pair<Instance, std::string>> exemplars;  // (instance, worked answer)

    size_t size() const { return exemplars.size(); }
};

// Binds dataset file fields to template slots and gold, so new tasks and file
// layouts need no rebuild.
struct FieldMapping {
    std::map<std::string, std::string> slots;    // file field -> template slot
    std::string gold_field = "label";
    std::optional<std::string> id_field;
    std::map<std::string, std::string> label_aliases;  // normalized file value -> canonical
    std::string list_separator = "|";            // multi-valued gold cells in TSV

    bool operator==(const FieldMapping&) const = default;
};

struct TaskSpec {
    std::string task_id;
    Benchmark benchmark = Benchmark::glue;
    TaskKind task_kind = TaskKind::pair_classification;
    LabelSpace label_space;
    std::vector<std::string> metrics;            // ordered metric identifiers
    AnswerContract answer_contract;
    std::vector<std::string> template_slots;     // ordered placeholder names
    std::string domain_tag;
    FieldMapping field_mapping;

    void validate() const;
    json to_json() const;
    static TaskSpec from_json(const json& j);
    bool operator==(const TaskSpec&) const = default;
};

// The metric identifiers a TaskSpec may bind.
const std::vector<std::string>& known_metrics();

}  // namespace mpeval
