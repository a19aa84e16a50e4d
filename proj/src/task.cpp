#include "mpeval/task.hpp"

#include <algorithm>
#include <set>

#include "mpeval/errors.hpp"
#include "mpeval/text.hpp"

namespace mpeval {

namespace {

template <typename T>
std::string bad_enum(const std::string& what, const std::string& s) {
    return "unknown " + what + ": '" + s + "'";
}

}  // namespace

std::string to_string(Benchmark b) {
    switch (b) {
        case Benchmark::glue: return "GLUE";
        case Benchmark::super_glue: return "SuperGLUE";
        case Benchmark::blue: return "BLUE";
        case Benchmark::lex_glue: return "LexGLUE";
    }
    return "?";
}

std::string to_string(TaskKind k) {
    switch (k) {
        case TaskKind::pair_classification: return "pair-classification";
        case TaskKind::qa: return "QA";
        case TaskKind::wsd: return "WSD";
        case TaskKind::nli: return "NLI";
        case TaskKind::ner: return "NER";
        case TaskKind::re: return "RE";
        case TaskKind::multi_class: return "multi-class";
        case TaskKind::multi_label: return "multi-label";
    }
    return "?";
}

std::string to_string(LabelKind k) {
    switch (k) {
        case LabelKind::binary: return "binary";
        case LabelKind::multi_class: return "multi-class";
        case LabelKind::multi_label: return "multi-label";
        case LabelKind::tag_sequence: return "tag-sequence";
    }
    return "?";
}

Benchmark benchmark_from_string(const std::string& s) {
    for (auto b : {Benchmark::glue, Benchmark::super_glue, Benchmark::blue, Benchmark::lex_glue})
        if (to_string(b) == s) return b;
    throw ConfigError(bad_enum<Benchmark>("benchmark", s));
}

TaskKind task_kind_from_string(const std::string& s) {
    for (auto k : {TaskKind::pair_classification, TaskKind::qa, TaskKind::wsd, TaskKind::nli,
                   TaskKind::ner, TaskKind::re, TaskKind::multi_class, TaskKind::multi_label})
        if (to_string(k) == s) return k;
    throw ConfigError(bad_enum<TaskKind>("task kind", s));
}

LabelKind label_kind_from_string(const std::string& s) {
    for (auto k : {LabelKind::binary, LabelKind::multi_class, LabelKind::multi_label,
                   LabelKind::tag_sequence})
        if (to_string(k) == s) return k;
    throw ConfigError(bad_enum<LabelKind>("label kind", s));
}

std::optional<std::string> LabelSpace::resolve(const std::string& raw) const {
    std::string norm = normalize_label(raw);
    for (const auto& l : labels)
        if (normalize_label(l) == norm) return l;
    return std::nullopt;
}

void LabelSpace::validate() const {
    if (labels.empty()) throw ConfigError("label space has no labels");
    std::set<std::string> seen;
    for (const auto& l : labels) {
        if (!seen.insert(normalize_label(l)).second)
            throw ConfigError("label space not unique after normalization: '" + l + "'");
    }
    if (none_label && !resolve(*none_label))
        throw ConfigError("none_label '" + *none_label + "' is not a member of the label space");
    if (kind == LabelKind::binary && labels.size() != 2)
        throw ConfigError("binary label space must have exactly 2 labels");
}

std::string AnswerContract::frame_prefix() const {
    size_t hole = pattern.find("{}");
    return pattern.substr(0, hole);
}

std::string AnswerContract::frame_suffix() const {
    size_t hole = pattern.find("{}");
    return hole == std::string::npos ? std::string() : pattern.substr(hole + 2);
}

std::string AnswerContract::instruction() const {
    std::string shown = hole_display;
    if (show_menu) shown += " (" + join(allowed_labels, " / ") + ")";
    std::string filled = pattern;
    filled.replace(filled.find("{}"), 2, shown);
    return "Provide the answer in your final response as “" + filled + "”.";
}

std::string AnswerContract::instantiate(const std::vector<std::string>& labels) const {
    std::string value = kind == ContractKind::tag_sequence ? join(labels, " ")
                                                           : join(labels, list_separator);
    std::string filled = pattern;
    filled.replace(filled.find("{}"), 2, value);
    return filled + ".";
}

void AnswerContract::validate() const {
    size_t first = pattern.find("{}");
    if (first == std::string::npos || pattern.find("{}", first + 1) != std::string::npos)
        throw ConfigError("contract pattern must contain exactly one {} hole: '" + pattern + "'");
    if (allowed_labels.empty()) throw ConfigError("contract has no allowed labels");
}

void TaskSpec::validate() const {
    if (task_id.empty()) throw ConfigError("task_id empty");
    label_space.validate();
    answer_contract.validate();
    if (metrics.empty()) throw ConfigError(task_id + ": metrics empty");
    for (const auto& m : metrics) {
        const auto& known = known_metrics();
        if (std::find(known.begin(), known.end(), m) == known.end())
            throw ConfigError(task_id + ": unknown metric '" + m + "'");
    }
    if (label_space.kind == LabelKind::multi_label && task_kind != TaskKind::multi_label)
        throw ConfigError(task_id + ": multi-label label space requires a multi-label task kind");
    if (label_space.kind == LabelKind::tag_sequence && task_kind != TaskKind::ner)
        throw ConfigError(task_id + ": tag-sequence label space requires an NER task kind");
    for (const auto& [field, slot] : field_mapping.slots) {
        if (std::find(template_slots.begin(), template_slots.end(), slot) == template_slots.end())
            throw ConfigError(task_id + ": field mapping targets unknown slot '" + slot + "'");
    }
}

const std::vector<std::string>& known_metrics() {
    static const std::vector<std::string> metrics = {
        "accuracy", "f1-binary", "micro-f1", "macro-f1", "bio-micro-f1"};
    return metrics;
}

json TaskSpec::to_json() const {
    json j;
    j["task_id"] = task_id;
    j["benchmark"] = to_string(benchmark);
    j["task_kind"] = to_string(task_kind);
    json ls;
    ls["kind"] = to_string(label_space.kind);
    ls["labels"] = label_space.labels;
    if (label_space.none_label) ls["none_label"] = *label_space.none_label;
    j["label_space"] = ls;
    j["metrics"] = metrics;
    json ac;
    ac["pattern"] = answer_contract.pattern;
    ac["hole_display"] = answer_contract.hole_display;
    ac["show_menu"] = answer_contract.show_menu;
    ac["list_separator"] = answer_contract.list_separator;
    if (answer_contract.positive_label) ac["positive_label"] = *answer_contract.positive_label;
    j["answer_contract"] = ac;
    j["template_slots"] = template_slots;
    j["domain_tag"] = domain_tag;
    json fm;
    fm["slots"] = field_mapping.slots;
    fm["gold"] = field_mapping.gold_field;
    if (field_mapping.id_field) fm["id"] = *field_mapping.id_field;
    if (!field_mapping.label_aliases.empty()) fm["label_aliases"] = field_mapping.label_aliases;
    fm["list_separator"] = field_mapping.list_separator;
    j["field_mapping"] = fm;
    return j;
}

TaskSpec TaskSpec::from_json(const json& j) {
    TaskSpec spec;
    spec.task_id = j.at("task_id").get<std::string>();
    spec.benchmark = benchmark_from_string(j.at("benchmark").get<std::string>());
    spec.task_kind = task_kind_from_string(j.at("task_kind").get<std::string>());
    const json& ls = j.at("label_space");
    spec.label_space.kind = label_kind_from_string(ls.at("kind").get<std::string>());
    spec.label_space.labels = ls.at("labels").get<std::vector<std::string>>();
    if (ls.contains("none_label") && !ls["none_label"].is_null())
        spec.label_space.none_label = ls["none_label"].get<std::string>();
    spec.metrics = j.at("metrics").get<std::vector<std::string>>();
    const json& ac = j.at("answer_contract");
    spec.answer_contract.pattern = ac.at("pattern").get<std::string>();
    spec.answer_contract.hole_display = ac.value("hole_display", std::string("{}"));
    spec.answer_contract.show_menu = ac.value("show_menu", false);
    spec.answer_contract.list_separator = ac.value("list_separator", std::string(", "));
    if (ac.contains("positive_label") && !ac["positive_label"].is_null())
        spec.answer_contract.positive_label = ac["positive_label"].get<std::string>();
    spec.answer_contract.allowed_labels = spec.label_space.labels;
    spec.answer_contract.none_label = spec.label_space.none_label;
    switch (spec.label_space.kind) {
        case LabelKind::multi_label:
            spec.answer_contract.kind = ContractKind::multi_label;
            break;
        case LabelKind::tag_sequence:
            spec.answer_contract.kind = ContractKind::tag_sequence;
            break;
        default:
            spec.answer_contract.kind = ContractKind::single_label;
    }
    spec.template_slots = j.at("template_slots").get<std::vector<std::string>>();
    spec.domain_tag = j.value("domain_tag", std::string());
    if (j.contains("field_mapping")) {
        const json& fm = j["field_mapping"];
        if (fm.contains("slots"))
            spec.field_mapping.slots = fm["slots"].get<std::map<std::string, std::string>>();
        spec.field_mapping.gold_field = fm.value("gold", std::string("label"));
        if (fm.contains("id") && !fm["id"].is_null())
            spec.field_mapping.id_field = fm["id"].get<std::string>();
        if (fm.contains("label_aliases"))
            spec.field_mapping.label_aliases =
                fm["label_aliases"].get<std::map<std::string, std::string>>();
        spec.field_mapping.list_separator = fm.value("list_separator", std::string("|"));
    }
    spec.validate();
    return spec;
}

}  // namespace mpeval
