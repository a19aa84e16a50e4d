#include "mpeval/catalog.hpp"

#include <cstdio>
#include <fstream>

#include "mpeval/errors.hpp"
#include "mpeval/text.hpp"

namespace mpeval {

namespace {

std::vector<std::string> numbered_labels(const std::string& stem, int n) {
    std::vector<std::string> out;
    out.reserve(n);
    for (int i = 1; i <= n; ++i) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%s%03d", stem.c_str(), i);
        out.emplace_back(buf);
    }
    return out;
}

FieldMapping mapping(std::map<std::string, std::string> slots, std::string gold_field,
                     std::map<std::string, std::string> aliases = {}) {
    FieldMapping fm;
    fm.slots = std::move(slots);
    fm.gold_field = std::move(gold_field);
    fm.label_aliases = std::move(aliases);
    return fm;
}

ContractKind contract_kind_for(LabelKind k) {
    switch (k) {
        case LabelKind::multi_label: return ContractKind::multi_label;
        case LabelKind::tag_sequence: return ContractKind::tag_sequence;
        default: return ContractKind::single_label;
    }
}

TaskSpec make_task(std::string task_id, Benchmark benchmark, TaskKind kind, LabelSpace labels,
                   std::vector<std::string> metrics, std::string pattern,
                   std::vector<std::string> slots, std::string domain, FieldMapping mapping,
                   std::string hole_display = "{}", bool show_menu = true,
                   std::optional<std::string> positive_label = std::nullopt) {
    TaskSpec spec;
    spec.task_id = std::move(task_id);
    spec.benchmark = benchmark;
    spec.task_kind = kind;
    spec.label_space = std::move(labels);
    spec.metrics = std::move(metrics);
    spec.template_slots = std::move(slots);
    spec.domain_tag = std::move(domain);
    spec.field_mapping = std::move(mapping);
    spec.answer_contract.pattern = std::move(pattern);
    spec.answer_contract.hole_display = std::move(hole_display);
    spec.answer_contract.show_menu = show_menu;
    spec.answer_contract.kind = contract_kind_for(spec.label_space.kind);
    spec.answer_contract.allowed_labels = spec.label_space.labels;
    spec.answer_contract.none_label = spec.label_space.none_label;
    spec.answer_contract.positive_label = std::move(positive_label);
    spec.validate();
    return spec;
}

}  // namespace

std::vector<TaskSpec> builtin_catalog() {
    std::vector<TaskSpec> specs;

    specs.push_back(make_task(
        "qqp", Benchmark::glue, TaskKind::pair_classification,
        {LabelKind::binary, {"True", "False"}, std::nullopt},
        {"accuracy", "f1-binary"},
        "The two questions are paraphrases: {}",
        {"question_1", "question_2"}, "Social QA",
        mapping({{"question1", "question_1"}, {"question2", "question_2"}}, "label",
                {{"1", "True"}, {"0", "False"}, {"duplicate", "True"},
                 {"not_duplicate", "False"}}),
        "{}", true, std::string("True")));

    specs.push_back(make_task(
        "qnli", Benchmark::glue, TaskKind::nli,
        {LabelKind::binary, {"entailment", "not_entailment"}, std::nullopt},
        {"accuracy"},
        "The status is {}",
        {"question", "sentence"}, "Wikipedia",
        mapping({{"question", "question"}, {"sentence", "sentence"}}, "label")));

    specs.push_back(make_task(
        "boolq", Benchmark::super_glue, TaskKind::qa,
        {LabelKind::binary, {"yes", "no"}, std::nullopt},
        {"accuracy"},
        "The answer to the question is: {}",
        {"question", "passage"}, "Wikipedia, Google queries",
        mapping({{"question", "question"}, {"passage", "passage"}}, "label",
                {{"true", "yes"}, {"false", "no"}})));

    specs.push_back(make_task(
        "wic", Benchmark::super_glue, TaskKind::wsd,
        {LabelKind::binary, {"True", "False"}, std::nullopt},
        {"accuracy"},
        "The target word has the same meaning in both sentences: {}",
        {"sentence_1", "sentence_2", "word"}, "WordNet, Wiktionary, etc.",
        mapping({{"sentence1", "sentence_1"}, {"sentence2", "sentence_2"}, {"word", "word"}},
                "label")));

    specs.push_back(make_task(
        "bc5cdr-chem", Benchmark::blue, TaskKind::ner,
        {LabelKind::tag_sequence, {"B", "I", "O"}, std::nullopt},
        {"bio-micro-f1"},
        "The BIO tags are: {}",
        {"tokens"}, "Biochemistry",
        mapping({{"tokens", "tokens"}}, "tags"),
        "{token/TAG ...}", false));

    specs.push_back(make_task(
        "ddi", Benchmark::blue, TaskKind::re,
        {LabelKind::multi_class, {"Advice", "Effect", "Mechanism", "Int"}, std::nullopt},
        {"macro-f1"},
        "The relationship between two substances is {}",
        {"sentence", "item_1", "item_2"}, "Biochemistry",
        mapping({{"sentence", "sentence"}, {"item1", "item_1"}, {"item2", "item_2"}},
                "label")));

    specs.push_back(make_task(
        "mednli", Benchmark::blue, TaskKind::nli,
        {LabelKind::multi_class, {"entailment", "contradiction", "neutral"}, std::nullopt},
        {"accuracy"},
        "The relationship is: {}",
        {"premise", "hypothesis"}, "Clinical practice",
        mapping({{"sentence1", "premise"}, {"sentence2", "hypothesis"}}, "gold_label")));

    // The two 100-class LexGLUE inventories are dataset-version-bound; the
    // built-ins carry schematic labels with the right counts. Real runs load
    // the concrete inventory from a task-spec file.
    specs.push_back(make_task(
        "eur-lex", Benchmark::lex_glue, TaskKind::multi_label,
        {LabelKind::multi_label, numbered_labels("eurovoc_", 100), std::nullopt},
        {"micro-f1", "macro-f1"},
        "The applicable concepts are: {}",
        {"document"}, "EU Law",
        mapping({{"text", "document"}}, "labels"),
        "{label, label, ...}", false));

    specs.push_back(make_task(
        "ledgar", Benchmark::lex_glue, TaskKind::multi_class,
        {LabelKind::multi_class, numbered_labels("provision_", 100), std::nullopt},
        {"micro-f1", "macro-f1"},
        "The contract provision category is: {}",
        {"provision"}, "Contracts",
        mapping({{"text", "provision"}}, "label"),
        "{label}", false));

    specs.push_back(make_task(
        "unfair-tos", Benchmark::lex_glue, TaskKind::multi_label,
        {LabelKind::multi_label,
         {"Arbitration", "Choice of law", "Content removal", "Contract by using",
          "Jurisdiction", "Limitation of liability", "Unilateral change",
          "Unilateral termination", "none"},
         std::string("none")},
        {"micro-f1", "macro-f1"},
        "The unfair term types are: {}",
        {"sentence"}, "Contracts",
        mapping({{"text", "sentence"}}, "labels"),
        "{label, ...}", false));

    return specs;
}

const TaskSpec& builtin_task(const std::string& task_id) {
    static const std::vector<TaskSpec> specs = builtin_catalog();
    for (const auto& s : specs)
        if (s.task_id == task_id) return s;
    throw ConfigError("no built-in task '" + task_id + "'");
}

TaskSpec load_task_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open task spec file: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("task spec " + path.string() + ": " + e.what());
    }
    return TaskSpec::from_json(j);
}

std::string catalog_digest(const std::vector<TaskSpec>& specs) {
    std::string blob;
    for (const auto& s : specs) blob += s.to_json().dump() + "\n";
    return sha256_hex(blob);
}

}  // namespace mpeval
