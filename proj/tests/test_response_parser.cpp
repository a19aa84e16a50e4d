#include <doctest.h>

#include <random>
#include <set>

#include "helpers.hpp"
#include "mpeval/errors.hpp"
#include "mpeval/parser.hpp"
#include "mpeval/text.hpp"

using namespace mpeval;
using namespace mpeval::test;

TEST_SUITE_BEGIN("response-parser");

TEST_CASE("demonstration worked answers parse strictly") {
    struct Case {
        const char* task;
        const char* file;
        const char* label;
        int confidence;
    };
    std::vector<Case> cases = {
        {"wic", "fixtures/answers/wic_demo_answer.txt", "False", 83},
        {"qnli", "fixtures/answers/qnli_demo_answer.txt", "not_entailment", 85},
        {"ddi", "fixtures/answers/ddi_demo_answer.txt", "Effect", 90},
    };
    for (const auto& c : cases) {
        CAPTURE(c.task);
        std::string raw = slurp(fixture(c.file));
        ExtractedAnswer ans = extract_answer(raw, builtin_task(c.task).answer_contract);
        CHECK(ans.mode == ParseMode::strict);
        CHECK(ans.labels == std::vector<std::string>{c.label});
        CHECK(extract_confidence(raw) == c.confidence);

        auto stages = segment_stages(raw);
        REQUIRE(stages.has_value());
        CHECK(stages->size() == 5);
    }
    auto qnli_stages = segment_stages(slurp(fixture("fixtures/answers/qnli_demo_answer.txt")));
    CHECK(qnli_stages->at(4).starts_with("I am 85% confident"));
}

TEST_CASE("strict extraction reads the last frame occurrence") {
    const AnswerContract& wic = builtin_task("wic").answer_contract;
    ExtractedAnswer a = extract_answer(
        "Reasoning...\nThe target word has the same meaning in both sentences: False.", wic);
    CHECK(a.mode == ParseMode::strict);
    CHECK(a.labels == std::vector<std::string>{"False"});

    // Provisional judgment first, final decision later: last one wins.
    ExtractedAnswer b = extract_answer(
        "The status is entailment. On reflection that was wrong.\nThe status is not_entailment.",
        builtin_task("qnli").answer_contract);
    CHECK(b.labels == std::vector<std::string>{"not_entailment"});
}

TEST_CASE("lenient extraction") {
    const AnswerContract& wic = builtin_task("wic").answer_contract;
    ExtractedAnswer a = extract_answer("I think the answer is true", wic);
    CHECK(a.mode == ParseMode::lenient);
    CHECK(a.labels == std::vector<std::string>{"True"});

    CHECK_THROWS_AS(extract_answer("It could be entailment or not_entailment.",
                                   builtin_task("qnli").answer_contract),
                    AmbiguousAnswer);
    CHECK_THROWS_AS(extract_answer("I have no idea.", wic), ParseFailure);
    // Only the final two sentences are scanned.
    CHECK_THROWS_AS(
        extract_answer("The answer is true. But wait. Let me reconsider. No idea after all.",
                       wic),
        ParseFailure);
}

TEST_CASE("label inside a longer word does not match") {
    // "Int" must not fire on "interaction"
    const AnswerContract& ddi = builtin_task("ddi").answer_contract;
    CHECK_THROWS_AS(extract_answer("They show a strong interaction pattern.", ddi), ParseFailure);
    ExtractedAnswer a = extract_answer("The category is Int.", ddi);
    CHECK(a.labels == std::vector<std::string>{"Int"});
}

TEST_CASE("multi-label extraction") {
    const AnswerContract& tos = builtin_task("unfair-tos").answer_contract;
    ExtractedAnswer a = extract_answer(
        "The unfair term types are: Jurisdiction, Arbitration.", tos);
    CHECK(a.mode == ParseMode::strict);
    CHECK(a.labels == std::vector<std::string>{"Arbitration", "Jurisdiction"});

    SUBCASE("none maps to the none label") {
        ExtractedAnswer n = extract_answer("The unfair term types are: none.", tos);
        CHECK(n.labels == std::vector<std::string>{"none"});
    }
    SUBCASE("and-separated lists") {
        ExtractedAnswer n = extract_answer(
            "The unfair term types are: Jurisdiction and Choice of law.", tos);
        CHECK(n.labels == std::vector<std::string>{"Choice of law", "Jurisdiction"});
    }
    SUBCASE("unknown elements are dropped with a count") {
        ExtractedAnswer n = extract_answer(
            "The unfair term types are: Jurisdiction, Unfairness of doom.", tos);
        CHECK(n.labels == std::vector<std::string>{"Jurisdiction"});
        CHECK(n.dropped_labels == 1);
    }
}

TEST_CASE("tag-sequence extraction") {
    const AnswerContract& ner = builtin_task("bc5cdr-chem").answer_contract;
    ExtractedAnswer a = extract_answer(
        "Analysis...\nThe BIO tags are: Cisplatin/B induced/O renal/O damage/O.", ner, 4);
    CHECK(a.mode == ParseMode::strict);
    CHECK(a.labels == std::vector<std::string>{"B", "O", "O", "O"});

    // No partial-credit alignment: wrong length fails outright.
    CHECK_THROWS_AS(extract_answer("The BIO tags are: a/B b/O.", ner, 4), ParseFailure);
    CHECK_THROWS_AS(extract_answer("No frame at all here.", ner, 4), ParseFailure);

    // Trailing prose on the tag line does not break the pair run.
    ExtractedAnswer trailed = extract_answer(
        "The BIO tags are: a/B b/O. I am 90% confident in this.", ner, 2);
    CHECK(trailed.labels == std::vector<std::string>{"B", "O"});

    // A line break after the frame's colon is tolerated.
    ExtractedAnswer wrapped = extract_answer(
        "Conclusion below.\nThe BIO tags are:\nCisplatin/B induced/O nausea/O.", ner, 3);
    CHECK(wrapped.mode == ParseMode::strict);
    CHECK(wrapped.labels == std::vector<std::string>{"B", "O", "O"});
}

TEST_CASE("strict extraction tolerates a wrapped answer line") {
    ExtractedAnswer a = extract_answer("The status is\nnot_entailment.",
                                       builtin_task("qnli").answer_contract);
    CHECK(a.mode == ParseMode::strict);
    CHECK(a.labels == std::vector<std::string>{"not_entailment"});
}

TEST_CASE("confidence extraction") {
    CHECK(extract_confidence("I am 83% confident in this analysis.") == 83);
    CHECK(extract_confidence("My confidence level is 90%.") == 90);
    CHECK(extract_confidence("Confidence: 75%") == 75);
    CHECK(extract_confidence("No numbers here.") == std::nullopt);
    CHECK(extract_confidence("It rose by 40% last year.") == std::nullopt);
    // Last assertion wins.
    CHECK(extract_confidence("I am 60% confident. Actually, I am 70% confident.") == 70);
    // An echoed stage instruction is a range, not an assertion.
    CHECK(extract_confidence("5. Evaluate your confidence (0-100%) in your analysis.") ==
          std::nullopt);
    CHECK_THROWS_AS(extract_confidence("I am 150% confident."), ConfidenceOutOfRange);
}

TEST_CASE("confidence is stable under non-percent suffixes") {
    std::vector<std::string> texts = {
        "I am 83% confident in this analysis.",
        "No statement at all.",
        "Confidence: 40%.",
    };
    std::vector<std::string> suffixes = {"\nThanks!", " (see above)", "\n\nBest regards.",
                                         " 12345", "“quoted trailer”"};
    for (const auto& t : texts)
        for (const auto& s : suffixes)
            CHECK(extract_confidence(t) == extract_confidence(t + s));
}

TEST_CASE("stage segmentation") {
    CHECK(segment_stages("One paragraph, no enumerators at all.") == std::nullopt);
    CHECK(segment_stages("1. only\n2. four\n3. items\n4. here") == std::nullopt);

    std::string seven = slurp(fixture("fixtures/seven_items.txt"));
    auto segs = segment_stages(seven);
    REQUIRE(segs.has_value());
    auto golden = nlohmann::json::parse(slurp(fixture("fixtures/seven_items_segments.json")));
    REQUIRE(golden.size() == 5);
    for (size_t i = 0; i < 5; ++i) {
        CAPTURE(i);
        CHECK(segs->at(i) == golden[i].get<std::string>());
    }
}

TEST_CASE("contract round-trip over every builtin label") {
    for (const auto& spec : builtin_catalog()) {
        const AnswerContract& c = spec.answer_contract;
        if (c.kind == ContractKind::tag_sequence) continue;
        for (const auto& label : spec.label_space.labels) {
            std::string text = "Reasoning first.\n" + c.instantiate({label});
            ExtractedAnswer ans = extract_answer(text, c);
            CAPTURE(spec.task_id);
            CAPTURE(label);
            CHECK(ans.mode == ParseMode::strict);
            CHECK(ans.labels == std::vector<std::string>{label});
        }
    }
}

TEST_CASE("multi-label round-trip over random subsets") {
    const TaskSpec& eurlex = builtin_task("eur-lex");
    const AnswerContract& c = eurlex.answer_contract;
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 100; ++trial) {
        size_t k = 1 + rng() % 4;
        std::set<std::string> subset;
        while (subset.size() < k)
            subset.insert(eurlex.label_space.labels[rng() % eurlex.label_space.labels.size()]);
        std::vector<std::string> labels(subset.begin(), subset.end());
        ExtractedAnswer ans = extract_answer("Analysis.\n" + c.instantiate(labels), c);
        CHECK(ans.mode == ParseMode::strict);
        CHECK(ans.labels == labels);
    }
}

TEST_CASE("extraction ignores trailing decoration and casing") {
    std::mt19937_64 rng(123);
    const std::vector<std::string> tasks = {"wic", "ddi", "mednli"};
    for (int trial = 0; trial < 200; ++trial) {
        const TaskSpec& spec = builtin_task(tasks[rng() % tasks.size()]);
        const auto& labels = spec.label_space.labels;
        std::string label = labels[rng() % labels.size()];

        std::string decorated = label;
        if (rng() % 2) decorated = to_lower_ascii(decorated);
        if (rng() % 2) {
            std::string upper = decorated;
            for (auto& ch : upper) ch = std::toupper(static_cast<unsigned char>(ch));
            decorated = upper;
        }
        std::string frame = spec.answer_contract.frame_prefix() + decorated;
        if (rng() % 2) frame += ".";
        if (rng() % 2) frame += "   ";
        if (rng() % 2) frame += "\n";

        ExtractedAnswer ans = extract_answer("Some reasoning.\n" + frame, spec.answer_contract);
        CAPTURE(frame);
        CHECK(ans.labels == std::vector<std::string>{label});
    }
}

TEST_CASE("parse_response is total and deterministic") {
    const TaskSpec& wic = builtin_task("wic");
    Instance inst = wic_demo_instance();

    ParsedResponse ok = parse_response(slurp(fixture("fixtures/answers/wic_demo_answer.txt")),
                                       wic, inst, 0);
    CHECK(ok.parse_mode == ParseMode::strict);
    CHECK(ok.labels == std::vector<std::string>{"False"});
    CHECK(ok.confidence == 83);
    CHECK(ok.stages.has_value());

    ParsedResponse bad = parse_response("Gibberish with no labels.", wic, inst, 0);
    CHECK(bad.parse_mode == ParseMode::failed);
    CHECK(bad.labels.empty());
    CHECK(bad.error.has_value());

    // Out-of-range confidence does not poison answer extraction.
    ParsedResponse odd = parse_response(
        "I am 150% confident.\nThe target word has the same meaning in both sentences: True.",
        wic, inst, 0);
    CHECK(odd.labels == std::vector<std::string>{"True"});
    CHECK(odd.confidence == std::nullopt);

    std::string raw = slurp(fixture("fixtures/answers/qnli_demo_answer.txt"));
    const TaskSpec& qnli = builtin_task("qnli");
    Instance q = qnli_demo_instance();
    ParsedResponse r1 = parse_response(raw, qnli, q, 3);
    ParsedResponse r2 = parse_response(raw, qnli, q, 3);
    CHECK(r1.labels == r2.labels);
    CHECK(r1.confidence == r2.confidence);
    CHECK(r1.sample_index == 3);
}

TEST_SUITE_END();
