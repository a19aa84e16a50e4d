#include <doctest.h>

#include "helpers.hpp"
#include "mpeval/errors.hpp"
#include "mpeval/text.hpp"

using namespace mpeval;
using namespace mpeval::test;

TEST_SUITE_BEGIN("prompt-engine");

TEST_CASE("strategy classification and names") {
    for (auto s : {Strategy::mp, Strategy::cot, Strategy::ps})
        CHECK(is_zero_shot(s));
    for (auto s : {Strategy::m_cot, Strategy::cot_sc, Strategy::m_mp})
        CHECK(is_few_shot(s));
    CHECK(strategy_from_string("CoT-SC") == Strategy::cot_sc);
    CHECK(to_string(Strategy::m_mp) == "M-MP");
    CHECK(base_strategy(Strategy::cot_sc) == Strategy::cot);
    CHECK(base_strategy(Strategy::m_mp) == Strategy::mp);
}

TEST_CASE("decoding params") {
    DecodingParams sc = decoding_params_for(Strategy::cot_sc);
    CHECK(sc.temperature == 0.7);
    CHECK(sc.sample_count == 10);

    DecodingParams mp = decoding_params_for(Strategy::mp);
    CHECK(mp.temperature == 0.0);
    CHECK(mp.sample_count == 1);
    CHECK(mp.max_tokens == 1024);

    DecodingOverrides bad;
    bad.sample_count = 5;  // temperature stays 0
    CHECK_THROWS_AS(decoding_params_for(Strategy::mp, bad), InvalidOverride);

    DecodingOverrides too_hot;
    too_hot.temperature = 3.0;
    CHECK_THROWS_AS(decoding_params_for(Strategy::mp, too_hot), InvalidOverride);

    DecodingOverrides ok;
    ok.temperature = 0.5;
    ok.sample_count = 3;
    DecodingParams p = decoding_params_for(Strategy::mp, ok);
    CHECK(p.sample_count == 3);
}

TEST_CASE("registry covers every builtin task x strategy") {
    const auto& reg = registry();
    for (const auto& spec : builtin_catalog()) {
        for (auto s : {Strategy::mp, Strategy::cot, Strategy::ps, Strategy::m_cot,
                       Strategy::cot_sc, Strategy::m_mp}) {
            CAPTURE(spec.task_id);
            CAPTURE(to_string(s));
            CHECK(reg.has(spec.task_id, s));
            CHECK_NOTHROW(reg.get(spec.task_id, s));
        }
    }
    CHECK_THROWS_AS(reg.get("no-such-task", Strategy::mp), MissingTemplate);
}

TEST_CASE("golden zero-shot MP renders") {
    const auto& reg = registry();
    struct Case {
        const char* task;
        Instance instance;
        const char* golden;
    };
    std::vector<Case> cases = {
        {"wic", wic_demo_instance(), "golden/wic_mp.txt"},
        {"qnli", qnli_demo_instance(), "golden/qnli_mp.txt"},
        {"ddi", ddi_demo_instance(), "golden/ddi_mp.txt"},
    };
    for (const auto& c : cases) {
        CAPTURE(c.task);
        PromptBundle b = render_zero_shot(reg, Strategy::mp, builtin_task(c.task), c.instance);
        CHECK(b.text == slurp(fixture(c.golden)));
        CHECK(b.shots == 0);
        CHECK(b.prompt_hash == sha256_hex(b.text));
    }
}

TEST_CASE("zero-shot render contracts") {
    const auto& reg = registry();

    Instance boolq;
    boolq.instance_id = "b0";
    boolq.slot_values = {{"question", "Is water wet?"}, {"passage", "Water is wet."}};
    boolq.gold = {"yes"};

    PromptBundle cot = render_zero_shot(reg, Strategy::cot, builtin_task("boolq"), boolq);
    CHECK(cot.text.ends_with(kCotSuffix));  // final sentence is the CoT cue

    PromptBundle ps = render_zero_shot(reg, Strategy::ps, builtin_task("boolq"), boolq);
    CHECK(ps.text.ends_with(kPsSuffix));

    PromptBundle mp = render_zero_shot(reg, Strategy::mp, builtin_task("wic"),
                                       wic_demo_instance());
    CHECK(mp.text.find("Evaluate your confidence (0-100%)") != std::string::npos);
    CHECK(mp.text.ends_with(
        "The target word has the same meaning in both sentences: {} (True / False)”."));
}

TEST_CASE("empty slot value is a valid binding") {
    const auto& reg = registry();
    Instance inst = qnli_demo_instance();
    inst.slot_values["question"] = "";
    PromptBundle b = render_zero_shot(reg, Strategy::mp, builtin_task("qnli"), inst);
    CHECK(b.text.find("For the question: “” and statement") != std::string::npos);
}

TEST_CASE("unbound placeholder") {
    const auto& reg = registry();
    Instance inst;
    inst.instance_id = "x";
    inst.slot_values = {{"sentence_1", "a"}, {"sentence_2", "b"}};  // no "word"
    CHECK_THROWS_AS(render_zero_shot(reg, Strategy::mp, builtin_task("wic"), inst),
                    UnboundPlaceholder);
}

TEST_CASE("rendering is pure") {
    const auto& reg = registry();
    PromptBundle a = render_zero_shot(reg, Strategy::mp, builtin_task("wic"), wic_demo_instance());
    PromptBundle b = render_zero_shot(reg, Strategy::mp, builtin_task("wic"), wic_demo_instance());
    CHECK(a.text == b.text);
    CHECK(a.prompt_hash == b.prompt_hash);
}

static ExemplarSet demo_wic_exemplars() {
    ExemplarSet set;
    set.task_id = "wic";
    set.exemplars.emplace_back(wic_demo_instance(),
                               slurp(fixture("fixtures/answers/wic_demo_answer.txt")));
    return set;
}

TEST_CASE("few-shot rendering embeds worked answers verbatim") {
    const auto& reg = registry();
    Instance query;
    query.instance_id = "q";
    query.slot_values = {{"sentence_1", "He went to the store."},
                         {"sentence_2", "The milk went bad."},
                         {"word", "went"}};
    query.gold = {"False"};

    PromptBundle b = render_few_shot(reg, Strategy::m_mp, builtin_task("wic"), query,
                                     demo_wic_exemplars(), 1);
    CHECK(b.shots == 1);
    CHECK(b.text.find("I am 83% confident in this analysis") != std::string::npos);
    CHECK(b.text.find("Q: ") == 0);

    ExemplarSet ddi_set;
    ddi_set.task_id = "ddi";
    ddi_set.exemplars.emplace_back(ddi_demo_instance(),
                                   slurp(fixture("fixtures/answers/ddi_demo_answer.txt")));
    PromptBundle d = render_few_shot(reg, Strategy::m_mp, builtin_task("ddi"), ddi_demo_instance(),
                                     ddi_set, 1);
    CHECK(d.text.find("The relationship between two substances is Effect.") != std::string::npos);
}

TEST_CASE("few-shot decomposition: stripping demos leaves the zero-shot render") {
    const auto& reg = registry();
    Instance query;
    query.instance_id = "q";
    query.slot_values = {{"sentence_1", "s1"}, {"sentence_2", "s2"}, {"word", "w"}};
    query.gold = {"True"};
    ExemplarSet set = demo_wic_exemplars();

    for (auto [few, zero] : {std::pair{Strategy::m_mp, Strategy::mp},
                             std::pair{Strategy::m_cot, Strategy::cot}}) {
        PromptBundle fs = render_few_shot(reg, few, builtin_task("wic"), query, set, 1);
        PromptBundle zs = render_zero_shot(reg, zero, builtin_task("wic"), query);
        REQUIRE(fs.text.size() > zs.text.size());
        CHECK(fs.text.ends_with(zs.text));
        std::string demos = fs.text.substr(0, fs.text.size() - zs.text.size());
        CHECK(demos.starts_with("Q: "));
        CHECK(demos.ends_with("\n\n"));
    }
}

TEST_CASE("CoT-SC reuses the M-CoT prompt with sampled decoding") {
    const auto& reg = registry();
    Instance query;
    query.instance_id = "q";
    query.slot_values = {{"sentence_1", "s1"}, {"sentence_2", "s2"}, {"word", "w"}};
    query.gold = {"True"};
    ExemplarSet set = demo_wic_exemplars();

    PromptBundle sc = render_few_shot(reg, Strategy::cot_sc, builtin_task("wic"), query, set, 1);
    PromptBundle mc = render_few_shot(reg, Strategy::m_cot, builtin_task("wic"), query, set, 1);
    CHECK(sc.text == mc.text);
    CHECK(sc.decoding.temperature == 0.7);
    CHECK(sc.decoding.sample_count == 10);
    CHECK(mc.decoding.temperature == 0.0);
    CHECK(mc.decoding.sample_count == 1);
}

TEST_CASE("few-shot misuse") {
    const auto& reg = registry();
    Instance query;
    query.instance_id = "q";
    query.slot_values = {{"sentence_1", "a"}, {"sentence_2", "b"}, {"word", "w"}};
    query.gold = {"True"};

    ExemplarSet empty;
    empty.task_id = "wic";
    CHECK_THROWS_AS(render_few_shot(reg, Strategy::m_mp, builtin_task("wic"), query, empty, 5),
                    ExemplarTaskMismatch);

    ExemplarSet wrong_task = demo_wic_exemplars();
    wrong_task.task_id = "qnli";
    CHECK_THROWS_AS(
        render_few_shot(reg, Strategy::m_mp, builtin_task("wic"), query, wrong_task, 1),
        ExemplarTaskMismatch);

    CHECK_THROWS(render_few_shot(reg, Strategy::mp, builtin_task("wic"), query, empty, 0));
    CHECK_THROWS(render_zero_shot(reg, Strategy::m_mp, builtin_task("wic"), query));
}

TEST_CASE("template files parse back to five stages") {
    const auto& reg = registry();
    for (const auto& spec : builtin_catalog()) {
        const PromptTemplate& tpl = reg.get(spec.task_id, Strategy::mp);
        CHECK(tpl.stage_list.size() == 5);
        CHECK(tpl.contract_sentence.starts_with("Provide the answer in your final response as"));
    }
    CHECK(registry().file_digests().size() == 30);
}

TEST_SUITE_END();
