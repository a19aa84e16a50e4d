#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <doctest.h>
#include <httplib.h>

#include <atomic>
#include <cstdlib>
#include <thread>

#include "helpers.hpp"
#include "mpeval/backend.hpp"
#include "mpeval/errors.hpp"
#include "mpeval/parser.hpp"
#include "mpeval/text.hpp"

using namespace mpeval;
using namespace mpeval::test;

TEST_SUITE_BEGIN("backend-gateway");

namespace {

PromptBundle bundle_for(const std::string& text, double temperature = 0.0, int samples = 1) {
    PromptBundle b;
    b.text = text;
    b.strategy = temperature > 0 ? Strategy::cot_sc : Strategy::mp;
    b.shots = 0;
    b.decoding.temperature = temperature;
    b.decoding.sample_count = samples;
    b.decoding.max_tokens = 256;
    b.prompt_hash = sha256_hex(text);
    return b;
}

BackendConfig scripted_config() {
    BackendConfig cfg;
    cfg.kind = BackendConfig::Kind::scripted;
    cfg.model_name = "scripted";
    cfg.base_backoff_ms = 0;
    return cfg;
}

// Instrumented backend that fails a configured number of times.
class FlakyBackend : public Backend {
  public:
    FlakyBackend(int failures_before_success, std::string text)
        : failures_(failures_before_success), text_(std::move(text)) {}
    std::string complete(const PromptBundle&, int) override {
        ++attempts;
        if (attempts <= failures_) throw TransportError("synthetic transport failure");
        return text_;
    }
    std::atomic<int> attempts{0};

  private:
    int failures_;
    std::string text_;
};

class AlwaysAuthError : public Backend {
  public:
    std::string complete(const PromptBundle&, int) override {
        ++attempts;
        throw AuthError("synthetic auth refusal");
    }
    std::atomic<int> attempts{0};
};

CallContext ctx() {
    return {"run-1", "wic", "i0", Strategy::mp};
}

}  // namespace

TEST_CASE("scripted backend echoes fixtures") {
    PromptBundle b = bundle_for("prompt text");
    auto backend = std::make_shared<ScriptedBackend>(
        ScriptedBackend::Fixtures{{{b.prompt_hash, 0}, "The status is entailment."}});
    Gateway gw(scripted_config(), backend, std::nullopt);
    Transcript t = gw.complete(b, 0, ctx());
    CHECK(t.raw_text == "The status is entailment.");
    CHECK(t.from_cache == false);
    CHECK(t.model_name == "scripted");
    CHECK(t.created_at == kEpochTimestamp);

    auto empty = std::make_shared<ScriptedBackend>(ScriptedBackend::Fixtures{});
    Gateway gw2(scripted_config(), empty, std::nullopt);
    CHECK_THROWS_AS(gw2.complete(b, 0, ctx()), FixtureMiss);
}

TEST_CASE("cache hit serves without touching the backend") {
    TempDir tmp;
    PromptBundle b = bundle_for("cached prompt");
    auto backend = std::make_shared<ScriptedBackend>(
        ScriptedBackend::Fixtures{{{b.prompt_hash, 0}, "answer"}});
    Gateway gw(scripted_config(), backend, tmp.path / "cache");

    Transcript first = gw.complete(b, 0, ctx());
    CHECK_FALSE(first.from_cache);
    CHECK(gw.backend_calls() == 1);

    Transcript second = gw.complete(b, 0, ctx());
    CHECK(second.from_cache);
    CHECK(second.raw_text == first.raw_text);
    CHECK(gw.backend_calls() == 1);  // zero new invocations
}

TEST_CASE("cache round-trips bytes and survives restart") {
    TempDir tmp;
    DiskCache cache(tmp.path / "cache");
    CacheKey key{"model/x", "abcdef0123", 0.7, 512, 3};
    std::string payload = "line1\nline2\t\xE2\x80\x9Cquoted\xE2\x80\x9D {json: true}";
    cache.put(key, payload, "2024-01-01T00:00:00Z");

    DiskCache reopened(tmp.path / "cache");  // fresh handle = process restart
    auto entry = reopened.get(key);
    REQUIRE(entry.has_value());
    CHECK(entry->raw_text == payload);
    CHECK(entry->created_at == "2024-01-01T00:00:00Z");

    CacheKey other = key;
    other.temperature = 0.0;  // greedy and sampled responses never collide
    CHECK_FALSE(reopened.get(other).has_value());
    CacheKey other_idx = key;
    other_idx.sample_index = 4;
    CHECK_FALSE(reopened.get(other_idx).has_value());
}

TEST_CASE("temperature-0 repeat calls return byte-identical text") {
    TempDir tmp;
    PromptBundle b = bundle_for("greedy prompt");
    auto backend = std::make_shared<ScriptedBackend>(
        ScriptedBackend::Fixtures{{{b.prompt_hash, 0}, "deterministic answer"}});
    Gateway gw(scripted_config(), backend, tmp.path / "cache");
    std::string first = gw.complete(b, 0, ctx()).raw_text;
    for (int i = 0; i < 3; ++i) CHECK(gw.complete(b, 0, ctx()).raw_text == first);
}

TEST_CASE("complete_samples returns index order and bounded parallelism") {
    TempDir tmp;
    PromptBundle b = bundle_for("sampled prompt", 0.7, 10);
    ScriptedBackend::Fixtures fixtures;
    for (int i = 0; i < 10; ++i)
        fixtures[{b.prompt_hash, i}] = "sample " + std::to_string(i);
    BackendConfig cfg = scripted_config();
    cfg.parallelism = 3;
    Gateway gw(cfg, std::make_shared<ScriptedBackend>(fixtures), tmp.path / "cache");

    auto transcripts = gw.complete_samples(b, ctx());
    REQUIRE(transcripts.size() == 10);
    for (int i = 0; i < 10; ++i) {
        CHECK(transcripts[i].sample_index == i);
        CHECK(transcripts[i].raw_text == "sample " + std::to_string(i));
    }

    PromptBundle single = bundle_for("greedy prompt 2");
    ScriptedBackend::Fixtures one{{{single.prompt_hash, 0}, "only"}};
    Gateway gw1(scripted_config(), std::make_shared<ScriptedBackend>(one), std::nullopt);
    CHECK(gw1.complete_samples(single, ctx()).size() == 1);
}

TEST_CASE("partial sample failure names the index and persists the rest") {
    TempDir tmp;
    PromptBundle b = bundle_for("partial prompt", 0.7, 10);
    ScriptedBackend::Fixtures fixtures;
    for (int i = 0; i < 10; ++i) {
        if (i == 7) continue;  // missing fixture
        fixtures[{b.prompt_hash, i}] = "sample " + std::to_string(i);
    }
    Gateway gw(scripted_config(), std::make_shared<ScriptedBackend>(fixtures), tmp.path / "cache");
    try {
        gw.complete_samples(b, ctx());
        FAIL("expected SampleError");
    } catch (const SampleError& e) {
        CHECK(e.sample_index == 7);
        CHECK(std::string(e.what()).find("7") != std::string::npos);
    }

    // Successful indices were cached before the error surfaced.
    Gateway replay(scripted_config(), std::make_shared<ScriptedBackend>(ScriptedBackend::Fixtures{}),
                   tmp.path / "cache");
    for (int i = 0; i < 10; ++i) {
        if (i == 7) continue;
        Transcript t = replay.complete(b, i, ctx());
        CHECK(t.from_cache);
    }
    CHECK(replay.backend_calls() == 0);
}

TEST_CASE("scripted fixture of a worked answer parses end to end") {
    // Render the QNLI prompt, script its worked answer as the response, and
    // run the full complete -> parse path.
    const TaskSpec& qnli = builtin_task("qnli");
    Instance inst = qnli_demo_instance();
    PromptBundle bundle = render_zero_shot(registry(), Strategy::mp, qnli, inst);
    std::string worked = slurp(fixture("fixtures/answers/qnli_demo_answer.txt"));
    Gateway gw(scripted_config(),
               std::make_shared<ScriptedBackend>(
                   ScriptedBackend::Fixtures{{{bundle.prompt_hash, 0}, worked}}),
               std::nullopt);
    Transcript t = gw.complete(bundle, 0, {"run", "qnli", inst.instance_id, Strategy::mp});
    ParsedResponse parsed = parse_response(t.raw_text, qnli, inst, t.sample_index);
    CHECK(parsed.parse_mode == ParseMode::strict);
    CHECK(parsed.labels == std::vector<std::string>{"not_entailment"});
    CHECK(parsed.confidence == 85);
}

TEST_CASE("warm cache replay issues zero backend calls") {
    TempDir tmp;
    std::vector<PromptBundle> bundles;
    ScriptedBackend::Fixtures fixtures;
    for (int i = 0; i < 5; ++i) {
        bundles.push_back(bundle_for("prompt " + std::to_string(i)));
        fixtures[{bundles.back().prompt_hash, 0}] = "answer " + std::to_string(i);
    }
    {
        Gateway gw(scripted_config(), std::make_shared<ScriptedBackend>(fixtures),
                   tmp.path / "cache");
        for (const auto& b : bundles) gw.complete(b, 0, ctx());
        CHECK(gw.backend_calls() == 5);
    }
    Gateway warm(scripted_config(), std::make_shared<ScriptedBackend>(fixtures),
                 tmp.path / "cache");
    for (const auto& b : bundles) CHECK(warm.complete(b, 0, ctx()).from_cache);
    CHECK(warm.backend_calls() == 0);
}

TEST_CASE("retry policy") {
    BackendConfig cfg = scripted_config();
    cfg.max_attempts = 4;

    SUBCASE("fails max_attempts - 1 times then succeeds") {
        auto flaky = std::make_shared<FlakyBackend>(3, "eventual answer");
        Gateway gw(cfg, flaky, std::nullopt);
        PromptBundle b = bundle_for("retry prompt");
        CHECK(gw.complete(b, 0, ctx()).raw_text == "eventual answer");
        CHECK(flaky->attempts == 4);
    }

    SUBCASE("always failing gives TransportError after exactly max_attempts") {
        auto flaky = std::make_shared<FlakyBackend>(1000, "never");
        Gateway gw(cfg, flaky, std::nullopt);
        CHECK_THROWS_AS(gw.complete(bundle_for("retry prompt"), 0, ctx()), TransportError);
        CHECK(flaky->attempts == 4);
    }

    SUBCASE("auth refusals are never retried") {
        auto auth = std::make_shared<AlwaysAuthError>();
        Gateway gw(cfg, auth, std::nullopt);
        CHECK_THROWS_AS(gw.complete(bundle_for("auth prompt"), 0, ctx()), AuthError);
        CHECK(auth->attempts == 1);
    }
}

TEST_CASE("http backend against a local server") {
    std::atomic<int> hits{0};
    std::string seen_auth, seen_body;
    httplib::Server server;
    std::atomic<int> fail_first{0};
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        ++hits;
        seen_auth = req.get_header_value("Authorization");
        seen_body = req.body;
        if (fail_first.fetch_sub(1) > 0) {
            res.status = 500;
            res.set_content("overloaded", "text/plain");
            return;
        }
        json out;
        out["choices"] = json::array();
        out["choices"].push_back({{"message", {{"role", "assistant"}, {"content", "pong"}}}});
        res.set_content(out.dump(), "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread server_thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    BackendConfig cfg;
    cfg.kind = BackendConfig::Kind::http;
    cfg.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
    cfg.model_name = "test-model";
    cfg.auth_ref = "MPEVAL_TEST_KEY";
    cfg.base_backoff_ms = 1;
    cfg.max_attempts = 3;
    cfg.deterministic_time = false;

    PromptBundle b = bundle_for("ping");

    SUBCASE("missing credential fails before any network activity") {
        ::unsetenv("MPEVAL_TEST_KEY");
        Gateway gw(cfg, make_backend(cfg), std::nullopt);
        CHECK_THROWS_AS(gw.complete(b, 0, ctx()), AuthError);
        CHECK(hits == 0);
    }

    SUBCASE("success carries bearer token and request fields") {
        ::setenv("MPEVAL_TEST_KEY", "sekrit", 1);
        Gateway gw(cfg, make_backend(cfg), std::nullopt);
        Transcript t = gw.complete(b, 0, ctx());
        CHECK(t.raw_text == "pong");
        CHECK(seen_auth == "Bearer sekrit");
        json body = json::parse(seen_body);
        CHECK(body["model"] == "test-model");
        CHECK(body["messages"][0]["role"] == "user");
        CHECK(body["messages"][0]["content"] == "ping");
        CHECK(body["temperature"] == 0.0);
    }

    SUBCASE("5xx retries then succeeds") {
        ::setenv("MPEVAL_TEST_KEY", "sekrit", 1);
        fail_first = 2;
        Gateway gw(cfg, make_backend(cfg), std::nullopt);
        CHECK(gw.complete(b, 0, ctx()).raw_text == "pong");
        CHECK(hits == 3);
    }

    SUBCASE("optional system prompt becomes the first message") {
        ::setenv("MPEVAL_TEST_KEY", "sekrit", 1);
        BackendConfig with_system = cfg;
        with_system.system_prompt = "You are terse.";
        Gateway gw(with_system, make_backend(with_system), std::nullopt);
        gw.complete(b, 0, ctx());
        json body = json::parse(seen_body);
        REQUIRE(body["messages"].size() == 2);
        CHECK(body["messages"][0]["role"] == "system");
    }

    server.stop();
    server_thread.join();
}

TEST_CASE("connection refused surfaces as TransportError") {
    BackendConfig cfg;
    cfg.kind = BackendConfig::Kind::http;
    cfg.endpoint = "http://127.0.0.1:1/v1/chat/completions";  // nothing listens on port 1
    cfg.model_name = "m";
    cfg.max_attempts = 2;
    cfg.base_backoff_ms = 1;
    cfg.timeout_ms = 500;
    Gateway gw(cfg, make_backend(cfg), std::nullopt);
    CHECK_THROWS_AS(gw.complete(bundle_for("x"), 0, ctx()),
                    Error);  // TransportError or TimeoutError depending on the stack
}

TEST_CASE("sample_index must stay below sample_count") {
    PromptBundle b = bundle_for("bounds prompt");
    auto backend = std::make_shared<ScriptedBackend>(
        ScriptedBackend::Fixtures{{{b.prompt_hash, 0}, "x"}});
    Gateway gw(scripted_config(), backend, std::nullopt);
    CHECK_THROWS_AS(gw.complete(b, 1, ctx()), ConfigError);
    CHECK_THROWS_AS(gw.complete(b, -1, ctx()), ConfigError);
}

TEST_CASE("backend config validation") {
    BackendConfig cfg;
    cfg.kind = BackendConfig::Kind::http;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);  // endpoint required iff http
    cfg.endpoint = "http://x/y";
    CHECK_NOTHROW(cfg.validate());
    cfg.max_attempts = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_SUITE_END();
