#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "mpeval/backend.hpp"

#include <httplib.h>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <future>
#include <mutex>
#include <random>
#include <semaphore>
#include <sstream>
#include <thread>

#include "mpeval/errors.hpp"
#include "mpeval/text.hpp"

namespace mpeval {

namespace {

std::string sanitize_component(const std::string& s) {
    std::string out;
    for (char c : s)
        out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' ||
                              c == '_'
                          ? c
                          : '_');
    return out.empty() ? std::string("_") : out;
}

bool is_retryable(const std::exception_ptr& ep) {
    try {
        std::rethrow_exception(ep);
    } catch (const ProviderError& e) {
        return e.status == 429 || e.status >= 500;
    } catch (const TransportError&) {
        return true;
    } catch (const TimeoutError&) {
        return true;
    } catch (...) {
        return false;
    }
}

// endpoint -> (scheme://host[:port], path)
std::pair<std::string, std::string> split_endpoint(const std::string& endpoint) {
    size_t scheme = endpoint.find("://");
    if (scheme == std::string::npos)
        throw ConfigError("endpoint must include a scheme: '" + endpoint + "'");
    size_t path = endpoint.find('/', scheme + 3);
    if (path == std::string::npos) return {endpoint, "/v1/chat/completions"};
    return {endpoint.substr(0, path), endpoint.substr(path)};
}

class HttpBackend : public Backend {
  public:
    explicit HttpBackend(BackendConfig cfg) : cfg_(std::move(cfg)) {}

    std::string complete(const PromptBundle& bundle, int sample_index) override {
        (void)sample_index;  // identical request per sample; caching disambiguates
        std::string token;
        if (!cfg_.auth_ref.empty()) {
            const char* v = std::getenv(cfg_.auth_ref.c_str());
            if (v == nullptr || *v == '\0')
                throw AuthError("credential environment variable '" + cfg_.auth_ref +
                                "' is not set");
            token = v;
        }

        auto [base, path] = split_endpoint(cfg_.endpoint);
        httplib::Client client(base);
        client.set_connection_timeout(0, cfg_.timeout_ms * 1000LL);
        client.set_read_timeout(cfg_.timeout_ms / 1000, (cfg_.timeout_ms % 1000) * 1000);
        client.set_write_timeout(cfg_.timeout_ms / 1000, (cfg_.timeout_ms % 1000) * 1000);

        json body;
        body["model"] = cfg_.model_name;
        json messages = json::array();
        if (cfg_.system_prompt)
            messages.push_back({{"role", "system"}, {"content", *cfg_.system_prompt}});
        messages.push_back({{"role", "user"}, {"content", bundle.text}});
        body["messages"] = messages;
        body["temperature"] = bundle.decoding.temperature;
        body["max_tokens"] = bundle.decoding.max_tokens;

        httplib::Headers headers;
        if (!token.empty()) headers.emplace("Authorization", "Bearer " + token);

        auto res = client.Post(path, headers, body.dump(), "application/json");
        if (!res) {
            auto err = res.error();
            if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read ||
                err == httplib::Error::Write)
                throw TimeoutError("request to " + base + " timed out (" +
                                   httplib::to_string(err) + ")");
            throw TransportError("request to " + base + " failed (" + httplib::to_string(err) +
                                 ")");
        }
        if (res->status == 401 || res->status == 403)
            throw AuthError("provider rejected credentials (HTTP " +
                            std::to_string(res->status) + ")");
        if (res->status < 200 || res->status >= 300)
            throw ProviderError(res->status, "HTTP " + std::to_string(res->status) + ": " +
                                                 res->body.substr(0, 512));
        try {
            json j = json::parse(res->body);
            return j.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const json::exception& e) {
            throw ProviderError(res->status,
                                std::string("malformed provider response: ") + e.what());
        }
    }

  private:
    BackendConfig cfg_;
};

}  // namespace

void BackendConfig::validate() const {
    if (max_attempts < 1) throw ConfigError("max_attempts must be >= 1");
    if (parallelism < 1) throw ConfigError("parallelism must be >= 1");
    if (kind == Kind::http && endpoint.empty())
        throw ConfigError("http backend requires an endpoint");
    if (kind == Kind::scripted && !endpoint.empty())
        throw ConfigError("scripted backend takes no endpoint");
    if (model_name.empty()) throw ConfigError("model_name empty");
}

json BackendConfig::to_json() const {
    json j;
    j["kind"] = kind == Kind::http ? "http" : "scripted";
    if (!endpoint.empty()) j["endpoint"] = endpoint;
    j["model_name"] = model_name;
    if (!auth_ref.empty()) j["auth_ref"] = auth_ref;
    j["timeout_ms"] = timeout_ms;
    j["max_attempts"] = max_attempts;
    j["base_backoff_ms"] = base_backoff_ms;
    j["parallelism"] = parallelism;
    if (system_prompt) j["system_prompt"] = *system_prompt;
    if (!fixtures_path.empty()) j["fixtures_path"] = fixtures_path.string();
    j["deterministic_time"] = deterministic_time;
    return j;
}

BackendConfig BackendConfig::from_json(const json& j) {
    BackendConfig cfg;
    std::string kind = j.value("kind", std::string("scripted"));
    if (kind == "http")
        cfg.kind = Kind::http;
    else if (kind == "scripted")
        cfg.kind = Kind::scripted;
    else
        throw ConfigError("unknown backend kind: '" + kind + "'");
    cfg.endpoint = j.value("endpoint", std::string());
    cfg.model_name = j.value("model_name", std::string("scripted"));
    cfg.auth_ref = j.value("auth_ref", std::string());
    cfg.timeout_ms = j.value("timeout_ms", 60000);
    cfg.max_attempts = j.value("max_attempts", 3);
    cfg.base_backoff_ms = j.value("base_backoff_ms", 250);
    cfg.parallelism = j.value("parallelism", 4);
    if (j.contains("system_prompt") && !j["system_prompt"].is_null())
        cfg.system_prompt = j["system_prompt"].get<std::string>();
    if (j.contains("fixtures_path")) cfg.fixtures_path = j["fixtures_path"].get<std::string>();
    cfg.deterministic_time = j.value("deterministic_time", cfg.kind == Kind::scripted);
    cfg.validate();
    return cfg;
}

json Transcript::to_json() const {
    json j;
    j["run_id"] = run_id;
    j["task_id"] = task_id;
    j["instance_id"] = instance_id;
    j["strategy"] = to_string(strategy);
    j["sample_index"] = sample_index;
    j["prompt_hash"] = prompt_hash;
    j["model_name"] = model_name;
    j["temperature"] = decoding.temperature;
    j["sample_count"] = decoding.sample_count;
    j["max_tokens"] = decoding.max_tokens;
    j["raw_text"] = raw_text;
    j["latency_ms"] = latency_ms;
    j["created_at"] = created_at;
    return j;
}

Transcript Transcript::from_json(const json& j) {
    Transcript t;
    t.run_id = j.value("run_id", std::string());
    t.task_id = j.value("task_id", std::string());
    t.instance_id = j.at("instance_id").get<std::string>();
    t.strategy = strategy_from_string(j.at("strategy").get<std::string>());
    t.sample_index = j.at("sample_index").get<int>();
    t.prompt_hash = j.at("prompt_hash").get<std::string>();
    t.model_name = j.value("model_name", std::string());
    t.decoding.temperature = j.value("temperature", 0.0);
    t.decoding.sample_count = j.value("sample_count", 1);
    t.decoding.max_tokens = j.value("max_tokens", 1024);
    t.raw_text = j.at("raw_text").get<std::string>();
    t.latency_ms = j.value("latency_ms", 0L);
    t.created_at = j.value("created_at", std::string());
    return t;
}

std::string CacheKey::filename() const {
    long milli = std::lround(temperature * 1000.0);
    return prompt_hash + "_t" + std::to_string(milli) + "_m" + std::to_string(max_tokens) + "_s" +
           std::to_string(sample_index) + ".json";
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open fixtures file: " + path.string());
    Fixtures fixtures;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw MalformedRecord(path.filename().string() + ":" + std::to_string(line_no) +
                                  ": " + e.what());
        }
        fixtures[{j.at("prompt_hash").get<std::string>(), j.value("sample_index", 0)}] =
            j.at("text").get<std::string>();
    }
    return std::make_shared<ScriptedBackend>(std::move(fixtures));
}

std::string ScriptedBackend::complete(const PromptBundle& bundle, int sample_index) {
    auto it = fixtures_.find({bundle.prompt_hash, sample_index});
    if (it == fixtures_.end())
        throw FixtureMiss("no fixture for prompt_hash=" + bundle.prompt_hash +
                          " sample_index=" + std::to_string(sample_index));
    return it->second;
}

std::shared_ptr<Backend> make_backend(const BackendConfig& cfg) {
    cfg.validate();
    if (cfg.kind == BackendConfig::Kind::http) return std::make_shared<HttpBackend>(cfg);
    if (cfg.fixtures_path.empty())
        throw ConfigError("scripted backend requires fixtures_path");
    return ScriptedBackend::from_file(cfg.fixtures_path);
}

std::filesystem::path DiskCache::path_for(const CacheKey& key) const {
    return root_ / sanitize_component(key.model_name) / key.prompt_hash.substr(0, 2) /
           key.filename();
}

std::optional<DiskCache::Entry> DiskCache::get(const CacheKey& key) const {
    std::ifstream in(path_for(key));
    if (!in) return std::nullopt;
    json j;
    try {
        in >> j;
    } catch (const json::exception&) {
        return std::nullopt;  // torn write; treat as miss and rewrite
    }
    if (j.value("prompt_hash", std::string()) != key.prompt_hash) return std::nullopt;
    return Entry{j.at("raw_text").get<std::string>(), j.value("created_at", std::string())};
}

void DiskCache::put(const CacheKey& key, const std::string& raw_text,
                    const std::string& created_at) {
    auto path = path_for(key);
    std::filesystem::create_directories(path.parent_path());
    json j;
    j["model_name"] = key.model_name;
    j["prompt_hash"] = key.prompt_hash;
    j["temperature"] = key.temperature;
    j["max_tokens"] = key.max_tokens;
    j["sample_index"] = key.sample_index;
    j["raw_text"] = raw_text;
    j["created_at"] = created_at;
    // tmp + rename keeps concurrent writers safe; identical content makes
    // last-write-wins harmless
    auto tmp = path;
    tmp += ".tmp" + std::to_string(
                        std::hash<std::thread::id>{}(std::this_thread::get_id()) % 100000);
    std::ofstream out(tmp, std::ios::trunc);
    out << j.dump();
    out.close();
    std::filesystem::rename(tmp, path);
}

struct Gateway::Impl {
    explicit Impl(int parallelism) : semaphore(parallelism) {}
    std::counting_semaphore<4096> semaphore;
    std::mutex rng_mutex;
    std::mt19937 rng{std::random_device{}()};
};

Gateway::Gateway(BackendConfig cfg, std::shared_ptr<Backend> backend,
                 std::optional<std::filesystem::path> cache_dir)
    : cfg_(std::move(cfg)), backend_(std::move(backend)) {
    cfg_.validate();
    if (cache_dir) cache_.emplace(*cache_dir);
    impl_ = std::make_shared<Impl>(cfg_.parallelism);
}

std::string Gateway::call_with_retries(const PromptBundle& bundle, int sample_index) {
    for (int attempt = 1;; ++attempt) {
        try {
            ++calls_;
            return backend_->complete(bundle, sample_index);
        } catch (...) {
            std::exception_ptr ep = std::current_exception();
            if (attempt >= cfg_.max_attempts || !is_retryable(ep)) std::rethrow_exception(ep);
            double jitter;
            {
                std::lock_guard<std::mutex> lock(impl_->rng_mutex);
                jitter = std::uniform_real_distribution<double>(0.0, 1.0)(impl_->rng);
            }
            long delay = static_cast<long>(cfg_.base_backoff_ms * (1L << std::min(attempt - 1, 16)) *
                                           jitter);
            std::this_thread::sleep_for(std::chrono::milliseconds(delay));
        }
    }
}

Transcript Gateway::complete(const PromptBundle& bundle, int sample_index,
                             const CallContext& ctx) {
    if (sample_index < 0 || sample_index >= bundle.decoding.sample_count)
        throw ConfigError("sample_index " + std::to_string(sample_index) + " out of range for " +
                          std::to_string(bundle.decoding.sample_count) + " samples");
    Transcript t;
    t.run_id = ctx.run_id;
    t.task_id = ctx.task_id;
    t.instance_id = ctx.instance_id;
    t.strategy = ctx.strategy;
    t.sample_index = sample_index;
    t.prompt_hash = bundle.prompt_hash;
    t.model_name = cfg_.model_name;
    t.decoding = bundle.decoding;

    CacheKey key{cfg_.model_name, bundle.prompt_hash, bundle.decoding.temperature,
                 bundle.decoding.max_tokens, sample_index};
    if (cache_) {
        if (auto hit = cache_->get(key)) {
            t.raw_text = hit->raw_text;
            t.created_at = hit->created_at;
            t.latency_ms = 0;
            t.from_cache = true;
            return t;
        }
    }

    impl_->semaphore.acquire();
    auto started = std::chrono::steady_clock::now();
    std::string text;
    try {
        text = call_with_retries(bundle, sample_index);
    } catch (...) {
        impl_->semaphore.release();
        throw;
    }
    impl_->semaphore.release();

    t.raw_text = std::move(text);
    t.created_at = cfg_.deterministic_time ? kEpochTimestamp : iso8601_now();
    t.latency_ms = cfg_.deterministic_time
                       ? 0
                       : std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::steady_clock::now() - started)
                             .count();
    t.from_cache = false;
    if (cache_) cache_->put(key, t.raw_text, t.created_at);
    return t;
}

std::vector<Transcript> Gateway::complete_samples(const PromptBundle& bundle,
                                                  const CallContext& ctx) {
    int n = bundle.decoding.sample_count;
    std::vector<std::future<Transcript>> futures;
    futures.reserve(n);
    for (int i = 0; i < n; ++i)
        futures.push_back(std::async(std::launch::async,
                                     [this, &bundle, &ctx, i] { return complete(bundle, i, ctx); }));

    std::vector<std::optional<Transcript>> results(n);
    std::optional<std::pair<int, std::string>> first_error;
    for (int i = 0; i < n; ++i) {
        try {
            results[i] = futures[i].get();
        } catch (const std::exception& e) {
            if (!first_error) first_error = {i, e.what()};
        }
    }
    // Everything has joined; successful samples are already in the cache.
    if (first_error) throw SampleError(first_error->first, first_error->second);
    std::vector<Transcript> out;
    out.reserve(n);
    for (auto& r : results) out.push_back(std::move(*r));
    return out;
}

}  // namespace mpeval
