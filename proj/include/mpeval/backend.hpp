#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mpeval/prompt.hpp"

namespace mpeval {

struct BackendConfig {
    enum class Kind { http, scripted };
    Kind kind = Kind::scripted;
    std::string endpoint;        // http only; full chat-completions URL
    std::string model_name = "scripted";
    std::string auth_ref;        // env var holding the credential; empty = no auth
    int timeout_ms = 60000;
    int max_attempts = 3;
    int base_backoff_ms = 250;
    int parallelism = 4;
    std::optional<std::string> system_prompt;  // default off, per single-message design
    std::filesystem::path fixtures_path;       // scripted only
    // Fixed clock (epoch timestamps, zero latency) so reruns are byte-identical.
    bool deterministic_time = true;

    void validate() const;
    json to_json() const;
    static BackendConfig from_json(const json& j);
};

struct Transcript {
    std::string run_id;
    std::string task_id;
    std::string instance_id;
    Strategy strategy = Strategy::mp;
    int sample_index = 0;
    std::string prompt_hash;
    std::string raw_text;
    std::string model_name;
    DecodingParams decoding;
    long latency_ms = 0;
    std::string created_at;
    bool from_cache = false;

    // from_cache is runtime provenance and intentionally not serialized:
    // replayed and fresh runs must produce identical artifact bytes.
    json to_json() const;
    static Transcript from_json(const json& j);
};

struct CacheKey {
    std::string model_name;
    std::string prompt_hash;
    double temperature = 0.0;
    int max_tokens = 0;
    int sample_index = 0;

    std::string filename() const;  // deterministic; temperature in milli-units
    bool operator==(const CacheKey&) const = default;
};

// Raw completion source. Implementations throw TransportError / TimeoutError /
// AuthError / ProviderError / FixtureMiss.
class Backend {
  public:
    virtual ~Backend() = default;
    virtual std::string complete(const PromptBundle& bundle, int sample_index) = 0;
};

// Deterministic fixture-backed backend; lookups are exact-match on
// (prompt_hash, sample_index).
class ScriptedBackend : public Backend {
  public:
    using Fixtures = std::map<std::pair<std::string, int>, std::string>;
    explicit ScriptedBackend(Fixtures fixtures) : fixtures_(std::move(fixtures)) {}
    // fixtures file: JSONL of {"prompt_hash", "sample_index", "text"}.
    static std::shared_ptr<ScriptedBackend> from_file(const std::filesystem::path& path);
    std::string complete(const PromptBundle& bundle, int sample_index) override;

  private:
    Fixtures fixtures_;
};

std::shared_ptr<Backend> make_backend(const BackendConfig& cfg);

// Content-addressed response cache, one file per key; survives restarts.
class DiskCache {
  public:
    explicit DiskCache(std::filesystem::path root) : root_(std::move(root)) {}

    struct Entry {
        std::string raw_text;
        std::string created_at;
    };
    std::optional<Entry> get(const CacheKey& key) const;
    void put(const CacheKey& key, const std::string& raw_text, const std::string& created_at);
    const std::filesystem::path& root() const { return root_; }

  private:
    std::filesystem::path path_for(const CacheKey& key) const;
    std::filesystem::path root_;
};

struct CallContext {
    std::string run_id;
    std::string task_id;
    std::string instance_id;
    Strategy strategy = Strategy::mp;
};

// Uniform completion interface: cache first, then the backend behind a
// bounded-parallelism semaphore with exponential-backoff retries.
class Gateway {
  public:
    Gateway(BackendConfig cfg, std::shared_ptr<Backend> backend,
            std::optional<std::filesystem::path> cache_dir);

    Transcript complete(const PromptBundle& bundle, int sample_index, const CallContext& ctx);

    // One transcript per sample_index 0..sample_count-1, ordered by index.
    // Successful samples are cached before any per-sample error surfaces
    // (as SampleError naming the index).
    std::vector<Transcript> complete_samples(const PromptBundle& bundle, const CallContext& ctx);

    long backend_calls() const { return calls_.load(); }

  private:
    std::string call_with_retries(const PromptBundle& bundle, int sample_index);

    BackendConfig cfg_;
    std::shared_ptr<Backend> backend_;
    std::optional<DiskCache> cache_;
    std::atomic<long> calls_{0};
    struct Impl;
    std::shared_ptr<Impl> impl_;  // semaphore state
};

}  // namespace mpeval
