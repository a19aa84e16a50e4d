#include "mpeval/run.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <fstream>
#include <set>

#include "mpeval/errors.hpp"
#include "mpeval/jsonl.hpp"
#include "mpeval/text.hpp"

namespace mpeval {

namespace fs = std::filesystem;

namespace {

constexpr const char* kManifestFile = "manifest.json";
constexpr const char* kTranscriptsFile = "transcripts.jsonl";
constexpr const char* kParsedFile = "parsed.jsonl";
constexpr const char* kPredictionsFile = "predictions.jsonl";
constexpr const char* kScoresFile = "scores.json";
constexpr const char* kLockFile = ".lock";

// One orchestrator process per run directory.
class DirLock {
  public:
    explicit DirLock(const fs::path& dir) : path_(dir / kLockFile) {
        fs::create_directories(dir);
        int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd < 0)
            throw ConfigError("run directory is locked: " + path_.string() +
                              " exists (stale lock? remove it to proceed)");
        ::close(fd);
    }
    ~DirLock() { std::error_code ec; fs::remove(path_, ec); }

  private:
    fs::path path_;
};

json prediction_to_json(const Prediction& p, const std::vector<std::string>& gold, bool correct,
                        const std::string& run_id, const std::string& config_digest) {
    json j;
    j["run_id"] = run_id;
    j["config_digest"] = config_digest;
    j["instance_id"] = p.instance_id;
    j["labels"] = p.labels;
    j["gold"] = gold;
    j["correct"] = correct;
    if (p.confidence)
        j["confidence"] = *p.confidence;
    else
        j["confidence"] = nullptr;
    j["parse_failure"] = p.parse_failure;
    if (p.vote_detail)
        j["vote_detail"] = *p.vote_detail;
    else
        j["vote_detail"] = nullptr;
    return j;
}

json parsed_to_json(const ParsedResponse& r, const std::string& run_id,
                    const std::string& config_digest) {
    json j;
    j["run_id"] = run_id;
    j["config_digest"] = config_digest;
    j["instance_id"] = r.instance_id;
    j["sample_index"] = r.sample_index;
    j["labels"] = r.labels;
    if (r.confidence)
        j["confidence"] = *r.confidence;
    else
        j["confidence"] = nullptr;
    if (r.stages)
        j["stages"] = *r.stages;
    else
        j["stages"] = nullptr;
    j["parse_mode"] = to_string(r.parse_mode);
    if (r.error)
        j["error"] = *r.error;
    else
        j["error"] = nullptr;
    j["dropped_labels"] = r.dropped_labels;
    return j;
}

Prediction prediction_from_line(const nlohmann::ordered_json& j) {
    Prediction p;
    p.instance_id = j.at("instance_id").get<std::string>();
    p.labels = j.at("labels").get<std::vector<std::string>>();
    if (!j.at("confidence").is_null()) p.confidence = j["confidence"].get<double>();
    p.parse_failure = j.value("parse_failure", false);
    if (j.contains("vote_detail") && !j["vote_detail"].is_null())
        p.vote_detail = j["vote_detail"].get<std::map<std::string, int>>();
    return p;
}

struct PreparedRun {
    TaskSpec spec;
    std::vector<TaskSpec> all_specs;
    TemplateRegistry registry;
    std::vector<Instance> subset;
    std::optional<ExemplarSet> exemplars;
    std::string config_digest;
    std::string catalog_digest_value;
};

PreparedRun prepare(const RunConfig& cfg) {
    PreparedRun prep;
    prep.all_specs = builtin_catalog();
    if (cfg.task_file) {
        TaskSpec custom = load_task_spec(*cfg.task_file);
        bool replaced = false;
        for (auto& s : prep.all_specs) {
            if (s.task_id == custom.task_id) {
                s = custom;
                replaced = true;
            }
        }
        if (!replaced) prep.all_specs.push_back(custom);
    }
    const TaskSpec* found = nullptr;
    for (const auto& s : prep.all_specs)
        if (s.task_id == cfg.task_id) found = &s;
    if (!found) throw ConfigError("unknown task '" + cfg.task_id + "'");
    prep.spec = *found;

    prep.registry = TemplateRegistry::load_dir(cfg.templates_dir, prep.all_specs);
    // Fail fast before any backend call.
    if (!prep.registry.has(cfg.task_id, cfg.strategy))
        throw MissingTemplate("no template for " + cfg.task_id + " x " + to_string(cfg.strategy));

    auto instances = load_dataset(cfg.dataset_path, cfg.dataset_format, prep.spec, cfg.split);
    prep.subset = sample_eval_subset(instances, cfg.eval_n, cfg.seed);

    if (is_few_shot(cfg.strategy)) {
        if (!cfg.train_path || !cfg.answers_path)
            throw ConfigError("few-shot strategy requires train_path and answers_path");
        auto train = load_dataset(*cfg.train_path, cfg.train_format, prep.spec, "train");
        auto answers = read_worked_answers(*cfg.answers_path);
        prep.exemplars = select_exemplars(prep.spec, train, cfg.effective_shots(),
                                          cfg.exemplar_seed, answers);
    }

    prep.config_digest = sha256_hex(cfg.to_json().dump());
    prep.catalog_digest_value = catalog_digest(prep.all_specs);
    return prep;
}

// Appends one instance's rows and flushes before the manifest marks it done.
struct ArtifactWriter {
    std::ofstream transcripts, parsed, predictions;

    explicit ArtifactWriter(const fs::path& dir)
        : transcripts(dir / kTranscriptsFile, std::ios::app),
          parsed(dir / kParsedFile, std::ios::app),
          predictions(dir / kPredictionsFile, std::ios::app) {
        if (!transcripts || !parsed || !predictions)
            throw Error("cannot open artifact files under " + dir.string());
    }
};

void write_manifest(const fs::path& dir, const RunManifest& m) {
    atomic_write_file(dir / kManifestFile, m.to_json().dump(1) + "\n");
}

// Re-verifies persisted rows against the manifest before resuming.
void verify_existing_artifacts(const fs::path& dir, const RunManifest& manifest) {
    size_t expected = 0;
    for (const auto& [id, n] : manifest.progress) expected += static_cast<size_t>(n);
    if (!fs::exists(dir / kTranscriptsFile)) {
        if (expected != 0) throw DigestMismatch("transcripts.jsonl missing but progress nonempty");
        return;
    }
    auto lines = read_jsonl(dir / kTranscriptsFile);
    if (lines.size() != expected)
        throw DigestMismatch("transcripts.jsonl has " + std::to_string(lines.size()) +
                             " rows, manifest expects " + std::to_string(expected));
    for (const auto& line : lines) {
        if (line.value("run_id", std::string()) != manifest.run_id ||
            line.value("config_digest", std::string()) != manifest.config_digest)
            throw DigestMismatch("persisted transcript does not match the manifest");
    }
}

RunManifest execute(RunConfig cfg, RunManifest manifest, const PreparedRun& prep, bool resuming) {
    const fs::path dir = cfg.output_dir;
    DirLock lock(dir);

    bool deterministic = cfg.backend.deterministic_time;
    manifest.status = "running";
    if (manifest.started_at.empty())
        manifest.started_at = deterministic ? kEpochTimestamp : iso8601_now();
    write_manifest(dir, manifest);

    Gateway gateway(cfg.backend, make_backend(cfg.backend),
                    cfg.cache_dir.value_or(dir / "cache"));

    // Commit order is subset order, so progress is a contiguous prefix and a
    // resumed directory ends up byte-identical to an uninterrupted one.
    size_t start = 0;
    while (start < prep.subset.size() &&
           manifest.progress.count(prep.subset[start].instance_id))
        ++start;

    std::vector<Prediction> predictions;
    GoldMap golds;
    long lenient = 0, parsed_total = 0;

    if (resuming && start > 0) {
        auto parsed_lines = read_jsonl(dir / kParsedFile);
        for (const auto& line : parsed_lines) {
            ++parsed_total;
            if (line.value("parse_mode", std::string()) == "lenient") ++lenient;
        }
        for (const auto& line : read_jsonl(dir / kPredictionsFile))
            predictions.push_back(prediction_from_line(line));
        if (predictions.size() != start)
            throw DigestMismatch("predictions.jsonl has " + std::to_string(predictions.size()) +
                                 " rows, manifest expects " + std::to_string(start));
    }
    for (size_t i = 0; i < start; ++i)
        golds[prep.subset[i].instance_id] = prep.subset[i].gold;

    ArtifactWriter out(dir);

    for (size_t i = start; i < prep.subset.size(); ++i) {
        const Instance& inst = prep.subset[i];
        try {
            PromptBundle bundle =
                is_few_shot(cfg.strategy)
                    ? render_few_shot(prep.registry, cfg.strategy, prep.spec, inst,
                                      *prep.exemplars, cfg.effective_shots(), cfg.overrides)
                    : render_zero_shot(prep.registry, cfg.strategy, prep.spec, inst,
                                       cfg.overrides);
            CallContext ctx{cfg.run_id, cfg.task_id, inst.instance_id, cfg.strategy};
            std::vector<Transcript> transcripts = gateway.complete_samples(bundle, ctx);

            std::vector<ParsedResponse> parses;
            parses.reserve(transcripts.size());
            for (const auto& t : transcripts)
                parses.push_back(parse_response(t.raw_text, prep.spec, inst, t.sample_index));

            Prediction pred;
            if (bundle.decoding.sample_count > 1) {
                try {
                    pred = majority_vote(parses, prep.spec);
                } catch (const NoParsableSamples&) {
                    pred.instance_id = inst.instance_id;
                    pred.parse_failure = true;
                }
            } else {
                pred = prediction_from_sample(parses.front());
            }
            bool correct = !pred.parse_failure && pred.labels == inst.gold;

            for (const auto& t : transcripts) {
                json line = t.to_json();
                line["config_digest"] = manifest.config_digest;
                out.transcripts << line.dump() << "\n";
            }
            for (const auto& p : parses) {
                out.parsed << parsed_to_json(p, cfg.run_id, manifest.config_digest).dump() << "\n";
                ++parsed_total;
                if (p.parse_mode == ParseMode::lenient) ++lenient;
            }
            out.predictions << prediction_to_json(pred, inst.gold, correct, cfg.run_id,
                                                  manifest.config_digest)
                                   .dump()
                            << "\n";
            out.transcripts.flush();
            out.parsed.flush();
            out.predictions.flush();

            predictions.push_back(std::move(pred));
            golds[inst.instance_id] = inst.gold;
            manifest.progress[inst.instance_id] = bundle.decoding.sample_count;
            manifest.errors.erase(inst.instance_id);
            write_manifest(dir, manifest);
        } catch (const std::exception& e) {
            manifest.errors[inst.instance_id] = e.what();
            manifest.status = "failed";
            manifest.finished_at = deterministic ? kEpochTimestamp : iso8601_now();
            write_manifest(dir, manifest);
            throw;
        }
    }

    ScoreReport report = score_run(predictions, golds, prep.spec, cfg.parse_failure_mode);
    report.strategy = to_string(cfg.strategy);
    report.model_name = cfg.backend.model_name;
    report.shots = cfg.effective_shots();
    report.lenient_fraction =
        parsed_total == 0 ? 0.0 : static_cast<double>(lenient) / parsed_total;
    json scores = report.to_json();
    scores["run_id"] = cfg.run_id;
    scores["config_digest"] = manifest.config_digest;
    // Both parse-failure accounting modes are reported side by side.
    ParseFailureMode alt = cfg.parse_failure_mode == ParseFailureMode::count_wrong
                               ? ParseFailureMode::exclude
                               : ParseFailureMode::count_wrong;
    if (report.counts.parse_failures > 0 &&
        !(alt == ParseFailureMode::exclude &&
          report.counts.parse_failures == static_cast<int>(predictions.size()))) {
        ScoreReport alt_report = score_run(predictions, golds, prep.spec, alt);
        json alt_values = json::array();
        for (const auto& v : alt_report.values)
            alt_values.push_back({{"metric", v.metric}, {"value", v.value}});
        scores["alternate"] = {{"parse_failure_mode", to_string(alt)}, {"values", alt_values}};
    }
    atomic_write_file(dir / kScoresFile, scores.dump(1) + "\n");

    manifest.status = "complete";
    manifest.finished_at = deterministic ? kEpochTimestamp : iso8601_now();
    write_manifest(dir, manifest);
    return manifest;
}

}  // namespace

int RunConfig::effective_shots() const {
    if (shots >= 0) return shots;
    return is_few_shot(strategy) ? 5 : 0;
}

void RunConfig::validate() const {
    if (run_id.empty()) throw ConfigError("run_id empty");
    if (task_id.empty()) throw ConfigError("task_id empty");
    if (eval_n < 1) throw ConfigError("eval_n must be >= 1");
    if (output_dir.empty()) throw ConfigError("output_dir empty");
    if (dataset_path.empty()) throw ConfigError("dataset_path empty");
    if (is_zero_shot(strategy) && effective_shots() != 0)
        throw ConfigError("zero-shot strategy " + to_string(strategy) + " requires shots = 0");
    if (is_few_shot(strategy) && effective_shots() < 1)
        throw ConfigError("few-shot strategy " + to_string(strategy) + " requires shots >= 1");
    backend.validate();
    decoding_params_for(strategy, overrides);  // throws InvalidOverride
}

json RunConfig::to_json() const {
    json j;
    j["run_id"] = run_id;
    j["task_id"] = task_id;
    j["strategy"] = to_string(strategy);
    j["backend"] = backend.to_json();
    j["shots"] = effective_shots();
    j["eval_n"] = eval_n;
    j["seed"] = seed;
    j["exemplar_seed"] = exemplar_seed;
    j["parse_failure_mode"] = to_string(parse_failure_mode);
    json ov;
    if (overrides.temperature) ov["temperature"] = *overrides.temperature;
    if (overrides.sample_count) ov["sample_count"] = *overrides.sample_count;
    if (overrides.max_tokens) ov["max_tokens"] = *overrides.max_tokens;
    j["overrides"] = ov;
    j["dataset"] = {{"path", dataset_path.string()},
                    {"format", to_string(dataset_format)},
                    {"split", split}};
    if (train_path) {
        j["exemplar_pool"] = {{"path", train_path->string()},
                              {"format", to_string(train_format)},
                              {"answers", answers_path ? answers_path->string() : ""}};
    }
    j["templates_dir"] = templates_dir.string();
    if (task_file) j["task_file"] = task_file->string();
    if (cache_dir) j["cache_dir"] = cache_dir->string();
    return j;
}

RunConfig RunConfig::from_json(const json& j, fs::path output_dir) {
    RunConfig cfg;
    cfg.run_id = j.at("run_id").get<std::string>();
    cfg.task_id = j.at("task_id").get<std::string>();
    cfg.strategy = strategy_from_string(j.at("strategy").get<std::string>());
    cfg.backend = BackendConfig::from_json(j.at("backend"));
    cfg.shots = j.value("shots", -1);
    cfg.eval_n = j.value("eval_n", 600);
    cfg.seed = j.value("seed", 0ULL);
    cfg.exemplar_seed = j.value("exemplar_seed", 0ULL);
    cfg.output_dir = std::move(output_dir);
    cfg.parse_failure_mode =
        parse_failure_mode_from_string(j.value("parse_failure_mode", std::string("count-wrong")));
    if (j.contains("overrides")) {
        const json& ov = j["overrides"];
        if (ov.contains("temperature")) cfg.overrides.temperature = ov["temperature"].get<double>();
        if (ov.contains("sample_count")) cfg.overrides.sample_count = ov["sample_count"].get<int>();
        if (ov.contains("max_tokens")) cfg.overrides.max_tokens = ov["max_tokens"].get<int>();
    }
    const json& ds = j.at("dataset");
    cfg.dataset_path = ds.at("path").get<std::string>();
    cfg.dataset_format = dataset_format_from_string(ds.value("format", std::string("jsonl")));
    cfg.split = ds.value("split", std::string("validation"));
    if (j.contains("exemplar_pool")) {
        const json& ep = j["exemplar_pool"];
        cfg.train_path = fs::path(ep.at("path").get<std::string>());
        cfg.train_format = dataset_format_from_string(ep.value("format", std::string("jsonl")));
        std::string answers = ep.value("answers", std::string());
        if (!answers.empty()) cfg.answers_path = fs::path(answers);
    }
    cfg.templates_dir = j.value("templates_dir", std::string("templates"));
    if (j.contains("task_file")) cfg.task_file = fs::path(j["task_file"].get<std::string>());
    if (j.contains("cache_dir")) cfg.cache_dir = fs::path(j["cache_dir"].get<std::string>());
    return cfg;
}

RunConfig RunConfig::from_file(const fs::path& path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
    std::string out = j.value("output_dir", std::string());
    return from_json(j, out);
}

json RunManifest::to_json() const {
    json j;
    j["run_id"] = run_id;
    j["status"] = status;
    j["config"] = config.to_json();
    j["config_digest"] = config_digest;
    j["catalog_digest"] = catalog_digest;
    j["template_digests"] = template_digests;
    j["started_at"] = started_at;
    j["finished_at"] = finished_at;
    j["subset_ids"] = subset_ids;
    j["progress"] = progress;
    j["errors"] = errors;
    return j;
}

RunManifest RunManifest::from_json(const json& j, fs::path output_dir) {
    RunManifest m;
    m.run_id = j.at("run_id").get<std::string>();
    m.status = j.at("status").get<std::string>();
    m.config = RunConfig::from_json(j.at("config"), std::move(output_dir));
    m.config_digest = j.at("config_digest").get<std::string>();
    m.catalog_digest = j.at("catalog_digest").get<std::string>();
    m.template_digests = j.at("template_digests").get<std::map<std::string, std::string>>();
    m.started_at = j.value("started_at", std::string());
    m.finished_at = j.value("finished_at", std::string());
    m.subset_ids = j.at("subset_ids").get<std::vector<std::string>>();
    m.progress = j.at("progress").get<std::map<std::string, int>>();
    m.errors = j.value("errors", std::map<std::string, std::string>());
    return m;
}

RunManifest read_manifest(const fs::path& output_dir) {
    fs::path path = output_dir / kManifestFile;
    if (!fs::exists(path)) throw ManifestMissing("no manifest at " + path.string());
    return RunManifest::from_json(json::parse(read_text_file(path)), output_dir);
}

RunManifest run_eval(const RunConfig& config) {
    RunConfig cfg = config;
    cfg.validate();
    if (fs::exists(cfg.output_dir / kManifestFile))
        throw ConfigError("manifest already exists in " + cfg.output_dir.string() +
                          "; use resume");
    if (fs::exists(cfg.output_dir / kTranscriptsFile))
        throw ConfigError("stale artifacts in " + cfg.output_dir.string() +
                          " (no manifest); refusing to append");

    PreparedRun prep = prepare(cfg);
    RunManifest manifest;
    manifest.run_id = cfg.run_id;
    manifest.config = cfg;
    manifest.config_digest = prep.config_digest;
    manifest.catalog_digest = prep.catalog_digest_value;
    manifest.template_digests = prep.registry.file_digests();
    for (const auto& inst : prep.subset) manifest.subset_ids.push_back(inst.instance_id);
    return execute(cfg, std::move(manifest), prep, false);
}

RunManifest resume(const fs::path& output_dir) {
    RunManifest manifest = read_manifest(output_dir);
    RunConfig cfg = manifest.config;
    cfg.validate();

    PreparedRun prep = prepare(cfg);
    if (prep.config_digest != manifest.config_digest)
        throw DigestMismatch("config digest changed since the original run");
    if (prep.catalog_digest_value != manifest.catalog_digest)
        throw DigestMismatch("task catalog changed since the original run");
    if (prep.registry.file_digests() != manifest.template_digests)
        throw DigestMismatch("template files changed since the original run");
    std::vector<std::string> subset_ids;
    for (const auto& inst : prep.subset) subset_ids.push_back(inst.instance_id);
    if (subset_ids != manifest.subset_ids)
        throw DigestMismatch("evaluation subset changed since the original run");

    if (manifest.status == "complete") {
        verify_existing_artifacts(output_dir, manifest);
        return manifest;  // no-op
    }
    verify_existing_artifacts(output_dir, manifest);
    return execute(cfg, std::move(manifest), prep, true);
}

ScoreReport rescore(const fs::path& output_dir, ParseFailureMode mode, bool rewrite) {
    RunManifest manifest = read_manifest(output_dir);
    if (manifest.status != "complete")
        throw IncompleteRun("run " + manifest.run_id + " is " + manifest.status);
    std::vector<TaskSpec> specs = builtin_catalog();
    if (manifest.config.task_file) {
        TaskSpec custom = load_task_spec(*manifest.config.task_file);
        bool replaced = false;
        for (auto& s : specs)
            if (s.task_id == custom.task_id) {
                s = custom;
                replaced = true;
            }
        if (!replaced) specs.push_back(custom);
    }
    const TaskSpec* spec = nullptr;
    for (const auto& s : specs)
        if (s.task_id == manifest.config.task_id) spec = &s;
    if (!spec) throw ConfigError("unknown task '" + manifest.config.task_id + "'");

    std::vector<Prediction> preds;
    GoldMap golds;
    for (const auto& line : read_jsonl(output_dir / kPredictionsFile)) {
        preds.push_back(prediction_from_line(line));
        golds[preds.back().instance_id] = line.at("gold").get<std::vector<std::string>>();
    }
    ScoreReport report = score_run(preds, golds, *spec, mode);
    report.strategy = to_string(manifest.config.strategy);
    report.model_name = manifest.config.backend.model_name;
    report.shots = manifest.config.effective_shots();
    if (rewrite) {
        json scores = report.to_json();
        scores["run_id"] = manifest.run_id;
        scores["config_digest"] = manifest.config_digest;
        atomic_write_file(output_dir / kScoresFile, scores.dump(1) + "\n");
    }
    return report;
}

int annotate_run(const fs::path& output_dir, const fs::path& annotations_file) {
    RunManifest manifest = read_manifest(output_dir);
    std::map<std::string, bool> correct_by_id;
    for (const auto& line : read_jsonl(output_dir / kPredictionsFile))
        correct_by_id[line.at("instance_id").get<std::string>()] = line.at("correct").get<bool>();

    std::vector<ErrorAnnotation> validated;
    for (const auto& line : read_jsonl(annotations_file)) {
        ErrorAnnotation a = ErrorAnnotation::from_json(json(line));
        if (a.run_id.empty()) a.run_id = manifest.run_id;
        if (a.run_id != manifest.run_id)
            throw ConfigError("annotation for run '" + a.run_id + "' applied to run '" +
                              manifest.run_id + "'");
        auto it = correct_by_id.find(a.instance_id);
        if (it == correct_by_id.end())
            throw ConfigError("annotation references unknown instance '" + a.instance_id + "'");
        if (it->second)
            throw ConfigError("instance '" + a.instance_id +
                              "' was predicted correctly; only errors can be annotated");
        validated.push_back(std::move(a));
    }
    std::ofstream out(output_dir / "annotations.jsonl", std::ios::app);
    for (const auto& a : validated) out << a.to_json().dump() << "\n";
    return static_cast<int>(validated.size());
}

}  // namespace mpeval
