#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mpeval/analysis.hpp"
#include "mpeval/backend.hpp"
#include "mpeval/catalog.hpp"
#include "mpeval/dataset.hpp"
#include "mpeval/parser.hpp"
#include "mpeval/prompt.hpp"
#include "mpeval/scoring.hpp"

namespace mpeval {

struct RunConfig {
    std::string run_id;
    std::string task_id;
    Strategy strategy = Strategy::mp;
    BackendConfig backend;
    int shots = -1;  // -1 = strategy default (0 zero-shot, 5 few-shot)
    size_t eval_n = 600;
    uint64_t seed = 0;
    uint64_t exemplar_seed = 0;
    std::filesystem::path output_dir;
    ParseFailureMode parse_failure_mode = ParseFailureMode::count_wrong;
    DecodingOverrides overrides;

    std::filesystem::path dataset_path;
    DatasetFormat dataset_format = DatasetFormat::jsonl;
    std::string split = "validation";
    std::optional<std::filesystem::path> train_path;  // few-shot exemplar pool
    DatasetFormat train_format = DatasetFormat::jsonl;
    std::optional<std::filesystem::path> answers_path;  // worked answers JSONL
    std::filesystem::path templates_dir = "templates";
    std::optional<std::filesystem::path> task_file;  // overrides the built-in spec
    std::optional<std::filesystem::path> cache_dir;  // default: <output_dir>/cache

    int effective_shots() const;
    void validate() const;
    // Portable serialization; output_dir is implied by the manifest location
    // and never participates in the digest.
    json to_json() const;
    static RunConfig from_json(const json& j, std::filesystem::path output_dir);
    static RunConfig from_file(const std::filesystem::path& path);
};

struct RunManifest {
    std::string run_id;
    std::string status;  // running | complete | failed
    RunConfig config;
    std::string config_digest;
    std::string catalog_digest;
    std::map<std::string, std::string> template_digests;
    std::string started_at;
    std::string finished_at;
    std::vector<std::string> subset_ids;        // evaluation order
    std::map<std::string, int> progress;        // instance_id -> completed samples
    std::map<std::string, std::string> errors;  // instance_id -> failure message

    json to_json() const;
    static RunManifest from_json(const json& j, std::filesystem::path output_dir);
};

// Full pipeline: load -> sample subset -> (few-shot: exemplars) -> render ->
// complete -> parse -> (sampled: vote) -> score. Artifacts land under
// config.output_dir as manifest.json, transcripts.jsonl, parsed.jsonl,
// predictions.jsonl, scores.json. Failures leave a resumable manifest.
RunManifest run_eval(const RunConfig& config);

// Completes only the missing instance cells of a running/failed run;
// persisted artifacts are left untouched and re-verified.
RunManifest resume(const std::filesystem::path& output_dir);

RunManifest read_manifest(const std::filesystem::path& output_dir);

// Re-scores a completed run from its persisted predictions.
ScoreReport rescore(const std::filesystem::path& output_dir, ParseFailureMode mode,
                    bool rewrite = false);

// Validates and appends error annotations (category vocabulary; instance must
// be an incorrect prediction of the run). Returns the number ingested.
int annotate_run(const std::filesystem::path& output_dir,
                 const std::filesystem::path& annotations_file);

struct ReportOptions {
    std::string mode;  // table2 | table3 | fig3 | calibration | errors
    std::filesystem::path out_dir;
    bool select_best = false;
    std::string select_metric;  // default: first metric of each task
    int shots = 0;              // table3: which shot setting to average
    double threshold = 75.0;    // calibration
    bool macro_calibration = false;
};

// Emits the mode's TSV/JSON artifacts into out_dir; returns written paths.
std::vector<std::filesystem::path> write_report(const std::vector<std::filesystem::path>& run_dirs,
                                                const ReportOptions& options);

// Loads scores.json from completed run dirs, applying --select best.
std::vector<ScoreReport> collect_scores(const std::vector<std::filesystem::path>& run_dirs,
                                        bool select_best, const std::string& select_metric);

}  // namespace mpeval
