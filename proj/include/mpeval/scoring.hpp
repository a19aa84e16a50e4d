#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mpeval/parser.hpp"
#include "mpeval/task.hpp"

namespace mpeval {

enum class ParseFailureMode { count_wrong, exclude };
std::string to_string(ParseFailureMode m);
ParseFailureMode parse_failure_mode_from_string(const std::string& s);

struct Prediction {
    std::string instance_id;
    std::vector<std::string> labels;  // empty iff parse_failure
    std::optional<double> confidence;
    std::optional<std::map<std::string, int>> vote_detail;  // label -> sample count
    bool parse_failure = false;
};

// Gold labels aligned by instance_id.
using GoldMap = std::map<std::string, std::vector<std::string>>;

// Majority vote over one instance's parsed samples. Single-label: modal label,
// ties broken by the lexicographically smallest canonical label. Multi-label:
// per-label majority. Tag-sequence: per-position mode. Confidence is the mean
// of available confidences. Throws NoParsableSamples when nothing parsed.
Prediction majority_vote(const std::vector<ParsedResponse>& samples, const TaskSpec& spec);

// Wraps a single greedy sample as a Prediction (or a failure placeholder).
Prediction prediction_from_sample(const ParsedResponse& sample);

// All metric functions return an unrounded percent in [0, 100]; parse-failure
// placeholders count as wrong (FN for their gold labels). Alignment is by
// instance_id; mismatched id sets raise AlignmentError.
double accuracy(const std::vector<Prediction>& preds, const GoldMap& golds);
double f1_binary(const std::vector<Prediction>& preds, const GoldMap& golds,
                 const std::string& positive_label);
double micro_f1(const std::vector<Prediction>& preds, const GoldMap& golds,
                const LabelSpace& space);
// full_space: absent labels contribute F1 = 0 (report default); the
// present-labels variant is a secondary diagnostic.
double macro_f1(const std::vector<Prediction>& preds, const GoldMap& golds,
                const LabelSpace& space, bool full_space = true);
double bio_micro_f1(const std::vector<Prediction>& preds, const GoldMap& golds);

struct ScoreCounts {
    int scored = 0;
    int parse_failures = 0;
    int excluded = 0;
};

struct MetricValue {
    std::string metric;
    double value = 0.0;
    bool operator==(const MetricValue&) const = default;
};

struct ScoreReport {
    std::string task_id;
    std::string strategy;
    std::string model_name;
    int shots = 0;
    std::vector<MetricValue> values;  // ordered exactly as TaskSpec.metrics
    ScoreCounts counts;
    double lenient_fraction = 0.0;
    std::map<std::string, double> diagnostics;  // e.g. macro-f1-present

    std::optional<double> value_of(const std::string& metric) const;
    json to_json() const;
    static ScoreReport from_json(const json& j);
    // table2 report convention: dual metrics joined with '/', one decimal.
    std::string slash_cell() const;
};

// Computes exactly spec.metrics, rounded half-away-from-zero to 1 decimal.
ScoreReport score_run(const std::vector<Prediction>& preds, const GoldMap& golds,
                      const TaskSpec& spec,
                      ParseFailureMode mode = ParseFailureMode::count_wrong);

}  // namespace mpeval
