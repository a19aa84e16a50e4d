#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mpeval/scoring.hpp"

namespace mpeval {

// The redefined confusion matrix over (confidence level, correctness):
// TP = high confidence + correct, FP = high + incorrect,
// TN = low + incorrect, FN = low + correct.
struct CalibrationMatrix {
    long tp = 0, fp = 0, tn = 0, fn = 0;
    double tp_pct = 0, fp_pct = 0, tn_pct = 0, fn_pct = 0;  // of classified items
    double threshold = 75.0;
    long unclassified = 0;  // items lacking a verbalized confidence

    long classified() const { return tp + fp + tn + fn; }
    json to_json() const;
};

struct CalItem {
    std::optional<double> confidence;
    bool correct = false;
};

// Confidence >= threshold counts as high (the boundary itself is high).
CalibrationMatrix calibrate(const std::vector<CalItem>& items, double threshold = 75.0);

// Macro variant: percentages computed per group, then averaged; counts pooled.
CalibrationMatrix calibrate_macro(const std::vector<std::vector<CalItem>>& groups,
                                  double threshold = 75.0);

struct AggregateCell {
    std::string task_id;
    std::string strategy;
    int shots = 0;
    std::vector<MetricValue> values;  // means over models, 1 decimal
    int model_count = 0;
};

struct AggregateTable {
    std::vector<AggregateCell> rows;
    std::vector<std::string> models;
};

// Unweighted arithmetic mean per (task, strategy, shots, metric) over models,
// rounded to 1 decimal. Every group must cover the same model set and metric
// keys; otherwise InconsistentGroup.
AggregateTable average_across_models(const std::vector<ScoreReport>& reports);

// 100 * (a - b) / b. Inputs are strategy aggregates (see strategy_average).
double relative_improvement(double avg_a, double avg_b);

// One model x strategy aggregate: the unweighted mean of every metric value
// of every dataset (14 values over the built-in catalog), rounded to 1
// decimal -- the fig3 report's bar height.
double strategy_average(const std::vector<ScoreReport>& reports_one_model_strategy);

// Controlled error-category vocabulary.
const std::vector<std::string>& error_categories();
bool is_error_category(const std::string& s);

struct ErrorAnnotation {
    std::string instance_id;
    std::string run_id;
    std::string category;  // from error_categories()
    std::string note;

    json to_json() const;
    static ErrorAnnotation from_json(const json& j);
};

// Named category partitions: general, biomedical, legal.
const std::map<std::string, std::vector<std::string>>& error_partitions();

// Percentage per category over annotations in the partition, 1 decimal.
std::map<std::string, double> error_distribution(const std::vector<ErrorAnnotation>& annotations,
                                                 const std::vector<std::string>& partition);

}  // namespace mpeval
