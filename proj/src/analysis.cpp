#include "mpeval/analysis.hpp"

#include <algorithm>
#include <set>

#include "mpeval/errors.hpp"
#include "mpeval/text.hpp"

namespace mpeval {

json CalibrationMatrix::to_json() const {
    json j;
    j["tp"] = tp;
    j["fp"] = fp;
    j["tn"] = tn;
    j["fn"] = fn;
    j["tp_pct"] = tp_pct;
    j["fp_pct"] = fp_pct;
    j["tn_pct"] = tn_pct;
    j["fn_pct"] = fn_pct;
    j["threshold"] = threshold;
    j["unclassified"] = unclassified;
    return j;
}

CalibrationMatrix calibrate(const std::vector<CalItem>& items, double threshold) {
    CalibrationMatrix m;
    m.threshold = threshold;
    for (const auto& item : items) {
        if (!item.confidence) {
            ++m.unclassified;
            continue;
        }
        bool high = *item.confidence >= threshold;
        if (high && item.correct) ++m.tp;
        if (high && !item.correct) ++m.fp;
        if (!high && !item.correct) ++m.tn;
        if (!high && item.correct) ++m.fn;
    }
    long total = m.classified();
    if (total > 0) {
        m.tp_pct = round1(100.0 * m.tp / total);
        m.fp_pct = round1(100.0 * m.fp / total);
        m.tn_pct = round1(100.0 * m.tn / total);
        m.fn_pct = round1(100.0 * m.fn / total);
    }
    return m;
}

CalibrationMatrix calibrate_macro(const std::vector<std::vector<CalItem>>& groups,
                                  double threshold) {
    CalibrationMatrix out;
    out.threshold = threshold;
    double tp = 0, fp = 0, tn = 0, fn = 0;
    int used = 0;
    for (const auto& g : groups) {
        CalibrationMatrix m = calibrate(g, threshold);
        out.tp += m.tp;
        out.fp += m.fp;
        out.tn += m.tn;
        out.fn += m.fn;
        out.unclassified += m.unclassified;
        if (m.classified() == 0) continue;
        tp += m.tp_pct;
        fp += m.fp_pct;
        tn += m.tn_pct;
        fn += m.fn_pct;
        ++used;
    }
    if (used > 0) {
        out.tp_pct = round1(tp / used);
        out.fp_pct = round1(fp / used);
        out.tn_pct = round1(tn / used);
        out.fn_pct = round1(fn / used);
    }
    return out;
}

AggregateTable average_across_models(const std::vector<ScoreReport>& reports) {
    if (reports.empty()) throw InconsistentGroup("no reports to average");

    std::set<std::string> model_set;
    for (const auto& r : reports) model_set.insert(r.model_name);

    // Group by (task, strategy, shots), preserving first-seen order.
    using Key = std::tuple<std::string, std::string, int>;
    std::vector<Key> order;
    std::map<Key, std::vector<const ScoreReport*>> groups;
    for (const auto& r : reports) {
        Key k{r.task_id, r.strategy, r.shots};
        if (!groups.count(k)) order.push_back(k);
        groups[k].push_back(&r);
    }

    AggregateTable table;
    table.models.assign(model_set.begin(), model_set.end());
    for (const auto& key : order) {
        const auto& group = groups[key];
        std::set<std::string> seen_models;
        for (const auto* r : group) {
            if (!seen_models.insert(r->model_name).second)
                throw InconsistentGroup("duplicate report for model '" + r->model_name + "' in " +
                                        std::get<0>(key) + "/" + std::get<1>(key));
        }
        if (seen_models != model_set)
            throw InconsistentGroup("group " + std::get<0>(key) + "/" + std::get<1>(key) +
                                    " does not cover every model");
        const auto& metric_order = group.front()->values;
        AggregateCell cell;
        cell.task_id = std::get<0>(key);
        cell.strategy = std::get<1>(key);
        cell.shots = std::get<2>(key);
        cell.model_count = static_cast<int>(group.size());
        for (const auto& mv : metric_order) {
            double sum = 0;
            for (const auto* r : group) {
                auto v = r->value_of(mv.metric);
                if (!v)
                    throw InconsistentGroup("model '" + r->model_name + "' lacks metric '" +
                                            mv.metric + "' for " + cell.task_id);
                sum += *v;
            }
            cell.values.push_back({mv.metric, round1(sum / group.size())});
        }
        table.rows.push_back(std::move(cell));
    }
    return table;
}

double relative_improvement(double avg_a, double avg_b) {
    if (avg_b <= 0.0) throw DivisionByZero("baseline average must be positive");
    return 100.0 * (avg_a - avg_b) / avg_b;
}

double strategy_average(const std::vector<ScoreReport>& reports) {
    if (reports.empty()) throw InconsistentGroup("no reports to aggregate");
    double sum = 0;
    long n = 0;
    for (const auto& r : reports) {
        for (const auto& v : r.values) {
            sum += v.value;
            ++n;
        }
    }
    return round1(sum / n);
}

const std::vector<std::string>& error_categories() {
    static const std::vector<std::string> cats = {
        "overthinking",
        "overcorrection",
        "terminological-misalignment",
        "clinical-inference-discrepancy",
        "statutory-interpretation-error",
        "jurisprudential-analysis-deviation",
        "other",
    };
    return cats;
}

bool is_error_category(const std::string& s) {
    const auto& cats = error_categories();
    return std::find(cats.begin(), cats.end(), s) != cats.end();
}

json ErrorAnnotation::to_json() const {
    json j;
    j["instance_id"] = instance_id;
    j["run_id"] = run_id;
    j["category"] = category;
    j["note"] = note;
    return j;
}

ErrorAnnotation ErrorAnnotation::from_json(const json& j) {
    ErrorAnnotation a;
    a.instance_id = j.at("instance_id").get<std::string>();
    a.run_id = j.value("run_id", std::string());
    a.category = j.at("category").get<std::string>();
    a.note = j.value("note", std::string());
    if (!is_error_category(a.category))
        throw ConfigError("unknown error category: '" + a.category + "'");
    return a;
}

const std::map<std::string, std::vector<std::string>>& error_partitions() {
    static const std::map<std::string, std::vector<std::string>> parts = {
        {"general", {"overthinking", "overcorrection"}},
        {"biomedical", {"terminological-misalignment", "clinical-inference-discrepancy"}},
        {"legal", {"statutory-interpretation-error", "jurisprudential-analysis-deviation"}},
    };
    return parts;
}

std::map<std::string, double> error_distribution(const std::vector<ErrorAnnotation>& annotations,
                                                 const std::vector<std::string>& partition) {
    if (partition.empty()) throw ConfigError("empty partition");
    if (annotations.empty()) throw EmptyAnnotationSet("no annotations");
    std::map<std::string, long> counts;
    for (const auto& cat : partition) counts[cat] = 0;
    for (const auto& a : annotations) {
        auto it = counts.find(a.category);
        if (it == counts.end())
            throw ConfigError("annotation category '" + a.category + "' outside the partition");
        ++it->second;
    }
    std::map<std::string, double> out;
    for (const auto& [cat, count] : counts)
        out[cat] = round1(100.0 * count / annotations.size());
    return out;
}

}  // namespace mpeval
