#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "mpeval/errors.hpp"
#include "mpeval/jsonl.hpp"
#include "mpeval/run.hpp"
#include "mpeval/text.hpp"

namespace mpeval {

namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kStrategyOrder = {"CoT", "PS", "MP", "M-CoT", "CoT-SC", "M-MP"};

int strategy_rank(const std::string& s) {
    auto it = std::find(kStrategyOrder.begin(), kStrategyOrder.end(), s);
    return it == kStrategyOrder.end() ? 99 : static_cast<int>(it - kStrategyOrder.begin());
}

// Dataset column order follows the built-in catalog; unknown tasks go last.
std::vector<std::string> task_order(const std::set<std::string>& present) {
    std::vector<std::string> order;
    for (const auto& spec : builtin_catalog())
        if (present.count(spec.task_id)) order.push_back(spec.task_id);
    for (const auto& t : present)
        if (std::find(order.begin(), order.end(), t) == order.end()) order.push_back(t);
    return order;
}

fs::path write_text(const fs::path& out_dir, const std::string& name,
                    const std::string& content) {
    fs::path path = out_dir / name;
    atomic_write_file(path, content);
    return path;
}

std::string method_label(const ScoreReport& r) {
    return r.model_name + " (" + (r.shots == 0 ? "0S" : std::to_string(r.shots) + "S") + ", " +
           r.strategy + ")";
}

std::vector<fs::path> report_table2(const std::vector<ScoreReport>& scores,
                                    const fs::path& out_dir) {
    std::set<std::string> present;
    for (const auto& r : scores) present.insert(r.task_id);
    std::vector<std::string> tasks = task_order(present);

    using RowKey = std::tuple<int, std::string, int, std::string>;  // shots, model, rank, strategy
    std::map<RowKey, std::map<std::string, const ScoreReport*>> rows;
    for (const auto& r : scores)
        rows[{r.shots, r.model_name, strategy_rank(r.strategy), r.strategy}][r.task_id] = &r;

    std::ostringstream tsv;
    tsv << "method";
    for (const auto& t : tasks) tsv << "\t" << t;
    tsv << "\n";
    json jrows = json::array();
    for (const auto& [key, cells] : rows) {
        const ScoreReport* any = cells.begin()->second;
        tsv << method_label(*any);
        json jr;
        jr["model"] = any->model_name;
        jr["strategy"] = any->strategy;
        jr["shots"] = any->shots;
        json jcells;
        for (const auto& t : tasks) {
            auto it = cells.find(t);
            if (it == cells.end())
                throw CoverageGap("no run for " + method_label(*any) + " x " + t);
            tsv << "\t" << it->second->slash_cell();
            json metrics;
            for (const auto& v : it->second->values) metrics[v.metric] = v.value;
            jcells[t] = metrics;
        }
        tsv << "\n";
        jr["cells"] = jcells;
        jrows.push_back(jr);
    }
    return {write_text(out_dir, "table2.tsv", tsv.str()),
            write_text(out_dir, "table2.json", jrows.dump(1) + "\n")};
}

std::vector<fs::path> report_table3(const std::vector<ScoreReport>& scores,
                                    const ReportOptions& options) {
    std::vector<ScoreReport> filtered;
    for (const auto& r : scores)
        if (r.shots == options.shots) filtered.push_back(r);
    if (filtered.empty())
        throw CoverageGap("no runs with shots = " + std::to_string(options.shots));

    AggregateTable table = average_across_models(filtered);

    std::set<std::string> present;
    std::set<std::string> strategies_present;
    for (const auto& c : table.rows) {
        present.insert(c.task_id);
        strategies_present.insert(c.strategy);
    }
    std::vector<std::string> tasks = task_order(present);
    std::vector<std::string> strategies;
    for (const auto& s : kStrategyOrder)
        if (strategies_present.count(s)) strategies.push_back(s);

    std::map<std::pair<std::string, std::string>, const AggregateCell*> cells;
    for (const auto& c : table.rows) cells[{c.task_id, c.strategy}] = &c;

    std::ostringstream tsv;
    tsv << "dataset";
    for (const auto& s : strategies) tsv << "\t" << s;
    tsv << "\n";
    json jrows = json::array();
    for (const auto& t : tasks) {
        tsv << t;
        json jr;
        jr["task_id"] = t;
        for (const auto& s : strategies) {
            auto it = cells.find({t, s});
            if (it == cells.end()) throw CoverageGap("no aggregate for " + t + " x " + s);
            std::vector<std::string> parts;
            json metrics;
            for (const auto& v : it->second->values) {
                parts.push_back(format1(v.value));
                metrics[v.metric] = v.value;
            }
            tsv << "\t" << join(parts, "/");
            jr[s] = metrics;
        }
        tsv << "\n";
        jrows.push_back(jr);
    }
    return {write_text(options.out_dir, "table3.tsv", tsv.str()),
            write_text(options.out_dir, "table3.json", jrows.dump(1) + "\n")};
}

std::vector<fs::path> report_fig3(const std::vector<ScoreReport>& scores,
                                  const fs::path& out_dir) {
    // model -> strategy -> reports
    std::map<std::string, std::map<std::string, std::vector<ScoreReport>>> by_model;
    for (const auto& r : scores) by_model[r.model_name][r.strategy].push_back(r);

    // The improvement comparisons the fig3 report emits.
    const std::vector<std::pair<std::string, std::string>> pairs = {
        {"MP", "CoT"}, {"MP", "PS"}, {"M-MP", "M-CoT"}, {"M-MP", "CoT-SC"}};

    json jmodels = json::object();
    std::ostringstream tsv;
    tsv << "model\tstrategy\taverage\n";
    std::ostringstream itsv;
    itsv << "model\tcomparison\trelative_improvement_pct\n";

    for (auto& [model, strategies] : by_model) {
        // Strategies of one model must cover the same (task, metric) set.
        std::set<std::pair<std::string, std::string>> reference;
        bool first = true;
        for (auto& [name, reports] : strategies) {
            std::set<std::pair<std::string, std::string>> coverage;
            for (const auto& r : reports)
                for (const auto& v : r.values) coverage.insert({r.task_id, v.metric});
            if (first) {
                reference = coverage;
                first = false;
            } else if (coverage != reference) {
                throw CoverageGap("strategy " + name + " of " + model +
                                  " covers a different dataset/metric set");
            }
        }
        json jm;
        json javg = json::object();
        for (const auto& s : kStrategyOrder) {
            auto it = strategies.find(s);
            if (it == strategies.end()) continue;
            double avg = strategy_average(it->second);
            javg[s] = avg;
            tsv << model << "\t" << s << "\t" << format1(avg) << "\n";
        }
        json jimp = json::object();
        bool any_zero_shot = strategies.count("MP") || strategies.count("CoT") ||
                             strategies.count("PS");
        bool any_few_shot = strategies.count("M-MP") || strategies.count("M-CoT") ||
                            strategies.count("CoT-SC");
        for (const auto& [a, b] : pairs) {
            bool zero_pair = a == "MP";
            if (zero_pair && !any_zero_shot) continue;
            if (!zero_pair && !any_few_shot) continue;
            if (!strategies.count(a) || !strategies.count(b))
                throw CoverageGap("model " + model + " lacks strategy " +
                                  (strategies.count(a) ? b : a) + " for the " + a + " vs " + b +
                                  " comparison");
            double ri = round1(relative_improvement(strategy_average(strategies[a]),
                                                    strategy_average(strategies[b])));
            std::string key = a + " vs " + b;
            jimp[key] = ri;
            itsv << model << "\t" << key << "\t" << format1(ri) << "\n";
        }
        jm["averages"] = javg;
        jm["improvements"] = jimp;
        jmodels[model] = jm;
    }
    return {write_text(out_dir, "fig3_averages.tsv", tsv.str()),
            write_text(out_dir, "fig3_improvements.tsv", itsv.str()),
            write_text(out_dir, "fig3.json", jmodels.dump(1) + "\n")};
}

std::vector<fs::path> report_calibration(const std::vector<fs::path>& run_dirs,
                                         const ReportOptions& options) {
    std::vector<std::vector<CalItem>> groups;
    for (const auto& dir : run_dirs) {
        RunManifest m = read_manifest(dir);
        if (m.status != "complete") throw IncompleteRun(dir.string() + " is " + m.status);
        std::vector<CalItem> items;
        for (const auto& line : read_jsonl(dir / "predictions.jsonl")) {
            CalItem item;
            if (!line.at("confidence").is_null()) item.confidence = line["confidence"].get<double>();
            item.correct = line.at("correct").get<bool>();
            items.push_back(item);
        }
        groups.push_back(std::move(items));
    }
    CalibrationMatrix matrix;
    if (options.macro_calibration) {
        matrix = calibrate_macro(groups, options.threshold);
    } else {
        std::vector<CalItem> pooled;
        for (const auto& g : groups) pooled.insert(pooled.end(), g.begin(), g.end());
        matrix = calibrate(pooled, options.threshold);
    }
    std::ostringstream csv;
    csv << "category,percent\n";
    csv << "TP," << format1(matrix.tp_pct) << "\n";
    csv << "FP," << format1(matrix.fp_pct) << "\n";
    csv << "TN," << format1(matrix.tn_pct) << "\n";
    csv << "FN," << format1(matrix.fn_pct) << "\n";
    return {write_text(options.out_dir, "calibration.json", matrix.to_json().dump(1) + "\n"),
            write_text(options.out_dir, "calibration.csv", csv.str())};
}

std::vector<fs::path> report_errors(const std::vector<fs::path>& run_dirs,
                                    const fs::path& out_dir) {
    std::vector<ErrorAnnotation> annotations;
    for (const auto& dir : run_dirs) {
        fs::path file = dir / "annotations.jsonl";
        if (!fs::exists(file)) continue;
        for (const auto& line : read_jsonl(file))
            annotations.push_back(ErrorAnnotation::from_json(json(line)));
    }
    if (annotations.empty()) throw EmptyAnnotationSet("no annotations in the given runs");

    json jout = json::object();
    std::ostringstream tsv;
    tsv << "partition\tcategory\tpercent\tcount\n";
    for (const auto& [name, partition] : error_partitions()) {
        std::vector<ErrorAnnotation> in_partition;
        for (const auto& a : annotations)
            if (std::find(partition.begin(), partition.end(), a.category) != partition.end())
                in_partition.push_back(a);
        if (in_partition.empty()) continue;
        auto dist = error_distribution(in_partition, partition);
        json jp;
        for (const auto& cat : partition) {
            long count = std::count_if(in_partition.begin(), in_partition.end(),
                                       [&](const ErrorAnnotation& a) { return a.category == cat; });
            jp[cat] = {{"percent", dist[cat]}, {"count", count}};
            tsv << name << "\t" << cat << "\t" << format1(dist[cat]) << "\t" << count << "\n";
        }
        jout[name] = jp;
    }
    return {write_text(out_dir, "errors.json", jout.dump(1) + "\n"),
            write_text(out_dir, "errors.tsv", tsv.str())};
}

}  // namespace

std::vector<ScoreReport> collect_scores(const std::vector<fs::path>& run_dirs, bool select_best,
                                        const std::string& select_metric) {
    std::map<std::tuple<std::string, std::string, int, std::string>, std::vector<ScoreReport>>
        cells;
    for (const auto& dir : run_dirs) {
        RunManifest m = read_manifest(dir);
        if (m.status != "complete")
            throw IncompleteRun(dir.string() + " is " + m.status);
        json j = json::parse(read_text_file(dir / "scores.json"));
        ScoreReport r = ScoreReport::from_json(j);
        cells[{r.model_name, r.strategy, r.shots, r.task_id}].push_back(std::move(r));
    }
    std::vector<ScoreReport> out;
    for (auto& [key, reports] : cells) {
        if (reports.size() == 1) {
            out.push_back(std::move(reports.front()));
            continue;
        }
        if (!select_best)
            throw InconsistentGroup(std::to_string(reports.size()) + " runs for " +
                                    std::get<0>(key) + "/" + std::get<1>(key) + "/" +
                                    std::get<3>(key) + "; pass --select best to pick one");
        std::string metric = select_metric.empty() ? reports.front().values.front().metric
                                                   : select_metric;
        const ScoreReport* best = nullptr;
        for (const auto& r : reports) {
            auto v = r.value_of(metric);
            if (!v)
                throw InconsistentGroup("run for " + std::get<3>(key) + " lacks metric '" +
                                        metric + "'");
            if (!best || *v > *best->value_of(metric)) best = &r;
        }
        out.push_back(*best);
    }
    return out;
}

std::vector<fs::path> write_report(const std::vector<fs::path>& run_dirs,
                                   const ReportOptions& options) {
    fs::create_directories(options.out_dir);
    if (options.mode == "calibration") return report_calibration(run_dirs, options);
    if (options.mode == "errors") return report_errors(run_dirs, options.out_dir);

    std::vector<ScoreReport> scores =
        collect_scores(run_dirs, options.select_best, options.select_metric);
    if (options.mode == "table2") return report_table2(scores, options.out_dir);
    if (options.mode == "table3") return report_table3(scores, options);
    if (options.mode == "fig3") return report_fig3(scores, options.out_dir);
    throw ConfigError("unknown report mode: '" + options.mode + "'");
}

}  // namespace mpeval
