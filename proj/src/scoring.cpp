#include "mpeval/scoring.hpp"

#include <algorithm>
#include <set>

#include "mpeval/errors.hpp"
#include "mpeval/text.hpp"

namespace mpeval {

namespace {

struct Confusion {
    long tp = 0, fp = 0, fn = 0;
    double f1() const {
        long den = 2 * tp + fp + fn;
        return den == 0 ? 0.0 : 100.0 * 2.0 * tp / den;
    }
};

// Aligned (pred, gold) pairs; throws AlignmentError on id mismatch.
std::vector<std::pair<const Prediction*, const std::vector<std::string>*>> align(
    const std::vector<Prediction>& preds, const GoldMap& golds) {
    if (preds.empty()) throw AlignmentError("empty prediction set");
    if (preds.size() != golds.size())
        throw AlignmentError(std::to_string(preds.size()) + " predictions vs " +
                             std::to_string(golds.size()) + " golds");
    std::vector<std::pair<const Prediction*, const std::vector<std::string>*>> out;
    std::set<std::string> seen;
    for (const auto& p : preds) {
        if (!seen.insert(p.instance_id).second)
            throw AlignmentError("duplicate prediction for instance '" + p.instance_id + "'");
        auto it = golds.find(p.instance_id);
        if (it == golds.end())
            throw AlignmentError("no gold for instance '" + p.instance_id + "'");
        out.emplace_back(&p, &it->second);
    }
    return out;
}

bool exact_match(const Prediction& p, const std::vector<std::string>& gold) {
    return !p.parse_failure && p.labels == gold;
}

std::string modal_label(const std::map<std::string, int>& counts) {
    std::string best;
    int best_count = -1;
    for (const auto& [label, count] : counts) {
        // map iterates in lexicographic order, so ties keep the smallest label
        if (count > best_count) {
            best = label;
            best_count = count;
        }
    }
    return best;
}

}  // namespace

std::string to_string(ParseFailureMode m) {
    return m == ParseFailureMode::count_wrong ? "count-wrong" : "exclude";
}

ParseFailureMode parse_failure_mode_from_string(const std::string& s) {
    if (s == "count-wrong") return ParseFailureMode::count_wrong;
    if (s == "exclude") return ParseFailureMode::exclude;
    throw ConfigError("unknown parse failure mode: '" + s + "'");
}

Prediction majority_vote(const std::vector<ParsedResponse>& samples, const TaskSpec& spec) {
    if (samples.empty()) throw NoParsableSamples("no samples");
    std::vector<const ParsedResponse*> parsed;
    for (const auto& s : samples) {
        if (s.instance_id != samples.front().instance_id)
            throw AlignmentError("samples from different instances");
        if (s.parse_mode != ParseMode::failed && !s.labels.empty()) parsed.push_back(&s);
    }
    if (parsed.empty())
        throw NoParsableSamples("all " + std::to_string(samples.size()) +
                                " samples failed to parse");

    Prediction pred;
    pred.instance_id = samples.front().instance_id;

    double conf_sum = 0;
    int conf_n = 0;
    for (const auto* s : parsed) {
        if (s->confidence) {
            conf_sum += *s->confidence;
            ++conf_n;
        }
    }
    if (conf_n > 0) pred.confidence = conf_sum / conf_n;

    switch (spec.label_space.kind) {
        case LabelKind::binary:
        case LabelKind::multi_class: {
            std::map<std::string, int> counts;
            for (const auto* s : parsed) ++counts[s->labels.front()];
            pred.labels = {modal_label(counts)};
            pred.vote_detail = counts;
            break;
        }
        case LabelKind::multi_label: {
            std::map<std::string, int> counts;
            for (const auto* s : parsed)
                for (const auto& l : s->labels) ++counts[l];
            std::vector<std::string> voted;
            for (const auto& [label, count] : counts)
                if (2 * count > static_cast<int>(parsed.size())) voted.push_back(label);
            if (voted.empty()) {
                if (spec.label_space.none_label)
                    voted.push_back(*spec.label_space.none_label);
                else
                    voted.push_back(modal_label(counts));
            }
            pred.labels = std::move(voted);
            pred.vote_detail = counts;
            break;
        }
        case LabelKind::tag_sequence: {
            size_t len = parsed.front()->labels.size();
            for (const auto* s : parsed)
                if (s->labels.size() != len)
                    throw LengthMismatch("voted tag sequences differ in length");
            std::map<std::string, int> totals;
            for (size_t i = 0; i < len; ++i) {
                std::map<std::string, int> counts;
                for (const auto* s : parsed) ++counts[s->labels[i]];
                pred.labels.push_back(modal_label(counts));
            }
            for (const auto* s : parsed)
                for (const auto& t : s->labels) ++totals[t];
            pred.vote_detail = totals;
            break;
        }
    }
    return pred;
}

Prediction prediction_from_sample(const ParsedResponse& sample) {
    Prediction pred;
    pred.instance_id = sample.instance_id;
    if (sample.parse_mode == ParseMode::failed || sample.labels.empty()) {
        pred.parse_failure = true;
    } else {
        pred.labels = sample.labels;
    }
    if (sample.confidence) pred.confidence = *sample.confidence;
    return pred;
}

double accuracy(const std::vector<Prediction>& preds, const GoldMap& golds) {
    auto pairs = align(preds, golds);
    long correct = 0;
    for (const auto& [p, gold] : pairs)
        if (exact_match(*p, *gold)) ++correct;
    return 100.0 * correct / pairs.size();
}

double f1_binary(const std::vector<Prediction>& preds, const GoldMap& golds,
                 const std::string& positive_label) {
    Confusion c;
    for (const auto& [p, gold] : align(preds, golds)) {
        bool gold_pos = std::find(gold->begin(), gold->end(), positive_label) != gold->end();
        bool pred_pos = !p->parse_failure &&
                        std::find(p->labels.begin(), p->labels.end(), positive_label) !=
                            p->labels.end();
        if (pred_pos && gold_pos) ++c.tp;
        if (pred_pos && !gold_pos) ++c.fp;
        if (!pred_pos && gold_pos) ++c.fn;
    }
    return c.f1();
}

namespace {

// Pooled and per-label confusion counts from set intersections/differences.
std::map<std::string, Confusion> label_confusions(const std::vector<Prediction>& preds,
                                                  const GoldMap& golds) {
    std::map<std::string, Confusion> by_label;
    for (const auto& [p, gold] : align(preds, golds)) {
        std::set<std::string> g(gold->begin(), gold->end());
        std::set<std::string> q;
        if (!p->parse_failure) q.insert(p->labels.begin(), p->labels.end());
        for (const auto& l : g)
            if (q.count(l))
                ++by_label[l].tp;
            else
                ++by_label[l].fn;
        for (const auto& l : q)
            if (!g.count(l)) ++by_label[l].fp;
    }
    return by_label;
}

}  // namespace

double micro_f1(const std::vector<Prediction>& preds, const GoldMap& golds,
                const LabelSpace& space) {
    (void)space;
    Confusion pooled;
    for (const auto& [label, c] : label_confusions(preds, golds)) {
        pooled.tp += c.tp;
        pooled.fp += c.fp;
        pooled.fn += c.fn;
    }
    return pooled.f1();
}

double macro_f1(const std::vector<Prediction>& preds, const GoldMap& golds,
                const LabelSpace& space, bool full_space) {
    auto by_label = label_confusions(preds, golds);
    double sum = 0;
    long n = 0;
    if (full_space) {
        for (const auto& label : space.labels) {
            auto it = by_label.find(label);
            sum += it == by_label.end() ? 0.0 : it->second.f1();
            ++n;
        }
    } else {
        for (const auto& [label, c] : by_label) {
            sum += c.f1();
            ++n;
        }
    }
    return n == 0 ? 0.0 : sum / n;
}

double bio_micro_f1(const std::vector<Prediction>& preds, const GoldMap& golds) {
    Confusion pooled;
    for (const auto& [p, gold] : align(preds, golds)) {
        if (!p->parse_failure && p->labels.size() != gold->size())
            throw LengthMismatch("prediction has " + std::to_string(p->labels.size()) +
                                 " tags, gold has " + std::to_string(gold->size()));
        for (size_t i = 0; i < gold->size(); ++i) {
            // Token-level pooling over non-O tags; O is excluded.
            const std::string& g = (*gold)[i];
            std::string q = p->parse_failure ? "O" : p->labels[i];
            if (g != "O" && q == g) ++pooled.tp;
            if (g != "O" && q != g) ++pooled.fn;
            if (q != "O" && q != g) ++pooled.fp;
        }
    }
    return pooled.f1();
}

std::optional<double> ScoreReport::value_of(const std::string& metric) const {
    for (const auto& v : values)
        if (v.metric == metric) return v.value;
    return std::nullopt;
}

std::string ScoreReport::slash_cell() const {
    std::vector<std::string> parts;
    for (const auto& v : values) parts.push_back(format1(v.value));
    return join(parts, "/");
}

json ScoreReport::to_json() const {
    json j;
    j["task_id"] = task_id;
    j["strategy"] = strategy;
    j["model_name"] = model_name;
    j["shots"] = shots;
    json vals = json::array();
    for (const auto& v : values) vals.push_back({{"metric", v.metric}, {"value", v.value}});
    j["values"] = vals;
    j["counts"] = {{"scored", counts.scored},
                   {"parse_failures", counts.parse_failures},
                   {"excluded", counts.excluded}};
    j["lenient_fraction"] = lenient_fraction;
    if (!diagnostics.empty()) j["diagnostics"] = diagnostics;
    return j;
}

ScoreReport ScoreReport::from_json(const json& j) {
    ScoreReport r;
    r.task_id = j.at("task_id").get<std::string>();
    r.strategy = j.at("strategy").get<std::string>();
    r.model_name = j.value("model_name", std::string());
    r.shots = j.value("shots", 0);
    for (const auto& v : j.at("values"))
        r.values.push_back({v.at("metric").get<std::string>(), v.at("value").get<double>()});
    if (j.contains("counts")) {
        r.counts.scored = j["counts"].value("scored", 0);
        r.counts.parse_failures = j["counts"].value("parse_failures", 0);
        r.counts.excluded = j["counts"].value("excluded", 0);
    }
    r.lenient_fraction = j.value("lenient_fraction", 0.0);
    if (j.contains("diagnostics"))
        r.diagnostics = j["diagnostics"].get<std::map<std::string, double>>();
    return r;
}

ScoreReport score_run(const std::vector<Prediction>& preds, const GoldMap& golds,
                      const TaskSpec& spec, ParseFailureMode mode) {
    ScoreReport report;
    report.task_id = spec.task_id;
    if (preds.size() != golds.size())
        throw AlignmentError(std::to_string(preds.size()) + " predictions vs " +
                             std::to_string(golds.size()) + " golds");

    std::vector<Prediction> scored;
    GoldMap scored_golds;
    int failures = 0;
    for (const auto& p : preds) {
        if (p.parse_failure) ++failures;
        if (p.parse_failure && mode == ParseFailureMode::exclude) continue;
        auto it = golds.find(p.instance_id);
        if (it == golds.end())
            throw AlignmentError("no gold for instance '" + p.instance_id + "'");
        scored.push_back(p);
        scored_golds[p.instance_id] = it->second;
    }
    report.counts.parse_failures = failures;
    report.counts.excluded = static_cast<int>(preds.size() - scored.size());
    report.counts.scored = static_cast<int>(scored.size());

    for (const auto& metric : spec.metrics) {
        double value = 0.0;
        if (metric == "accuracy") {
            value = accuracy(scored, scored_golds);
        } else if (metric == "f1-binary") {
            std::string positive = spec.answer_contract.positive_label.value_or(
                spec.label_space.labels.front());
            value = f1_binary(scored, scored_golds, positive);
        } else if (metric == "micro-f1") {
            value = micro_f1(scored, scored_golds, spec.label_space);
        } else if (metric == "macro-f1") {
            value = macro_f1(scored, scored_golds, spec.label_space, true);
            report.diagnostics["macro-f1-present"] =
                round1(macro_f1(scored, scored_golds, spec.label_space, false));
        } else if (metric == "bio-micro-f1") {
            value = bio_micro_f1(scored, scored_golds);
        } else {
            throw ConfigError("unknown metric '" + metric + "'");
        }
        report.values.push_back({metric, round1(value)});
    }
    return report;
}

}  // namespace mpeval
