#include "mpeval/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "mpeval/errors.hpp"
#include "mpeval/text.hpp"

namespace mpeval {

namespace {

std::string record_context(const std::filesystem::path& path, size_t line_no) {
    return path.filename().string() + ":" + std::to_string(line_no);
}

// One raw record: field -> value(s). TSV cells become single-element vectors
// unless split by the mapping's list separator for the gold field.
using RawRecord = std::map<std::string, std::vector<std::string>>;

std::vector<std::string> json_field_values(const json& v, const std::string& ctx) {
    std::vector<std::string> out;
    if (v.is_string()) {
        out.push_back(v.get<std::string>());
    } else if (v.is_boolean()) {
        out.push_back(v.get<bool>() ? "true" : "false");
    } else if (v.is_number_integer()) {
        out.push_back(std::to_string(v.get<long long>()));
    } else if (v.is_number()) {
        out.push_back(json(v).dump());
    } else if (v.is_array()) {
        for (const auto& e : v) {
            auto sub = json_field_values(e, ctx);
            out.insert(out.end(), sub.begin(), sub.end());
        }
    } else if (v.is_null()) {
        out.emplace_back();
    } else {
        throw MalformedRecord(ctx + ": unsupported field type " + std::string(v.type_name()));
    }
    return out;
}

std::string resolve_gold_label(const TaskSpec& spec, const std::string& raw,
                               const std::string& ctx) {
    std::string norm = normalize_label(raw);
    auto alias = spec.field_mapping.label_aliases.find(norm);
    if (alias != spec.field_mapping.label_aliases.end()) norm = alias->second;
    auto canonical = spec.label_space.resolve(norm);
    if (!canonical)
        throw UnknownLabel(ctx + ": label '" + raw + "' not in label space of " + spec.task_id);
    return *canonical;
}

Instance instance_from_record(const RawRecord& rec, const TaskSpec& spec, size_t ordinal,
                              const std::string& ctx) {
    Instance inst;
    const FieldMapping& fm = spec.field_mapping;

    if (fm.id_field) {
        auto it = rec.find(*fm.id_field);
        if (it == rec.end() || it->second.empty())
            throw MalformedRecord(ctx + ": missing id field '" + *fm.id_field + "'");
        inst.instance_id = it->second.front();
    } else {
        inst.instance_id = "r" + std::to_string(ordinal);
    }

    for (const auto& [field, slot] : fm.slots) {
        auto it = rec.find(field);
        if (it == rec.end())
            throw MissingSlot(ctx + ": field '" + field + "' (slot '" + slot + "') absent");
        inst.slot_values[slot] = join(it->second, " ");
    }
    // Every template slot must be bound; extra file fields are ignored.
    for (const auto& slot : spec.template_slots) {
        if (!inst.slot_values.count(slot))
            throw MissingSlot(ctx + ": no field mapped to slot '" + slot + "'");
    }

    auto git = rec.find(fm.gold_field);
    if (git == rec.end())
        throw MalformedRecord(ctx + ": missing gold field '" + fm.gold_field + "'");
    std::vector<std::string> gold_raw = git->second;

    if (spec.label_space.kind == LabelKind::tag_sequence) {
        for (const auto& tag : gold_raw)
            inst.gold.push_back(resolve_gold_label(spec, tag, ctx));
        size_t tokens = split_whitespace(inst.slot_values.at(spec.template_slots.front())).size();
        if (inst.gold.size() != tokens)
            throw MalformedRecord(ctx + ": " + std::to_string(inst.gold.size()) + " tags for " +
                                  std::to_string(tokens) + " tokens");
    } else {
        for (const auto& raw : gold_raw) {
            if (raw.empty()) continue;
            inst.gold.push_back(resolve_gold_label(spec, raw, ctx));
        }
        if (inst.gold.empty()) {
            if (spec.label_space.none_label)
                inst.gold.push_back(*spec.label_space.none_label);
            else
                throw MalformedRecord(ctx + ": empty gold");
        }
        std::sort(inst.gold.begin(), inst.gold.end());
        inst.gold.erase(std::unique(inst.gold.begin(), inst.gold.end()), inst.gold.end());
        if (spec.label_space.kind != LabelKind::multi_label && inst.gold.size() != 1)
            throw MalformedRecord(ctx + ": " + std::to_string(inst.gold.size()) +
                                  " gold labels for a single-label task");
    }
    return inst;
}

std::vector<Instance> load_jsonl(const std::filesystem::path& path, const TaskSpec& spec) {
    std::ifstream in(path);
    std::vector<Instance> out;
    std::string line;
    size_t line_no = 0, ordinal = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        std::string ctx = record_context(path, line_no);
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw MalformedRecord(ctx + ": " + e.what());
        }
        if (!j.is_object()) throw MalformedRecord(ctx + ": record is not an object");
        RawRecord rec;
        for (auto& [k, v] : j.items()) rec[k] = json_field_values(v, ctx);
        out.push_back(instance_from_record(rec, spec, ordinal++, ctx));
    }
    return out;
}

std::vector<std::string> split_tsv(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, '\t')) cells.push_back(cell);
    if (!line.empty() && line.back() == '\t') cells.emplace_back();
    return cells;
}

std::vector<Instance> load_tsv(const std::filesystem::path& path, const TaskSpec& spec) {
    std::ifstream in(path);
    std::vector<Instance> out;
    std::string line;
    if (!std::getline(in, line)) return out;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> header = split_tsv(line);
    size_t line_no = 1, ordinal = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        std::string ctx = record_context(path, line_no);
        std::vector<std::string> cells = split_tsv(line);
        if (cells.size() != header.size())
            throw MalformedRecord(ctx + ": " + std::to_string(cells.size()) + " cells, header has " +
                                  std::to_string(header.size()));
        RawRecord rec;
        for (size_t i = 0; i < header.size(); ++i) {
            // Multi-valued gold cells use the mapping's list separator.
            if (header[i] == spec.field_mapping.gold_field &&
                spec.label_space.kind != LabelKind::binary) {
                std::vector<std::string> vals;
                std::string item;
                std::istringstream cs(cells[i]);
                while (std::getline(cs, item, spec.field_mapping.list_separator[0]))
                    vals.push_back(item);
                rec[header[i]] = vals;
            } else {
                rec[header[i]] = {cells[i]};
            }
        }
        out.push_back(instance_from_record(rec, spec, ordinal++, ctx));
    }
    return out;
}

}  // namespace

std::string to_string(DatasetFormat f) {
    return f == DatasetFormat::jsonl ? "jsonl" : "tsv";
}

DatasetFormat dataset_format_from_string(const std::string& s) {
    if (s == "jsonl") return DatasetFormat::jsonl;
    if (s == "tsv") return DatasetFormat::tsv;
    throw ConfigError("unknown dataset format: '" + s + "'");
}

std::vector<Instance> load_dataset(const std::filesystem::path& path, DatasetFormat format,
                                   const TaskSpec& spec, const std::string& split) {
    (void)split;  // bookkeeping only; the path already names one split file
    if (!std::filesystem::exists(path))
        throw ConfigError("dataset file not found: " + path.string());
    return format == DatasetFormat::jsonl ? load_jsonl(path, spec) : load_tsv(path, spec);
}

void write_instances_jsonl(const std::filesystem::path& path, const std::vector<Instance>& list) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    for (const auto& inst : list) {
        json j;
        j["instance_id"] = inst.instance_id;
        for (const auto& [slot, value] : inst.slot_values) j[slot] = value;
        j["gold"] = inst.gold;
        out << j.dump() << "\n";
    }
}

std::vector<Instance> read_instances_jsonl(const std::filesystem::path& path,
                                           const TaskSpec& spec) {
    TaskSpec native = spec;
    native.field_mapping.slots.clear();
    for (const auto& slot : spec.template_slots) native.field_mapping.slots[slot] = slot;
    native.field_mapping.gold_field = "gold";
    native.field_mapping.id_field = "instance_id";
    native.field_mapping.label_aliases.clear();
    return load_dataset(path, DatasetFormat::jsonl, native, "");
}

uint64_t bounded_uniform(std::mt19937_64& rng, uint64_t bound) {
    if (bound == 0) throw Error("bounded_uniform: zero bound");
    uint64_t threshold = (0 - bound) % bound;  // 2^64 mod bound
    uint64_t r;
    do {
        r = rng();
    } while (r < threshold);
    return r % bound;
}

std::vector<Instance> sample_eval_subset(const std::vector<Instance>& instances, size_t n,
                                         uint64_t seed) {
    if (n > instances.size())
        throw SubsetTooLarge("requested " + std::to_string(n) + " of " +
                             std::to_string(instances.size()) + " instances");
    std::vector<size_t> idx(instances.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::mt19937_64 rng(seed);
    std::vector<Instance> out;
    out.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        size_t j = i + static_cast<size_t>(bounded_uniform(rng, idx.size() - i));
        std::swap(idx[i], idx[j]);
        out.push_back(instances[idx[i]]);
    }
    return out;
}

ExemplarSet select_exemplars(const TaskSpec& spec, const std::vector<Instance>& train, size_t k,
                             uint64_t seed, const std::map<std::string, std::string>& answers) {
    std::vector<Instance> drawn = sample_eval_subset(train, k, seed);
    ExemplarSet set;
    set.task_id = spec.task_id;
    for (auto& inst : drawn) {
        auto it = answers.find(inst.instance_id);
        if (it == answers.end() || trim(it->second).empty())
            throw MissingWorkedAnswer("no worked answer for instance '" + inst.instance_id + "'");
        set.exemplars.emplace_back(std::move(inst), it->second);
    }
    return set;
}

std::map<std::string, std::string> read_worked_answers(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open worked answers file: " + path.string());
    std::map<std::string, std::string> out;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw MalformedRecord(record_context(path, line_no) + ": " + e.what());
        }
        out[j.at("instance_id").get<std::string>()] = j.at("worked_answer").get<std::string>();
    }
    return out;
}

}  // namespace mpeval
