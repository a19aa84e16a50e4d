#include "mpeval/prompt.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "mpeval/errors.hpp"
#include "mpeval/text.hpp"

namespace mpeval {

namespace {

bool is_placeholder_char(unsigned char c) {
    return std::isalnum(c) != 0 || c == '_';
}

// Extracts {name} placeholder names; ignores non-identifier brace groups.
std::vector<std::string> placeholder_names(const std::string& body) {
    std::vector<std::string> out;
    for (size_t i = 0; i < body.size(); ++i) {
        if (body[i] != '{') continue;
        size_t j = i + 1;
        while (j < body.size() && is_placeholder_char(body[j])) ++j;
        if (j > i + 1 && j < body.size() && body[j] == '}') {
            out.push_back(body.substr(i + 1, j - i - 1));
            i = j;
        }
    }
    return out;
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct TemplateFile {
    std::string task_id;
    Strategy strategy;
    std::string question;
    std::vector<std::string> stages;
};

// Template file layout: "task_id:"/"strategy:" header lines, then [question]
// and (for MP) [stages] sections.
TemplateFile parse_template_file(const std::string& content, const std::string& name) {
    TemplateFile tf;
    tf.strategy = Strategy::mp;
    bool saw_task = false, saw_strategy = false;
    std::string section;
    std::vector<std::string> section_lines;
    auto flush = [&]() {
        if (section.empty()) return;
        // Sections are joined verbatim, trailing blank lines dropped.
        while (!section_lines.empty() && trim(section_lines.back()).empty())
            section_lines.pop_back();
        if (section == "question") {
            tf.question = join(section_lines, "\n");
        } else if (section == "stages") {
            tf.stages = section_lines;
        } else {
            throw ConfigError(name + ": unknown section [" + section + "]");
        }
        section_lines.clear();
    };
    std::istringstream in(content);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.size() >= 2 && line.front() == '[' && line.back() == ']') {
            flush();
            section = line.substr(1, line.size() - 2);
            continue;
        }
        if (section.empty()) {
            if (trim(line).empty()) continue;
            size_t colon = line.find(':');
            if (colon == std::string::npos)
                throw ConfigError(name + ": bad header line '" + line + "'");
            std::string key = trim(line.substr(0, colon));
            std::string value = trim(line.substr(colon + 1));
            if (key == "task_id") {
                tf.task_id = value;
                saw_task = true;
            } else if (key == "strategy") {
                tf.strategy = strategy_from_string(value);
                saw_strategy = true;
            } else {
                throw ConfigError(name + ": unknown header key '" + key + "'");
            }
            continue;
        }
        section_lines.push_back(line);
    }
    flush();
    if (!saw_task || !saw_strategy) throw ConfigError(name + ": missing task_id/strategy header");
    if (tf.question.empty()) throw ConfigError(name + ": missing [question] section");
    return tf;
}

}  // namespace

std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::mp: return "MP";
        case Strategy::cot: return "CoT";
        case Strategy::ps: return "PS";
        case Strategy::m_cot: return "M-CoT";
        case Strategy::cot_sc: return "CoT-SC";
        case Strategy::m_mp: return "M-MP";
    }
    return "?";
}

Strategy strategy_from_string(const std::string& s) {
    for (auto v : {Strategy::mp, Strategy::cot, Strategy::ps, Strategy::m_cot, Strategy::cot_sc,
                   Strategy::m_mp})
        if (to_string(v) == s) return v;
    throw ConfigError("unknown strategy: '" + s + "'");
}

bool is_zero_shot(Strategy s) {
    return s == Strategy::mp || s == Strategy::cot || s == Strategy::ps;
}

bool is_few_shot(Strategy s) {
    return !is_zero_shot(s);
}

Strategy base_strategy(Strategy s) {
    switch (s) {
        case Strategy::m_mp: return Strategy::mp;
        case Strategy::m_cot:
        case Strategy::cot_sc: return Strategy::cot;
        default: return s;
    }
}

void DecodingParams::validate() const {
    if (temperature < 0.0 || temperature > 2.0)
        throw InvalidOverride("temperature out of [0, 2]: " + std::to_string(temperature));
    if (sample_count < 1) throw InvalidOverride("sample_count must be positive");
    if (max_tokens < 1) throw InvalidOverride("max_tokens must be positive");
    if (temperature == 0.0 && sample_count != 1)
        throw InvalidOverride("temperature 0 requires sample_count 1, got " +
                              std::to_string(sample_count));
}

DecodingParams decoding_params_for(Strategy s, const DecodingOverrides& overrides) {
    DecodingParams p;
    if (s == Strategy::cot_sc) {
        p.temperature = 0.7;
        p.sample_count = 10;
    }
    if (overrides.temperature) p.temperature = *overrides.temperature;
    if (overrides.sample_count) p.sample_count = *overrides.sample_count;
    if (overrides.max_tokens) p.max_tokens = *overrides.max_tokens;
    p.validate();
    return p;
}

void PromptTemplate::validate(const TaskSpec& spec) const {
    for (const auto& name : placeholder_names(body)) {
        if (std::find(spec.template_slots.begin(), spec.template_slots.end(), name) ==
            spec.template_slots.end())
            throw ConfigError(task_id + "/" + to_string(strategy) + ": placeholder '{" + name +
                              "}' not in template_slots");
    }
    if (base_strategy(strategy) == Strategy::mp) {
        if (stage_list.size() != 5)
            throw ConfigError(task_id + ": MP template needs exactly 5 stages, has " +
                              std::to_string(stage_list.size()));
        for (size_t i = 0; i < 5; ++i) {
            std::string want = std::to_string(i + 1) + ".";
            if (stage_list[i].rfind(want, 0) != 0)
                throw ConfigError(task_id + ": stage " + std::to_string(i + 1) +
                                  " must start with '" + want + "'");
        }
        if (contract_sentence.empty())
            throw ConfigError(task_id + ": MP template has no contract sentence");
    }
}

void TemplateRegistry::add(PromptTemplate tpl) {
    templates_[{tpl.task_id, static_cast<int>(base_strategy(tpl.strategy))}] = std::move(tpl);
}

TemplateRegistry TemplateRegistry::load_dir(const std::filesystem::path& dir,
                                            const std::vector<TaskSpec>& specs) {
    if (!std::filesystem::is_directory(dir))
        throw ConfigError("template directory not found: " + dir.string());
    TemplateRegistry reg;
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        std::string content = read_file(f);
        TemplateFile tf = parse_template_file(content, f.filename().string());
        const TaskSpec* spec = nullptr;
        for (const auto& s : specs)
            if (s.task_id == tf.task_id) spec = &s;
        if (!spec) throw ConfigError(f.filename().string() + ": unknown task '" + tf.task_id + "'");
        PromptTemplate tpl;
        tpl.task_id = tf.task_id;
        tpl.strategy = tf.strategy;
        tpl.body = tf.question;
        tpl.stage_list = tf.stages;
        tpl.contract_sentence = spec->answer_contract.instruction();
        tpl.validate(*spec);
        reg.digests_[f.filename().string()] = sha256_hex(content);
        reg.add(std::move(tpl));
    }
    return reg;
}

bool TemplateRegistry::has(const std::string& task_id, Strategy s) const {
    return templates_.count({task_id, static_cast<int>(base_strategy(s))}) > 0;
}

const PromptTemplate& TemplateRegistry::get(const std::string& task_id, Strategy s) const {
    auto it = templates_.find({task_id, static_cast<int>(base_strategy(s))});
    if (it == templates_.end())
        throw MissingTemplate("no template for " + task_id + " x " + to_string(s));
    return it->second;
}

std::string substitute_placeholders(const std::string& body,
                                    const std::map<std::string, std::string>& slots) {
    std::string out;
    out.reserve(body.size());
    for (size_t i = 0; i < body.size(); ++i) {
        if (body[i] == '{') {
            size_t j = i + 1;
            while (j < body.size() && is_placeholder_char(body[j])) ++j;
            if (j > i + 1 && j < body.size() && body[j] == '}') {
                std::string name = body.substr(i + 1, j - i - 1);
                auto it = slots.find(name);
                if (it == slots.end())
                    throw UnboundPlaceholder("no value bound for placeholder '{" + name + "}'");
                out += it->second;
                i = j;
                continue;
            }
        }
        out.push_back(body[i]);
    }
    return out;
}

namespace {

PromptBundle finish_bundle(std::string text, Strategy s, int shots,
                           const DecodingOverrides& overrides) {
    PromptBundle b;
    b.text = std::move(text);
    b.strategy = s;
    b.shots = shots;
    b.decoding = decoding_params_for(s, overrides);
    b.prompt_hash = sha256_hex(b.text);
    return b;
}

std::string zero_shot_text(const PromptTemplate& tpl, Strategy s, const Instance& instance) {
    std::string question = substitute_placeholders(tpl.body, instance.slot_values);
    if (base_strategy(s) == Strategy::mp) {
        return question + " " + kStageIntro + "\n" + join(tpl.stage_list, "\n") + "\n" +
               tpl.contract_sentence;
    }
    return question + "\n" + tpl.contract_sentence + "\n" +
           (base_strategy(s) == Strategy::cot ? kCotSuffix : kPsSuffix);
}

}  // namespace

PromptBundle render_zero_shot(const TemplateRegistry& reg, Strategy s, const TaskSpec& spec,
                              const Instance& instance, const DecodingOverrides& overrides) {
    if (!is_zero_shot(s))
        throw ConfigError(to_string(s) + " is not a zero-shot strategy");
    const PromptTemplate& tpl = reg.get(spec.task_id, s);
    return finish_bundle(zero_shot_text(tpl, s, instance), s, 0, overrides);
}

PromptBundle render_few_shot(const TemplateRegistry& reg, Strategy s, const TaskSpec& spec,
                             const Instance& instance, const ExemplarSet& exemplars,
                             int expected_shots, const DecodingOverrides& overrides) {
    if (!is_few_shot(s))
        throw ConfigError(to_string(s) + " is not a few-shot strategy");
    if (exemplars.task_id != spec.task_id)
        throw ExemplarTaskMismatch("exemplars for '" + exemplars.task_id + "' used with task '" +
                                   spec.task_id + "'");
    if (static_cast<int>(exemplars.size()) != expected_shots)
        throw ExemplarTaskMismatch("expected " + std::to_string(expected_shots) +
                                   " exemplars, got " + std::to_string(exemplars.size()));
    const PromptTemplate& tpl = reg.get(spec.task_id, s);
    std::string text;
    for (const auto& [demo, worked_answer] : exemplars.exemplars) {
        text += "Q: " + substitute_placeholders(tpl.body, demo.slot_values) + "\n";
        text += "A: " + worked_answer + "\n\n";
    }
    text += zero_shot_text(tpl, base_strategy(s), instance);
    return finish_bundle(std::move(text), s, static_cast<int>(exemplars.size()), overrides);
}

}  // namespace mpeval
