#include "mpeval/parser.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "mpeval/errors.hpp"
#include "mpeval/text.hpp"

namespace mpeval {

namespace {

bool is_sentence_end(char c) {
    return c == '.' || c == '!' || c == '?' || c == '\n';
}

// Last two non-empty sentences, normalized, joined. Lenient scans this.
std::string tail_sentences(const std::string& raw, int count) {
    std::vector<std::string> sentences;
    std::string current;
    for (char c : raw) {
        if (is_sentence_end(c)) {
            if (!trim(current).empty()) sentences.push_back(current);
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    if (!trim(current).empty()) sentences.push_back(current);
    std::string out;
    size_t begin = sentences.size() > static_cast<size_t>(count) ? sentences.size() - count : 0;
    for (size_t i = begin; i < sentences.size(); ++i) out += sentences[i] + " ";
    return normalize_label(out);
}

std::optional<std::string> resolve_label(const AnswerContract& c, const std::string& raw) {
    std::string norm = normalize_label(raw);
    for (const auto& l : c.allowed_labels)
        if (normalize_label(l) == norm) return l;
    return std::nullopt;
}

// Splits a multi-label hole on commas, then on " and " within segments that
// are not themselves labels (some label names contain "and").
std::vector<std::string> split_label_list(const AnswerContract& c, const std::string& hole) {
    std::vector<std::string> segments;
    std::string current;
    for (char ch : hole) {
        if (ch == ',') {
            segments.push_back(current);
            current.clear();
        } else {
            current.push_back(ch);
        }
    }
    segments.push_back(current);
    std::vector<std::string> out;
    for (const auto& seg : segments) {
        if (trim(seg).empty()) continue;
        if (resolve_label(c, seg) || (c.none_label && normalize_label(seg) == "none")) {
            out.push_back(seg);
            continue;
        }
        std::string rest = seg;
        size_t pos;
        while ((pos = rest.find(" and ")) != std::string::npos) {
            out.push_back(rest.substr(0, pos));
            rest = rest.substr(pos + 5);
        }
        out.push_back(rest);
    }
    return out;
}

ExtractedAnswer labels_from_hole(const AnswerContract& c, const std::string& hole,
                                 std::optional<size_t> expected_tokens, ParseMode mode) {
    ExtractedAnswer ans;
    ans.mode = mode;
    switch (c.kind) {
        case ContractKind::single_label: {
            auto label = resolve_label(c, hole);
            if (!label) throw ParseFailure("hole '" + hole + "' is not an allowed label");
            ans.labels = {*label};
            return ans;
        }
        case ContractKind::multi_label: {
            std::set<std::string> found;
            for (const auto& part : split_label_list(c, hole)) {
                if (auto label = resolve_label(c, part)) {
                    found.insert(*label);
                } else if (c.none_label && normalize_label(part) == "none") {
                    found.insert(*c.none_label);
                } else {
                    ++ans.dropped_labels;  // models paraphrase; drop with a count
                }
            }
            if (found.empty()) throw ParseFailure("no allowed label in '" + hole + "'");
            ans.labels.assign(found.begin(), found.end());
            return ans;
        }
        case ContractKind::tag_sequence: {
            // The tag list is the leading run of valid token/TAG pairs; text
            // after it (a confidence sentence on the same line) is ignored.
            // No realignment: the pair count must still match exactly.
            std::vector<std::string> tags;
            for (const auto& pair : split_whitespace(hole)) {
                size_t slash = pair.rfind('/');
                if (slash == std::string::npos) break;
                auto tag = resolve_label(c, pair.substr(slash + 1));
                if (!tag) break;
                tags.push_back(*tag);
            }
            if (tags.empty()) throw ParseFailure("no token/TAG pairs in '" + hole + "'");
            if (expected_tokens && tags.size() != *expected_tokens)
                throw ParseFailure(std::to_string(tags.size()) + " tags for " +
                                   std::to_string(*expected_tokens) + " tokens");
            ans.labels = std::move(tags);
            return ans;
        }
    }
    throw ParseFailure("unreachable contract kind");
}

std::optional<ExtractedAnswer> try_strict(const std::string& raw, const AnswerContract& c,
                                          std::optional<size_t> expected_tokens) {
    // Match the frame without its trailing whitespace, then skip any run of
    // whitespace (including a line break) before the hole: models often wrap
    // after the colon.
    std::string prefix = trim(c.frame_prefix());
    size_t pos = rfind_ci(raw, prefix);
    if (pos == std::string::npos) return std::nullopt;
    size_t start = pos + prefix.size();
    while (start < raw.size() && std::isspace(static_cast<unsigned char>(raw[start]))) ++start;
    size_t end;
    std::string suffix = c.frame_suffix();
    if (!suffix.empty()) {
        end = to_lower_ascii(raw).find(to_lower_ascii(suffix), start);
        if (end == std::string::npos) return std::nullopt;
    } else if (c.kind == ContractKind::tag_sequence) {
        end = raw.find('\n', start);
        if (end == std::string::npos) end = raw.size();
    } else {
        end = start;
        while (end < raw.size() && !is_sentence_end(raw[end])) ++end;
    }
    std::string hole = raw.substr(start, end - start);
    try {
        return labels_from_hole(c, hole, expected_tokens, ParseMode::strict);
    } catch (const ParseFailure&) {
        return std::nullopt;  // fall through to lenient
    }
}

ExtractedAnswer lenient(const std::string& raw, const AnswerContract& c) {
    if (c.kind == ContractKind::tag_sequence)
        throw ParseFailure("no contract frame found for tag sequence");
    std::string tail = tail_sentences(raw, 2);
    if (tail.empty()) throw ParseFailure("empty response");
    std::set<std::string> found;
    for (const auto& l : c.allowed_labels)
        if (contains_word(tail, normalize_label(l))) found.insert(l);
    ExtractedAnswer ans;
    ans.mode = ParseMode::lenient;
    if (c.kind == ContractKind::single_label) {
        if (found.empty()) throw ParseFailure("no allowed label in final sentences");
        if (found.size() > 1)
            throw AmbiguousAnswer(std::to_string(found.size()) +
                                  " distinct labels in final sentences");
        ans.labels = {*found.begin()};
        return ans;
    }
    if (found.empty() && c.none_label && contains_word(tail, "none")) found.insert(*c.none_label);
    if (found.empty()) throw ParseFailure("no allowed label in final sentences");
    ans.labels.assign(found.begin(), found.end());
    return ans;
}

}  // namespace

std::string to_string(ParseMode m) {
    switch (m) {
        case ParseMode::strict: return "strict";
        case ParseMode::lenient: return "lenient";
        case ParseMode::failed: return "failed";
    }
    return "?";
}

ParseMode parse_mode_from_string(const std::string& s) {
    if (s == "strict") return ParseMode::strict;
    if (s == "lenient") return ParseMode::lenient;
    if (s == "failed") return ParseMode::failed;
    throw ConfigError("unknown parse mode: '" + s + "'");
}

ExtractedAnswer extract_answer(const std::string& raw, const AnswerContract& contract,
                               std::optional<size_t> expected_tokens) {
    if (auto strict = try_strict(raw, contract, expected_tokens)) return *strict;
    return lenient(raw, contract);
}

std::optional<int> extract_confidence(const std::string& raw) {
    std::string low = to_lower_ascii(raw);
    std::optional<int> result;
    for (size_t i = 0; i < low.size(); ++i) {
        if (!std::isdigit(static_cast<unsigned char>(low[i]))) continue;
        size_t start = i;
        while (i < low.size() && std::isdigit(static_cast<unsigned char>(low[i]))) ++i;
        size_t after = i;
        while (after < low.size() && low[after] == ' ') ++after;
        if (after >= low.size() || low[after] != '%') continue;
        // Range endpoints ("0-100%") are instructions, not assertions.
        if (start > 0 && low[start - 1] == '-') continue;
        // Needs "confident"/"confidence" nearby: before the number, or after
        // it within the same sentence.
        size_t before_begin = start > 60 ? start - 60 : 0;
        bool context = low.substr(before_begin, start - before_begin).find("confiden") !=
                       std::string::npos;
        if (!context) {
            size_t sentence_end = after;
            while (sentence_end < low.size() && !is_sentence_end(low[sentence_end]) &&
                   sentence_end - after < 40)
                ++sentence_end;
            context = low.substr(after, sentence_end - after).find("confiden") !=
                      std::string::npos;
        }
        if (!context) continue;
        long value = std::stol(low.substr(start, i - start));
        if (value > 100)
            throw ConfidenceOutOfRange("confidence " + std::to_string(value) + "% exceeds 100%");
        result = static_cast<int>(value);
    }
    return result;
}

std::optional<std::vector<std::string>> segment_stages(const std::string& raw) {
    struct Marker {
        size_t line_start;
        size_t content_start;
    };
    std::vector<Marker> markers;
    size_t pos = 0;
    while (pos <= raw.size()) {
        size_t line_end = raw.find('\n', pos);
        if (line_end == std::string::npos) line_end = raw.size();
        size_t p = pos;
        while (p < line_end && (raw[p] == ' ' || raw[p] == '\t')) ++p;
        size_t d = p;
        while (d < line_end && std::isdigit(static_cast<unsigned char>(raw[d]))) ++d;
        if (d > p && d < line_end && raw[d] == '.') {
            size_t content = d + 1;
            while (content < line_end && raw[content] == ' ') ++content;
            markers.push_back({pos, content});
        }
        if (line_end == raw.size()) break;
        pos = line_end + 1;
    }
    if (markers.size() < 5) return std::nullopt;
    std::vector<std::string> segments;
    for (size_t k = 0; k < 5; ++k) {
        size_t begin = markers[k].content_start;
        size_t end = k < 4 ? markers[k + 1].line_start : raw.size();
        std::string seg = trim(raw.substr(begin, end - begin));
        if (seg.empty()) return std::nullopt;
        segments.push_back(std::move(seg));
    }
    return segments;
}

ParsedResponse parse_response(const std::string& raw, const TaskSpec& spec,
                              const Instance& instance, int sample_index) {
    ParsedResponse r;
    r.instance_id = instance.instance_id;
    r.sample_index = sample_index;
    std::optional<size_t> expected_tokens;
    if (spec.label_space.kind == LabelKind::tag_sequence && !spec.template_slots.empty()) {
        auto it = instance.slot_values.find(spec.template_slots.front());
        if (it != instance.slot_values.end())
            expected_tokens = split_whitespace(it->second).size();
    }
    try {
        ExtractedAnswer ans = extract_answer(raw, spec.answer_contract, expected_tokens);
        r.labels = std::move(ans.labels);
        r.parse_mode = ans.mode;
        r.dropped_labels = ans.dropped_labels;
    } catch (const Error& e) {
        r.parse_mode = ParseMode::failed;
        r.error = e.what();
    }
    try {
        r.confidence = extract_confidence(raw);
    } catch (const ConfidenceOutOfRange&) {
        r.confidence = std::nullopt;
    }
    r.stages = segment_stages(raw);
    return r;
}

}  // namespace mpeval
