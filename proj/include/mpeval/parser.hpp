#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mpeval/task.hpp"

namespace mpeval {

enum class ParseMode { strict, lenient, failed };
std::string to_string(ParseMode m);
ParseMode parse_mode_from_string(const std::string& s);

struct ParsedResponse {
    std::string instance_id;
    int sample_index = 0;
    // Canonical labels: sorted set for classification, token-order tag list
    // for tag-sequence contracts. Empty iff parse_mode == failed.
    std::vector<std::string> labels;
    std::optional<int> confidence;                       // verbalized percent, 0-100
    std::optional<std::vector<std::string>> stages;      // five MP stage segments
    ParseMode parse_mode = ParseMode::failed;
    std::optional<std::string> error;                    // set when failed
    int dropped_labels = 0;  // multi-label elements not in the label space
};

struct ExtractedAnswer {
    std::vector<std::string> labels;
    ParseMode mode = ParseMode::strict;
    int dropped_labels = 0;
};

// Strict mode reads the hole of the last contract-frame occurrence; lenient
// mode scans the final two sentences for allowed labels. Throws ParseFailure
// when neither succeeds, AmbiguousAnswer when lenient finds two or more
// distinct labels for a single-label contract. expected_tokens, when given,
// enforces tag-sequence alignment.
ExtractedAnswer extract_answer(const std::string& raw, const AnswerContract& contract,
                               std::optional<size_t> expected_tokens = std::nullopt);

// Last percentage asserted as confidence ("83% confident", "confidence ...
// 90%"). Absent pattern -> nullopt; n > 100 -> ConfidenceOutOfRange. Range
// notations like "(0-100%)" never count.
std::optional<int> extract_confidence(const std::string& raw);

// Best-effort split on leading "1."…"5." enumerators at line starts; nullopt
// when fewer than five enumerated blocks exist. Extra blocks fold into the
// fifth segment. Never throws.
std::optional<std::vector<std::string>> segment_stages(const std::string& raw);

// Total pipeline over one transcript: answer + confidence + stages; parse
// errors land in .error with parse_mode == failed.
ParsedResponse parse_response(const std::string& raw, const TaskSpec& spec,
                              const Instance& instance, int sample_index = 0);

}  // namespace mpeval
