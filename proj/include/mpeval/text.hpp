#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mpeval {

std::string trim(std::string_view s);
std::string to_lower_ascii(std::string_view s);

// Canonical label normalization used before every label membership test:
// trim, strip wrapping quotes, strip trailing punctuation, case-fold,
// collapse internal whitespace runs.
std::string normalize_label(std::string_view s);

// Splits on whitespace runs; no empty tokens.
std::vector<std::string> split_whitespace(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

// True when `needle` occurs in `haystack` delimited by non-word characters
// (word characters are [A-Za-z0-9_]). Both sides are expected pre-normalized.
bool contains_word(std::string_view haystack, std::string_view needle);

// Case-insensitive (ASCII) search for the last occurrence of needle.
// Returns byte offset or npos.
size_t rfind_ci(std::string_view haystack, std::string_view needle);

// Half-away-from-zero rounding to one decimal: 92.65 -> 92.7.
double round1(double v);

// Formats with exactly one decimal digit ("92.7").
std::string format1(double v);

std::string sha256_hex(std::string_view data);

// ISO-8601 UTC ("2024-05-01T12:00:00Z").
std::string iso8601_now();
inline constexpr const char* kEpochTimestamp = "1970-01-01T00:00:00Z";

}  // namespace mpeval
