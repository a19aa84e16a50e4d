#include "mpeval/text.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <ctime>

namespace mpeval {

namespace {

bool is_word_char(unsigned char c) {
    return std::isalnum(c) != 0 || c == '_';
}

// Wrapping quote marks, including the UTF-8 curly variants used in prompts.
const std::array<std::string_view, 7> kQuoteMarks = {
    "\"", "'", "`", "\xe2\x80\x9c", "\xe2\x80\x9d", "\xe2\x80\x98", "\xe2\x80\x99"};

bool strip_prefix_mark(std::string& s) {
    for (auto m : kQuoteMarks) {
        if (s.size() >= m.size() && std::string_view(s).substr(0, m.size()) == m) {
            s.erase(0, m.size());
            return true;
        }
    }
    return false;
}

bool strip_suffix_mark(std::string& s) {
    for (auto m : kQuoteMarks) {
        if (s.size() >= m.size() && std::string_view(s).substr(s.size() - m.size()) == m) {
            s.erase(s.size() - m.size());
            return true;
        }
    }
    if (!s.empty() && std::strchr(".,;:!?", s.back()) != nullptr) {
        s.pop_back();
        return true;
    }
    return false;
}

}  // namespace

std::string trim(std::string_view s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string to_lower_ascii(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string normalize_label(std::string_view sv) {
    std::string s = trim(sv);
    bool changed = true;
    while (changed && !s.empty()) {
        changed = strip_prefix_mark(s);
        changed = strip_suffix_mark(s) || changed;
        s = trim(s);
    }
    s = to_lower_ascii(s);
    std::string out;
    out.reserve(s.size());
    bool in_space = false;
    for (unsigned char c : s) {
        if (std::isspace(c)) {
            in_space = true;
            continue;
        }
        if (in_space && !out.empty()) out.push_back(' ');
        in_space = false;
        out.push_back(static_cast<char>(c));
    }
    return out;
}

std::vector<std::string> split_whitespace(std::string_view s) {
    std::vector<std::string> out;
    size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        size_t start = i;
        while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        if (i > start) out.emplace_back(s.substr(start, i - start));
    }
    return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

bool contains_word(std::string_view haystack, std::string_view needle) {
    if (needle.empty()) return false;
    size_t pos = 0;
    while ((pos = haystack.find(needle, pos)) != std::string_view::npos) {
        bool left_ok = pos == 0 || !is_word_char(haystack[pos - 1]);
        size_t end = pos + needle.size();
        bool right_ok = end == haystack.size() || !is_word_char(haystack[end]);
        if (left_ok && right_ok) return true;
        ++pos;
    }
    return false;
}

size_t rfind_ci(std::string_view haystack, std::string_view needle) {
    if (needle.empty() || needle.size() > haystack.size()) return std::string::npos;
    std::string h = to_lower_ascii(haystack);
    std::string n = to_lower_ascii(needle);
    return h.rfind(n);
}

double round1(double v) {
    if (v >= 0) return std::floor(v * 10.0 + 0.5) / 10.0;
    return -std::floor(-v * 10.0 + 0.5) / 10.0;
}

std::string format1(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.1f", v);
    return buf;
}

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

std::string iso8601_now() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace mpeval
