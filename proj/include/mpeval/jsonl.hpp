#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace mpeval {

std::vector<nlohmann::ordered_json> read_jsonl(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);

// tmp + rename, so readers never observe a partial file.
void atomic_write_file(const std::filesystem::path& path, const std::string& content);

std::string sha256_file(const std::filesystem::path& path);

}  // namespace mpeval
