#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mpeval/catalog.hpp"
#include "mpeval/prompt.hpp"

namespace mpeval::test {

namespace fs = std::filesystem;

inline fs::path source_root() {
    return fs::path(MPEVAL_SOURCE_DIR);
}

inline fs::path templates_dir() {
    return source_root() / "templates";
}

inline fs::path fixture(const std::string& rel) {
    return source_root() / "tests" / rel;
}

inline std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Unique scratch directory, removed on destruction.
struct TempDir {
    fs::path path;
    TempDir() {
        static std::atomic<int> counter{0};
        path = fs::temp_directory_path() /
               ("mpeval_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter.fetch_add(1)));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
};

inline const TemplateRegistry& registry() {
    static TemplateRegistry reg = TemplateRegistry::load_dir(templates_dir(), builtin_catalog());
    return reg;
}

// Demonstration slot values used by the golden-file tests.
inline Instance wic_demo_instance() {
    Instance inst;
    inst.instance_id = "wic-demo";
    inst.slot_values = {
        {"sentence_1", "The washing machine won't go unless it's plugged in."},
        {"sentence_2", "The day went well until I got your call."},
        {"word", "go"}};
    inst.gold = {"False"};
    return inst;
}

inline Instance qnli_demo_instance() {
    Instance inst;
    inst.instance_id = "qnli-demo";
    inst.slot_values = {
        {"question", "Who was the first President to address the NAACP?"},
        {"sentence",
         "In front of 10,000 people at the Lincoln Memorial, the president left no doubt where "
         "he stood on civil rights."}};
    inst.gold = {"not_entailment"};
    return inst;
}

inline Instance ddi_demo_instance() {
    Instance inst;
    inst.instance_id = "ddi-demo";
    inst.slot_values = {
        {"sentence",
         "Impaired renal function has been described in bone marrow transplant patients who "
         "were conditioned with high-dose intravenous melphalan and who subsequently received "
         "cyclosporin to prevent graft-versus-host disease."},
        {"item_1", "melphalan"},
        {"item_2", "cyclosporin"}};
    inst.gold = {"Effect"};
    return inst;
}

}  // namespace mpeval::test
