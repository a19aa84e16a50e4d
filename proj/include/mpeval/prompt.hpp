#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mpeval/task.hpp"

namespace mpeval {

// Prompting strategies: zero-shot {MP, CoT, PS}, few-shot {M-CoT, CoT-SC, M-MP}.
enum class Strategy { mp, cot, ps, m_cot, cot_sc, m_mp };

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);
bool is_zero_shot(Strategy s);
bool is_few_shot(Strategy s);
// Template family a strategy renders from: M-MP -> MP, M-CoT/CoT-SC -> CoT.
Strategy base_strategy(Strategy s);

struct DecodingParams {
    double temperature = 0.0;
    int sample_count = 1;
    int max_tokens = 1024;

    void validate() const;  // temperature 0 implies sample_count 1
    bool operator==(const DecodingParams&) const = default;
};

struct DecodingOverrides {
    std::optional<double> temperature;
    std::optional<int> sample_count;
    std::optional<int> max_tokens;

    bool empty() const { return !temperature && !sample_count && !max_tokens; }
};

// Default regime: CoT-SC samples 10 completions at temperature 0.7, everything
// else is greedy. Overrides are validated and recorded in the run manifest.
DecodingParams decoding_params_for(Strategy s, const DecodingOverrides& overrides = {});

struct PromptTemplate {
    std::string task_id;
    Strategy strategy = Strategy::mp;
    std::string body;                      // task question with {placeholder} markers
    std::string contract_sentence;         // fixed final-answer instruction
    std::vector<std::string> stage_list;   // the five numbered MP instructions

    void validate(const TaskSpec& spec) const;
};

struct PromptBundle {
    std::string text;         // final rendered prompt, sent as a single message
    Strategy strategy = Strategy::mp;
    int shots = 0;
    DecodingParams decoding;
    std::string prompt_hash;  // sha256 of text
};

// Loads template files (plain text with a task_id/strategy header) from a
// directory and binds each to its task's answer contract.
class TemplateRegistry {
  public:
    static TemplateRegistry load_dir(const std::filesystem::path& dir,
                                     const std::vector<TaskSpec>& specs);

    // Resolves few-shot strategies through base_strategy; throws MissingTemplate.
    const PromptTemplate& get(const std::string& task_id, Strategy s) const;
    bool has(const std::string& task_id, Strategy s) const;

    // file name -> sha256 of file content, recorded in run manifests.
    const std::map<std::string, std::string>& file_digests() const { return digests_; }

    void add(PromptTemplate tpl);  // for tests and in-memory registries

  private:
    std::map<std::pair<std::string, int>, PromptTemplate> templates_;
    std::map<std::string, std::string> digests_;
};

// Replaces {name} markers (name = [A-Za-z0-9_]+) with slot values; empty
// string is a valid binding. Other brace groups ("{}", "{label, ...}") pass
// through verbatim.
std::string substitute_placeholders(const std::string& body,
                                    const std::map<std::string, std::string>& slots);

PromptBundle render_zero_shot(const TemplateRegistry& reg, Strategy s, const TaskSpec& spec,
                              const Instance& instance, const DecodingOverrides& overrides = {});

// Interleaves "Q: ... A: ..." demonstration blocks (worked answers verbatim)
// followed by the zero-shot render of the query.
PromptBundle render_few_shot(const TemplateRegistry& reg, Strategy s, const TaskSpec& spec,
                             const Instance& instance, const ExemplarSet& exemplars,
                             int expected_shots = 5, const DecodingOverrides& overrides = {});

inline constexpr const char* kCotSuffix = "Let’s think step by step";
inline constexpr const char* kPsSuffix =
    "Let’s first understand the problem and devise a plan to solve the problem. "
    "Then, let’s carry out the plan and solve the problem step by step";
inline constexpr const char* kStageIntro = "As you perform this task, follow these steps:";

}  // namespace mpeval
