// mpeval: prompt-strategy evaluation harness CLI.
//
// Subcommands: catalog, render, run, resume, score, report, annotate.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

#include "mpeval/errors.hpp"
#include "mpeval/jsonl.hpp"
#include "mpeval/run.hpp"
#include "mpeval/text.hpp"

namespace fs = std::filesystem;
using namespace mpeval;

namespace {

// Config file plus flag overrides; flags win.
struct RunFlags {
    std::string config_file;
    std::string task, strategy, backend_kind, out, run_id, parse_failure_mode;
    long long seed = -1;
    long long eval_n = -1;
    bool resume_flag = false;
};

RunConfig build_config(const RunFlags& f) {
    if (f.config_file.empty()) throw ConfigError("--config <file> is required");
    RunConfig cfg = RunConfig::from_file(f.config_file);
    if (!f.task.empty()) cfg.task_id = f.task;
    if (!f.strategy.empty()) cfg.strategy = strategy_from_string(f.strategy);
    if (!f.backend_kind.empty()) {
        if (f.backend_kind == "http")
            cfg.backend.kind = BackendConfig::Kind::http;
        else if (f.backend_kind == "scripted")
            cfg.backend.kind = BackendConfig::Kind::scripted;
        else
            throw ConfigError("unknown backend kind: '" + f.backend_kind + "'");
    }
    if (f.seed >= 0) cfg.seed = static_cast<uint64_t>(f.seed);
    if (f.eval_n >= 0) cfg.eval_n = static_cast<size_t>(f.eval_n);
    if (!f.out.empty()) cfg.output_dir = f.out;
    if (!f.run_id.empty()) cfg.run_id = f.run_id;
    if (!f.parse_failure_mode.empty())
        cfg.parse_failure_mode = parse_failure_mode_from_string(f.parse_failure_mode);
    return cfg;
}

void cmd_catalog(bool as_json, const std::string& show_task) {
    auto specs = builtin_catalog();
    if (!show_task.empty()) {
        std::cout << builtin_task(show_task).to_json().dump(2) << "\n";
        return;
    }
    if (as_json) {
        json out = json::array();
        for (const auto& s : specs) out.push_back(s.to_json());
        std::cout << out.dump(2) << "\n";
        return;
    }
    std::printf("%-12s %-10s %-20s %8s  %s\n", "task", "benchmark", "kind", "classes", "metrics");
    for (const auto& s : specs) {
        std::printf("%-12s %-10s %-20s %8zu  %s\n", s.task_id.c_str(),
                    to_string(s.benchmark).c_str(), to_string(s.task_kind).c_str(),
                    s.label_space.labels.size(), join(s.metrics, ", ").c_str());
    }
}

// Renders every prompt of a config without calling any backend; useful for
// prompt inspection and for authoring scripted fixtures.
void cmd_render(const RunFlags& flags, const std::string& out_file) {
    RunConfig cfg = build_config(flags);
    cfg.validate();

    auto specs = builtin_catalog();
    if (cfg.task_file) {
        TaskSpec custom = load_task_spec(*cfg.task_file);
        bool replaced = false;
        for (auto& s : specs)
            if (s.task_id == custom.task_id) {
                s = custom;
                replaced = true;
            }
        if (!replaced) specs.push_back(custom);
    }
    const TaskSpec* spec = nullptr;
    for (const auto& s : specs)
        if (s.task_id == cfg.task_id) spec = &s;
    if (!spec) throw ConfigError("unknown task '" + cfg.task_id + "'");

    TemplateRegistry registry = TemplateRegistry::load_dir(cfg.templates_dir, specs);
    auto instances = load_dataset(cfg.dataset_path, cfg.dataset_format, *spec, cfg.split);
    auto subset = sample_eval_subset(instances, cfg.eval_n, cfg.seed);

    std::optional<ExemplarSet> exemplars;
    if (is_few_shot(cfg.strategy)) {
        auto train = load_dataset(*cfg.train_path, cfg.train_format, *spec, "train");
        auto answers = read_worked_answers(*cfg.answers_path);
        exemplars = select_exemplars(*spec, train, cfg.effective_shots(), cfg.exemplar_seed,
                                     answers);
    }

    std::ostream* out = &std::cout;
    std::ofstream file;
    if (!out_file.empty()) {
        file.open(out_file);
        out = &file;
    }
    for (const auto& inst : subset) {
        PromptBundle bundle =
            exemplars ? render_few_shot(registry, cfg.strategy, *spec, inst, *exemplars,
                                        cfg.effective_shots(), cfg.overrides)
                      : render_zero_shot(registry, cfg.strategy, *spec, inst, cfg.overrides);
        for (int i = 0; i < bundle.decoding.sample_count; ++i) {
            json line;
            line["instance_id"] = inst.instance_id;
            line["sample_index"] = i;
            line["prompt_hash"] = bundle.prompt_hash;
            line["text"] = bundle.text;
            *out << line.dump() << "\n";
        }
    }
}

void print_manifest_summary(const RunManifest& m) {
    std::printf("run %s: %s (%zu/%zu instances)\n", m.run_id.c_str(), m.status.c_str(),
                m.progress.size(), m.subset_ids.size());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"prompt-strategy evaluation harness"};
    app.require_subcommand(1);

    // catalog
    auto* catalog_cmd = app.add_subcommand("catalog", "inspect the built-in task catalog");
    catalog_cmd->require_subcommand(1);
    auto* catalog_list = catalog_cmd->add_subcommand("list", "list the ten built-in tasks");
    bool catalog_json = false;
    catalog_list->add_flag("--json", catalog_json, "emit JSON");
    auto* catalog_show = catalog_cmd->add_subcommand("show", "print one task spec as JSON");
    std::string show_task;
    catalog_show->add_option("task", show_task, "task id")->required();

    RunFlags flags;
    auto add_run_flags = [&](CLI::App* cmd) {
        cmd->add_option("--config", flags.config_file, "run config JSON file");
        cmd->add_option("--task", flags.task, "task id override");
        cmd->add_option("--strategy", flags.strategy, "strategy override (MP/CoT/PS/M-CoT/CoT-SC/M-MP)");
        cmd->add_option("--backend", flags.backend_kind, "backend kind override (http/scripted)");
        cmd->add_option("--seed", flags.seed, "evaluation subset seed override");
        cmd->add_option("--eval-n", flags.eval_n, "evaluation subset size override");
        cmd->add_option("--out", flags.out, "output directory override");
        cmd->add_option("--run-id", flags.run_id, "run id override");
        cmd->add_option("--parse-failure-mode", flags.parse_failure_mode,
                        "count-wrong (default) or exclude");
    };

    // render
    auto* render_cmd = app.add_subcommand("render", "render prompts without calling a backend");
    add_run_flags(render_cmd);
    std::string render_out;
    render_cmd->add_option("--out-file", render_out, "write JSONL here instead of stdout");

    // run
    auto* run_cmd = app.add_subcommand("run", "execute one evaluation run");
    add_run_flags(run_cmd);
    run_cmd->add_flag("--resume", flags.resume_flag, "resume if a manifest already exists");

    // resume
    auto* resume_cmd = app.add_subcommand("resume", "resume an interrupted run");
    std::string resume_dir;
    resume_cmd->add_option("dir", resume_dir, "run directory")->required();

    // score
    auto* score_cmd = app.add_subcommand("score", "re-score a completed run");
    std::string score_dir, score_mode = "count-wrong";
    bool score_write = false;
    score_cmd->add_option("--run", score_dir, "run directory")->required();
    score_cmd->add_option("--parse-failure-mode", score_mode, "count-wrong or exclude");
    score_cmd->add_flag("--write", score_write, "rewrite scores.json");

    // report
    auto* report_cmd = app.add_subcommand("report", "aggregate completed runs");
    ReportOptions ropts;
    std::vector<std::string> report_dirs;
    std::string select;
    report_cmd->add_option("--mode", ropts.mode, "table2|table3|fig3|calibration|errors")
        ->required();
    report_cmd->add_option("--out", ropts.out_dir, "output directory")->required();
    report_cmd->add_option("--select", select, "best: pick the best run per cell");
    report_cmd->add_option("--metric", ropts.select_metric, "metric used by --select best");
    report_cmd->add_option("--shots", ropts.shots, "shot setting for table3 (default 0)");
    report_cmd->add_option("--threshold", ropts.threshold,
                           "high-confidence threshold (default 75)");
    report_cmd->add_flag("--macro", ropts.macro_calibration,
                         "average calibration percentages per run instead of pooling");
    report_cmd->add_option("dirs", report_dirs, "run directories")->required();

    // annotate
    auto* annotate_cmd = app.add_subcommand("annotate", "ingest error annotations for a run");
    std::string annotate_dir, annotate_file;
    annotate_cmd->add_option("--run", annotate_dir, "run directory")->required();
    annotate_cmd->add_option("--file", annotate_file, "annotations JSONL file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*catalog_cmd) {
            cmd_catalog(catalog_json, *catalog_show ? show_task : "");
        } else if (*render_cmd) {
            cmd_render(flags, render_out);
        } else if (*run_cmd) {
            RunConfig cfg = build_config(flags);
            if (flags.resume_flag && fs::exists(cfg.output_dir / "manifest.json")) {
                print_manifest_summary(resume(cfg.output_dir));
            } else {
                print_manifest_summary(run_eval(cfg));
            }
        } else if (*resume_cmd) {
            print_manifest_summary(resume(resume_dir));
        } else if (*score_cmd) {
            ScoreReport r = rescore(score_dir, parse_failure_mode_from_string(score_mode),
                                    score_write);
            std::cout << r.to_json().dump(2) << "\n";
        } else if (*report_cmd) {
            if (!select.empty()) {
                if (select != "best") throw ConfigError("--select only supports 'best'");
                ropts.select_best = true;
            }
            std::vector<fs::path> dirs(report_dirs.begin(), report_dirs.end());
            for (const auto& p : write_report(dirs, ropts))
                std::cout << "wrote " << p.string() << "\n";
        } else if (*annotate_cmd) {
            int n = annotate_run(annotate_dir, annotate_file);
            std::cout << "ingested " << n << " annotations\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
