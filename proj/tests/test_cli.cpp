// Drives the installed CLI binary over the committed demo files. Doubles as a
// drift guard: if templates or the demo dataset change, the committed fixture
// hashes stop matching and the run subcommand fails.

#include <doctest.h>

#include <cstdlib>

#include "helpers.hpp"
#include "mpeval/jsonl.hpp"
#include "mpeval/run.hpp"

using namespace mpeval;
using namespace mpeval::test;
namespace fs = std::filesystem;

TEST_SUITE_BEGIN("cli");

namespace {

int run_cli(const std::string& args) {
    std::string cmd = "cd '" + source_root().string() + "' && '" MPEVAL_BIN "' " + args +
                      " >/dev/null 2>&1";
    return std::system(cmd.c_str());
}

}  // namespace

TEST_CASE("demo workflow: run, resume, score, report, annotate") {
    TempDir tmp;
    fs::path out = tmp.path / "demo-out";

    CHECK(run_cli("catalog list") == 0);
    CHECK(run_cli("catalog show qnli") == 0);
    CHECK(run_cli("render --config demo/config.json --out-file '" +
                  (tmp.path / "prompts.jsonl").string() + "'") == 0);
    CHECK(read_jsonl(tmp.path / "prompts.jsonl").size() == 3);

    REQUIRE(run_cli("run --config demo/config.json --out '" + out.string() + "'") == 0);
    CHECK(fs::exists(out / "scores.json"));
    json scores = json::parse(slurp(out / "scores.json"));
    CHECK(scores["values"][0]["value"] == 66.7);

    // Resuming a complete run is a no-op.
    CHECK(run_cli("resume '" + out.string() + "'") == 0);

    CHECK(run_cli("score --run '" + out.string() + "' --parse-failure-mode exclude") == 0);

    CHECK(run_cli("annotate --run '" + out.string() + "' --file demo/annotations.jsonl") == 0);
    CHECK(fs::exists(out / "annotations.jsonl"));

    fs::path report_dir = tmp.path / "report";
    CHECK(run_cli("report --mode calibration --out '" + report_dir.string() + "' '" +
                  out.string() + "'") == 0);
    CHECK(fs::exists(report_dir / "calibration.json"));
    CHECK(run_cli("report --mode errors --out '" + report_dir.string() + "' '" + out.string() +
                  "'") == 0);
    CHECK(fs::exists(report_dir / "errors.json"));

    // Unknown flags and missing configs exit nonzero.
    CHECK(run_cli("run") != 0);
    CHECK(run_cli("report --mode bogus --out '" + report_dir.string() + "' '" + out.string() +
                  "'") != 0);
}

TEST_CASE("committed example configs stay parseable") {
    RunConfig demo = RunConfig::from_file(source_root() / "demo" / "config.json");
    CHECK_NOTHROW(demo.validate());
    CHECK(demo.strategy == Strategy::mp);
    CHECK(demo.eval_n == 3);

    RunConfig http = RunConfig::from_file(source_root() / "demo" / "http_config.json");
    CHECK_NOTHROW(http.validate());
    CHECK(http.backend.kind == BackendConfig::Kind::http);
    CHECK(http.backend.auth_ref == "OPENAI_API_KEY");
    CHECK(http.eval_n == 600);
}

TEST_SUITE_END();
