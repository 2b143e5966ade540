#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>

#include "json.hpp"
#include "tabboost/util.hpp"

using namespace tabboost;
namespace fs = std::filesystem;

namespace {

const fs::path kDir = fs::temp_directory_path() / "tabboost_cli_test";

int run(const std::string& args) {
  const std::string cmd = std::string(TABBOOST_CLI) + " " + args + " >" + (kDir / "stdout.txt").string() + " 2>" +
                          (kDir / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string stderr_text() { return read_file((kDir / "stderr.txt").string()); }
std::string p(const std::string& name) { return (kDir / name).string(); }

// Small boost settings so each grid finishes quickly.
const std::string kSmall = " --shots 16 --folds 2 --rounds 2 --epochs 2";

}  // namespace

TEST_CASE("command line pipeline") {
  fs::remove_all(kDir);
  fs::create_directories(kDir);
  REQUIRE(run("synth --out " + p("data") + " --samples 200 --seed 3") == 0);
  const std::string ds = " --dataset " + p("data/synthetic.csv") + " --schema " + p("data/synthetic.schema.json");

  SUBCASE("stages") {
    REQUIRE(run("train-gbdt" + ds + " --out " + p("model.json") + " --trees 6 --depth 2") == 0);
    REQUIRE(run("extract-paths --model " + p("model.json") + ds + " --rounds 3 --out " + p("paths.jsonl")) == 0);
    const auto paths = read_file(p("paths.jsonl"));
    CHECK(std::count(paths.begin(), paths.end(), '\n') == 600);
    REQUIRE(run("serialize" + ds + " --paths " + p("paths.jsonl") + " --round 2 --out " + p("prompts.jsonl")) == 0);
    const auto prompts = read_file(p("prompts.jsonl"));
    CHECK(std::count(prompts.begin(), prompts.end(), '\n') == 200);
    CHECK(prompts.find("Considering") != std::string::npos);
    REQUIRE(run("serialize" + ds + " --out " + p("features.jsonl")) == 0);
    CHECK(read_file(p("features.jsonl")).find("Considering") == std::string::npos);

    // a dump trained on other data is stale
    REQUIRE(run("synth --out " + p("other") + " --samples 100 --seed 4") == 0);
    CHECK(run("extract-paths --model " + p("model.json") + " --dataset " + p("other/synthetic.csv") + " --schema " +
              p("data/synthetic.schema.json") + " --out " + p("x.jsonl")) == 2);
    CHECK(stderr_text().find("stale") != std::string::npos);
  }

  SUBCASE("boost and evaluate") {
    REQUIRE(run("boost --config " + p("data/config.json") + kSmall + " --out " + p("run1")) == 0);
    CHECK(fs::exists(p("run1/manifest.json")));
    CHECK(fs::exists(p("run1/reports/summary.csv")));
    REQUIRE(run("evaluate " + p("run1") + " --out " + p("table.csv")) == 0);
    CHECK(read_file(p("table.csv")).rfind("method,shots,Avg.,synthetic\n", 0) == 0);
    CHECK(fs::exists(p("table.json")));

    // editing a report after the run is detected
    write_file(p("run1/reports/scores.csv"), read_file(p("run1/reports/scores.csv")) + "\n");
    CHECK(run("evaluate " + p("run1")) == 2);
    CHECK(stderr_text().find("stale") != std::string::npos);
  }

  SUBCASE("external learner") {
    const std::string echo = std::string(TABBOOST_ECHO_LEARNER);
    CHECK(run("boost" + ds + kSmall + " --learner-cmd '" + echo + " 0.5' --out " + p("echo")) == 0);
    CHECK(run("boost" + ds + kSmall + " --learner-cmd '" + echo + " --die train_round' --out " + p("dead")) == 3);
    CHECK(run("boost" + ds + kSmall + " --learner-cmd '" + echo + " --version 2' --out " + p("old")) == 3);
  }

  SUBCASE("sweep") {
    REQUIRE(run("sweep" + ds + kSmall + " --axis round_epoch --grid 1x4,2x2,4x1 --budget 4 --out " + p("sw")) == 0);
    const auto table = read_file(p("sw/sweep_round_epoch.csv"));
    CHECK(table.rfind("round_epoch,1x4,2x2,4x1\nAvg. AP,", 0) == 0);
    CHECK(run("sweep" + ds + kSmall + " --axis round_epoch --grid 1x4,2x3 --budget 4 --out " + p("sw2")) == 1);
    CHECK(run("sweep" + ds + kSmall + " --axis depth --out " + p("sw3")) == 1);
  }

  SUBCASE("errors map to exit codes") {
    CHECK(run("") == 1);
    CHECK(run("boost --bogus") == 1);
    CHECK(run("boost --config " + p("data/config.json") + " --rounds 0 --out " + p("r0")) == 1);
    CHECK(run("boost --config " + p("missing.json")) == 1);
    CHECK(run("--isa nosuch synth --out " + p("isa")) == 1);
    CHECK(run("--isa scalar synth --out " + p("isa")) == 0);
    write_file(p("bad.csv"), "age,income\n1,2,3\n");
    CHECK(run("boost --dataset " + p("bad.csv") + " --schema " + p("data/synthetic.schema.json") + " --out " + p("b")) == 2);
    write_file(p("bad_config.json"), R"({"boost":{"rounds":2,"epoch":3}})");
    CHECK(run("boost --config " + p("bad_config.json")) == 1);
    CHECK(stderr_text().find("boost.epoch: unknown key") != std::string::npos);
  }

  SUBCASE("config paths resolve against the config file") {
    const auto cfg = nlohmann::json::parse(read_file(p("data/config.json")));
    CHECK(cfg["dataset"] == "synthetic.csv");
    REQUIRE(fs::create_directories(kDir / "elsewhere"));
    const auto cwd = fs::current_path();
    fs::current_path(kDir / "elsewhere");
    CHECK(run("boost --config ../data/config.json" + kSmall + " --out " + p("rel")) == 0);
    fs::current_path(cwd);
  }
}
