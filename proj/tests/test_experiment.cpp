#include <doctest.h>

#include <filesystem>
#include <map>
#include <sstream>

#include "json.hpp"

#include "tabboost/error.hpp"
#include "tabboost/experiment.hpp"
#include "tabboost/gbdt.hpp"
#include "tabboost/synthetic.hpp"
#include "tabboost/util.hpp"

using namespace tabboost;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("tabboost_experiment_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Small synthetic task on disk plus a config pointing at it.
RunConfig small_config(const fs::path& dir) {
  SyntheticConfig sc;
  sc.samples = 300;
  const Dataset data = make_synthetic(sc);
  write_file((dir / "data.csv").string(), dataset_to_csv(data));
  write_file((dir / "schema.json").string(), schema_to_json(data.schema));
  RunConfig c;
  c.dataset_path = (dir / "data.csv").string();
  c.schema_path = (dir / "schema.json").string();
  c.shots = {32};
  c.folds = 3;
  c.boost.rounds = 2;
  c.boost.epochs_per_round = 2;
  c.gbdt.train.n_estimators = 4;
  c.gbdt.train.max_depth = 2;
  c.learner.toy.dim = 512;
  return c;
}

std::string config_error(const std::string& text) {
  try {
    parse_run_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("config parsing") {
  const auto c = parse_run_config(R"({"dataset":"d.csv","schema":"s.json","shots":[4,"all"],"boost":{"rounds":3,"eta":0.5},
    "learner":{"kind":"external","command":"python3 learner.py","timeout_seconds":2.5},"views":"path-only"})");
  CHECK(c.dataset_path == "d.csv");
  CHECK(c.shots == std::vector<std::size_t>{4, SIZE_MAX});
  CHECK(c.boost.rounds == 3);
  CHECK(c.boost.eta == 0.5);
  CHECK(c.boost.epochs_per_round == 6);
  CHECK(c.learner.kind == LearnerKind::external);
  CHECK(c.learner.timeouts.predict.count() == 2500);
  CHECK(c.views == ViewMode::path_only);

  // serialized config parses back to the same document
  const auto text = run_config_to_json(c);
  CHECK(run_config_to_json(parse_run_config(text)) == text);

  CHECK(config_error(R"({"boost":{"round":3}})") == "boost.round: unknown key");
  CHECK(config_error(R"({"colour":1})") == "colour: unknown key");
  CHECK(config_error(R"({"folds":"five"})").rfind("folds: ", 0) == 0);
  CHECK(config_error(R"({"learner":{"optimizer":"lbfgs"}})") == "learner.optimizer: expected adam or sgd");
  CHECK(config_error(R"({"gbdt":{"source":"train","dump":"m.json"}})").rfind("gbdt: source", 0) == 0);
  CHECK(config_error(R"({"gbdt":{"source":"dump"}})") == "gbdt.dump: required when source is \"dump\"");
  CHECK(config_error(R"({"shots":[0]})") == "shots: counts must be positive");
  CHECK(config_error("[1,").rfind("config is not valid JSON", 0) == 0);
  CHECK(config_error("[]") == ": expected an object");
  CHECK_THROWS_AS(load_run_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("config validation") {
  RunConfig c;
  CHECK_NOTHROW(c.validate());
  c.folds = 1;
  CHECK_THROWS_WITH_AS(c.validate(), "folds: need at least 2", ConfigError);
  c = {};
  c.gbdt.train.n_estimators = 3;
  CHECK_THROWS_WITH_AS(c.validate(), "gbdt.n_estimators: fewer trees than boosting rounds", ConfigError);
  c.views = ViewMode::feature_only;
  CHECK_NOTHROW(c.validate());
  c = {};
  c.learner.kind = LearnerKind::external;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.boost.alpha = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("stale dumps are refused") {
  const auto dir = scratch("stale");
  RunConfig c = small_config(dir);
  const auto in = load_inputs(c);
  GbdtTrainConfig gc;
  gc.n_estimators = 5;
  gc.max_depth = 2;
  std::vector<std::size_t> all(in.dataset.size());
  std::iota(all.begin(), all.end(), 0);
  const auto model = train_gbdt(in.dataset, all, gc);
  write_file((dir / "model.json").string(), serialize_model(model, {in.dataset_hash, in.schema_hash}));
  c.gbdt.dump_path = (dir / "model.json").string();
  CHECK(load_inputs(c).dump_model->trees.size() == 5);

  // the dataset changes under the dump
  auto edited = read_file(c.dataset_path);
  edited += edited.substr(edited.find('\n') + 1, edited.find('\n', edited.find('\n') + 1) - edited.find('\n'));
  write_file(c.dataset_path, edited);
  CHECK_THROWS_WITH_AS(load_inputs(c), doctest::Contains("stale input"), DataError);

  // a bare dump carries no hashes and is accepted
  write_file((dir / "model.json").string(), export_xgboost_dump(model));
  CHECK_NOTHROW(load_inputs(c));
  fs::remove_all(dir);
}

TEST_CASE("runs are deterministic") {
  const auto dir = scratch("determinism");
  RunConfig c = small_config(dir);
  const auto in = load_inputs(c);
  const auto folds = stratified_kfold(in.dataset, c.folds, c.seed);
  RunArtifacts a1, a2;
  const auto r1 = run_single(in, folds, c, {32, 1, 5}, &a1);
  const auto r2 = run_single(in, folds, c, {32, 1, 5}, &a2);
  CHECK(r1.test_ap == r2.test_ap);
  CHECK(r1.boost.final_logits[2] == r2.boost.final_logits[2]);
  CHECK(a1.paths_jsonl == a2.paths_jsonl);
  CHECK(a1.prompts_jsonl == a2.prompts_jsonl);
  CHECK(r1.n_train == 32);
  CHECK(r1.n_train + r1.n_valid + r1.n_test == 300);
  CHECK(r1.num_trees == 4);
  CHECK(r1.boost.records.size() == 2);

  // the grid on one or three workers writes the same reports
  c.workers = 1;
  run_experiment(in, c, (dir / "w1").string());
  c.workers = 3;
  const auto res = run_experiment(in, c, (dir / "w3").string());
  CHECK(res.runs.size() == 3);
  for (const char* f : {"reports/scores.csv", "reports/rounds.csv", "reports/view_ratio.csv", "reports/summary.csv",
                        "paths/shots32_fold2_seed0.jsonl", "logits/shots32_fold0_seed0/round2_test.csv"}) {
    CHECK(read_file((dir / "w1" / f).string()) == read_file((dir / "w3" / f).string()));
  }
  const auto manifest = read_file((dir / "w3/manifest.json").string());
  CHECK(manifest.find(file_hash((dir / "w3/reports/scores.csv").string())) != std::string::npos);

  // saved round snapshots rebuild the ensemble without retraining
  const auto& run = res.runs[0];
  const std::string label = run.key.label();
  std::map<std::size_t, std::size_t> row_of;
  for (std::size_t i = 0; i < run.sample_ids[2].size(); ++i) row_of[run.sample_ids[2][i]] = i;
  std::vector<std::vector<PromptPair>> pairs(c.boost.rounds, std::vector<PromptPair>(row_of.size()));
  std::istringstream lines(read_file((dir / "w3/prompts" / (label + ".jsonl")).string()));
  for (std::string line; std::getline(lines, line);) {
    const auto doc = nlohmann::json::parse(line);
    const auto it = row_of.find(doc["sample_id"].get<std::size_t>());
    if (it == row_of.end()) continue;
    const auto r = doc["round"].get<std::size_t>();
    pairs[r - 1][it->second] = {doc["feature_view"], doc["path_view"], it->first, r};
  }
  std::vector<std::unique_ptr<ToyLearner>> owned;
  std::vector<WeakLearner*> learners;
  for (std::size_t r = 1; r <= c.boost.rounds; ++r) {
    ToyLearnerConfig tc = c.learner.toy;
    owned.push_back(std::make_unique<ToyLearner>(tc, TaskSpec{}));
    owned.back()->set_params(snapshot_from_bytes(
        read_file((dir / "w3/snapshots" / label / ("round" + std::to_string(r) + ".bin")).string())));
    learners.push_back(owned.back().get());
  }
  const auto probs = predict_ensemble(learners, pairs, c.boost, TaskSpec{});
  const auto expected = class_probabilities(run.boost.final_logits[2], TaskSpec{});
  CHECK(probs == expected);
  CHECK(manifest.find("\"snapshots/" + label + "/round1.bin\"") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("feature-only runs skip the trees") {
  const auto dir = scratch("feature_only");
  RunConfig c = small_config(dir);
  c.views = ViewMode::feature_only;
  const auto in = load_inputs(c);
  const auto folds = stratified_kfold(in.dataset, c.folds, c.seed);
  RunArtifacts art;
  const auto r = run_single(in, folds, c, {32, 0, 0}, &art);
  CHECK(r.num_trees == 0);
  CHECK(art.paths_jsonl.empty());
  CHECK(r.test_ap > 0);
  fs::remove_all(dir);
}
