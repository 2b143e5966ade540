#include "tabboost/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <filesystem>
#include <mutex>
#include <set>
#include <thread>

#include "json.hpp"
#include "tabboost/error.hpp"
#include "tabboost/paths.hpp"
#include "tabboost/report.hpp"
#include "tabboost/util.hpp"

namespace tabboost {

using nlohmann::json;
using nlohmann::ordered_json;
namespace fs = std::filesystem;

void RunConfig::validate() const {
  boost.validate();
  gbdt.train.validate();
  learner.toy.validate();
  if (folds < 2) throw ConfigError("folds: need at least 2");
  if (shots.empty()) throw ConfigError("shots: need at least one shot count");
  for (auto s : shots) {
    if (s == 0) throw ConfigError("shots: counts must be positive");
  }
  if (num_seeds == 0) throw ConfigError("seeds: need at least one seed");
  if (workers == 0) throw ConfigError("workers: need at least one worker");
  if (learner.kind == LearnerKind::external && learner.command.empty()) {
    throw ConfigError("learner.command: required for an external learner");
  }
  if (views != ViewMode::feature_only && gbdt.dump_path.empty() &&
      static_cast<std::size_t>(gbdt.train.n_estimators) < boost.rounds) {
    throw ConfigError("gbdt.n_estimators: fewer trees than boosting rounds");
  }
}

namespace {

template <class F>
void for_each_key(const json& obj, std::string_view section, F&& handle) {
  if (!obj.is_object()) throw ConfigError(std::string(section) + ": expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    const std::string field = section.empty() ? it.key() : std::string(section) + "." + it.key();
    try {
      if (!handle(it.key(), it.value())) throw ConfigError(field + ": unknown key");
    } catch (const json::exception& e) {
      throw ConfigError(field + ": " + e.what());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(field + ": " + e.what());
    }
  }
}

std::string opt_string(const json& v) { return v.is_null() ? std::string() : v.get<std::string>(); }

std::size_t shot_value(const json& v) {
  if (v.is_string()) return parse_shots(v.get<std::string>());
  const auto n = v.get<long long>();
  if (n <= 0) throw ConfigError("shots: counts must be positive");
  return static_cast<std::size_t>(n);
}

}  // namespace

RunConfig parse_run_config(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  for_each_key(doc, "", [&](const std::string& k, const json& v) {
    if (k == "dataset") c.dataset_path = v.get<std::string>();
    else if (k == "schema") c.schema_path = v.get<std::string>();
    else if (k == "template") c.template_path = opt_string(v);
    else if (k == "dataset_name") c.dataset_name = v.get<std::string>();
    else if (k == "method") c.method = v.get<std::string>();
    else if (k == "seed") c.seed = v.get<std::uint64_t>();
    else if (k == "seeds") c.num_seeds = v.get<std::size_t>();
    else if (k == "folds") c.folds = v.get<int>();
    else if (k == "workers") c.workers = v.get<std::size_t>();
    else if (k == "out") c.out = v.get<std::string>();
    else if (k == "write_artifacts") c.write_artifacts = v.get<bool>();
    else if (k == "shots") {
      c.shots.clear();
      if (v.is_array()) {
        for (const auto& s : v) c.shots.push_back(shot_value(s));
      } else {
        c.shots.push_back(shot_value(v));
      }
    } else if (k == "shot_sampling") {
      const auto s = v.get<std::string>();
      if (s == "stratified") c.sampling = ShotSampling::stratified;
      else if (s == "uniform") c.sampling = ShotSampling::uniform;
      else throw ConfigError("shot_sampling: expected stratified or uniform");
    } else if (k == "views") {
      const auto m = parse_view_mode(v.get<std::string>());
      if (!m) throw ConfigError("views: expected both, feature-only or path-only");
      c.views = *m;
    } else if (k == "threshold_objective") {
      const auto s = v.get<std::string>();
      if (s == "accuracy") c.threshold = ThresholdObjective::accuracy;
      else if (s == "balanced_accuracy") c.threshold = ThresholdObjective::balanced_accuracy;
      else if (s == "f1") c.threshold = ThresholdObjective::f1;
      else throw ConfigError("threshold_objective: expected accuracy, balanced_accuracy or f1");
    } else if (k == "boost") {
      for_each_key(v, "boost", [&](const std::string& b, const json& x) {
        if (b == "rounds") c.boost.rounds = x.get<std::size_t>();
        else if (b == "epochs") c.boost.epochs_per_round = x.get<std::size_t>();
        else if (b == "eta") c.boost.eta = x.get<double>();
        else if (b == "alpha") c.boost.alpha = x.get<double>();
        else if (b == "early_stopping") c.boost.early_stopping = x.get<bool>();
        else return false;
        return true;
      });
    } else if (k == "gbdt") {
      std::string source = "train";
      for_each_key(v, "gbdt", [&](const std::string& g, const json& x) {
        auto& t = c.gbdt.train;
        if (g == "source") source = x.get<std::string>();
        else if (g == "dump") c.gbdt.dump_path = opt_string(x);
        else if (g == "base_score") c.gbdt.base_score = x.get<double>();
        else if (g == "n_estimators") t.n_estimators = x.get<int>();
        else if (g == "max_depth") t.max_depth = x.get<int>();
        else if (g == "learning_rate") t.learning_rate = x.get<double>();
        else if (g == "min_child_weight") t.min_child_weight = x.get<double>();
        else if (g == "reg_lambda") t.reg_lambda = x.get<double>();
        else if (g == "gamma") t.gamma = x.get<double>();
        else if (g == "subsample") t.subsample = x.get<double>();
        else return false;
        return true;
      });
      if (source == "train" && !c.gbdt.dump_path.empty()) {
        throw ConfigError("gbdt: source \"train\" conflicts with a dump path; choose one source");
      }
      if (source == "dump" && c.gbdt.dump_path.empty()) throw ConfigError("gbdt.dump: required when source is \"dump\"");
      if (source != "train" && source != "dump") throw ConfigError("gbdt.source: expected train or dump");
    } else if (k == "learner") {
      for_each_key(v, "learner", [&](const std::string& l, const json& x) {
        auto& t = c.learner.toy;
        if (l == "kind") {
          const auto s = x.get<std::string>();
          if (s == "toy") c.learner.kind = LearnerKind::toy;
          else if (s == "external") c.learner.kind = LearnerKind::external;
          else throw ConfigError("learner.kind: expected toy or external");
        } else if (l == "command") {
          c.learner.command = opt_string(x);
        } else if (l == "timeout_seconds") {
          const auto ms = std::chrono::milliseconds(static_cast<long long>(x.get<double>() * 1000));
          c.learner.timeouts.train_round = ms;
          c.learner.timeouts.predict = ms;
        } else if (l == "dim") t.dim = x.get<std::size_t>();
        else if (l == "optimizer") {
          const auto s = x.get<std::string>();
          if (s == "adam") t.optimizer = Optimizer::adam;
          else if (s == "sgd") t.optimizer = Optimizer::sgd;
          else throw ConfigError("learner.optimizer: expected adam or sgd");
        } else if (l == "step_size") t.step_size = x.get<double>();
        else if (l == "batch_size") t.batch_size = x.get<std::size_t>();
        else if (l == "l2") t.l2 = x.get<double>();
        else return false;
        return true;
      });
    } else {
      return false;
    }
    return true;
  });
  return c;
}

RunConfig load_run_config(const std::string& path) {
  try {
    return parse_run_config(read_file(path));
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
}

std::string run_config_to_json(const RunConfig& c) {
  ordered_json doc;
  doc["dataset"] = c.dataset_path;
  doc["schema"] = c.schema_path;
  doc["template"] = c.template_path.empty() ? json(nullptr) : json(c.template_path);
  doc["dataset_name"] = c.dataset_name;
  doc["method"] = c.method;
  doc["seed"] = c.seed;
  doc["seeds"] = c.num_seeds;
  doc["folds"] = c.folds;
  ordered_json shots = ordered_json::array();
  for (auto s : c.shots) {
    if (s == SIZE_MAX) shots.push_back("all");
    else shots.push_back(s);
  }
  doc["shots"] = shots;
  doc["shot_sampling"] = c.sampling == ShotSampling::stratified ? "stratified" : "uniform";
  doc["views"] = view_mode_name(c.views);
  doc["threshold_objective"] = c.threshold == ThresholdObjective::accuracy            ? "accuracy"
                               : c.threshold == ThresholdObjective::balanced_accuracy ? "balanced_accuracy"
                                                                                       : "f1";
  doc["workers"] = c.workers;
  doc["out"] = c.out;
  doc["write_artifacts"] = c.write_artifacts;
  doc["boost"] = {{"rounds", c.boost.rounds},
                  {"epochs", c.boost.epochs_per_round},
                  {"eta", c.boost.eta},
                  {"alpha", c.boost.alpha},
                  {"early_stopping", c.boost.early_stopping}};
  const auto& t = c.gbdt.train;
  ordered_json g;
  g["source"] = c.gbdt.dump_path.empty() ? "train" : "dump";
  g["dump"] = c.gbdt.dump_path.empty() ? json(nullptr) : json(c.gbdt.dump_path);
  g["base_score"] = c.gbdt.base_score;
  g["n_estimators"] = t.n_estimators;
  g["max_depth"] = t.max_depth;
  g["learning_rate"] = t.learning_rate;
  g["min_child_weight"] = t.min_child_weight;
  g["reg_lambda"] = t.reg_lambda;
  g["gamma"] = t.gamma;
  g["subsample"] = t.subsample;
  doc["gbdt"] = g;
  const auto& l = c.learner.toy;
  ordered_json lj;
  lj["kind"] = c.learner.kind == LearnerKind::toy ? "toy" : "external";
  lj["command"] = c.learner.command.empty() ? json(nullptr) : json(c.learner.command);
  lj["timeout_seconds"] = static_cast<double>(c.learner.timeouts.train_round.count()) / 1000.0;
  lj["dim"] = l.dim;
  lj["optimizer"] = l.optimizer == Optimizer::adam ? "adam" : "sgd";
  lj["step_size"] = l.step_size;
  lj["batch_size"] = l.batch_size;
  lj["l2"] = l.l2;
  doc["learner"] = lj;
  return doc.dump(1) + "\n";
}

std::string RunKey::label() const {
  return "shots" + shots_label(shots) + "_fold" + std::to_string(fold) + "_seed" + std::to_string(seed);
}

ExperimentInputs load_inputs(const RunConfig& config) {
  if (config.dataset_path.empty()) throw ConfigError("dataset: path required");
  if (config.schema_path.empty()) throw ConfigError("schema: path required");
  ExperimentInputs in;
  const Schema schema = load_schema(config.schema_path);
  in.dataset = load_dataset_file(config.dataset_path, schema);
  if (!config.dataset_name.empty()) in.dataset.schema.name = config.dataset_name;
  if (in.dataset.schema.name.empty()) in.dataset.schema.name = fs::path(config.dataset_path).stem().string();
  in.dataset_hash = file_hash(config.dataset_path);
  in.schema_hash = file_hash(config.schema_path);
  if (!config.template_path.empty()) {
    in.prompt_template = load_template(config.template_path);
    in.template_hash = file_hash(config.template_path);
  }
  if (!config.gbdt.dump_path.empty()) {
    StageInputs recorded;
    in.dump_model = load_model(read_file(config.gbdt.dump_path), in.dataset.schema, &recorded);
    if (!recorded.dataset_hash.empty() && recorded.dataset_hash != in.dataset_hash) {
      throw DataError("stale input: " + config.gbdt.dump_path + " was trained on a different dataset (" +
                      recorded.dataset_hash + " vs " + in.dataset_hash + ")");
    }
    if (!recorded.schema_hash.empty() && recorded.schema_hash != in.schema_hash) {
      throw DataError("stale input: " + config.gbdt.dump_path + " was built against a different schema");
    }
    if (config.gbdt.base_score != 0.0) in.dump_model->base_score = config.gbdt.base_score;
    in.dump_hash = file_hash(config.gbdt.dump_path);
  }
  return in;
}

RunOutcome run_single(const ExperimentInputs& inputs, const FoldPlan& folds, const RunConfig& config,
                      const RunKey& key, RunArtifacts* artifacts) {
  const auto start = std::chrono::steady_clock::now();
  const Dataset& data = inputs.dataset;
  const Schema& schema = data.schema;
  const TaskSpec task = TaskSpec::from_schema(schema);
  const PromptTemplate& tpl = inputs.prompt_template;
  const std::size_t rounds = config.boost.rounds;

  RunOutcome out;
  out.key = key;
  const ShotSample shot = sample_shots(data, folds, key.fold, key.shots,
                                       mix_seed(key.seed, 0x5407u + static_cast<unsigned>(key.fold)),
                                       config.sampling);
  out.sample_ids[0] = shot.train_indices;
  out.sample_ids[1] = shot.valid_indices;
  out.sample_ids[2] = folds.fold_indices(key.fold);

  BoostData bd;
  for (std::size_t s = 0; s < kSplits; ++s) {
    bd.pairs[s].assign(rounds, {});
    for (auto id : out.sample_ids[s]) bd.labels[s].push_back(data.labels[id]);
  }

  std::optional<GbdtModel> trained;
  const GbdtModel* model = nullptr;
  if (config.views != ViewMode::feature_only) {
    if (inputs.dump_model) {
      model = &*inputs.dump_model;
    } else {
      GbdtTrainConfig gc = config.gbdt.train;
      gc.seed = key.seed;
      trained = train_gbdt(data, out.sample_ids[0], gc);
      model = &*trained;
    }
    out.num_trees = model->trees.size();
  }
  const std::optional<RoundGrouping> grouping =
      model ? std::optional<RoundGrouping>(group_trees(model->trees.size(), rounds)) : std::nullopt;

  std::vector<PathRecord> records;
  for (std::size_t s = 0; s < kSplits; ++s) {
    for (auto id : out.sample_ids[s]) {
      const auto& row = data.rows[id];
      const std::string features = serialize_features(row, schema, tpl);
      std::vector<CondensedPath> condensed;
      if (grouping) condensed = condense_sample(*model, *grouping, row);
      for (std::size_t r = 0; r < rounds; ++r) {
        PromptPair pair{features, features, id, r + 1};
        if (grouping) {
          const std::string text = render_path_text(condensed[r].constraints, schema, tpl.path_style);
          pair.path_view = serialize_with_path(row, text, schema, tpl);
          if (artifacts) records.push_back({id, condensed[r], text});
        }
        bd.pairs[s][r].push_back(std::move(pair));
      }
    }
  }
  if (artifacts) {
    artifacts->paths_jsonl = paths_to_jsonl(records, schema);
    artifacts->prompts_jsonl.clear();
    for (std::size_t r = 0; r < rounds; ++r) {
      for (std::size_t s = 0; s < kSplits; ++s) artifacts->prompts_jsonl += prompts_to_jsonl(bd.pairs[s][r], data);
    }
  }

  LearnerFactory factory;
  if (config.learner.kind == LearnerKind::toy) {
    ToyLearnerConfig tc = config.learner.toy;
    tc.views = config.views;
    factory = toy_learner_factory(tc, task);
  } else {
    factory = external_learner_factory(config.learner.command, task, config.learner.timeouts);
  }
  BoostConfig bc = config.boost;
  bc.seed = key.seed;
  out.boost = boost_train(bd, factory, bc, task);

  out.n_train = bd.labels[0].size();
  out.n_valid = bd.labels[1].size();
  out.n_test = bd.labels[2].size();
  const LogitMatrix& F_test = out.boost.final_logits[2];
  out.test_ap = task_ap(F_test, bd.labels[2], task);
  if (task.binary()) {
    std::vector<int> train_pos, test_pos;
    for (int y : bd.labels[0]) train_pos.push_back(static_cast<std::size_t>(y) == task.positive_class);
    for (int y : bd.labels[2]) test_pos.push_back(static_cast<std::size_t>(y) == task.positive_class);
    out.accuracy = calibrated_accuracy(positive_scores(out.boost.final_logits[0], task), train_pos,
                                       positive_scores(F_test, task), test_pos, config.threshold);
  } else {
    out.excluded_classes = macro_average_precision(class_probabilities(F_test, task).values, bd.labels[2],
                                                   task.num_classes)
                               .excluded_classes;
  }
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

namespace {

std::vector<RunKey> grid_keys(const RunConfig& config) {
  std::vector<RunKey> keys;
  for (auto shots : config.shots) {
    for (int fold = 0; fold < config.folds; ++fold) {
      for (std::size_t s = 0; s < config.num_seeds; ++s) keys.push_back({shots, fold, config.seed + s});
    }
  }
  return keys;
}

void write_run_artifacts(const std::string& out_dir, const Schema& schema, const TaskSpec& task,
                         const RunOutcome& run, const RunArtifacts& art) {
  const std::string label = run.key.label();
  for (std::size_t r = 0; r < run.boost.records.size(); ++r) {
    for (std::size_t s = 0; s < kSplits; ++s) {
      if (run.sample_ids[s].empty()) continue;
      write_file(out_dir + "/logits/" + label + "/round" + std::to_string(r + 1) + "_" +
                     std::string(split_name(static_cast<Split>(s))) + ".csv",
                 logits_to_csv(run.boost.round_logits[s][r], run.sample_ids[s], task, schema));
    }
    if (r < run.boost.snapshots.size() && !run.boost.snapshots[r].empty()) {
      write_file(out_dir + "/snapshots/" + label + "/round" + std::to_string(r + 1) + ".bin", run.boost.snapshots[r]);
    }
  }
  if (!art.paths_jsonl.empty()) write_file(out_dir + "/paths/" + label + ".jsonl", art.paths_jsonl);
  write_file(out_dir + "/prompts/" + label + ".jsonl", art.prompts_jsonl);
}

ordered_json optional_json(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

void write_manifest(const std::string& out_dir, const RunConfig& config, const ExperimentInputs& inputs,
                    const ExperimentResult& result) {
  ordered_json doc;
  doc["format"] = 1;
  doc["config"] = ordered_json::parse(run_config_to_json(config));
  ordered_json in;
  in["dataset"] = {{"path", config.dataset_path}, {"hash", inputs.dataset_hash}};
  in["schema"] = {{"path", config.schema_path}, {"hash", inputs.schema_hash}};
  if (!config.template_path.empty()) in["template"] = {{"path", config.template_path}, {"hash", inputs.template_hash}};
  if (inputs.dump_model) in["gbdt_dump"] = {{"path", config.gbdt.dump_path}, {"hash", inputs.dump_hash}};
  doc["inputs"] = in;
  const auto& caps = result.capabilities;
  ordered_json cj;
  cj["version"] = caps.version;
  cj["num_classes"] = caps.num_classes;
  cj["reports_view_ratio"] = caps.reports_view_ratio;
  cj["internal_objectives"] = caps.internal_objectives;
  cj["metadata"] = ordered_json::parse(caps.metadata.empty() ? "{}" : caps.metadata);
  doc["learner_capabilities"] = cj;
  doc["objective"] = {{"engine", "cross-entropy on accumulated logits"},
                      {"learner_internal", caps.internal_objectives}};
  doc["folds"] = {{"k", result.folds.k}, {"seed", result.folds.seed}, {"warnings", result.folds.warnings}};
  ordered_json runs = ordered_json::array();
  for (const auto& run : result.runs) {
    ordered_json rj;
    const std::string label = run.key.label();
    rj["key"] = {{"shots", shots_label(run.key.shots)}, {"fold", run.key.fold}, {"seed", run.key.seed}};
    rj["n_train"] = run.n_train;
    rj["n_valid"] = run.n_valid;
    rj["n_test"] = run.n_test;
    rj["num_trees"] = run.num_trees;
    rj["total_epochs"] = run.boost.total_epochs;
    rj["stopped_early"] = run.boost.stopped_early;
    rj["failure"] = run.boost.failure ? ordered_json(*run.boost.failure) : ordered_json(nullptr);
    rj["test_ap"] = run.test_ap;
    if (run.accuracy) {
      rj["accuracy"] = run.accuracy->accuracy;
      rj["threshold"] = run.accuracy->threshold;
      rj["threshold_degenerate"] = run.accuracy->degenerate;
    }
    if (!run.excluded_classes.empty()) rj["excluded_classes"] = run.excluded_classes;
    ordered_json rounds = ordered_json::array();
    for (const auto& rec : run.boost.records) {
      ordered_json r;
      r["round"] = rec.round;
      r["train_loss"] = rec.train_loss;
      r["valid_ap"] = optional_json(rec.valid_ap);
      r["test_ap"] = rec.test_ap;
      r["steps"] = rec.steps;
      r["epochs"] = rec.epochs;
      r["wall_seconds"] = rec.wall_seconds;
      ordered_json files;
      if (config.write_artifacts) {
        for (std::size_t s = 0; s < kSplits; ++s) {
          if (run.sample_ids[s].empty()) continue;
          const std::string name(split_name(static_cast<Split>(s)));
          files[name] = "logits/" + label + "/round" + std::to_string(rec.round) + "_" + name + ".csv";
        }
      }
      r["logits"] = files;
      if (config.write_artifacts && rec.round <= run.boost.snapshots.size() &&
          !run.boost.snapshots[rec.round - 1].empty()) {
        r["snapshot"] = "snapshots/" + label + "/round" + std::to_string(rec.round) + ".bin";
      }
      rounds.push_back(std::move(r));
    }
    rj["rounds"] = std::move(rounds);
    if (config.write_artifacts) {
      if (run.num_trees) rj["paths"] = "paths/" + label + ".jsonl";
      rj["prompts"] = "prompts/" + label + ".jsonl";
    }
    rj["wall_seconds"] = run.wall_seconds;
    runs.push_back(std::move(rj));
  }
  doc["runs"] = std::move(runs);
  ordered_json reports;
  for (const char* name : {"scores.csv", "rounds.csv", "view_ratio.csv", "summary.csv", "summary.json"}) {
    reports[name] = file_hash(out_dir + "/reports/" + name);
  }
  doc["reports"] = reports;
  doc["wall_seconds"] = result.wall_seconds;
  write_file(out_dir + "/manifest.json", doc.dump(1) + "\n");
}

}  // namespace

ExperimentResult run_experiment(const ExperimentInputs& inputs, const RunConfig& config,
                                const std::string& out_dir) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  ExperimentResult result;
  result.folds = stratified_kfold(inputs.dataset, config.folds, config.seed);
  const auto keys = grid_keys(config);
  const TaskSpec task = TaskSpec::from_schema(inputs.dataset.schema);
  const bool artifacts = config.write_artifacts && !out_dir.empty();

  result.runs.resize(keys.size());
  std::vector<std::exception_ptr> errors(keys.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < keys.size(); i = next++) {
      try {
        RunArtifacts art;
        result.runs[i] = run_single(inputs, result.folds, config, keys[i], artifacts ? &art : nullptr);
        if (artifacts) write_run_artifacts(out_dir, inputs.dataset.schema, task, result.runs[i], art);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::min(config.workers, std::max<std::size_t>(keys.size(), 1));
  std::vector<std::thread> threads;
  for (std::size_t t = 1; t < n_threads; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  for (const auto& run : result.runs) {
    if (run.boost.records.empty()) continue;
    result.capabilities = run.boost.capabilities;
    break;
  }
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!out_dir.empty()) {
    write_reports(out_dir, config, inputs.dataset.schema.name, result.runs);
    write_manifest(out_dir, config, inputs, result);
  }
  return result;
}

}  // namespace tabboost
