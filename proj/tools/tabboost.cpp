#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "tabboost/error.hpp"
#include "tabboost/experiment.hpp"
#include "tabboost/kernels.hpp"
#include "tabboost/paths.hpp"
#include "tabboost/report.hpp"
#include "tabboost/serialize.hpp"
#include "tabboost/synthetic.hpp"
#include "tabboost/util.hpp"

using namespace tabboost;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Flags shared by boost and sweep. Only flags actually given override the
// config file.
struct Overrides {
  std::string config;
  std::string dataset, schema, tpl, dump;
  std::uint64_t seed = 0;
  std::size_t seeds = 1;
  std::string shots;
  int folds = 5;
  std::size_t rounds = 0, epochs = 0;
  double eta = 0, alpha = 0;
  std::string views;
  std::string learner_cmd;
  std::size_t workers = 1;
  std::string out;
  std::vector<CLI::Option*> opts;

  void add(CLI::App* app) {
    app->add_option("--config", config, "JSON run config");
    opts = {
        app->add_option("--dataset", dataset, "dataset CSV"),
        app->add_option("--schema", schema, "schema JSON"),
        app->add_option("--template", tpl, "prompt template"),
        app->add_option("--dump", dump, "GBDT model or XGBoost dump instead of training trees"),
        app->add_option("--seed", seed, "base seed"),
        app->add_option("--seeds", seeds, "number of seeds per fold"),
        app->add_option("--shots", shots, "comma-separated shot counts, or all"),
        app->add_option("--folds", folds, "cross-validation folds"),
        app->add_option("--rounds", rounds, "boosting rounds R"),
        app->add_option("--epochs", epochs, "epochs per round E"),
        app->add_option("--eta", eta, "boosting learning rate"),
        app->add_option("--alpha", alpha, "decay on the accumulated logits"),
        app->add_option("--views", views, "both, feature-only or path-only"),
        app->add_option("--learner-cmd", learner_cmd, "external learner launch command"),
        app->add_option("--workers", workers, "parallel runs"),
        app->add_option("--out", out, "output directory"),
    };
  }

  bool given(std::size_t i) const { return opts[i]->count() > 0; }

  RunConfig resolve() const {
    RunConfig c;
    if (!config.empty()) {
      c = load_run_config(config);
      // paths in a config file are relative to the file
      const fs::path base = fs::path(config).parent_path();
      const auto rebase = [&](std::string& p) {
        if (!p.empty() && fs::path(p).is_relative()) p = (base / p).lexically_normal().string();
      };
      rebase(c.dataset_path);
      rebase(c.schema_path);
      rebase(c.template_path);
      rebase(c.gbdt.dump_path);
    }
    if (given(0)) c.dataset_path = dataset;
    if (given(1)) c.schema_path = schema;
    if (given(2)) c.template_path = tpl;
    if (given(3)) c.gbdt.dump_path = dump;
    if (given(4)) c.seed = seed;
    if (given(5)) c.num_seeds = seeds;
    if (given(6)) {
      c.shots.clear();
      for (const auto& s : split(shots, ',')) c.shots.push_back(parse_shots(trim(s)));
    }
    if (given(7)) c.folds = folds;
    if (given(8)) c.boost.rounds = rounds;
    if (given(9)) c.boost.epochs_per_round = epochs;
    if (given(10)) c.boost.eta = eta;
    if (given(11)) c.boost.alpha = alpha;
    if (given(12)) {
      const auto m = parse_view_mode(views);
      if (!m) throw ConfigError("views: expected both, feature-only or path-only");
      c.views = *m;
    }
    if (given(13)) {
      c.learner.kind = LearnerKind::external;
      c.learner.command = learner_cmd;
    }
    if (given(14)) c.workers = workers;
    if (given(15)) c.out = out;
    c.validate();
    return c;
  }
};

std::size_t count_failures(const ExperimentResult& result) {
  std::size_t n = 0;
  for (const auto& run : result.runs) {
    if (run.boost.failure) {
      std::cerr << run.key.label() << ": round " << run.boost.failed_round << ": " << *run.boost.failure << "\n";
      ++n;
    }
  }
  return n;
}

void print_summary(const ExperimentResult& result) {
  for (const auto& run : result.runs) {
    std::printf("%-28s test_ap %.4f", run.key.label().c_str(), run.test_ap);
    if (run.accuracy) std::printf("  acc %.4f", run.accuracy->accuracy);
    std::printf("\n");
  }
}

int cmd_boost(const Overrides& o) {
  const RunConfig config = o.resolve();
  const ExperimentInputs inputs = load_inputs(config);
  fs::create_directories(config.out);
  const ExperimentResult result = run_experiment(inputs, config, config.out);
  print_summary(result);
  std::printf("reports in %s/reports\n", config.out.c_str());
  return count_failures(result) ? 3 : 0;
}

struct SweepArgs {
  std::string axis = "round_epoch";
  std::string grid;
  std::size_t budget = 30;
};

int cmd_sweep(const Overrides& o, const SweepArgs& a) {
  const RunConfig base = o.resolve();
  std::vector<std::pair<std::string, RunConfig>> points;
  if (a.axis == "round_epoch") {
    const std::string grid = a.grid.empty() ? "1x30,2x15,3x10,5x6,6x5,10x3,15x2,30x1" : a.grid;
    for (const auto& item : split(grid, ',')) {
      const auto parts = split(trim(item), 'x');
      if (parts.size() != 2) throw ConfigError("grid: expected RxE items, got '" + item + "'");
      RunConfig c = base;
      c.boost.rounds = std::stoul(parts[0]);
      c.boost.epochs_per_round = std::stoul(parts[1]);
      if (c.boost.rounds * c.boost.epochs_per_round != a.budget) {
        throw ConfigError("grid: " + trim(item) + " breaks the epoch budget R*E=" + std::to_string(a.budget));
      }
      points.emplace_back(trim(item), c);
    }
  } else if (a.axis == "eta" || a.axis == "alpha") {
    const std::string grid = !a.grid.empty() ? a.grid : a.axis == "eta" ? "0.1,0.3,0.5,0.7,0.9,1.0" : "1,0.9";
    for (const auto& item : split(grid, ',')) {
      RunConfig c = base;
      const double v = std::stod(trim(item));
      (a.axis == "eta" ? c.boost.eta : c.boost.alpha) = v;
      points.emplace_back(format_number(v), c);
    }
  } else {
    throw ConfigError("axis: expected round_epoch, eta or alpha");
  }
  for (const auto& [label, c] : points) c.validate();

  const ExperimentInputs inputs = load_inputs(base);
  fs::create_directories(base.out);
  std::vector<SweepPoint> table;
  std::size_t failures = 0;
  for (const auto& [label, c] : points) {
    const std::string dir = base.out + "/" + a.axis + "_" + label;
    fs::create_directories(dir);
    const ExperimentResult result = run_experiment(inputs, c, dir);
    failures += count_failures(result);
    const auto scores = run_scores(c, inputs.dataset.schema.name, result.runs);
    table.push_back({label, aggregate_runs(scores)});
    std::printf("%s=%s  avg AP %.4f\n", a.axis.c_str(), label.c_str(), table.back().table.rows.front().average);
  }
  const std::string path = base.out + "/sweep_" + a.axis + ".csv";
  write_file(path, sweep_table_csv(a.axis, table));
  std::printf("table in %s\n", path.c_str());
  return failures ? 3 : 0;
}

int cmd_evaluate(const std::vector<std::string>& runs, const std::string& out) {
  std::vector<RunScore> scores;
  for (const auto& dir : runs) {
    const std::string manifest_path = dir + "/manifest.json";
    json manifest;
    try {
      manifest = json::parse(read_file(manifest_path));
    } catch (const json::exception& e) {
      throw DataError(manifest_path + ": " + e.what());
    }
    const std::string scores_path = dir + "/reports/scores.csv";
    const auto recorded = manifest.value("/reports/scores.csv"_json_pointer, std::string());
    if (recorded != file_hash(scores_path)) {
      throw DataError("stale input: " + scores_path + " does not match the hash in " + manifest_path);
    }
    for (auto& s : read_scores_csv(read_file(scores_path))) scores.push_back(std::move(s));
  }
  const AggregateTable table = aggregate_runs(scores);
  const std::string csv = table.to_csv();
  if (out.empty()) {
    std::cout << csv;
  } else {
    write_file(out, csv);
    write_file(fs::path(out).replace_extension(".json").string(), table.to_json());
  }
  return 0;
}

struct StageArgs {
  std::string dataset, schema, model, paths, tpl, out;
  std::size_t rounds = 5;
  std::size_t round = 0;
  GbdtTrainConfig gbdt;
};

int cmd_train_gbdt(const StageArgs& a) {
  const Schema schema = load_schema(a.schema);
  const Dataset data = load_dataset_file(a.dataset, schema);
  a.gbdt.validate();
  std::vector<std::size_t> all(data.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const GbdtModel model = train_gbdt(data, all, a.gbdt);
  write_file(a.out, serialize_model(model, {file_hash(a.dataset), file_hash(a.schema)}));
  std::printf("%zu trees -> %s\n", model.trees.size(), a.out.c_str());
  return 0;
}

int cmd_extract_paths(const StageArgs& a) {
  const Schema schema = load_schema(a.schema);
  const Dataset data = load_dataset_file(a.dataset, schema);
  StageInputs recorded;
  const GbdtModel model = load_model(read_file(a.model), schema, &recorded);
  if (!recorded.dataset_hash.empty() && recorded.dataset_hash != file_hash(a.dataset)) {
    throw DataError("stale input: " + a.model + " was trained on a different dataset");
  }
  if (!recorded.schema_hash.empty() && recorded.schema_hash != file_hash(a.schema)) {
    throw DataError("stale input: " + a.model + " was built against a different schema");
  }
  const PromptTemplate tpl = a.tpl.empty() ? PromptTemplate{} : load_template(a.tpl);
  const RoundGrouping grouping = group_trees(model.trees.size(), a.rounds);
  std::vector<PathRecord> records;
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (auto& p : condense_sample(model, grouping, data.rows[i])) {
      std::string text = render_path_text(p.constraints, schema, tpl.path_style);
      records.push_back({i, std::move(p), std::move(text)});
    }
  }
  write_file(a.out, paths_to_jsonl(records, schema));
  std::printf("%zu paths -> %s\n", records.size(), a.out.c_str());
  return 0;
}

int cmd_serialize(const StageArgs& a) {
  const Schema schema = load_schema(a.schema);
  const Dataset data = load_dataset_file(a.dataset, schema);
  const PromptTemplate tpl = a.tpl.empty() ? PromptTemplate{} : load_template(a.tpl);
  std::vector<std::size_t> ids(data.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
  std::vector<PromptPair> pairs;
  if (a.paths.empty()) {
    pairs = build_feature_pairs(data, ids, a.round ? a.round : 1, tpl);
  } else {
    const auto records = paths_from_jsonl(read_file(a.paths), schema);
    std::size_t last = 0;
    for (const auto& r : records) last = std::max(last, r.path.round);
    for (std::size_t r = a.round ? a.round : 1; r <= (a.round ? a.round : last); ++r) {
      for (auto& p : build_prompt_pairs(data, ids, records, r, tpl)) pairs.push_back(std::move(p));
    }
  }
  write_file(a.out, prompts_to_jsonl(pairs, data));
  std::printf("%zu prompts -> %s\n", pairs.size(), a.out.c_str());
  return 0;
}

int cmd_synth(const std::string& dir, const SyntheticConfig& sc) {
  fs::create_directories(dir);
  const Dataset data = make_synthetic(sc);
  write_file(dir + "/synthetic.csv", dataset_to_csv(data));
  write_file(dir + "/synthetic.schema.json", schema_to_json(data.schema));
  RunConfig c;
  c.dataset_path = "synthetic.csv";
  c.schema_path = "synthetic.schema.json";
  c.out = "run";
  write_file(dir + "/config.json", run_config_to_json(c));
  std::printf("%zu rows -> %s\n", data.size(), dir.c_str());
  return 0;
}

void add_gbdt_flags(CLI::App* app, GbdtTrainConfig& g) {
  app->add_option("--trees", g.n_estimators, "number of trees");
  app->add_option("--depth", g.max_depth, "maximum depth");
  app->add_option("--learning-rate", g.learning_rate, "shrinkage");
  app->add_option("--seed", g.seed, "subsampling seed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Boosted weak learners over tree-path prompts for tabular classification"};
  app.require_subcommand(1);
  std::string isa;
  app.add_option("--isa", isa, "force a kernel variant: scalar, avx2 or neon");

  StageArgs stage;
  auto* train = app.add_subcommand("train-gbdt", "train trees on a whole dataset");
  train->add_option("--dataset", stage.dataset)->required();
  train->add_option("--schema", stage.schema)->required();
  train->add_option("--out", stage.out)->required();
  add_gbdt_flags(train, stage.gbdt);

  auto* extract = app.add_subcommand("extract-paths", "condensed decision paths per sample and round");
  extract->add_option("--model", stage.model)->required();
  extract->add_option("--dataset", stage.dataset)->required();
  extract->add_option("--schema", stage.schema)->required();
  extract->add_option("--rounds", stage.rounds, "tree groups R");
  extract->add_option("--template", stage.tpl);
  extract->add_option("--out", stage.out)->required();

  auto* ser = app.add_subcommand("serialize", "feature and path-informed prompts");
  ser->add_option("--dataset", stage.dataset)->required();
  ser->add_option("--schema", stage.schema)->required();
  ser->add_option("--paths", stage.paths, "paths JSONL; omit for feature-only prompts");
  ser->add_option("--round", stage.round, "only this round");
  ser->add_option("--template", stage.tpl);
  ser->add_option("--out", stage.out)->required();

  Overrides boost_o;
  auto* boost = app.add_subcommand("boost", "run the shots x folds x seeds grid");
  boost_o.add(boost);

  Overrides sweep_o;
  SweepArgs sweep_a;
  auto* sweep = app.add_subcommand("sweep", "one boost grid per value of an axis");
  sweep_o.add(sweep);
  sweep->add_option("--axis", sweep_a.axis, "round_epoch, eta or alpha");
  sweep->add_option("--grid", sweep_a.grid, "comma-separated values, RxE for round_epoch");
  sweep->add_option("--budget", sweep_a.budget, "R*E every round_epoch point must meet");

  std::vector<std::string> eval_runs;
  std::string eval_out;
  auto* eval = app.add_subcommand("evaluate", "mean ± std table over finished runs");
  eval->add_option("runs", eval_runs, "run directories")->required();
  eval->add_option("--out", eval_out, "CSV path; JSON goes next to it");

  std::string synth_dir;
  SyntheticConfig synth_cfg;
  auto* synth = app.add_subcommand("synth", "write the synthetic binary fixture");
  synth->add_option("--out", synth_dir)->required();
  synth->add_option("--seed", synth_cfg.seed);
  synth->add_option("--samples", synth_cfg.samples);
  synth->add_option("--noise", synth_cfg.noise);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (!isa.empty()) {
      const auto parsed = kernels::parse_isa(isa);
      if (!parsed || !kernels::table_for(*parsed)) throw ConfigError("--isa: " + isa + " is not available here");
      kernels::set_active_isa(*parsed);
    }
    if (*train) return cmd_train_gbdt(stage);
    if (*extract) return cmd_extract_paths(stage);
    if (*ser) return cmd_serialize(stage);
    if (*boost) return cmd_boost(boost_o);
    if (*sweep) return cmd_sweep(sweep_o, sweep_a);
    if (*eval) return cmd_evaluate(eval_runs, eval_out);
    if (*synth) return cmd_synth(synth_dir, synth_cfg);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
