#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tabboost/boost.hpp"
#include "tabboost/gbdt.hpp"
#include "tabboost/metrics.hpp"
#include "tabboost/protocol.hpp"
#include "tabboost/serialize.hpp"
#include "tabboost/toy_learner.hpp"

namespace tabboost {

struct GbdtSource {
  std::string dump_path;  // empty: train per split
  double base_score = 0.0;
  GbdtTrainConfig train;
};

enum class LearnerKind { toy, external };

struct LearnerSpec {
  LearnerKind kind = LearnerKind::toy;
  ToyLearnerConfig toy;
  std::string command;
  ProtocolTimeouts timeouts;
};

struct RunConfig {
  std::string dataset_path;
  std::string schema_path;
  std::string template_path;
  std::string dataset_name;  // report column; defaults to the schema name
  std::string method = "boost";
  GbdtSource gbdt;
  BoostConfig boost;
  LearnerSpec learner;
  ViewMode views = ViewMode::both;
  std::uint64_t seed = 0;
  std::size_t num_seeds = 1;
  int folds = 5;
  std::vector<std::size_t> shots{128};
  ShotSampling sampling = ShotSampling::stratified;
  ThresholdObjective threshold = ThresholdObjective::accuracy;
  std::size_t workers = 1;
  std::string out = "run";
  bool write_artifacts = true;

  void validate() const;  // throws ConfigError with the offending field
};

// JSON config; unknown keys are rejected. Missing keys keep the defaults.
RunConfig parse_run_config(std::string_view json_text);
RunConfig load_run_config(const std::string& path);
std::string run_config_to_json(const RunConfig& config);

struct RunKey {
  std::size_t shots = 0;
  int fold = 0;
  std::uint64_t seed = 0;

  std::string label() const;  // "shots128_fold0_seed3"
  auto operator<=>(const RunKey&) const = default;
};

struct RunOutcome {
  RunKey key;
  BoostResult boost;
  double test_ap = 0.0;
  std::optional<CalibratedAccuracy> accuracy;
  std::vector<std::size_t> excluded_classes;
  std::size_t n_train = 0;
  std::size_t n_valid = 0;
  std::size_t n_test = 0;
  std::size_t num_trees = 0;
  std::vector<std::size_t> sample_ids[kSplits];
  double wall_seconds = 0.0;
};

// Everything one run needs that is shared across the grid.
struct ExperimentInputs {
  Dataset dataset;
  PromptTemplate prompt_template;
  std::optional<GbdtModel> dump_model;
  // Content hashes recorded in the manifest.
  std::string dataset_hash;
  std::string schema_hash;
  std::string template_hash;
  std::string dump_hash;
};

// Loads dataset, schema, template and dump named by `config`. A dump whose
// recorded dataset or schema hash differs from the current files is refused
// as stale.
ExperimentInputs load_inputs(const RunConfig& config);

struct RunArtifacts {
  std::string paths_jsonl;
  std::string prompts_jsonl;
};

// Fold plan seeded by the base seed, shots by (run seed, fold), trees and
// learners by the run seed.
RunOutcome run_single(const ExperimentInputs& inputs, const FoldPlan& folds, const RunConfig& config,
                      const RunKey& key, RunArtifacts* artifacts = nullptr);

struct ExperimentResult {
  std::vector<RunOutcome> runs;  // sorted by key
  FoldPlan folds;
  LearnerCapabilities capabilities;
  double wall_seconds = 0.0;
};

// Runs the shots x folds x seeds grid on `workers` threads. When
// `out_dir` is nonempty, per-run artifacts, reports and the manifest are
// written there.
ExperimentResult run_experiment(const ExperimentInputs& inputs, const RunConfig& config,
                                const std::string& out_dir);

}  // namespace tabboost
