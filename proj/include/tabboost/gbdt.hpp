#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "tabboost/constraint.hpp"
#include "tabboost/table.hpp"

namespace tabboost {

// Numeric splits send x < threshold to the left ("yes") child. Categorical
// splits send x in `categories` to the left. Missing cells follow
// `missing_left`.
struct SplitNode {
  std::size_t feature = 0;
  bool categorical = false;
  double threshold = 0.0;
  std::vector<std::size_t> categories;  // sorted
  std::size_t left = 0;
  std::size_t right = 0;
  bool missing_left = true;
};

struct LeafNode {
  double value = 0.0;
};

using TreeNode = std::variant<SplitNode, LeafNode>;

// Nodes stored flat with the root at index 0; children always have larger
// indices than their parent.
struct Tree {
  std::vector<TreeNode> nodes;

  // Index of the leaf reached by `row`.
  std::size_t route(std::span<const double> row) const;
  double leaf_value(std::span<const double> row) const;
  std::size_t depth() const;
};

enum class Objective { binary_logistic, multiclass_softmax };

struct GbdtModel {
  std::vector<Column> features;  // the schema columns the trees index
  std::size_t num_classes = 2;
  Objective objective = Objective::binary_logistic;
  // Margin offset; leaves already include the per-tree learning rate.
  double base_score = 0.0;
  double learning_rate = 1.0;  // recorded for reference only
  std::vector<Tree> trees;

  std::size_t output_width() const { return objective == Objective::binary_logistic ? 1 : num_classes; }
  // Output slot that tree `m` contributes to (round-robin for multiclass).
  std::size_t output_of_tree(std::size_t m) const { return m % output_width(); }
  // Throws DataError on structural violations.
  void validate() const;
};

struct GbdtTrainConfig {
  int n_estimators = 100;
  int max_depth = 6;
  double learning_rate = 0.3;
  double min_child_weight = 1.0;
  double reg_lambda = 1.0;
  double gamma = 0.0;
  double subsample = 1.0;
  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigError
};

// Search ranges of the reference hyperparameter study, kept as documented
// bounds for configs. Nothing in this library tunes over them.
struct ParamRange {
  std::string_view name;
  std::string_view distribution;
  double low;
  double high;
};
inline constexpr ParamRange kGbdtSearchSpace[] = {
    {"n_estimators", "UniformInt", 10, 100},
    {"max_depth", "UniformInt", 3, 10},
    {"learning_rate", "LogUniform", 1e-5, 1},
    {"reg_alpha", "LogUniform", 1e-8, 1e2},
    {"reg_lambda", "LogUniform", 1e-8, 1e2},
    {"gamma", "LogUniform", 1e-8, 1e2},
    {"min_child_weight", "LogUniform", 1e-8, 1e5},
    {"subsample", "Uniform", 0.5, 1},
    {"colsample_bylevel", "Uniform", 0.5, 1},
    {"colsample_bytree", "Uniform", 0.5, 1},
};

// Newton-boosted trees on log-loss (binary) or softmax cross-entropy
// (multiclass, one tree per class per iteration) with exact greedy splits.
// For binary tasks the margin is the log-odds of the schema's positive class
// (class 1 when unset).
GbdtModel train_gbdt(const Dataset& data, std::span<const std::size_t> indices,
                     const GbdtTrainConfig& config);

// base_score + sum of routed leaf values, per output slot.
std::vector<double> predict_margin(const GbdtModel& model, std::span<const double> row);

// Root-to-leaf constraints of `row` in tree `tree_index`, tightened so each
// feature appears once.
DecisionPath extract_path(const GbdtModel& model, std::size_t tree_index,
                          std::span<const double> row);

// XGBoost JSON tree dump: an array with one nested node object per tree.
// Split names resolve against `schema` as a column name, "column=category"
// (one-hot indicator), or "f<index>". Native categorical splits carry a list
// split_condition.
GbdtModel parse_xgboost_dump(std::string_view dump, const Schema& schema,
                             double base_score = 0.0);
std::string export_xgboost_dump(const GbdtModel& model);

// Dump wrapped in {"base_score","objective","num_class","learning_rate",
// "trees"} plus optional provenance hashes.
struct StageInputs {
  std::string dataset_hash;
  std::string schema_hash;
};
std::string serialize_model(const GbdtModel& model, const StageInputs& inputs = {});
// Accepts either the envelope or a bare dump array. `inputs` receives the
// envelope's provenance hashes when present.
GbdtModel load_model(std::string_view text, const Schema& schema, StageInputs* inputs = nullptr);

}  // namespace tabboost
