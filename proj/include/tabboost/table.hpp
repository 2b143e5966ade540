#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tabboost {

enum class ColumnKind { numeric, categorical };

struct Column {
  std::string name;
  ColumnKind kind = ColumnKind::numeric;
  std::vector<std::string> categories;  // vocabulary, categorical columns only

  bool is_categorical() const { return kind == ColumnKind::categorical; }
  // Index of `value` in the vocabulary, if present.
  std::optional<std::size_t> category_index(std::string_view value) const;
};

struct Schema {
  std::string name;  // dataset label used in reports; optional
  std::vector<Column> columns;
  std::vector<std::string> class_names;
  std::vector<std::string> class_verbalizations;
  std::optional<std::size_t> positive_class;
  std::string task_description;
  std::string label_column = "label";

  std::size_t num_features() const { return columns.size(); }
  std::size_t num_classes() const { return class_names.size(); }
  bool is_binary() const { return class_names.size() == 2; }
  std::optional<std::size_t> column_index(std::string_view name) const;

  // Throws DataError describing the first violated invariant.
  void validate() const;
};

Schema parse_schema_json(std::string_view json_text);
Schema load_schema(const std::string& path);
std::string schema_to_json(const Schema& schema);

// Cells hold the numeric value, or the category index for categorical
// columns. NaN is the missing marker.
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double cell) { return std::isnan(cell); }

using FeatureRow = std::vector<double>;

struct Dataset {
  Schema schema;
  std::vector<FeatureRow> rows;
  std::vector<int> labels;

  std::size_t size() const { return rows.size(); }
  // Throws DataError on arity, kind or label violations.
  void validate() const;
  std::vector<std::size_t> class_counts() const;
  Dataset subset(std::span<const std::size_t> indices) const;
};

// Comma-separated, double-quote escaping, first row is the header. Header
// names must match the schema's columns plus its label column, in any order.
Dataset load_dataset(std::string_view csv_text, const Schema& schema);
Dataset load_dataset_file(const std::string& csv_path, const Schema& schema);
std::string dataset_to_csv(const Dataset& dataset);

struct FoldPlan {
  int k = 0;
  std::uint64_t seed = 0;
  std::vector<int> assignments;      // fold index per sample
  std::vector<std::string> warnings;  // classes with fewer than k samples

  std::vector<std::size_t> fold_indices(int fold) const;
  std::vector<std::size_t> complement_indices(int fold) const;
};

// Per class, samples are shuffled and the class-ordered concatenation is dealt
// round-robin across folds, so both fold sizes and per-class fold counts
// differ by at most one.
FoldPlan stratified_kfold(const Dataset& dataset, int k, std::uint64_t seed);

enum class ShotSampling {
  stratified,  // equal share per class, remainder to the most frequent classes
  uniform,
};

struct ShotSample {
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> valid_indices;
  std::size_t shots = 0;
};

// Draws `shots` training samples from the folds other than `test_fold`; the
// rest of that pool becomes the validation split. Asking for at least the
// pool size returns the whole pool (the "all" setting).
ShotSample sample_shots(const Dataset& dataset, const FoldPlan& folds, int test_fold,
                        std::size_t shots, std::uint64_t seed,
                        ShotSampling mode = ShotSampling::stratified);

// Parses a shot count; "all" maps to SIZE_MAX.
std::size_t parse_shots(std::string_view text);
std::string shots_label(std::size_t shots);

}  // namespace tabboost
