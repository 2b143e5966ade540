#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace tabboost {

// Step-interpolated AP: sum over distinct descending score thresholds of
// (recall gain) x (precision at that threshold). Tied scores enter together.
// `positive` holds 0/1. Throws DataError when there are no positives.
double average_precision(std::span<const double> scores, std::span<const int> positive);

struct MacroAp {
  double value = 0.0;
  std::vector<std::size_t> excluded_classes;  // no positives in `labels`
};

// One-vs-rest AP per class over a row-major n x C score matrix, averaged
// over the classes that have positives. Throws DataError when none do.
MacroAp macro_average_precision(std::span<const double> scores, std::span<const int> labels,
                                std::size_t num_classes);

enum class ThresholdObjective { accuracy, balanced_accuracy, f1 };

struct CalibratedAccuracy {
  double accuracy = 0.0;        // on the test scores
  double threshold = 0.5;       // predict positive when score >= threshold
  double train_objective = 0.0;
  bool degenerate = false;      // all train scores equal; fixed 0.5 used
};

// Chooses the threshold among midpoints of consecutive distinct train scores
// that maximizes the objective on train (ties go to the lowest threshold),
// then scores the test split with it.
CalibratedAccuracy calibrated_accuracy(std::span<const double> train_scores,
                                       std::span<const int> train_positive,
                                       std::span<const double> test_scores,
                                       std::span<const int> test_positive,
                                       ThresholdObjective objective = ThresholdObjective::accuracy);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population
  std::size_t count = 0;
};
MeanStd mean_std(std::span<const double> values);

// One value per (method, shots, dataset, fold).
struct RunScore {
  std::string method;
  std::string shots;
  std::string dataset;
  int fold = 0;
  double value = 0.0;
};

struct AggregateRow {
  std::string method;
  std::string shots;
  double average = 0.0;           // unweighted mean of the per-dataset means
  std::vector<MeanStd> datasets;  // aligned with AggregateTable::datasets
};

struct AggregateTable {
  std::vector<std::string> datasets;  // first-seen order
  std::vector<AggregateRow> rows;     // first-seen (method, shots) order

  // method,shots,Avg.,<datasets...>; cells "mean ± std" scaled by `scale`.
  std::string to_csv(double scale = 100.0) const;
  std::string to_json() const;
};

AggregateTable aggregate_runs(std::span<const RunScore> scores);

}  // namespace tabboost
