#pragma once

#include <span>
#include <string>
#include <vector>

#include "tabboost/experiment.hpp"
#include "tabboost/metrics.hpp"

namespace tabboost {

// Report files of a run directory. None of them carries timing, so identical
// configs give byte-identical files.
//   scores.csv      one line per run: final test metrics
//   rounds.csv      one line per run and round
//   view_ratio.csv  one line per run, round and training step
//   summary.csv     method x shots x dataset table, mean ± std over runs
//   summary.json    the same table with raw numbers
std::string scores_csv(const RunConfig& config, std::string_view dataset,
                       std::span<const RunOutcome> runs);
std::string rounds_csv(std::span<const RunOutcome> runs);
std::string view_ratio_csv(std::span<const RunOutcome> runs);

// Run scores back from scores.csv, for re-aggregation.
std::vector<RunScore> read_scores_csv(std::string_view text);
std::vector<RunScore> run_scores(const RunConfig& config, std::string_view dataset,
                                 std::span<const RunOutcome> runs);

void write_reports(const std::string& out_dir, const RunConfig& config, std::string_view dataset,
                   std::span<const RunOutcome> runs);

// One column per grid point, one row for the cross-dataset mean AP and one
// per dataset.
struct SweepPoint {
  std::string label;
  AggregateTable table;
};
std::string sweep_table_csv(std::string_view axis, std::span<const SweepPoint> points);

}  // namespace tabboost
