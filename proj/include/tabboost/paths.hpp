#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tabboost/constraint.hpp"
#include "tabboost/gbdt.hpp"
#include "tabboost/table.hpp"

namespace tabboost {

// R contiguous groups of tree indices in boosting order. When M is not a
// multiple of R the first M mod R groups hold one extra tree.
struct RoundGrouping {
  std::vector<std::vector<std::size_t>> groups;

  std::size_t rounds() const { return groups.size(); }
};

RoundGrouping group_trees(std::size_t num_trees, std::size_t rounds);

struct CondensedPath {
  std::vector<Constraint> constraints;  // one per feature, sorted by feature
  std::size_t round = 0;                // 1-based

  bool satisfied_by(std::span<const double> row) const;
};

// Intersection of one sample's paths from a single group. Throws
// MergeConflict if the paths cannot all hold at once, and DataError if the
// sample does not satisfy the result.
CondensedPath condense_paths(std::span<const DecisionPath> paths, std::span<const double> row,
                             std::size_t round);

// Condensed path of `row` for every round of `grouping`.
std::vector<CondensedPath> condense_sample(const GbdtModel& model, const RoundGrouping& grouping,
                                           std::span<const double> row);

struct PathRenderStyle {
  std::string conjunction = " and ";
  std::string alternative = " or ";  // between excluded categories
  std::string unknown = "unknown";
};

// "30 < age <= 40 and balance > 0 and job is engineer", clauses in schema
// column order. Unbounded ranges are dropped as vacuous.
std::string render_path_text(std::span<const Constraint> constraints, const Schema& schema,
                             const PathRenderStyle& style = {});

// One JSON object per line:
// {"sample_id","round","constraints":[...],"text"}. Range bounds use null
// for infinities; categories are written by name.
struct PathRecord {
  std::size_t sample_id = 0;
  CondensedPath path;
  std::string text;
};

std::string path_record_to_json(const PathRecord& record, const Schema& schema);
PathRecord path_record_from_json(std::string_view line, const Schema& schema);
std::string paths_to_jsonl(std::span<const PathRecord> records, const Schema& schema);
std::vector<PathRecord> paths_from_jsonl(std::string_view text, const Schema& schema);

}  // namespace tabboost
