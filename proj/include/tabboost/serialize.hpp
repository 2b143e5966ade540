#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tabboost/paths.hpp"
#include "tabboost/table.hpp"

namespace tabboost {

// Placeholders: {name} {value} in feature_clause, {path} in considering_clause,
// {task} in task_clause.
struct PromptTemplate {
  std::string feature_clause = "The {name} is {value}. ";
  std::string considering_clause = "Considering {path}. ";
  std::string task_clause = "{task} ";
  std::string answer_suffix = "Answer:";
  std::string unknown_value = "unknown";
  PathRenderStyle path_style;
};

// key = value per line, '#' comments, values optionally double-quoted (quotes
// keep leading and trailing spaces; \" \\ \n escapes). Unset keys keep their
// defaults. Keys: feature_clause, considering_clause, task_clause,
// answer_suffix, unknown_value, path_conjunction, path_alternative.
PromptTemplate parse_template(std::string_view text);
PromptTemplate load_template(const std::string& path);

std::string render_cell(double cell, const Column& column, const PromptTemplate& tpl = {});

std::string serialize_features(std::span<const double> row, const Schema& schema,
                               const PromptTemplate& tpl = {});
// Features, then the considering clause when path_text is nonempty, then the
// task description and answer suffix.
std::string serialize_with_path(std::span<const double> row, std::string_view path_text,
                                const Schema& schema, const PromptTemplate& tpl = {});

struct PromptPair {
  std::string feature_view;
  std::string path_view;
  std::size_t sample_id = 0;
  std::size_t round = 0;
};

// One pair per requested sample, in the order given. Throws DataError naming
// the first sample without a path record for `round`.
std::vector<PromptPair> build_prompt_pairs(const Dataset& dataset,
                                           std::span<const std::size_t> sample_ids,
                                           std::span<const PathRecord> paths, std::size_t round,
                                           const PromptTemplate& tpl = {});
// Pairs without any path information; path_view equals feature_view.
std::vector<PromptPair> build_feature_pairs(const Dataset& dataset,
                                            std::span<const std::size_t> sample_ids,
                                            std::size_t round, const PromptTemplate& tpl = {});

// {"sample_id","round","feature_view","path_view","label"} per line; label is
// the class name.
std::string prompts_to_jsonl(std::span<const PromptPair> pairs, const Dataset& dataset);

}  // namespace tabboost
