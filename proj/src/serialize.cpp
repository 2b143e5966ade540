#include "tabboost/serialize.hpp"

#include <unordered_map>

#include "json.hpp"
#include "tabboost/error.hpp"
#include "tabboost/util.hpp"

namespace tabboost {

namespace {

void replace_all(std::string& text, std::string_view key, std::string_view value) {
  std::size_t pos = 0;
  while ((pos = text.find(key, pos)) != std::string::npos) {
    text.replace(pos, key.size(), value);
    pos += value.size();
  }
}

std::string unquote(std::string_view raw, std::size_t line_no) {
  const std::string v = trim(raw);
  if (v.size() < 2 || v.front() != '"') return v;
  if (v.back() != '"') throw ConfigError("template line " + std::to_string(line_no) + ": unterminated quote");
  std::string out;
  for (std::size_t i = 1; i + 1 < v.size(); ++i) {
    if (v[i] == '\\' && i + 2 < v.size()) {
      const char e = v[++i];
      out += e == 'n' ? '\n' : e;
    } else {
      out += v[i];
    }
  }
  return out;
}

}  // namespace

PromptTemplate parse_template(std::string_view text) {
  PromptTemplate tpl;
  std::size_t line_no = 0;
  for (const auto& line : split(text, '\n')) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("template line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(std::string_view(t).substr(0, eq));
    const std::string value = unquote(std::string_view(t).substr(eq + 1), line_no);
    if (key == "feature_clause") tpl.feature_clause = value;
    else if (key == "considering_clause") tpl.considering_clause = value;
    else if (key == "task_clause") tpl.task_clause = value;
    else if (key == "answer_suffix") tpl.answer_suffix = value;
    else if (key == "unknown_value") tpl.unknown_value = value;
    else if (key == "path_conjunction") tpl.path_style.conjunction = value;
    else if (key == "path_alternative") tpl.path_style.alternative = value;
    else throw ConfigError("template line " + std::to_string(line_no) + ": unknown key '" + key + "'");
  }
  tpl.path_style.unknown = tpl.unknown_value;
  return tpl;
}

PromptTemplate load_template(const std::string& path) { return parse_template(read_file(path)); }

std::string render_cell(double cell, const Column& column, const PromptTemplate& tpl) {
  if (is_missing(cell)) return tpl.unknown_value;
  if (column.is_categorical()) return column.categories.at(static_cast<std::size_t>(cell));
  return format_number(cell);
}

namespace {

std::string features_prefix(std::span<const double> row, const Schema& schema,
                            const PromptTemplate& tpl) {
  if (row.size() != schema.columns.size()) {
    throw DataError("row has " + std::to_string(row.size()) + " cells, schema has " +
                    std::to_string(schema.columns.size()) + " columns");
  }
  std::string out;
  for (std::size_t k = 0; k < row.size(); ++k) {
    std::string clause = tpl.feature_clause;
    replace_all(clause, "{name}", schema.columns[k].name);
    replace_all(clause, "{value}", render_cell(row[k], schema.columns[k], tpl));
    out += clause;
  }
  return out;
}

std::string task_suffix(const Schema& schema, const PromptTemplate& tpl) {
  std::string out;
  if (!schema.task_description.empty()) {
    out = tpl.task_clause;
    replace_all(out, "{task}", schema.task_description);
  }
  return out + tpl.answer_suffix;
}

}  // namespace

std::string serialize_features(std::span<const double> row, const Schema& schema,
                               const PromptTemplate& tpl) {
  return features_prefix(row, schema, tpl) + task_suffix(schema, tpl);
}

std::string serialize_with_path(std::span<const double> row, std::string_view path_text,
                                const Schema& schema, const PromptTemplate& tpl) {
  std::string out = features_prefix(row, schema, tpl);
  if (!path_text.empty()) {
    std::string clause = tpl.considering_clause;
    replace_all(clause, "{path}", path_text);
    out += clause;
  }
  return out + task_suffix(schema, tpl);
}

std::vector<PromptPair> build_prompt_pairs(const Dataset& dataset,
                                           std::span<const std::size_t> sample_ids,
                                           std::span<const PathRecord> paths, std::size_t round,
                                           const PromptTemplate& tpl) {
  std::unordered_map<std::size_t, const PathRecord*> by_sample;
  for (const auto& rec : paths) {
    if (rec.path.round == round) by_sample[rec.sample_id] = &rec;
  }
  std::vector<PromptPair> out;
  out.reserve(sample_ids.size());
  for (std::size_t id : sample_ids) {
    const auto it = by_sample.find(id);
    if (it == by_sample.end()) {
      throw DataError("no condensed path for sample " + std::to_string(id) + " in round " +
                      std::to_string(round));
    }
    const auto& row = dataset.rows.at(id);
    std::string text = it->second->text;
    if (text.empty() && !it->second->path.constraints.empty()) {
      text = render_path_text(it->second->path.constraints, dataset.schema, tpl.path_style);
    }
    out.push_back({serialize_features(row, dataset.schema, tpl),
                   serialize_with_path(row, text, dataset.schema, tpl), id, round});
  }
  return out;
}

std::vector<PromptPair> build_feature_pairs(const Dataset& dataset,
                                            std::span<const std::size_t> sample_ids,
                                            std::size_t round, const PromptTemplate& tpl) {
  std::vector<PromptPair> out;
  out.reserve(sample_ids.size());
  for (std::size_t id : sample_ids) {
    std::string view = serialize_features(dataset.rows.at(id), dataset.schema, tpl);
    out.push_back({view, view, id, round});
  }
  return out;
}

std::string prompts_to_jsonl(std::span<const PromptPair> pairs, const Dataset& dataset) {
  std::string out;
  for (const auto& p : pairs) {
    nlohmann::ordered_json doc;
    doc["sample_id"] = p.sample_id;
    doc["round"] = p.round;
    doc["feature_view"] = p.feature_view;
    doc["path_view"] = p.path_view;
    doc["label"] = dataset.schema.class_names.at(static_cast<std::size_t>(dataset.labels.at(p.sample_id)));
    out += doc.dump();
    out += '\n';
  }
  return out;
}

}  // namespace tabboost
