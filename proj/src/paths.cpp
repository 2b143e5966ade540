#include "tabboost/paths.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "tabboost/error.hpp"
#include "tabboost/util.hpp"

namespace tabboost {

using nlohmann::json;
using nlohmann::ordered_json;

RoundGrouping group_trees(std::size_t num_trees, std::size_t rounds) {
  if (rounds == 0) throw ConfigError("rounds must be at least 1");
  if (rounds > num_trees) {
    throw ConfigError("cannot split " + std::to_string(num_trees) + " trees into " +
                      std::to_string(rounds) + " rounds");
  }
  RoundGrouping grouping;
  const std::size_t base = num_trees / rounds;
  const std::size_t extra = num_trees % rounds;
  std::size_t next = 0;
  for (std::size_t r = 0; r < rounds; ++r) {
    std::vector<std::size_t> group(base + (r < extra ? 1 : 0));
    for (auto& m : group) m = next++;
    grouping.groups.push_back(std::move(group));
  }
  return grouping;
}

bool CondensedPath::satisfied_by(std::span<const double> row) const {
  return std::all_of(constraints.begin(), constraints.end(), [&](const Constraint& c) {
    return c.feature < row.size() && c.admits(row[c.feature]);
  });
}

CondensedPath condense_paths(std::span<const DecisionPath> paths, std::span<const double> row,
                             std::size_t round) {
  CondensedPath out;
  out.round = round;
  for (const auto& path : paths) {
    for (const auto& c : path.constraints) add_constraint(out.constraints, c);
  }
  if (!out.satisfied_by(row)) {
    throw DataError("condensed path of round " + std::to_string(round) +
                    " is not satisfied by its own sample");
  }
  return out;
}

std::vector<CondensedPath> condense_sample(const GbdtModel& model, const RoundGrouping& grouping,
                                           std::span<const double> row) {
  std::vector<CondensedPath> out;
  out.reserve(grouping.rounds());
  std::vector<DecisionPath> paths;
  for (std::size_t r = 0; r < grouping.rounds(); ++r) {
    paths.clear();
    for (std::size_t m : grouping.groups[r]) paths.push_back(extract_path(model, m, row));
    out.push_back(condense_paths(paths, row, r + 1));
  }
  return out;
}

namespace {

std::string render_one(const Constraint& c, const Column& column, const PathRenderStyle& style) {
  const std::string& name = column.name;
  return std::visit(
      [&](const auto& b) -> std::string {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, NumericRange>) {
          const bool has_lower = std::isfinite(b.lower);
          const bool has_upper = std::isfinite(b.upper);
          if (has_lower && has_upper && b.lower == b.upper) return name + " is " + format_number(b.lower);
          if (has_lower && has_upper) {
            return format_number(b.lower) + (b.lower_open ? " < " : " <= ") + name +
                   (b.upper_open ? " < " : " <= ") + format_number(b.upper);
          }
          if (has_lower) return name + (b.lower_open ? " > " : " >= ") + format_number(b.lower);
          if (has_upper) return name + (b.upper_open ? " < " : " <= ") + format_number(b.upper);
          return {};
        } else if constexpr (std::is_same_v<T, CatEquals>) {
          return name + " is " + column.categories.at(b.category);
        } else if constexpr (std::is_same_v<T, CatNotIn>) {
          std::string s = name + " is not ";
          for (std::size_t i = 0; i < b.categories.size(); ++i) {
            if (i) s += style.alternative;
            s += column.categories.at(b.categories[i]);
          }
          return s;
        } else {
          return name + " is " + style.unknown;
        }
      },
      c.body);
}

json bound(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

std::string render_path_text(std::span<const Constraint> constraints, const Schema& schema,
                             const PathRenderStyle& style) {
  std::vector<const Constraint*> ordered;
  for (const auto& c : constraints) {
    if (c.feature >= schema.columns.size()) {
      throw DataError("path constraint on feature " + std::to_string(c.feature) +
                      " outside the schema");
    }
    ordered.push_back(&c);
  }
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const Constraint* a, const Constraint* b) { return a->feature < b->feature; });
  std::string text;
  for (const Constraint* c : ordered) {
    const std::string clause = render_one(*c, schema.columns[c->feature], style);
    if (clause.empty()) continue;
    if (!text.empty()) text += style.conjunction;
    text += clause;
  }
  return text;
}

std::string path_record_to_json(const PathRecord& record, const Schema& schema) {
  ordered_json doc;
  doc["sample_id"] = record.sample_id;
  doc["round"] = record.path.round;
  ordered_json list = ordered_json::array();
  for (const auto& c : record.path.constraints) {
    const Column& column = schema.columns.at(c.feature);
    ordered_json item;
    item["feature"] = column.name;
    std::visit(
        [&](const auto& b) {
          using T = std::decay_t<decltype(b)>;
          if constexpr (std::is_same_v<T, NumericRange>) {
            item["kind"] = "range";
            item["lower"] = bound(b.lower);
            item["lower_open"] = b.lower_open;
            item["upper"] = bound(b.upper);
            item["upper_open"] = b.upper_open;
          } else if constexpr (std::is_same_v<T, CatEquals>) {
            item["kind"] = "equals";
            item["category"] = column.categories.at(b.category);
          } else if constexpr (std::is_same_v<T, CatNotIn>) {
            item["kind"] = "not_in";
            std::vector<std::string> names;
            for (auto k : b.categories) names.push_back(column.categories.at(k));
            item["categories"] = names;
          } else {
            item["kind"] = "missing";
          }
        },
        c.body);
    list.push_back(std::move(item));
  }
  doc["constraints"] = std::move(list);
  doc["text"] = record.text;
  return doc.dump();
}

PathRecord path_record_from_json(std::string_view line, const Schema& schema) {
  json doc;
  try {
    doc = json::parse(line);
    PathRecord record;
    record.sample_id = doc.at("sample_id").get<std::size_t>();
    record.path.round = doc.at("round").get<std::size_t>();
    record.text = doc.value("text", "");
    for (const auto& item : doc.at("constraints")) {
      const std::string name = item.at("feature").get<std::string>();
      const auto feature = schema.column_index(name);
      if (!feature) throw DataError("path record: unknown feature '" + name + "'");
      const Column& column = schema.columns[*feature];
      const auto category = [&](const json& v) {
        const auto k = column.category_index(v.get<std::string>());
        if (!k) throw DataError("path record: unknown category '" + v.get<std::string>() + "' of " + name);
        return *k;
      };
      const std::string kind = item.at("kind").get<std::string>();
      Constraint c;
      if (kind == "range") {
        const auto read = [](const json& v, double inf) { return v.is_null() ? inf : v.get<double>(); };
        c = make_range(*feature, read(item.at("lower"), -kInf), item.value("lower_open", true),
                       read(item.at("upper"), kInf), item.value("upper_open", true));
      } else if (kind == "equals") {
        c = make_equals(*feature, category(item.at("category")));
      } else if (kind == "not_in") {
        std::vector<std::size_t> cats;
        for (const auto& v : item.at("categories")) cats.push_back(category(v));
        c = make_not_in(*feature, std::move(cats));
      } else if (kind == "missing") {
        c = make_missing(*feature);
      } else {
        throw DataError("path record: unknown constraint kind '" + kind + "'");
      }
      add_constraint(record.path.constraints, c);
    }
    return record;
  } catch (const json::exception& e) {
    throw DataError(std::string("path record: ") + e.what());
  }
}

std::string paths_to_jsonl(std::span<const PathRecord> records, const Schema& schema) {
  std::string out;
  for (const auto& r : records) {
    out += path_record_to_json(r, schema);
    out += '\n';
  }
  return out;
}

std::vector<PathRecord> paths_from_jsonl(std::string_view text, const Schema& schema) {
  std::vector<PathRecord> out;
  for (const auto& line : split(text, '\n')) {
    if (trim(line).empty()) continue;
    out.push_back(path_record_from_json(line, schema));
  }
  return out;
}

}  // namespace tabboost
