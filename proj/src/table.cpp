#include "tabboost/table.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <numeric>
#include <set>

#include "json.hpp"
#include "tabboost/csv.hpp"
#include "tabboost/error.hpp"
#include "tabboost/util.hpp"

namespace tabboost {

using nlohmann::json;

std::optional<std::size_t> Column::category_index(std::string_view value) const {
  for (std::size_t i = 0; i < categories.size(); ++i) {
    if (categories[i] == value) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> Schema::column_index(std::string_view column) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].name == column) return i;
  }
  return std::nullopt;
}

void Schema::validate() const {
  if (class_names.size() < 2) throw DataError("schema: at least two classes required");
  std::set<std::string> seen(class_names.begin(), class_names.end());
  if (seen.size() != class_names.size()) throw DataError("schema: class names must be distinct");
  if (!class_verbalizations.empty() && class_verbalizations.size() != class_names.size()) {
    throw DataError("schema: verbalizations must match the class list");
  }
  if (positive_class && *positive_class >= class_names.size()) {
    throw DataError("schema: positive_class out of range");
  }
  std::set<std::string> names;
  for (const auto& col : columns) {
    if (col.name.empty()) throw DataError("schema: empty column name");
    if (!names.insert(col.name).second) throw DataError("schema: duplicate column " + col.name);
    if (col.is_categorical() && col.categories.empty()) {
      throw DataError("schema: categorical column '" + col.name + "' lists no categories");
    }
  }
  if (names.count(label_column)) throw DataError("schema: label column collides with a feature");
}

Schema parse_schema_json(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw DataError(std::string("schema: ") + e.what());
  }
  Schema schema;
  try {
    schema.name = doc.value("name", "");
    for (const auto& col : doc.at("columns")) {
      Column c;
      c.name = col.at("name").get<std::string>();
      const std::string kind = col.value("kind", "numeric");
      if (kind == "numeric") {
        c.kind = ColumnKind::numeric;
      } else if (kind == "categorical") {
        c.kind = ColumnKind::categorical;
        c.categories = col.value("categories", std::vector<std::string>{});
      } else {
        throw DataError("schema: column '" + c.name + "' has unknown kind '" + kind + "'");
      }
      schema.columns.push_back(std::move(c));
    }
    schema.class_names = doc.at("classes").get<std::vector<std::string>>();
    schema.class_verbalizations =
        doc.value("verbalizations", schema.class_names);
    if (doc.contains("positive_class") && !doc["positive_class"].is_null()) {
      const auto& pos = doc["positive_class"];
      if (pos.is_number_integer()) {
        schema.positive_class = pos.get<std::size_t>();
      } else {
        const auto name = pos.get<std::string>();
        const auto it = std::find(schema.class_names.begin(), schema.class_names.end(), name);
        if (it == schema.class_names.end()) throw DataError("schema: unknown positive class " + name);
        schema.positive_class = static_cast<std::size_t>(it - schema.class_names.begin());
      }
    }
    schema.task_description = doc.value("task_description", "");
    schema.label_column = doc.value("label_column", "label");
  } catch (const json::exception& e) {
    throw DataError(std::string("schema: ") + e.what());
  }
  schema.validate();
  return schema;
}

Schema load_schema(const std::string& path) { return parse_schema_json(read_file(path)); }

std::string schema_to_json(const Schema& schema) {
  nlohmann::ordered_json doc;
  if (!schema.name.empty()) doc["name"] = schema.name;
  doc["columns"] = nlohmann::ordered_json::array();
  for (const auto& col : schema.columns) {
    nlohmann::ordered_json c;
    c["name"] = col.name;
    c["kind"] = col.is_categorical() ? "categorical" : "numeric";
    if (col.is_categorical()) c["categories"] = col.categories;
    doc["columns"].push_back(std::move(c));
  }
  doc["classes"] = schema.class_names;
  doc["verbalizations"] = schema.class_verbalizations;
  doc["positive_class"] = schema.positive_class ? nlohmann::ordered_json(*schema.positive_class)
                                                : nlohmann::ordered_json(nullptr);
  doc["task_description"] = schema.task_description;
  doc["label_column"] = schema.label_column;
  return doc.dump(2) + "\n";
}

void Dataset::validate() const {
  schema.validate();
  if (rows.size() != labels.size()) throw DataError("dataset: rows and labels differ in length");
  const auto k = schema.num_features();
  const auto c = static_cast<int>(schema.num_classes());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != k) {
      throw DataError("dataset: row " + std::to_string(i) + " has " +
                      std::to_string(rows[i].size()) + " cells, expected " + std::to_string(k));
    }
    for (std::size_t j = 0; j < k; ++j) {
      const double v = rows[i][j];
      if (is_missing(v)) continue;
      if (!std::isfinite(v)) throw DataError("dataset: non-finite cell in row " + std::to_string(i));
      const auto& col = schema.columns[j];
      if (col.is_categorical()) {
        if (v < 0 || v != std::floor(v) || v >= static_cast<double>(col.categories.size())) {
          throw DataError("dataset: bad category index in row " + std::to_string(i) + ", column " +
                          col.name);
        }
      }
    }
    if (labels[i] < 0 || labels[i] >= c) {
      throw DataError("dataset: label out of range in row " + std::to_string(i));
    }
  }
}

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(schema.num_classes(), 0);
  for (int y : labels) ++counts[static_cast<std::size_t>(y)];
  return counts;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.schema = schema;
  out.rows.reserve(indices.size());
  out.labels.reserve(indices.size());
  for (auto i : indices) {
    out.rows.push_back(rows.at(i));
    out.labels.push_back(labels.at(i));
  }
  return out;
}

namespace {

double parse_decimal(const std::string& raw, std::size_t row, const std::string& column) {
  const std::string cell = trim(raw);
  double value = 0.0;
  const char* begin = cell.data();
  const char* end = cell.data() + cell.size();
  if (!cell.empty() && *begin == '+') ++begin;
  const auto result = std::from_chars(begin, end, value);
  if (result.ec != std::errc{} || result.ptr != end || !std::isfinite(value)) {
    throw DataError("csv row " + std::to_string(row) + ": unparsable number '" + raw +
                    "' in column " + column);
  }
  return value;
}

}  // namespace

Dataset load_dataset(std::string_view csv_text, const Schema& schema) {
  schema.validate();
  auto records = csv::parse(csv_text);
  // Blank lines parse as a single empty field.
  std::erase_if(records, [](const csv::Record& r) { return r.size() == 1 && trim(r[0]).empty(); });
  if (records.empty()) throw DataError("csv: missing header row");

  const auto& header = records.front();
  const std::size_t k = schema.num_features();
  std::vector<std::size_t> source_of(k, SIZE_MAX);
  std::size_t label_source = SIZE_MAX;
  for (std::size_t h = 0; h < header.size(); ++h) {
    const std::string name = trim(header[h]);
    if (name == schema.label_column) {
      label_source = h;
      continue;
    }
    const auto idx = schema.column_index(name);
    if (!idx) throw DataError("csv header: unexpected column '" + name + "'");
    if (source_of[*idx] != SIZE_MAX) throw DataError("csv header: duplicate column '" + name + "'");
    source_of[*idx] = h;
  }
  for (std::size_t j = 0; j < k; ++j) {
    if (source_of[j] == SIZE_MAX) {
      throw DataError("csv header: missing column '" + schema.columns[j].name + "'");
    }
  }
  if (label_source == SIZE_MAX) {
    throw DataError("csv header: missing label column '" + schema.label_column + "'");
  }

  Dataset data;
  data.schema = schema;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.size() != header.size()) {
      throw DataError("csv row " + std::to_string(r) + ": expected " +
                      std::to_string(header.size()) + " fields, found " +
                      std::to_string(rec.size()));
    }
    FeatureRow row(k, kMissing);
    for (std::size_t j = 0; j < k; ++j) {
      const auto& col = schema.columns[j];
      const std::string cell = trim(rec[source_of[j]]);
      if (cell.empty()) continue;
      if (col.is_categorical()) {
        const auto idx = col.category_index(cell);
        if (!idx) {
          throw DataError("csv row " + std::to_string(r) + ": unknown category '" + cell +
                          "' in column " + col.name);
        }
        row[j] = static_cast<double>(*idx);
      } else {
        row[j] = parse_decimal(cell, r, col.name);
      }
    }
    const std::string label = trim(rec[label_source]);
    const auto it = std::find(schema.class_names.begin(), schema.class_names.end(), label);
    if (it == schema.class_names.end()) {
      throw DataError("csv row " + std::to_string(r) + ": unknown label '" + label + "'");
    }
    data.rows.push_back(std::move(row));
    data.labels.push_back(static_cast<int>(it - schema.class_names.begin()));
  }
  return data;
}

Dataset load_dataset_file(const std::string& csv_path, const Schema& schema) {
  return load_dataset(read_file(csv_path), schema);
}

std::string dataset_to_csv(const Dataset& dataset) {
  const auto& schema = dataset.schema;
  std::string out;
  csv::Record header;
  for (const auto& col : schema.columns) header.push_back(col.name);
  header.push_back(schema.label_column);
  out += csv::join(header) + "\n";
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    csv::Record rec;
    for (std::size_t j = 0; j < schema.num_features(); ++j) {
      const double v = dataset.rows[i][j];
      if (is_missing(v)) {
        rec.emplace_back();
      } else if (schema.columns[j].is_categorical()) {
        rec.push_back(schema.columns[j].categories[static_cast<std::size_t>(v)]);
      } else {
        rec.push_back(format_number(v));
      }
    }
    rec.push_back(schema.class_names[static_cast<std::size_t>(dataset.labels[i])]);
    out += csv::join(rec) + "\n";
  }
  return out;
}

std::vector<std::size_t> FoldPlan::fold_indices(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    if (assignments[i] == fold) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> FoldPlan::complement_indices(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    if (assignments[i] != fold) out.push_back(i);
  }
  return out;
}

FoldPlan stratified_kfold(const Dataset& dataset, int k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("stratified_kfold: k must be at least 2");
  const std::size_t c = dataset.schema.num_classes();
  std::vector<std::vector<std::size_t>> by_class(c);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    by_class[static_cast<std::size_t>(dataset.labels[i])].push_back(i);
  }
  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.assignments.assign(dataset.size(), -1);
  std::size_t position = 0;
  for (std::size_t cls = 0; cls < c; ++cls) {
    auto& members = by_class[cls];
    if (members.size() < static_cast<std::size_t>(k)) {
      plan.warnings.push_back("class '" + dataset.schema.class_names[cls] + "' has " +
                              std::to_string(members.size()) + " samples, fewer than " +
                              std::to_string(k) + " folds");
    }
    Rng rng(mix_seed(seed, cls));
    shuffle_in_place(members, rng);
    for (auto idx : members) {
      plan.assignments[idx] = static_cast<int>(position % static_cast<std::size_t>(k));
      ++position;
    }
  }
  return plan;
}

ShotSample sample_shots(const Dataset& dataset, const FoldPlan& folds, int test_fold,
                        std::size_t shots, std::uint64_t seed, ShotSampling mode) {
  if (test_fold < 0 || test_fold >= folds.k) throw ConfigError("sample_shots: test fold out of range");
  if (shots == 0) throw ConfigError("sample_shots: shots must be positive");
  if (folds.assignments.size() != dataset.size()) {
    throw ConfigError("sample_shots: fold plan does not match the dataset");
  }
  const auto pool = folds.complement_indices(test_fold);
  ShotSample sample;
  sample.shots = shots;
  if (shots >= pool.size()) {
    sample.train_indices = pool;
    return sample;
  }

  const std::uint64_t stream = static_cast<std::uint64_t>(test_fold) + 1;
  if (mode == ShotSampling::uniform) {
    auto order = pool;
    Rng rng(mix_seed(seed, 0x5107u + stream));
    shuffle_in_place(order, rng);
    order.resize(shots);
    std::sort(order.begin(), order.end());
    sample.train_indices = std::move(order);
  } else {
    const std::size_t c = dataset.schema.num_classes();
    std::vector<std::vector<std::size_t>> by_class(c);
    for (auto i : pool) by_class[static_cast<std::size_t>(dataset.labels[i])].push_back(i);
    for (std::size_t cls = 0; cls < c; ++cls) {
      Rng rng(mix_seed(seed, (stream << 16) + cls));
      shuffle_in_place(by_class[cls], rng);
    }
    // Most frequent classes first; they absorb the remainder.
    std::vector<std::size_t> order(c);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return by_class[a].size() > by_class[b].size();
    });
    std::vector<std::size_t> quota(c, 0);
    std::size_t remaining = shots;
    while (remaining > 0) {
      std::vector<std::size_t> open;
      for (auto cls : order) {
        if (quota[cls] < by_class[cls].size()) open.push_back(cls);
      }
      if (open.empty()) break;
      const std::size_t share = remaining / open.size();
      const std::size_t extra = remaining % open.size();
      for (std::size_t i = 0; i < open.size(); ++i) {
        const auto cls = open[i];
        const std::size_t want = share + (i < extra ? 1 : 0);
        const std::size_t take = std::min(want, by_class[cls].size() - quota[cls]);
        quota[cls] += take;
        remaining -= take;
      }
    }
    for (std::size_t cls = 0; cls < c; ++cls) {
      sample.train_indices.insert(sample.train_indices.end(), by_class[cls].begin(),
                                  by_class[cls].begin() + static_cast<std::ptrdiff_t>(quota[cls]));
    }
    std::sort(sample.train_indices.begin(), sample.train_indices.end());
  }
  std::set_difference(pool.begin(), pool.end(), sample.train_indices.begin(),
                      sample.train_indices.end(), std::back_inserter(sample.valid_indices));
  return sample;
}

std::size_t parse_shots(std::string_view text) {
  const std::string t = trim(text);
  if (t == "all" || t == "All") return SIZE_MAX;
  std::size_t value = 0;
  const auto result = std::from_chars(t.data(), t.data() + t.size(), value);
  if (result.ec != std::errc{} || result.ptr != t.data() + t.size() || value == 0) {
    throw ConfigError("invalid shot count '" + t + "'");
  }
  return value;
}

std::string shots_label(std::size_t shots) {
  return shots == SIZE_MAX ? "all" : std::to_string(shots);
}

}  // namespace tabboost
