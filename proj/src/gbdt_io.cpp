#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "json.hpp"
#include "tabboost/error.hpp"
#include "tabboost/gbdt.hpp"

namespace tabboost {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

struct ResolvedFeature {
  std::size_t column = 0;
  std::optional<std::size_t> indicator;  // "column=category" one-hot split
};

ResolvedFeature resolve_feature(const std::string& name, const std::vector<Column>& columns) {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].name == name) return {i, std::nullopt};
  }
  if (const auto eq = name.find('='); eq != std::string::npos) {
    const std::string col = name.substr(0, eq);
    const std::string cat = name.substr(eq + 1);
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (columns[i].name != col) continue;
      if (!columns[i].is_categorical()) break;
      if (auto k = columns[i].category_index(cat)) return {i, *k};
      throw DataError("xgboost dump: unknown category in split '" + name + "'");
    }
  }
  if (name.size() > 1 && name[0] == 'f' &&
      std::all_of(name.begin() + 1, name.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    const auto idx = std::stoul(name.substr(1));
    if (idx < columns.size()) return {idx, std::nullopt};
  }
  throw DataError("xgboost dump: unknown feature '" + name + "'");
}

class DumpTreeReader {
 public:
  explicit DumpTreeReader(const std::vector<Column>& columns) : columns_(columns) {}

  Tree read(const json& root) {
    by_id_.clear();
    implied_.clear();
    collect(root, 0);
    Tree tree;
    if (!root.contains("nodeid") && root.contains("leaf")) {
      tree.nodes.emplace_back(LeafNode{number(root, "leaf")});
      return tree;
    }
    const long root_id = id_of(root);
    // Parents are placed before children; a node id seen twice means a
    // cycle or a shared subtree, neither of which is a tree.
    std::set<long> placed{root_id};
    std::vector<std::pair<long, std::size_t>> pending{{root_id, 0}};
    tree.nodes.emplace_back(LeafNode{});
    for (std::size_t head = 0; head < pending.size(); ++head) {
      const auto [id, slot] = pending[head];
      const json& node = *by_id_.at(id);
      if (node.contains("leaf")) {
        tree.nodes[slot] = LeafNode{number(node, "leaf")};
        continue;
      }
      SplitNode split = read_split(node);
      const long yes = integer(node, "yes");
      const long no = integer(node, "no");
      const long missing = node.contains("missing") ? integer(node, "missing") : yes;
      if (missing != yes && missing != no) throw DataError("xgboost dump: missing branch is not a child");
      for (long child : {yes, no}) {
        if (!by_id_.count(child)) throw DataError("xgboost dump: malformed node, unknown child id " + std::to_string(child));
        if (!placed.insert(child).second) throw DataError("xgboost dump: cyclic node reference at id " + std::to_string(child));
      }
      split.left = tree.nodes.size();
      tree.nodes.emplace_back(LeafNode{});
      split.right = tree.nodes.size();
      tree.nodes.emplace_back(LeafNode{});
      split.missing_left = missing == yes;
      pending.emplace_back(yes, split.left);
      pending.emplace_back(no, split.right);
      tree.nodes[slot] = std::move(split);
    }
    return tree;
  }

 private:
  static double number(const json& node, const char* key) {
    if (!node.contains(key) || !node[key].is_number()) {
      throw DataError(std::string("xgboost dump: malformed node, field '") + key + "'");
    }
    return node[key].get<double>();
  }

  static long integer(const json& node, const char* key) {
    if (!node.contains(key) || !node[key].is_number_integer()) {
      throw DataError(std::string("xgboost dump: malformed node, field '") + key + "'");
    }
    return node[key].get<long>();
  }

  long id_of(const json& node) const {
    if (node.contains("nodeid")) return integer(node, "nodeid");
    return implied_.at(&node);
  }

  // Nodes without "nodeid" take the id their parent points at, children
  // listed yes first; the root defaults to 0.
  void collect(const json& node, long implied) {
    if (!node.is_object()) throw DataError("xgboost dump: malformed node, expected an object");
    if (!node.contains("nodeid")) implied_[&node] = implied;
    const long id = id_of(node);
    if (!by_id_.emplace(id, &node).second) {
      throw DataError("xgboost dump: duplicate node id " + std::to_string(id));
    }
    if (node.contains("leaf")) return;
    if (!node.contains("children") || !node["children"].is_array()) {
      throw DataError("xgboost dump: malformed node, split without children");
    }
    const auto& children = node["children"];
    for (std::size_t i = 0; i < children.size(); ++i) {
      const char* key = i == 0 ? "yes" : "no";
      const long next = i < 2 && node.contains(key) && node[key].is_number_integer() ? node[key].get<long>() : -1 - static_cast<long>(i);
      collect(children[i], next);
    }
  }

  SplitNode read_split(const json& node) const {
    if (!node.contains("split") || !node["split"].is_string()) {
      throw DataError("xgboost dump: malformed node, field 'split'");
    }
    const auto feature = resolve_feature(node["split"].get<std::string>(), columns_);
    const Column& column = columns_[feature.column];
    SplitNode split;
    split.feature = feature.column;
    if (!node.contains("split_condition")) throw DataError("xgboost dump: malformed node, field 'split_condition'");
    const json& cond = node["split_condition"];
    if (cond.is_array()) {
      if (!column.is_categorical()) {
        throw DataError("xgboost dump: category list on numeric column " + column.name);
      }
      split.categorical = true;
      for (const auto& c : cond) {
        const auto k = c.get<long>();
        if (k < 0 || static_cast<std::size_t>(k) >= column.categories.size()) {
          throw DataError("xgboost dump: category index out of range on " + column.name);
        }
        split.categories.push_back(static_cast<std::size_t>(k));
      }
    } else if (cond.is_number()) {
      const double threshold = cond.get<double>();
      if (!std::isfinite(threshold)) throw DataError("xgboost dump: non-finite split_condition");
      if (column.is_categorical()) {
        // Indicator or label-encoded split; store the set of categories whose
        // encoded value falls below the threshold.
        split.categorical = true;
        for (std::size_t k = 0; k < column.categories.size(); ++k) {
          const double encoded = feature.indicator ? (k == *feature.indicator ? 1.0 : 0.0)
                                                   : static_cast<double>(k);
          if (encoded < threshold) split.categories.push_back(k);
        }
      } else {
        split.threshold = threshold;
      }
    } else {
      throw DataError("xgboost dump: malformed node, field 'split_condition'");
    }
    std::sort(split.categories.begin(), split.categories.end());
    split.categories.erase(std::unique(split.categories.begin(), split.categories.end()),
                           split.categories.end());
    return split;
  }

  const std::vector<Column>& columns_;
  std::map<long, const json*> by_id_;
  std::map<const json*, long> implied_;
};

std::vector<Tree> read_trees(const json& array, const std::vector<Column>& columns) {
  if (!array.is_array()) throw DataError("xgboost dump: expected an array of trees");
  std::vector<Tree> trees;
  DumpTreeReader reader(columns);
  for (const auto& entry : array) {
    if (entry.is_string()) {
      json parsed;
      try {
        parsed = json::parse(entry.get<std::string>());
      } catch (const json::exception& e) {
        throw DataError(std::string("xgboost dump: malformed node: ") + e.what());
      }
      trees.push_back(reader.read(parsed));
    } else {
      trees.push_back(reader.read(entry));
    }
  }
  return trees;
}

json parse_json(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("xgboost dump: malformed node: ") + e.what());
  }
}

ordered_json export_node(const GbdtModel& model, const Tree& tree, std::size_t id, int depth) {
  ordered_json out;
  out["nodeid"] = id;
  if (const auto* leaf = std::get_if<LeafNode>(&tree.nodes[id])) {
    out["leaf"] = leaf->value;
    return out;
  }
  const auto& split = std::get<SplitNode>(tree.nodes[id]);
  out["depth"] = depth;
  out["split"] = model.features[split.feature].name;
  if (split.categorical) {
    out["split_condition"] = split.categories;
  } else {
    out["split_condition"] = split.threshold;
  }
  out["yes"] = split.left;
  out["no"] = split.right;
  out["missing"] = split.missing_left ? split.left : split.right;
  out["children"] = ordered_json::array({export_node(model, tree, split.left, depth + 1),
                                         export_node(model, tree, split.right, depth + 1)});
  return out;
}

ordered_json export_trees(const GbdtModel& model) {
  ordered_json trees = ordered_json::array();
  for (const auto& tree : model.trees) trees.push_back(export_node(model, tree, 0, 0));
  return trees;
}

}  // namespace

GbdtModel parse_xgboost_dump(std::string_view dump, const Schema& schema, double base_score) {
  const json doc = parse_json(dump);
  GbdtModel model;
  model.features = schema.columns;
  model.num_classes = schema.num_classes();
  model.objective = model.num_classes == 2 ? Objective::binary_logistic : Objective::multiclass_softmax;
  model.base_score = base_score;
  model.trees = read_trees(doc, model.features);
  model.validate();
  return model;
}

std::string export_xgboost_dump(const GbdtModel& model) { return export_trees(model).dump(1) + "\n"; }

std::string serialize_model(const GbdtModel& model, const StageInputs& inputs) {
  ordered_json doc;
  doc["base_score"] = model.base_score;
  doc["objective"] = model.objective == Objective::binary_logistic ? "binary:logistic" : "multi:softprob";
  doc["num_class"] = model.num_classes;
  doc["learning_rate"] = model.learning_rate;
  if (!inputs.dataset_hash.empty() || !inputs.schema_hash.empty()) {
    doc["inputs"] = {{"dataset", inputs.dataset_hash}, {"schema", inputs.schema_hash}};
  }
  doc["trees"] = export_trees(model);
  return doc.dump(1) + "\n";
}

GbdtModel load_model(std::string_view text, const Schema& schema, StageInputs* inputs) {
  const json doc = parse_json(text);
  if (doc.is_array()) return parse_xgboost_dump(text, schema);
  if (!doc.is_object() || !doc.contains("trees")) {
    throw DataError("gbdt model: expected a tree array or an envelope with 'trees'");
  }
  GbdtModel model;
  model.features = schema.columns;
  model.num_classes = doc.value("num_class", schema.num_classes());
  if (model.num_classes != schema.num_classes()) {
    throw DataError("gbdt model: class count differs from the schema");
  }
  const std::string objective = doc.value("objective", "binary:logistic");
  model.objective = objective.rfind("binary", 0) == 0 ? Objective::binary_logistic
                                                      : Objective::multiclass_softmax;
  model.base_score = doc.value("base_score", 0.0);
  model.learning_rate = doc.value("learning_rate", 1.0);
  model.trees = read_trees(doc["trees"], model.features);
  if (inputs && doc.contains("inputs")) {
    inputs->dataset_hash = doc["inputs"].value("dataset", "");
    inputs->schema_hash = doc["inputs"].value("schema", "");
  }
  model.validate();
  return model;
}

}  // namespace tabboost
