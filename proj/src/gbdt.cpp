#include "tabboost/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "tabboost/error.hpp"
#include "tabboost/util.hpp"

namespace tabboost {

std::size_t Tree::route(std::span<const double> row) const {
  std::size_t id = 0;
  while (true) {
    const auto* split = std::get_if<SplitNode>(&nodes[id]);
    if (!split) return id;
    const double x = row[split->feature];
    bool go_left;
    if (is_missing(x)) {
      go_left = split->missing_left;
    } else if (split->categorical) {
      go_left = std::binary_search(split->categories.begin(), split->categories.end(),
                                   static_cast<std::size_t>(x));
    } else {
      go_left = x < split->threshold;
    }
    id = go_left ? split->left : split->right;
  }
}

double Tree::leaf_value(std::span<const double> row) const {
  return std::get<LeafNode>(nodes[route(row)]).value;
}

std::size_t Tree::depth() const {
  std::vector<std::size_t> level(nodes.size(), 0);
  std::size_t deepest = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    deepest = std::max(deepest, level[i]);
    if (const auto* s = std::get_if<SplitNode>(&nodes[i])) {
      level[s->left] = level[i] + 1;
      level[s->right] = level[i] + 1;
    }
  }
  return deepest;
}

void GbdtModel::validate() const {
  if (trees.empty()) throw DataError("gbdt model: at least one tree required");
  if (num_classes < 2) throw DataError("gbdt model: at least two classes required");
  if (objective == Objective::multiclass_softmax && trees.size() % num_classes != 0) {
    throw DataError("gbdt model: multiclass tree count must be a multiple of the class count");
  }
  if (!std::isfinite(base_score)) throw DataError("gbdt model: non-finite base_score");
  for (std::size_t m = 0; m < trees.size(); ++m) {
    const auto& nodes = trees[m].nodes;
    if (nodes.empty()) throw DataError("gbdt model: tree " + std::to_string(m) + " is empty");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (const auto* s = std::get_if<SplitNode>(&nodes[i])) {
        if (s->feature >= features.size()) {
          throw DataError("gbdt model: split feature out of range in tree " + std::to_string(m));
        }
        if (s->left <= i || s->right <= i || s->left >= nodes.size() || s->right >= nodes.size()) {
          throw DataError("gbdt model: bad child index in tree " + std::to_string(m));
        }
        if (!s->categorical && !std::isfinite(s->threshold)) {
          throw DataError("gbdt model: non-finite threshold in tree " + std::to_string(m));
        }
      } else if (!std::isfinite(std::get<LeafNode>(nodes[i]).value)) {
        throw DataError("gbdt model: non-finite leaf in tree " + std::to_string(m));
      }
    }
  }
}

void GbdtTrainConfig::validate() const {
  if (n_estimators < 1) throw ConfigError("gbdt: n_estimators must be at least 1");
  if (max_depth < 1) throw ConfigError("gbdt: max_depth must be at least 1");
  if (!(learning_rate > 0)) throw ConfigError("gbdt: learning_rate must be positive");
  if (!(subsample > 0 && subsample <= 1)) throw ConfigError("gbdt: subsample must lie in (0, 1]");
  if (min_child_weight < 0 || reg_lambda < 0 || gamma < 0) {
    throw ConfigError("gbdt: min_child_weight, reg_lambda and gamma must be non-negative");
  }
}

namespace {

struct GradPair {
  double g = 0.0;
  double h = 0.0;
};

struct SplitCandidate {
  double gain = 0.0;
  std::size_t feature = 0;
  bool categorical = false;
  double threshold = 0.0;
  std::size_t category = 0;
  bool missing_left = true;
};

class TreeGrower {
 public:
  TreeGrower(const Dataset& data, const GbdtTrainConfig& cfg, std::span<const GradPair> grads)
      : data_(data), cfg_(cfg), grads_(grads) {}

  Tree grow(std::vector<std::size_t> rows) {
    tree_.nodes.clear();
    tree_.nodes.emplace_back(LeafNode{});
    build(0, std::move(rows), 0);
    return std::move(tree_);
  }

 private:
  double score(double g, double h) const { return g * g / (h + cfg_.reg_lambda); }

  double leaf_weight(double g, double h) const {
    return -g / (h + cfg_.reg_lambda) * cfg_.learning_rate;
  }

  void consider(SplitCandidate& best, const SplitCandidate& cand) const {
    if (cand.gain > best.gain) best = cand;
  }

  void evaluate(double gl, double hl, double gr, double hr, double parent,
                SplitCandidate cand, SplitCandidate& best) const {
    if (hl < cfg_.min_child_weight || hr < cfg_.min_child_weight) return;
    cand.gain = 0.5 * (score(gl, hl) + score(gr, hr) - parent) - cfg_.gamma;
    consider(best, cand);
  }

  SplitCandidate find_split(const std::vector<std::size_t>& rows, double g_total, double h_total) {
    const double parent = score(g_total, h_total);
    SplitCandidate best;
    best.gain = 1e-12;  // require strictly positive improvement
    const auto& schema = data_.schema;
    std::vector<std::pair<double, std::size_t>> values;
    for (std::size_t f = 0; f < schema.num_features(); ++f) {
      values.clear();
      double gm = 0.0, hm = 0.0;
      for (auto r : rows) {
        const double x = data_.rows[r][f];
        if (is_missing(x)) {
          gm += grads_[r].g;
          hm += grads_[r].h;
        } else {
          values.emplace_back(x, r);
        }
      }
      if (values.empty()) continue;  // all missing in this node
      if (schema.columns[f].is_categorical()) {
        const std::size_t vocab = schema.columns[f].categories.size();
        std::vector<GradPair> per(vocab);
        std::vector<bool> seen(vocab, false);
        for (auto& [x, r] : values) {
          const auto k = static_cast<std::size_t>(x);
          per[k].g += grads_[r].g;
          per[k].h += grads_[r].h;
          seen[k] = true;
        }
        for (std::size_t k = 0; k < vocab; ++k) {
          if (!seen[k]) continue;
          SplitCandidate cand;
          cand.feature = f;
          cand.categorical = true;
          cand.category = k;
          for (bool ml : {true, false}) {
            cand.missing_left = ml;
            const double gl = per[k].g + (ml ? gm : 0.0);
            const double hl = per[k].h + (ml ? hm : 0.0);
            evaluate(gl, hl, g_total - gl, h_total - hl, parent, cand, best);
          }
        }
        continue;
      }
      std::sort(values.begin(), values.end());
      double gl_present = 0.0, hl_present = 0.0;
      for (std::size_t i = 0; i + 1 < values.size(); ++i) {
        gl_present += grads_[values[i].second].g;
        hl_present += grads_[values[i].second].h;
        const double a = values[i].first;
        const double b = values[i + 1].first;
        if (!(a < b)) continue;
        double threshold = a + (b - a) / 2;
        if (!(threshold > a)) threshold = b;
        SplitCandidate cand;
        cand.feature = f;
        cand.threshold = threshold;
        for (bool ml : {true, false}) {
          cand.missing_left = ml;
          const double gl = gl_present + (ml ? gm : 0.0);
          const double hl = hl_present + (ml ? hm : 0.0);
          evaluate(gl, hl, g_total - gl, h_total - hl, parent, cand, best);
        }
      }
    }
    return best;
  }

  void build(std::size_t node, std::vector<std::size_t> rows, int depth) {
    double g = 0.0, h = 0.0;
    for (auto r : rows) {
      g += grads_[r].g;
      h += grads_[r].h;
    }
    if (depth < cfg_.max_depth && rows.size() >= 2) {
      const SplitCandidate best = find_split(rows, g, h);
      if (best.gain > 1e-12) {
        SplitNode split;
        split.feature = best.feature;
        split.categorical = best.categorical;
        split.threshold = best.threshold;
        if (best.categorical) split.categories = {best.category};
        split.missing_left = best.missing_left;
        std::vector<std::size_t> left_rows, right_rows;
        for (auto r : rows) {
          const double x = data_.rows[r][best.feature];
          bool go_left;
          if (is_missing(x)) {
            go_left = best.missing_left;
          } else if (best.categorical) {
            go_left = static_cast<std::size_t>(x) == best.category;
          } else {
            go_left = x < best.threshold;
          }
          (go_left ? left_rows : right_rows).push_back(r);
        }
        split.left = tree_.nodes.size();
        tree_.nodes.emplace_back(LeafNode{});
        split.right = tree_.nodes.size();
        tree_.nodes.emplace_back(LeafNode{});
        const auto left = split.left, right = split.right;
        tree_.nodes[node] = std::move(split);
        build(left, std::move(left_rows), depth + 1);
        build(right, std::move(right_rows), depth + 1);
        return;
      }
    }
    tree_.nodes[node] = LeafNode{leaf_weight(g, h)};
  }

  const Dataset& data_;
  const GbdtTrainConfig& cfg_;
  std::span<const GradPair> grads_;
  Tree tree_;
};

}  // namespace

GbdtModel train_gbdt(const Dataset& data, std::span<const std::size_t> indices,
                     const GbdtTrainConfig& config) {
  config.validate();
  std::set<int> distinct;
  for (auto i : indices) distinct.insert(data.labels.at(i));
  if (distinct.size() < 2) throw DataError("train_gbdt: training split holds a single class");

  GbdtModel model;
  model.features = data.schema.columns;
  model.num_classes = data.schema.num_classes();
  model.objective = model.num_classes == 2 ? Objective::binary_logistic : Objective::multiclass_softmax;
  model.learning_rate = config.learning_rate;
  model.base_score = 0.0;
  const std::size_t width = model.output_width();
  const int positive = static_cast<int>(data.schema.positive_class.value_or(1));

  const std::size_t n = data.size();
  std::vector<double> margin(n * width, model.base_score);
  std::vector<GradPair> grads(n);
  std::vector<double> prob(width);

  std::size_t tree_index = 0;
  for (int iter = 0; iter < config.n_estimators; ++iter) {
    // Softmax probabilities are taken at the start of the iteration for all
    // class trees, as in the usual multiclass formulation.
    std::vector<double> snapshot = margin;
    for (std::size_t k = 0; k < width; ++k, ++tree_index) {
      for (auto i : indices) {
        const double* m = &snapshot[i * width];
        if (width == 1) {
          const double p = 1.0 / (1.0 + std::exp(-m[0]));
          const double y = data.labels[i] == positive ? 1.0 : 0.0;
          grads[i] = {p - y, std::max(p * (1.0 - p), 1e-16)};
        } else {
          const double mx = *std::max_element(m, m + width);
          double z = 0.0;
          for (std::size_t c = 0; c < width; ++c) z += std::exp(m[c] - mx);
          const double p = std::exp(m[k] - mx) / z;
          const double y = static_cast<std::size_t>(data.labels[i]) == k ? 1.0 : 0.0;
          grads[i] = {p - y, std::max(p * (1.0 - p), 1e-16)};
        }
      }
      std::vector<std::size_t> rows;
      if (config.subsample < 1.0) {
        Rng rng(mix_seed(config.seed, tree_index));
        for (auto i : indices) {
          if (uniform_unit(rng) < config.subsample) rows.push_back(i);
        }
        if (rows.empty()) rows.push_back(indices[uniform_below(rng, indices.size())]);
      } else {
        rows.assign(indices.begin(), indices.end());
      }
      TreeGrower grower(data, config, grads);
      Tree tree = grower.grow(std::move(rows));
      for (auto i : indices) margin[i * width + k] += tree.leaf_value(data.rows[i]);
      model.trees.push_back(std::move(tree));
    }
  }
  model.validate();
  return model;
}

std::vector<double> predict_margin(const GbdtModel& model, std::span<const double> row) {
  if (row.size() != model.features.size()) {
    throw DataError("predict_margin: row has " + std::to_string(row.size()) + " cells, model expects " +
                    std::to_string(model.features.size()));
  }
  std::vector<double> out(model.output_width(), model.base_score);
  for (std::size_t m = 0; m < model.trees.size(); ++m) {
    out[model.output_of_tree(m)] += model.trees[m].leaf_value(row);
  }
  return out;
}

DecisionPath extract_path(const GbdtModel& model, std::size_t tree_index,
                          std::span<const double> row) {
  if (tree_index >= model.trees.size()) throw DataError("extract_path: tree index out of range");
  if (row.size() != model.features.size()) throw DataError("extract_path: row arity mismatch");
  const Tree& tree = model.trees[tree_index];
  DecisionPath path;
  path.source_tree = tree_index;
  std::size_t id = 0;
  while (const auto* split = std::get_if<SplitNode>(&tree.nodes[id])) {
    const std::size_t f = split->feature;
    const double x = row[f];
    bool go_left;
    if (is_missing(x)) {
      go_left = split->missing_left;
      add_constraint(path.constraints, make_missing(f));
    } else if (split->categorical) {
      const auto cat = static_cast<std::size_t>(x);
      go_left = std::binary_search(split->categories.begin(), split->categories.end(), cat);
      const std::size_t vocab = model.features[f].categories.size();
      if (go_left) {
        if (split->categories.size() == 1) {
          add_constraint(path.constraints, make_equals(f, cat));
        } else {
          std::vector<std::size_t> outside;
          for (std::size_t k = 0; k < vocab; ++k) {
            if (!std::binary_search(split->categories.begin(), split->categories.end(), k)) {
              outside.push_back(k);
            }
          }
          if (!outside.empty()) add_constraint(path.constraints, make_not_in(f, outside));
        }
      } else if (!split->categories.empty()) {
        add_constraint(path.constraints, make_not_in(f, split->categories));
      }
    } else {
      go_left = x < split->threshold;
      if (go_left) {
        add_constraint(path.constraints, make_range(f, -kInf, true, split->threshold, true));
      } else {
        add_constraint(path.constraints, make_range(f, split->threshold, false, kInf, true));
      }
    }
    id = go_left ? split->left : split->right;
  }
  return path;
}

}  // namespace tabboost
