// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <sys/wait.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include "oracles.hpp"
#include "tabboost/boost.hpp"
#include "tabboost/constraint.hpp"
#include "tabboost/error.hpp"
#include "tabboost/experiment.hpp"
#include "tabboost/gbdt.hpp"
#include "tabboost/kernels.hpp"
#include "tabboost/metrics.hpp"
#include "tabboost/paths.hpp"
#include "tabboost/synthetic.hpp"
#include "tabboost/toy_learner.hpp"
#include "tabboost/util.hpp"

using namespace tabboost;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;
};

int failures = 0;

void criterion(const std::string& name, double budget_seconds, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = body();
  } catch (const std::exception& e) {
    out = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (budget_seconds > 0 && secs > budget_seconds) {
    out.ok = false;
    out.detail += " [over time budget]";
  }
  if (!out.ok) ++failures;
  char timing[64];
  if (budget_seconds > 0) std::snprintf(timing, sizeof timing, "%.2fs of %.0fs", secs, budget_seconds);
  else std::snprintf(timing, sizeof timing, "%.2fs", secs);
  std::printf("%s  %-28s %-16s %s\n", out.ok ? "PASS" : "FAIL", name.c_str(), timing, out.detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

// ---- worked example and merge rules

Outcome worked_example() {
  Schema schema;
  schema.columns = {{"age", ColumnKind::numeric, {}},
                    {"balance", ColumnKind::numeric, {}},
                    {"job", ColumnKind::categorical, {"engineer", "teacher", "doctor"}}};
  schema.class_names = {"no", "yes"};
  schema.positive_class = 1;
  DecisionPath a, b;
  add_constraint(a.constraints, make_range(0, 18, true, 40, false));
  add_constraint(a.constraints, make_equals(2, 0));
  add_constraint(b.constraints, make_range(0, 30, true, 50, false));
  add_constraint(b.constraints, make_range(1, 0, true, kInf, true));
  add_constraint(b.constraints, make_not_in(2, {1}));
  const std::vector<double> row{35, 120, 0};
  const DecisionPath both[] = {a, b};
  const auto c = condense_paths(both, row, 1);
  const std::vector<Constraint> expected{make_range(0, 30, true, 40, false), make_range(1, 0, true, kInf, true),
                                         make_equals(2, 0)};
  if (c.constraints != expected) return {false, "worked example condensed to the wrong set"};
  const auto text = render_path_text(c.constraints, schema);
  if (text != "30 < age <= 40 and balance > 0 and job is engineer") return {false, "rendered as: " + text};

  int rules = 0;
  const auto conflict = [](const Constraint& x, const Constraint& y) {
    try {
      merge_constraints(x, y);
    } catch (const MergeConflict&) {
      return true;
    }
    return false;
  };
  // numeric intervals intersect
  rules += merge_constraints(make_range(0, 18, true, 40, false), make_range(0, 30, true, 50, false)) ==
           make_range(0, 30, true, 40, false);
  // positive with positive
  rules += merge_constraints(make_equals(2, 0), make_equals(2, 0)) == make_equals(2, 0) &&
           conflict(make_equals(2, 0), make_equals(2, 1));
  // positive with negation keeps the positive
  rules += merge_constraints(make_equals(2, 0), make_not_in(2, {1})) == make_equals(2, 0) &&
           conflict(make_equals(2, 1), make_not_in(2, {1}));
  // negations union
  rules += merge_constraints(make_not_in(2, {1}), make_not_in(2, {2})) == make_not_in(2, {1, 2});
  if (rules != 4) return {false, std::to_string(rules) + " of 4 merge rules hold"};
  return {true, "condensed path and all 4 merge rules exact"};
}

// ---- path compression against grid enumeration

constexpr std::size_t kGridFeatures = 5;
constexpr int kNumericLevels = 6;  // numeric cells take 0..5
constexpr int kCategories = 4;

Schema grid_schema() {
  Schema s;
  for (int f = 0; f < 3; ++f) s.columns.push_back({"x" + std::to_string(f), ColumnKind::numeric, {}});
  for (int f = 3; f < 5; ++f) s.columns.push_back({"c" + std::to_string(f), ColumnKind::categorical, {"a", "b", "c", "d"}});
  s.class_names = {"no", "yes"};
  s.positive_class = 1;
  return s;
}

// Every cell value of a feature, missing included.
std::vector<double> cell_values(std::size_t f) {
  std::vector<double> v;
  const int levels = f < 3 ? kNumericLevels : kCategories;
  for (int i = 0; i < levels; ++i) v.push_back(i);
  v.push_back(kMissing);
  return v;
}

void grow_random(Tree& tree, std::size_t node, int depth, Rng& rng) {
  if (depth == 0 || uniform_unit(rng) < 0.2) {
    tree.nodes[node] = LeafNode{uniform_unit(rng) - 0.5};
    return;
  }
  SplitNode s;
  s.feature = uniform_below(rng, kGridFeatures);
  s.missing_left = uniform_below(rng, 2) == 0;
  if (s.feature < 3) {
    // thresholds on and between grid levels
    s.threshold = 0.5 * static_cast<double>(1 + uniform_below(rng, 2 * kNumericLevels - 1));
  } else {
    s.categorical = true;
    for (std::size_t k = 0; k < kCategories; ++k) {
      if (uniform_below(rng, 2)) s.categories.push_back(k);
    }
    if (s.categories.empty()) s.categories.push_back(uniform_below(rng, kCategories));
    if (s.categories.size() == kCategories) s.categories.pop_back();
  }
  s.left = tree.nodes.size();
  tree.nodes.emplace_back(LeafNode{});
  s.right = tree.nodes.size();
  tree.nodes.emplace_back(LeafNode{});
  const auto l = s.left, r = s.right;
  tree.nodes[node] = s;
  grow_random(tree, l, depth - 1, rng);
  grow_random(tree, r, depth - 1, rng);
}

Outcome path_compression() {
  const Schema schema = grid_schema();
  std::vector<std::vector<double>> grid{{}};
  for (std::size_t f = 0; f < kGridFeatures; ++f) {
    std::vector<std::vector<double>> next;
    for (const auto& g : grid) {
      for (double v : cell_values(f)) {
        auto h = g;
        h.push_back(v);
        next.push_back(std::move(h));
      }
    }
    grid = std::move(next);
  }
  Rng rng(2024);
  std::size_t instances = 0, violations = 0, members = 0, grid_checks = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    GbdtModel model;
    model.features = schema.columns;
    const std::size_t m = 1 + uniform_below(rng, 9);
    for (std::size_t t = 0; t < m; ++t) {
      Tree tree;
      tree.nodes.emplace_back(LeafNode{});
      grow_random(tree, 0, 1 + static_cast<int>(uniform_below(rng, 4)), rng);
      model.trees.push_back(std::move(tree));
    }
    const auto grouping = group_trees(m, 1 + uniform_below(rng, std::min<std::size_t>(m, 4)));
    const auto& sample = grid[uniform_below(rng, grid.size())];
    const auto condensed = condense_sample(model, grouping, sample);
    for (std::size_t r = 0; r < grouping.rounds(); ++r) {
      ++instances;
      const auto& cs = condensed[r].constraints;
      const auto admits = [&](const std::vector<double>& point) {
        return std::all_of(cs.begin(), cs.end(), [&](const Constraint& c) { return c.admits(point[c.feature]); });
      };
      if (!admits(sample)) ++violations;
      std::vector<std::size_t> leaf;
      for (auto t : grouping.groups[r]) leaf.push_back(oracle::route(model.trees[t], sample));
      members += leaf.size();
      for (const auto& point : grid) {
        if (!admits(point)) continue;
        ++grid_checks;
        for (std::size_t k = 0; k < leaf.size(); ++k) {
          if (oracle::route(model.trees[grouping.groups[r][k]], point) != leaf[k]) {
            ++violations;
            break;
          }
        }
      }
    }
  }
  const bool ok = violations == 0 && instances >= 1000;
  return {ok, std::to_string(instances) + " instances, " + std::to_string(members) + " member paths, " +
                  std::to_string(grid_checks) + " grid points checked, " + std::to_string(violations) +
                  " violations"};
}

// ---- accumulation

class ReplayLearner : public WeakLearner {
 public:
  explicit ReplayLearner(LogitMatrix f) : f_(std::move(f)) {}
  LearnerCapabilities capabilities() const override { return {}; }
  TrainSummary train(const TrainRequest&, const ProgressFn&) override { return {}; }
  LogitMatrix predict(std::span<const PromptPair>) override { return f_; }

 private:
  LogitMatrix f_;
};

Outcome accumulation() {
  Rng rng(5);
  double worst = 0.0;
  for (std::size_t classes : {2u, 3u, 5u}) {
    const TaskSpec task{classes, 1};
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t n = 8, rounds = 1 + uniform_below(rng, 8);
      BoostConfig config;
      config.rounds = rounds;
      config.eta = 0.1 + uniform_unit(rng);
      std::vector<std::unique_ptr<WeakLearner>> owned;
      std::vector<WeakLearner*> learners;
      std::vector<double> sum(n * task.width(), 0.0);
      for (std::size_t r = 0; r < rounds; ++r) {
        LogitMatrix f(n, task.width());
        for (std::size_t k = 0; k < f.values.size(); ++k) sum[k] += (f.values[k] = 6 * uniform_unit(rng) - 3);
        owned.push_back(std::make_unique<ReplayLearner>(f));
        learners.push_back(owned.back().get());
      }
      const std::vector<std::vector<PromptPair>> pairs(rounds, std::vector<PromptPair>(n));
      const auto p = predict_ensemble(learners, pairs, config, task);
      for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> expect(classes);
        if (classes == 2) {
          expect[1] = oracle::sigmoid(config.eta * sum[i]);
          expect[0] = 1 - expect[1];
        } else {
          double z = 0;
          for (std::size_t c = 0; c < classes; ++c) z += std::exp(config.eta * sum[i * classes + c]);
          for (std::size_t c = 0; c < classes; ++c) expect[c] = std::exp(config.eta * sum[i * classes + c]) / z;
        }
        for (std::size_t c = 0; c < classes; ++c) worst = std::max(worst, std::abs(p.at(i, c) - expect[c]));
      }
    }
  }
  // decayed accumulation stays inside the geometric bound
  bool bounded = true;
  double peak_ratio = 0.0;
  const double eta = 0.3, alpha = 0.9;
  for (double c : {2.5, -4.0, 0.7}) {
    LogitMatrix F(3, 1), f(3, 1, c);
    const double bound = eta * std::abs(c) / (1 - alpha);
    for (int r = 1; r <= 1000; ++r) {
      F = accumulate(F, f, eta, alpha, r);
      for (double v : F.values) {
        bounded = bounded && std::abs(v) <= bound;
        peak_ratio = std::max(peak_ratio, std::abs(v) / bound);
      }
    }
  }
  return {worst <= 1e-12 && bounded,
          fmt("max |p - softmax(eta sum f)| = %.2e; alpha=0.9 peak |F|/bound = %.12f", worst, peak_ratio)};
}

// ---- gradients

// Five-point central difference; truncation error is O(h^4).
double derivative(const std::function<double(double)>& f, double h) {
  return (8 * (f(h) - f(-h)) - (f(2 * h) - f(-2 * h))) / (12 * h);
}

double rel_err(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0 ? 0 : std::abs(a - b) / scale;
}

Outcome gradients() {
  Rng rng(77);
  double worst_loss = 0, worst_toy = 0;
  std::size_t checked = 0;
  const double h = 1e-3;
  for (int fixture = 0; fixture < 20; ++fixture) {
    const std::size_t classes = fixture % 2 ? 2 : 3 + fixture % 3;
    const TaskSpec task{classes, 1};
    const std::size_t n = 12, w = task.width();
    std::vector<int> y(n);
    for (auto& l : y) l = static_cast<int>(uniform_below(rng, classes));
    LogitMatrix F(n, w);
    for (auto& v : F.values) v = 8 * uniform_unit(rng) - 4;
    const auto rl = residual_loss(F, y, task, 0.3);
    for (std::size_t k = 0; k < F.values.size(); ++k) {
      const double fd = derivative(
          [&](double d) {
            auto moved = F;
            moved.values[k] += d;
            return residual_loss(moved, y, task).loss;
          },
          h);
      worst_loss = std::max(worst_loss, rel_err(rl.grad_F.values[k], fd));
      worst_loss = std::max(worst_loss, rel_err(rl.grad_f.values[k], 0.3 * fd));
      ++checked;
    }

    // toy learner parameters through the fused inputs
    const std::size_t dim = 48;
    std::vector<ViewEncoding> inputs;
    for (std::size_t i = 0; i < n; ++i) {
      const std::string feat = "The age is " + std::to_string(20 + uniform_below(rng, 40)) + ". The job is " +
                               (uniform_below(rng, 2) ? "clerk" : "artist") + ". ";
      const PromptPair pair{feat, feat + "Considering age > " + std::to_string(uniform_below(rng, 60)) + ". ", i, 1};
      inputs.push_back(learner_input(pair, dim, ViewMode::both));
    }
    ToyParams params(dim, w);
    for (auto& v : params.weights) v = uniform_unit(rng) - 0.5;
    for (auto& v : params.bias) v = uniform_unit(rng) - 0.5;
    const double l2 = fixture % 3 == 0 ? 0.05 : 0.0;
    const double alpha = fixture % 4 == 0 ? 0.9 : 1.0;
    const auto obj = toy_objective(params, inputs, y, F, 0.3, alpha, task, l2);
    const auto loss_at = [&](const ToyParams& q) { return toy_objective(q, inputs, y, F, 0.3, alpha, task, l2).loss; };
    for (std::size_t k = 0; k < params.weights.size(); ++k) {
      const double fd = derivative(
          [&](double d) {
            auto moved = params;
            moved.weights[k] += d;
            return loss_at(moved);
          },
          h);
      worst_toy = std::max(worst_toy, rel_err(obj.grad_weights[k], fd));
      ++checked;
    }
    for (std::size_t c = 0; c < w; ++c) {
      const double fd = derivative(
          [&](double d) {
            auto moved = params;
            moved.bias[c] += d;
            return loss_at(moved);
          },
          h);
      worst_toy = std::max(worst_toy, rel_err(obj.grad_bias[c], fd));
      ++checked;
    }
  }
  return {worst_loss <= 1e-5 && worst_toy <= 1e-5,
          fmt("20 fixtures, %.0f partials; max rel err residual %.1e, toy %.1e", static_cast<double>(checked),
              worst_loss, worst_toy)};
}

// ---- average precision

// Visits every instance of size n up to relabeling: a sequence of tie groups
// from the top score down, each with its size and positive count.
void each_tie_structure(std::size_t n, const std::function<void(const std::vector<std::pair<int, int>>&)>& visit) {
  std::vector<std::pair<int, int>> groups;
  std::function<void(std::size_t)> rec = [&](std::size_t left) {
    if (left == 0) {
      visit(groups);
      return;
    }
    for (std::size_t size = 1; size <= left; ++size) {
      for (std::size_t pos = 0; pos <= size; ++pos) {
        groups.emplace_back(static_cast<int>(size), static_cast<int>(pos));
        rec(left - size);
        groups.pop_back();
      }
    }
  };
  rec(n);
}

Outcome average_precision_oracle() {
  Rng rng(31);
  std::size_t small = 0, mismatches = 0, no_positive = 0;
  double worst_exact = 0;
  for (std::size_t n = 1; n <= 8; ++n) {
    each_tie_structure(n, [&](const std::vector<std::pair<int, int>>& groups) {
      std::vector<double> s;
      std::vector<int> y;
      double score = static_cast<double>(groups.size());
      for (const auto& [size, pos] : groups) {
        for (int k = 0; k < size; ++k) {
          s.push_back(score);
          y.push_back(k < pos);
        }
        score -= 1.0;
      }
      // present the rows in a random order
      std::vector<std::size_t> perm(n);
      std::iota(perm.begin(), perm.end(), 0);
      shuffle_in_place(perm, rng);
      std::vector<double> ps(n);
      std::vector<int> py(n);
      for (std::size_t i = 0; i < n; ++i) {
        ps[i] = s[perm[i]];
        py[i] = y[perm[i]];
      }
      if (std::count(py.begin(), py.end(), 1) == 0) {
        try {
          average_precision(ps, py);
          ++mismatches;
        } catch (const DataError&) {
          ++no_positive;
        }
        return;
      }
      ++small;
      const double ap = average_precision(ps, py);
      if (ap != oracle::average_precision(ps, py)) ++mismatches;
      worst_exact = std::max(worst_exact, std::abs(ap - oracle::average_precision_exact(ps, py).value()));
    });
  }
  double worst_large = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> s(50);
    std::vector<int> y(50);
    const bool tied = trial % 2 == 0;
    for (auto& v : s) v = tied ? static_cast<double>(uniform_below(rng, 7)) : uniform_unit(rng);
    for (auto& l : y) l = uniform_unit(rng) < 0.3;
    y[uniform_below(rng, 50)] = 1;
    worst_large = std::max(worst_large, std::abs(average_precision(s, y) - oracle::average_precision(s, y)));
  }
  return {mismatches == 0 && worst_large <= 1e-12 && worst_exact <= 1e-15,
          std::to_string(small) + " tie structures n<=8 bit-exact (rational error " + fmt("%.1e", worst_exact) +
              "), " + std::to_string(no_positive) + " all-negative rejected; n=50 max diff " + fmt("%.1e", worst_large)};
}

// ---- toy-scale grids on the synthetic fixture

struct GridResult {
  std::vector<double> seed_ap;                   // mean test AP over folds, per seed
  std::vector<std::vector<double>> valid_curve;  // per seed, rounds 0..R, mean over folds
};

constexpr std::size_t kSeeds = 10;
constexpr int kFolds = 5;

GridResult run_grid(const ExperimentInputs& inputs, const FoldPlan& folds, std::size_t rounds, std::size_t epochs,
                    ViewMode views) {
  RunConfig config;
  config.boost.rounds = rounds;
  config.boost.epochs_per_round = epochs;
  config.views = views;
  config.write_artifacts = false;
  std::vector<RunKey> keys;
  for (std::size_t s = 0; s < kSeeds; ++s) {
    for (int f = 0; f < kFolds; ++f) keys.push_back({128, f, s});
  }
  std::vector<RunOutcome> outs(keys.size());
  std::atomic<std::size_t> next{0};
  const auto work = [&] {
    for (std::size_t i = next++; i < keys.size(); i = next++) outs[i] = run_single(inputs, folds, config, keys[i]);
  };
  std::vector<std::thread> pool;
  const unsigned threads = std::max(1u, std::thread::hardware_concurrency());
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  GridResult g;
  g.seed_ap.assign(kSeeds, 0.0);
  g.valid_curve.assign(kSeeds, std::vector<double>(rounds + 1, 0.0));
  for (const auto& o : outs) {
    if (o.boost.failure) throw LearnerError(*o.boost.failure);
    const auto s = static_cast<std::size_t>(o.key.seed);
    g.seed_ap[s] += o.test_ap / kFolds;
    // round 0 scores every validation sample alike
    std::vector<int> positive;
    for (auto id : o.sample_ids[1]) positive.push_back(inputs.dataset.labels[id] == 1);
    g.valid_curve[s][0] += average_precision(std::vector<double>(positive.size(), 0.0), positive) / kFolds;
    for (std::size_t r = 0; r < o.boost.records.size(); ++r) {
      g.valid_curve[s][r + 1] += o.boost.records[r].valid_ap.value() / kFolds;
    }
  }
  return g;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2;
}

std::size_t median_seed(const std::vector<double>& ap) {
  std::vector<std::size_t> order(ap.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return ap[a] < ap[b]; });
  return order[(order.size() - 1) / 2];
}

struct Fixture {
  ExperimentInputs inputs;
  FoldPlan folds;
};

const Fixture& synthetic_fixture() {
  static const Fixture fx = [] {
    Fixture f;
    f.inputs.dataset = make_synthetic(SyntheticConfig{});
    f.folds = stratified_kfold(f.inputs.dataset, kFolds, 0);
    return f;
  }();
  return fx;
}

Outcome dynamics() {
  const auto& fx = synthetic_fixture();
  const auto staged = run_grid(fx.inputs, fx.folds, 5, 6, ViewMode::both);
  const auto single = run_grid(fx.inputs, fx.folds, 1, 30, ViewMode::both);
  const double a = median(staged.seed_ap), b = median(single.seed_ap);
  const std::size_t ms = median_seed(staged.seed_ap);
  const auto& curve = staged.valid_curve[ms];
  int rising = 0;
  std::string trace;
  for (std::size_t r = 0; r < curve.size(); ++r) {
    if (r) rising += curve[r] >= curve[r - 1];
    trace += (r ? " " : "") + fmt("%.3f", curve[r]);
  }
  return {a - b >= 0.02 && rising >= 4,
          fmt("median AP R5E6 %.4f vs R1E30 %.4f (diff %.4f); ", a, b, a - b) + "median seed " + std::to_string(ms) +
              " valid AP " + trace + " (" + std::to_string(rising) + "/5 non-decreasing)"};
}

Outcome ablation() {
  const auto& fx = synthetic_fixture();
  const double both = median(run_grid(fx.inputs, fx.folds, 5, 6, ViewMode::both).seed_ap);
  const double feat = median(run_grid(fx.inputs, fx.folds, 5, 6, ViewMode::feature_only).seed_ap);
  const double path = median(run_grid(fx.inputs, fx.folds, 5, 6, ViewMode::path_only).seed_ap);
  const double need = std::max(feat, path) - 0.01;
  return {both >= need, fmt("median AP fused %.4f, feature-only %.4f, path-only %.4f; need >= %.4f", both, feat,
                            path, need)};
}

// ---- GBDT self-consistency

Outcome gbdt_consistency() {
  SyntheticConfig sc;
  sc.samples = 600;
  sc.missing_rate = 0.05;
  const Dataset data = make_synthetic(sc);
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), 0);
  GbdtTrainConfig gc;
  gc.n_estimators = 30;
  gc.max_depth = 5;
  const auto model = train_gbdt(data, all, gc);
  const auto bare = parse_xgboost_dump(export_xgboost_dump(model), data.schema, model.base_score);
  const auto wrapped = load_model(serialize_model(model), data.schema);
  Rng rng(9);
  std::size_t mismatches = 0;
  for (int i = 0; i < 100; ++i) {
    auto row = data.rows[uniform_below(rng, data.size())];
    // perturb numeric cells off the training values
    for (std::size_t f = 0; f < 6; ++f) {
      if (uniform_unit(rng) < 0.3) row[f] = uniform_unit(rng) < 0.1 ? kMissing : row[f] * (0.8 + 0.4 * uniform_unit(rng));
    }
    const auto m = predict_margin(model, row);
    if (predict_margin(bare, row) != m || predict_margin(wrapped, row) != m) ++mismatches;
  }

  // depth-1 trees against a brute-force split search
  std::size_t stump_mismatch = 0;
  for (int fixture = 0; fixture < 50; ++fixture) {
    Dataset d;
    d.schema.columns = {{"u", ColumnKind::numeric, {}}, {"v", ColumnKind::numeric, {}}, {"w", ColumnKind::numeric, {}}};
    d.schema.class_names = {"no", "yes"};
    d.schema.positive_class = 1;
    const std::size_t n = 20 + uniform_below(rng, 40);
    const std::size_t signal = uniform_below(rng, 3);
    for (std::size_t i = 0; i < n; ++i) {
      FeatureRow row{std::round(10 * uniform_unit(rng)) / 10, std::round(50 * uniform_unit(rng)),
                     uniform_unit(rng) * 3 - 1};
      d.rows.push_back(row);
      d.labels.push_back(uniform_unit(rng) < (row[signal] > (signal == 1 ? 25 : 0.5) ? 0.8 : 0.25));
    }
    GbdtTrainConfig one;
    one.n_estimators = 1;
    one.max_depth = 1;
    one.min_child_weight = 0;
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    const auto stump = train_gbdt(d, idx, one);

    // margin 0: g = 0.5 - y, h = 0.25
    const double lambda = one.reg_lambda;
    double G = 0, H = 0;
    for (int y : d.labels) {
      G += 0.5 - y;
      H += 0.25;
    }
    double best_gain = 0;
    std::vector<bool> best_side;
    for (std::size_t f = 0; f < 3; ++f) {
      std::vector<double> levels;
      for (const auto& r : d.rows) levels.push_back(r[f]);
      std::sort(levels.begin(), levels.end());
      levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
      for (std::size_t k = 1; k < levels.size(); ++k) {
        double gl = 0, hl = 0;
        std::vector<bool> side(n);
        for (std::size_t i = 0; i < n; ++i) {
          side[i] = d.rows[i][f] < levels[k];
          if (side[i]) {
            gl += 0.5 - d.labels[i];
            hl += 0.25;
          }
        }
        const double gr = G - gl, hr = H - hl;
        const double gain = 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - G * G / (H + lambda));
        if (gain > best_gain + 1e-12) {
          best_gain = gain;
          best_side = side;
        }
      }
    }
    const auto& tree = stump.trees.at(0);
    if (best_side.empty()) {
      stump_mismatch += tree.nodes.size() != 1;
      continue;
    }
    if (tree.nodes.size() != 3) {
      ++stump_mismatch;
      continue;
    }
    for (std::size_t i = 0; i < n; ++i) {
      if ((oracle::route(tree, d.rows[i]) == std::get<SplitNode>(tree.nodes[0]).left) != best_side[i]) {
        ++stump_mismatch;
        break;
      }
    }
  }
  return {mismatches == 0 && stump_mismatch == 0,
          std::to_string(100 - mismatches) + "/100 rows bit-identical after export and parse; " +
              std::to_string(50 - stump_mismatch) + "/50 stumps match brute force"};
}

// ---- determinism through the command line

int shell(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / "tabboost_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string cli = TABBOOST_CLI;
  const std::string quiet = " >/dev/null 2>&1";
  if (shell(cli + " synth --out " + (dir / "data").string() + quiet) != 0) return {false, "synth failed"};
  for (const char* run : {"a", "b"}) {
    if (shell(cli + " boost --config " + (dir / "data/config.json").string() + " --out " + (dir / run).string() +
              quiet) != 0) {
      return {false, std::string("boost run ") + run + " failed"};
    }
  }
  std::size_t files = 0, differing = 0;
  for (const auto& entry : fs::recursive_directory_iterator(dir / "a")) {
    if (!entry.is_regular_file() || entry.path().filename() == "manifest.json") continue;
    const auto rel = fs::relative(entry.path(), dir / "a");
    ++files;
    if (!fs::exists(dir / "b" / rel) || read_file(entry.path().string()) != read_file((dir / "b" / rel).string())) {
      ++differing;
    }
  }
  const bool reports = fs::exists(dir / "a/reports/scores.csv");
  fs::remove_all(dir);
  return {reports && differing == 0, std::to_string(files) + " report and artifact files compared, " +
                                         std::to_string(differing) + " differ"};
}

}  // namespace

int main() {
  std::printf("kernel variant: %s\n", std::string(kernels::isa_name(kernels::active_isa())).c_str());
  criterion("worked-example", 1, worked_example);
  criterion("path-compression-oracle", 60, path_compression);
  criterion("accumulation-identities", 1, accumulation);
  criterion("gradient-checks", 10, gradients);
  criterion("ap-oracle", 30, average_precision_oracle);
  criterion("boosting-dynamics", 300, dynamics);
  criterion("ablation-ordering", 600, ablation);
  criterion("gbdt-self-consistency", 60, gbdt_consistency);
  criterion("determinism", 0, determinism);
  std::printf("%s: %d criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
