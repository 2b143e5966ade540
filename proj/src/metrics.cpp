#include "tabboost/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "json.hpp"
#include "tabboost/error.hpp"

namespace tabboost {

namespace {

void check_scores(std::span<const double> scores, std::size_t n_labels) {
  if (scores.size() != n_labels) throw DataError("score and label counts differ");
  for (double s : scores) {
    if (std::isnan(s)) throw DataError("NaN score");
  }
}

std::string fixed1(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

}  // namespace

double average_precision(std::span<const double> scores, std::span<const int> positive) {
  check_scores(scores, positive.size());
  const std::size_t n = scores.size();
  const auto total = static_cast<std::size_t>(std::count(positive.begin(), positive.end(), 1));
  if (total == 0) throw DataError("average precision needs at least one positive");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  const double p = static_cast<double>(total);
  double ap = 0.0;
  std::size_t tp = 0, seen = 0, tp_prev = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) {
      tp += positive[order[j]] == 1;
      ++j;
    }
    seen = j;
    if (tp != tp_prev) {
      const double precision = static_cast<double>(tp) / static_cast<double>(seen);
      ap += (static_cast<double>(tp - tp_prev) / p) * precision;
      tp_prev = tp;
    }
    i = j;
  }
  return ap;
}

MacroAp macro_average_precision(std::span<const double> scores, std::span<const int> labels,
                                std::size_t num_classes) {
  if (num_classes < 2) throw DataError("macro AP needs at least two classes");
  if (scores.size() != labels.size() * num_classes) throw DataError("score matrix shape mismatch");
  MacroAp out;
  double sum = 0.0;
  std::size_t used = 0;
  std::vector<double> column(labels.size());
  std::vector<int> positive(labels.size());
  for (std::size_t c = 0; c < num_classes; ++c) {
    bool any = false;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      column[i] = scores[i * num_classes + c];
      positive[i] = labels[i] == static_cast<int>(c);
      any = any || positive[i];
    }
    if (!any) {
      out.excluded_classes.push_back(c);
      continue;
    }
    sum += average_precision(column, positive);
    ++used;
  }
  if (used == 0) throw DataError("macro AP: no class has a positive sample");
  out.value = sum / static_cast<double>(used);
  return out;
}

namespace {

double objective_value(ThresholdObjective objective, std::size_t tp, std::size_t fp,
                       std::size_t tn, std::size_t fn) {
  const auto d = [](std::size_t x) { return static_cast<double>(x); };
  switch (objective) {
    case ThresholdObjective::accuracy:
      return d(tp + tn) / d(tp + fp + tn + fn);
    case ThresholdObjective::balanced_accuracy: {
      const double tpr = tp + fn ? d(tp) / d(tp + fn) : 0.0;
      const double tnr = tn + fp ? d(tn) / d(tn + fp) : 0.0;
      return (tpr + tnr) / 2.0;
    }
    case ThresholdObjective::f1:
      return tp ? 2.0 * d(tp) / d(2 * tp + fp + fn) : 0.0;
  }
  return 0.0;
}

}  // namespace

CalibratedAccuracy calibrated_accuracy(std::span<const double> train_scores,
                                       std::span<const int> train_positive,
                                       std::span<const double> test_scores,
                                       std::span<const int> test_positive,
                                       ThresholdObjective objective) {
  check_scores(train_scores, train_positive.size());
  check_scores(test_scores, test_positive.size());
  if (train_scores.empty()) throw DataError("calibration needs training scores");
  CalibratedAccuracy out;

  std::vector<std::size_t> order(train_scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return train_scores[a] < train_scores[b]; });
  const auto pos_total =
      static_cast<std::size_t>(std::count(train_positive.begin(), train_positive.end(), 1));
  const std::size_t neg_total = train_scores.size() - pos_total;

  // Sweep ascending: before threshold index i, all scores at or below the
  // current distinct value are predicted negative.
  std::size_t neg_below = 0, pos_below = 0;
  bool found = false;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && train_scores[order[j]] == train_scores[order[i]]) {
      (train_positive[order[j]] == 1 ? pos_below : neg_below) += 1;
      ++j;
    }
    if (j == order.size()) break;
    const double lo = train_scores[order[i]];
    const double hi = train_scores[order[j]];
    const double t = lo + (hi - lo) / 2.0;
    const double value = objective_value(objective, pos_total - pos_below, neg_total - neg_below,
                                         neg_below, pos_below);
    if (!found || value > out.train_objective) {
      out.train_objective = value;
      out.threshold = t;
      found = true;
    }
    i = j;
  }
  if (!found) {
    out.degenerate = true;
    out.threshold = 0.5;
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    for (std::size_t i = 0; i < train_scores.size(); ++i) {
      const bool pred = train_scores[i] >= 0.5;
      const bool y = train_positive[i] == 1;
      (pred ? (y ? tp : fp) : (y ? fn : tn)) += 1;
    }
    out.train_objective = objective_value(objective, tp, fp, tn, fn);
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test_scores.size(); ++i) {
    correct += (test_scores[i] >= out.threshold) == (test_positive[i] == 1);
  }
  out.accuracy = test_scores.empty() ? 0.0
                                     : static_cast<double>(correct) / static_cast<double>(test_scores.size());
  return out;
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  out.count = values.size();
  if (values.empty()) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(sq / static_cast<double>(values.size()));
  return out;
}

AggregateTable aggregate_runs(std::span<const RunScore> scores) {
  AggregateTable table;
  std::vector<std::pair<std::string, std::string>> row_keys;
  std::map<std::pair<std::size_t, std::size_t>, std::vector<double>> cells;
  for (const auto& s : scores) {
    auto d = std::find(table.datasets.begin(), table.datasets.end(), s.dataset);
    if (d == table.datasets.end()) d = table.datasets.insert(table.datasets.end(), s.dataset);
    const auto key = std::make_pair(s.method, s.shots);
    auto r = std::find(row_keys.begin(), row_keys.end(), key);
    if (r == row_keys.end()) r = row_keys.insert(row_keys.end(), key);
    cells[{static_cast<std::size_t>(r - row_keys.begin()),
           static_cast<std::size_t>(d - table.datasets.begin())}]
        .push_back(s.value);
  }
  for (std::size_t r = 0; r < row_keys.size(); ++r) {
    AggregateRow row;
    row.method = row_keys[r].first;
    row.shots = row_keys[r].second;
    double sum = 0.0;
    std::size_t present = 0;
    for (std::size_t d = 0; d < table.datasets.size(); ++d) {
      const auto it = cells.find({r, d});
      MeanStd ms;
      if (it != cells.end()) {
        ms = mean_std(it->second);
        sum += ms.mean;
        ++present;
      }
      row.datasets.push_back(ms);
    }
    row.average = present ? sum / static_cast<double>(present) : 0.0;
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::string AggregateTable::to_csv(double scale) const {
  std::string out = "method,shots,Avg.";
  for (const auto& d : datasets) out += "," + d;
  out += "\n";
  for (const auto& row : rows) {
    out += row.method + "," + row.shots + "," + fixed1(row.average * scale);
    for (const auto& ms : row.datasets) {
      out += ",";
      if (ms.count) out += fixed1(ms.mean * scale) + " ± " + fixed1(ms.std * scale);
    }
    out += "\n";
  }
  return out;
}

std::string AggregateTable::to_json() const {
  nlohmann::ordered_json doc;
  doc["datasets"] = datasets;
  auto rows_json = nlohmann::ordered_json::array();
  for (const auto& row : rows) {
    nlohmann::ordered_json r;
    r["method"] = row.method;
    r["shots"] = row.shots;
    r["avg"] = row.average;
    auto per = nlohmann::ordered_json::object();
    for (std::size_t d = 0; d < datasets.size(); ++d) {
      if (!row.datasets[d].count) continue;
      per[datasets[d]] = {{"mean", row.datasets[d].mean},
                          {"std", row.datasets[d].std},
                          {"n", row.datasets[d].count}};
    }
    r["datasets"] = std::move(per);
    rows_json.push_back(std::move(r));
  }
  doc["rows"] = std::move(rows_json);
  return doc.dump(1) + "\n";
}

}  // namespace tabboost
