#include "tabboost/report.hpp"

#include <cstdlib>

#include "tabboost/csv.hpp"
#include "tabboost/error.hpp"
#include "tabboost/util.hpp"

namespace tabboost {

namespace {

std::string num(double v) { return format_number(v); }
std::string opt(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

std::string key_fields(const RunKey& key) {
  return shots_label(key.shots) + "," + std::to_string(key.fold) + "," + std::to_string(key.seed);
}

}  // namespace

std::string scores_csv(const RunConfig& config, std::string_view dataset,
                       std::span<const RunOutcome> runs) {
  std::string out = "method,shots,dataset,fold,seed,test_ap,accuracy,threshold,rounds,failure\n";
  for (const auto& run : runs) {
    csv::Record rec{config.method,
                    shots_label(run.key.shots),
                    std::string(dataset),
                    std::to_string(run.key.fold),
                    std::to_string(run.key.seed),
                    num(run.test_ap),
                    run.accuracy ? num(run.accuracy->accuracy) : "",
                    run.accuracy ? num(run.accuracy->threshold) : "",
                    std::to_string(run.boost.records.size()),
                    run.boost.failure.value_or("")};
    out += csv::join(rec) + "\n";
  }
  return out;
}

std::string rounds_csv(std::span<const RunOutcome> runs) {
  std::string out = "shots,fold,seed,round,train_loss,valid_ap,test_ap,steps,epochs,mean_view_ratio\n";
  for (const auto& run : runs) {
    for (const auto& rec : run.boost.records) {
      double sum = 0.0;
      std::size_t count = 0;
      for (const auto& r : rec.view_ratio) {
        if (r) {
          sum += *r;
          ++count;
        }
      }
      out += key_fields(run.key) + "," + std::to_string(rec.round) + "," + num(rec.train_loss) + "," +
             opt(rec.valid_ap) + "," + num(rec.test_ap) + "," + std::to_string(rec.steps) + "," +
             std::to_string(rec.epochs) + "," +
             (count ? num(sum / static_cast<double>(count)) : std::string()) + "\n";
    }
  }
  return out;
}

std::string view_ratio_csv(std::span<const RunOutcome> runs) {
  std::string out = "shots,fold,seed,round,step,view_ratio\n";
  for (const auto& run : runs) {
    for (const auto& rec : run.boost.records) {
      for (std::size_t s = 0; s < rec.view_ratio.size(); ++s) {
        if (!rec.view_ratio[s]) continue;
        out += key_fields(run.key) + "," + std::to_string(rec.round) + "," + std::to_string(s + 1) + "," +
               num(*rec.view_ratio[s]) + "\n";
      }
    }
  }
  return out;
}

std::vector<RunScore> run_scores(const RunConfig& config, std::string_view dataset,
                                 std::span<const RunOutcome> runs) {
  std::vector<RunScore> out;
  for (const auto& run : runs) {
    out.push_back({config.method, shots_label(run.key.shots), std::string(dataset), run.key.fold, run.test_ap});
  }
  return out;
}

std::vector<RunScore> read_scores_csv(std::string_view text) {
  const auto records = csv::parse(text);
  if (records.empty()) throw DataError("scores file is empty");
  const auto& head = records[0];
  const auto col = [&](std::string_view name) -> std::size_t {
    for (std::size_t i = 0; i < head.size(); ++i) {
      if (head[i] == name) return i;
    }
    throw DataError("scores file lacks column '" + std::string(name) + "'");
  };
  const std::size_t m = col("method"), sh = col("shots"), d = col("dataset"), f = col("fold"),
                    ap = col("test_ap");
  std::vector<RunScore> out;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.size() != head.size()) throw DataError("scores file line " + std::to_string(r + 1) + ": wrong field count");
    char* end = nullptr;
    const double value = std::strtod(rec[ap].c_str(), &end);
    if (end == rec[ap].c_str()) throw DataError("scores file line " + std::to_string(r + 1) + ": bad test_ap");
    out.push_back({rec[m], rec[sh], rec[d], std::atoi(rec[f].c_str()), value});
  }
  return out;
}

void write_reports(const std::string& out_dir, const RunConfig& config, std::string_view dataset,
                   std::span<const RunOutcome> runs) {
  const std::string dir = out_dir + "/reports/";
  write_file(dir + "scores.csv", scores_csv(config, dataset, runs));
  write_file(dir + "rounds.csv", rounds_csv(runs));
  write_file(dir + "view_ratio.csv", view_ratio_csv(runs));
  const auto scores = run_scores(config, dataset, runs);
  const AggregateTable table = aggregate_runs(scores);
  write_file(dir + "summary.csv", table.to_csv());
  write_file(dir + "summary.json", table.to_json());
}

std::string sweep_table_csv(std::string_view axis, std::span<const SweepPoint> points) {
  std::string out = std::string(axis);
  for (const auto& p : points) out += "," + csv::escape(p.label);
  out += "\n";
  const auto fixed1 = [](double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.1f", v);
    return std::string(buf);
  };
  out += "Avg. AP";
  for (const auto& p : points) {
    out += ",";
    if (!p.table.rows.empty()) out += fixed1(100.0 * p.table.rows.front().average);
  }
  out += "\n";
  if (points.empty() || points.front().table.rows.empty()) return out;
  for (std::size_t d = 0; d < points.front().table.datasets.size(); ++d) {
    out += csv::escape(points.front().table.datasets[d]);
    for (const auto& p : points) {
      out += ",";
      if (p.table.rows.empty() || d >= p.table.rows.front().datasets.size()) continue;
      const auto& ms = p.table.rows.front().datasets[d];
      if (ms.count) out += fixed1(100.0 * ms.mean) + " ± " + fixed1(100.0 * ms.std);
    }
    out += "\n";
  }
  return out;
}

}  // namespace tabboost
