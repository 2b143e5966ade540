#include "tabboost/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "tabboost/util.hpp"

namespace tabboost {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Box-Muller on the portable uniform source.
double normal(Rng& rng) {
  const double u1 = 1.0 - uniform_unit(rng);
  const double u2 = uniform_unit(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

double round_to(double v, double step) { return std::round(v / step) * step; }

Column numeric(std::string name) { return {std::move(name), ColumnKind::numeric, {}}; }
Column categorical(std::string name, std::vector<std::string> cats) {
  return {std::move(name), ColumnKind::categorical, std::move(cats)};
}

}  // namespace

Schema synthetic_schema() {
  Schema s;
  s.name = "synthetic";
  s.columns = {
      numeric("age"),
      numeric("income"),
      numeric("balance"),
      numeric("duration"),
      numeric("credit score"),
      numeric("utilization"),
      categorical("job", {"engineer", "teacher", "doctor", "clerk", "artist", "farmer"}),
      categorical("region", {"north", "south", "east", "west"}),
      categorical("housing", {"own", "rent", "family"}),
      categorical("contact", {"phone", "email", "mail"}),
  };
  s.class_names = {"no", "yes"};
  s.class_verbalizations = {"No", "Yes"};
  s.positive_class = 1;
  s.task_description = "Does this customer accept the offer? Answer Yes or No.";
  return s;
}

Dataset make_synthetic(const SyntheticConfig& config) {
  Dataset data;
  data.schema = synthetic_schema();
  Rng rng(mix_seed(config.seed, 0x5e7));
  data.rows.reserve(config.samples);
  data.labels.reserve(config.samples);
  for (std::size_t i = 0; i < config.samples; ++i) {
    const double age = std::clamp(std::round(42.0 + 13.0 * normal(rng)), 18.0, 90.0);
    const double income = round_to(std::exp(10.6 + 0.55 * normal(rng)), 5000.0);
    const double balance = round_to(800.0 + 1500.0 * normal(rng), 250.0);
    const double duration = round_to(-260.0 * std::log(1.0 - uniform_unit(rng)), 30.0);
    const double score = std::clamp(round_to(660.0 + 80.0 * normal(rng), 10.0), 300.0, 850.0);
    const double utilization = std::round(uniform_unit(rng) * 20.0) / 20.0;
    const auto job = static_cast<double>(uniform_below(rng, 6));
    const auto region = static_cast<double>(uniform_below(rng, 4));
    const auto housing = static_cast<double>(uniform_below(rng, 3));
    const auto contact = static_cast<double>(uniform_below(rng, 3));

    double z = -1.4;
    z += (age > 45 && balance > 1000) ? 2.0 : 0.0;
    z += duration > 300 ? 1.6 : (duration < 90 ? -1.2 : 0.0);
    z += (score > 700) != (region == 0) ? 1.1 : -0.3;
    z += (job == 0 || job == 2) ? 0.9 : 0.0;
    z += (income > 60000 && utilization < 0.4) ? 1.3 : 0.0;
    z += (housing == 1 && age < 30) ? -1.5 : 0.0;
    z += contact == 2 ? -0.8 : 0.0;
    const double u = std::clamp(uniform_unit(rng), 1e-12, 1.0 - 1e-12);
    z += config.noise * std::log(u / (1.0 - u));

    FeatureRow row{age, income, balance, duration, score, utilization, job, region, housing, contact};
    for (std::size_t k = 0; k < 6; ++k) {
      if (uniform_unit(rng) < config.missing_rate) row[k] = kMissing;
    }
    data.rows.push_back(std::move(row));
    data.labels.push_back(z > 0 ? 1 : 0);
  }
  data.validate();
  return data;
}

}  // namespace tabboost
