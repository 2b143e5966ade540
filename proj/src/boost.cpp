#include "tabboost/boost.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "tabboost/error.hpp"
#include "tabboost/kernels.hpp"
#include "tabboost/metrics.hpp"
#include "tabboost/util.hpp"

namespace tabboost {

TaskSpec TaskSpec::from_schema(const Schema& schema) {
  TaskSpec task;
  task.num_classes = schema.num_classes();
  if (task.num_classes < 2) throw ConfigError("schema needs at least two classes");
  if (task.binary()) {
    if (!schema.positive_class) throw ConfigError("binary schema has no positive_class");
    task.positive_class = *schema.positive_class;
  } else {
    task.positive_class = schema.positive_class.value_or(0);
  }
  return task;
}

std::string_view split_name(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::valid: return "valid";
    case Split::test: return "test";
  }
  return "?";
}

LogitMatrix normalize_logits(const LogitMatrix& raw, const TaskSpec& task, std::size_t round) {
  for (std::size_t i = 0; i < raw.values.size(); ++i) {
    if (!std::isfinite(raw.values[i])) {
      throw LearnerError("round " + std::to_string(round) + ": non-finite logit for sample " +
                         std::to_string(raw.cols ? i / raw.cols : 0));
    }
  }
  if (raw.cols == task.width()) return raw;
  if (task.binary() && raw.cols == task.num_classes) {
    LogitMatrix out(raw.rows, 1);
    for (std::size_t i = 0; i < raw.rows; ++i) out.at(i, 0) = raw.at(i, task.positive_class);
    return out;
  }
  throw LearnerError("round " + std::to_string(round) + ": learner returned " +
                     std::to_string(raw.cols) + " logits per sample, expected " +
                     std::to_string(task.width()));
}

LogitMatrix accumulate(const LogitMatrix& prev, const LogitMatrix& f, double eta, double alpha,
                       std::size_t round) {
  if (prev.rows != f.rows || prev.cols != f.cols) {
    throw DataError("accumulate: shape " + std::to_string(f.rows) + "x" + std::to_string(f.cols) +
                    " does not match " + std::to_string(prev.rows) + "x" + std::to_string(prev.cols));
  }
  for (std::size_t i = 0; i < f.values.size(); ++i) {
    if (!std::isfinite(f.values[i])) {
      throw LearnerError("round " + std::to_string(round) + ": non-finite logit for sample " +
                         std::to_string(i / f.cols));
    }
  }
  LogitMatrix out(prev.rows, prev.cols);
  kernels::scale_add(alpha, prev.values, eta, f.values, out.values);
  return out;
}

namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void check_labels(const LogitMatrix& F, std::span<const int> labels, const TaskSpec& task) {
  if (F.rows != labels.size()) throw DataError("logit rows and labels differ in length");
  if (F.cols != task.width()) throw DataError("logit width does not match the task");
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= task.num_classes) {
      throw DataError("label " + std::to_string(y) + " out of range");
    }
  }
}

}  // namespace

ResidualLoss residual_loss(const LogitMatrix& F, std::span<const int> labels, const TaskSpec& task,
                           double eta) {
  check_labels(F, labels, task);
  ResidualLoss out;
  out.grad_F = LogitMatrix(F.rows, F.cols);
  out.grad_f = LogitMatrix(F.rows, F.cols);
  if (F.rows == 0) return out;
  const double inv_n = 1.0 / static_cast<double>(F.rows);
  double total = 0.0;
  if (task.binary()) {
    for (std::size_t i = 0; i < F.rows; ++i) {
      const double z = F.at(i, 0);
      const double y = static_cast<std::size_t>(labels[i]) == task.positive_class ? 1.0 : 0.0;
      total += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
      out.grad_F.at(i, 0) = (sigmoid(z) - y) * inv_n;
    }
  } else {
    std::vector<double> p(F.cols);
    for (std::size_t i = 0; i < F.rows; ++i) {
      const auto z = F.row(i);
      const double m = *std::max_element(z.begin(), z.end());
      double s = 0.0;
      for (std::size_t c = 0; c < F.cols; ++c) s += (p[c] = std::exp(z[c] - m));
      total += m + std::log(s) - z[static_cast<std::size_t>(labels[i])];
      for (std::size_t c = 0; c < F.cols; ++c) {
        const double target = static_cast<std::size_t>(labels[i]) == c ? 1.0 : 0.0;
        out.grad_F.at(i, c) = (p[c] / s - target) * inv_n;
      }
    }
  }
  out.loss = total * inv_n;
  for (std::size_t k = 0; k < out.grad_F.values.size(); ++k) {
    out.grad_f.values[k] = eta * out.grad_F.values[k];
  }
  return out;
}

LogitMatrix class_probabilities(const LogitMatrix& F, const TaskSpec& task) {
  if (F.cols != task.width()) throw DataError("logit width does not match the task");
  LogitMatrix out(F.rows, task.num_classes);
  for (std::size_t i = 0; i < F.rows; ++i) {
    if (task.binary()) {
      const double p = sigmoid(F.at(i, 0));
      out.at(i, task.positive_class) = p;
      out.at(i, 1 - task.positive_class) = 1.0 - p;
      continue;
    }
    const auto z = F.row(i);
    const double m = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (std::size_t c = 0; c < F.cols; ++c) s += (out.at(i, c) = std::exp(z[c] - m));
    for (std::size_t c = 0; c < F.cols; ++c) out.at(i, c) /= s;
  }
  return out;
}

std::vector<double> positive_scores(const LogitMatrix& F, const TaskSpec& task) {
  if (!task.binary()) throw DataError("positive scores need a binary task");
  std::vector<double> out(F.rows);
  for (std::size_t i = 0; i < F.rows; ++i) out[i] = sigmoid(F.at(i, 0));
  return out;
}

double task_ap(const LogitMatrix& F, std::span<const int> labels, const TaskSpec& task) {
  check_labels(F, labels, task);
  if (task.binary()) {
    // Raw logits rank like probabilities but do not saturate into ties.
    std::vector<int> positive(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
      positive[i] = static_cast<std::size_t>(labels[i]) == task.positive_class;
    }
    return average_precision(F.values, positive);
  }
  const LogitMatrix p = class_probabilities(F, task);
  return macro_average_precision(p.values, labels, task.num_classes).value;
}

void BoostConfig::validate() const {
  if (rounds < 1) throw ConfigError("boost.rounds must be at least 1");
  if (epochs_per_round < 1) throw ConfigError("boost.epochs must be at least 1");
  if (!(eta > 0) || !std::isfinite(eta)) throw ConfigError("boost.eta must be positive");
  if (!(alpha > 0) || alpha > 1) throw ConfigError("boost.alpha must lie in (0, 1]");
}

BoostSession::BoostSession(BoostConfig config, TaskSpec task, const BoostData& data,
                           LearnerFactory factory)
    : config_(config), task_(task), data_(data), factory_(std::move(factory)) {
  config_.validate();
  for (std::size_t s = 0; s < kSplits; ++s) {
    const std::size_t n = data_.labels[s].size();
    if (data_.pairs[s].size() < config_.rounds && n > 0) {
      throw DataError(std::string(split_name(static_cast<Split>(s))) + " split has prompts for " +
                      std::to_string(data_.pairs[s].size()) + " rounds, need " +
                      std::to_string(config_.rounds));
    }
    for (const auto& round_pairs : data_.pairs[s]) {
      if (round_pairs.size() != n) {
        throw DataError(std::string(split_name(static_cast<Split>(s))) +
                        " split: prompt count differs from label count");
      }
    }
    accumulated_[s].emplace_back(n, task_.width());
  }
  if (data_.labels[0].empty()) throw DataError("empty training split");
}

bool BoostSession::step(const ProgressFn& progress) {
  if (finished()) return false;
  const std::size_t r = records_.size() + 1;
  const auto start = std::chrono::steady_clock::now();
  auto learner = factory_(r);
  if (!learner) throw LearnerError("round " + std::to_string(r) + ": learner factory returned nothing");
  if (r == 1) capabilities_ = learner->capabilities();

  TrainRequest request;
  request.round = r;
  request.pairs = data_.pairs[0][r - 1];
  request.labels = data_.labels[0];
  request.f_prev = &accumulated_[0][r - 1];
  request.eta = config_.eta;
  request.alpha = config_.alpha;
  request.epochs = config_.epochs_per_round;
  request.seed = mix_seed(config_.seed, r);
  const TrainSummary summary = learner->train(request, progress);

  LogitMatrix f[kSplits];
  LogitMatrix F[kSplits];
  for (std::size_t s = 0; s < kSplits; ++s) {
    const std::size_t n = data_.labels[s].size();
    if (n == 0) {
      f[s] = LogitMatrix(0, task_.width());
    } else {
      f[s] = normalize_logits(learner->predict(data_.pairs[s][r - 1]), task_, r);
      if (f[s].rows != n) {
        throw LearnerError("round " + std::to_string(r) + ": learner returned " +
                           std::to_string(f[s].rows) + " rows for " + std::to_string(n) + " samples");
      }
    }
    F[s] = accumulate(accumulated_[s][r - 1], f[s], config_.eta, config_.alpha, r);
  }

  RoundRecord record;
  record.round = r;
  record.train_loss = residual_loss(F[0], data_.labels[0], task_).loss;
  try {
    if (!data_.labels[1].empty()) record.valid_ap = task_ap(F[1], data_.labels[1], task_);
  } catch (const DataError&) {
    record.valid_ap.reset();  // no positives in the validation split
  }
  record.test_ap = task_ap(F[2], data_.labels[2], task_);
  record.steps = summary.steps;
  record.epochs = summary.epochs;
  record.view_ratio = summary.view_ratio;
  record.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  if (config_.early_stopping && r > 1 && record.valid_ap && records_.back().valid_ap &&
      *record.valid_ap < *records_.back().valid_ap) {
    stopped_ = true;
    return false;
  }
  for (std::size_t s = 0; s < kSplits; ++s) {
    round_logits_[s].push_back(std::move(f[s]));
    accumulated_[s].push_back(std::move(F[s]));
  }
  learners_.push_back(std::move(learner));
  records_.push_back(std::move(record));
  return true;
}

void BoostSession::rewind(std::size_t keep_rounds) {
  if (keep_rounds > records_.size()) throw ConfigError("cannot rewind forward");
  records_.resize(keep_rounds);
  learners_.resize(keep_rounds);
  for (std::size_t s = 0; s < kSplits; ++s) {
    round_logits_[s].resize(keep_rounds);
    accumulated_[s].resize(keep_rounds + 1);
  }
  stopped_ = false;
}

const LogitMatrix& BoostSession::round_logits(std::size_t round, Split split) const {
  const auto& v = round_logits_[static_cast<std::size_t>(split)];
  if (round < 1 || round > v.size()) throw ConfigError("round " + std::to_string(round) + " not trained");
  return v[round - 1];
}

const LogitMatrix& BoostSession::accumulated(std::size_t round, Split split) const {
  const auto& v = accumulated_[static_cast<std::size_t>(split)];
  if (round >= v.size()) throw ConfigError("round " + std::to_string(round) + " not trained");
  return v[round];
}

std::vector<WeakLearner*> BoostSession::learners() const {
  std::vector<WeakLearner*> out;
  for (const auto& l : learners_) out.push_back(l.get());
  return out;
}

std::size_t BoostSession::total_epochs() const {
  std::size_t total = 0;
  for (const auto& r : records_) total += r.epochs;
  return total;
}

BoostResult boost_train(const BoostData& data, const LearnerFactory& factory,
                        const BoostConfig& config, const TaskSpec& task,
                        const ProgressFn& progress) {
  BoostSession session(config, task, data, factory);
  BoostResult result;
  while (!session.finished()) {
    try {
      session.step(progress);
    } catch (const LearnerError& e) {
      result.failure = e.what();
      result.failed_round = session.completed_rounds() + 1;
      break;
    }
  }
  result.records = session.records();
  result.capabilities = session.capabilities();
  result.total_epochs = session.total_epochs();
  result.stopped_early = session.stopped_early();
  const std::size_t done = session.completed_rounds();
  for (std::size_t s = 0; s < kSplits; ++s) {
    result.final_logits[s] = session.accumulated(done, static_cast<Split>(s));
    for (std::size_t r = 1; r <= done; ++r) {
      result.round_logits[s].push_back(session.round_logits(r, static_cast<Split>(s)));
    }
  }
  for (const auto* learner : session.learners()) result.snapshots.push_back(learner->snapshot());
  return result;
}

LogitMatrix fold_logits(std::span<const LogitMatrix> round_logits, double eta, double alpha) {
  if (round_logits.empty()) throw DataError("no round logits to fold");
  LogitMatrix F(round_logits[0].rows, round_logits[0].cols);
  for (std::size_t r = 0; r < round_logits.size(); ++r) {
    F = accumulate(F, round_logits[r], eta, alpha, r + 1);
  }
  return F;
}

LogitMatrix predict_ensemble(std::span<WeakLearner* const> learners,
                             std::span<const std::vector<PromptPair>> pairs_by_round,
                             const BoostConfig& config, const TaskSpec& task) {
  if (learners.size() < config.rounds) {
    throw ConfigError("ensemble has " + std::to_string(learners.size()) + " round learners, need " +
                      std::to_string(config.rounds));
  }
  if (pairs_by_round.size() < config.rounds) throw DataError("missing prompt pairs for some rounds");
  std::vector<LogitMatrix> f;
  for (std::size_t r = 0; r < config.rounds; ++r) {
    if (!learners[r]) throw ConfigError("missing learner for round " + std::to_string(r + 1));
    f.push_back(normalize_logits(learners[r]->predict(pairs_by_round[r]), task, r + 1));
  }
  return class_probabilities(fold_logits(f, config.eta, config.alpha), task);
}

std::string logits_to_csv(const LogitMatrix& logits, std::span<const std::size_t> sample_ids,
                          const TaskSpec& task, const Schema& schema) {
  if (sample_ids.size() != logits.rows) throw DataError("sample id count differs from logit rows");
  std::string out = "sample_id";
  if (logits.cols == 1 && task.binary()) {
    out += ",logit_" + schema.class_names.at(task.positive_class);
  } else {
    for (std::size_t c = 0; c < logits.cols; ++c) out += "," + schema.class_names.at(c);
  }
  out += "\n";
  for (std::size_t i = 0; i < logits.rows; ++i) {
    out += std::to_string(sample_ids[i]);
    for (double v : logits.row(i)) out += "," + format_number(v);
    out += "\n";
  }
  return out;
}

LearnerCapabilities ConstantLearner::capabilities() const {
  LearnerCapabilities caps;
  caps.num_classes = num_classes_;
  caps.metadata = R"({"mode":"constant"})";
  return caps;
}

TrainSummary ConstantLearner::train(const TrainRequest& request, const ProgressFn&) {
  if (!request.f_prev) throw LearnerError("train request without f_prev");
  return {};
}

LogitMatrix ConstantLearner::predict(std::span<const PromptPair> pairs) {
  LogitMatrix out(pairs.size(), logits_.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) std::copy(logits_.begin(), logits_.end(), out.row(i).begin());
  return out;
}

}  // namespace tabboost
