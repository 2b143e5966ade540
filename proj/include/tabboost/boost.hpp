#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tabboost/serialize.hpp"
#include "tabboost/table.hpp"

namespace tabboost {

// Row-major samples x width matrix of logits.
struct LogitMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  LogitMatrix() = default;
  LogitMatrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), values(r * c, fill) {}

  std::span<double> row(std::size_t i) { return {values.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const { return {values.data() + i * cols, cols}; }
  double& at(std::size_t i, std::size_t c) { return values[i * cols + c]; }
  double at(std::size_t i, std::size_t c) const { return values[i * cols + c]; }
  bool operator==(const LogitMatrix&) const = default;
};

// Binary tasks carry one logit per sample, for the positive class; multiclass
// tasks carry one per class.
struct TaskSpec {
  std::size_t num_classes = 2;
  std::size_t positive_class = 1;

  bool binary() const { return num_classes == 2; }
  std::size_t width() const { return binary() ? 1 : num_classes; }
  // Throws ConfigError when a binary schema has no positive class.
  static TaskSpec from_schema(const Schema& schema);
};

// Brings learner output to the task width: a binary learner may answer with
// one logit or with one per class, in which case the positive class column is
// kept. Throws LearnerError on other widths or non-finite values.
LogitMatrix normalize_logits(const LogitMatrix& raw, const TaskSpec& task, std::size_t round);

// F_r = alpha * F_{r-1} + eta * f_r. Throws LearnerError naming the round and
// sample on non-finite learner output, DataError on shape mismatch.
LogitMatrix accumulate(const LogitMatrix& prev, const LogitMatrix& f, double eta, double alpha,
                       std::size_t round = 0);

struct ResidualLoss {
  double loss = 0.0;    // mean over samples
  LogitMatrix grad_F;   // d loss / d F
  LogitMatrix grad_f;   // d loss / d f_r = eta * grad_F
};

// Binary: BCE on sigmoid(F) against label == positive_class. Multiclass:
// cross-entropy on softmax(F).
ResidualLoss residual_loss(const LogitMatrix& F, std::span<const int> labels, const TaskSpec& task,
                           double eta = 1.0);

// n x C class probabilities from accumulated logits.
LogitMatrix class_probabilities(const LogitMatrix& F, const TaskSpec& task);
// Probability of the positive class per sample (binary tasks).
std::vector<double> positive_scores(const LogitMatrix& F, const TaskSpec& task);

// AP for binary tasks, macro AP otherwise.
double task_ap(const LogitMatrix& F, std::span<const int> labels, const TaskSpec& task);

struct BoostConfig {
  std::size_t rounds = 5;
  std::size_t epochs_per_round = 6;
  double eta = 0.3;
  double alpha = 1.0;
  std::uint64_t seed = 0;
  bool early_stopping = false;  // drop a round that lowers validation AP, then stop

  void validate() const;  // throws ConfigError
};

struct LearnerCapabilities {
  int version = 1;
  std::size_t num_classes = 0;
  bool reports_view_ratio = false;
  std::vector<std::string> internal_objectives;
  std::string metadata;  // JSON object text, recorded verbatim
};

struct TrainRequest {
  std::size_t round = 1;
  std::span<const PromptPair> pairs;
  std::span<const int> labels;
  const LogitMatrix* f_prev = nullptr;  // F_{r-1} on these pairs, before decay
  double eta = 0.3;
  double alpha = 1.0;
  std::size_t epochs = 1;
  std::uint64_t seed = 0;
};

struct TrainProgress {
  std::size_t step = 0;
  std::optional<double> mean_view_ratio;
  std::optional<double> loss;
};

struct TrainSummary {
  std::size_t steps = 0;
  std::size_t epochs = 0;
  std::vector<std::optional<double>> view_ratio;  // per step
  double final_loss = 0.0;
};

using ProgressFn = std::function<void(const TrainProgress&)>;

// One round's learner f_r. Trained once, then frozen and queried.
class WeakLearner {
 public:
  virtual ~WeakLearner() = default;
  virtual LearnerCapabilities capabilities() const = 0;
  virtual TrainSummary train(const TrainRequest& request, const ProgressFn& progress) = 0;
  virtual LogitMatrix predict(std::span<const PromptPair> pairs) = 0;
  // Serialized trained state; empty when the learner keeps its own.
  virtual std::string snapshot() const { return {}; }
};

// Creates the learner for a 1-based round.
using LearnerFactory = std::function<std::unique_ptr<WeakLearner>(std::size_t round)>;

enum class Split { train = 0, valid = 1, test = 2 };
inline constexpr std::size_t kSplits = 3;
std::string_view split_name(Split split);

// Prompt pairs per round (outer index r-1) and labels, per split.
struct BoostData {
  std::vector<std::vector<PromptPair>> pairs[kSplits];
  std::vector<int> labels[kSplits];

  std::size_t size(Split s) const { return labels[static_cast<std::size_t>(s)].size(); }
};

struct RoundRecord {
  std::size_t round = 0;
  double train_loss = 0.0;
  std::optional<double> valid_ap;
  double test_ap = 0.0;
  std::size_t steps = 0;
  std::size_t epochs = 0;
  std::vector<std::optional<double>> view_ratio;
  double wall_seconds = 0.0;
};

// Stage-wise loop with per-round logit caches. Rounds run strictly in order;
// rewind() discards later rounds so a round can be retrained while earlier
// caches stay untouched.
class BoostSession {
 public:
  BoostSession(BoostConfig config, TaskSpec task, const BoostData& data, LearnerFactory factory);

  std::size_t completed_rounds() const { return records_.size(); }
  bool stopped_early() const { return stopped_; }
  bool finished() const { return stopped_ || records_.size() >= config_.rounds; }

  // Trains the next round. Returns false when early stopping rejected it.
  bool step(const ProgressFn& progress = {});
  void rewind(std::size_t keep_rounds);

  // f_r and F_r on a split, r in [1, completed_rounds()]; F_0 is all zeros.
  const LogitMatrix& round_logits(std::size_t round, Split split) const;
  const LogitMatrix& accumulated(std::size_t round, Split split) const;

  const std::vector<RoundRecord>& records() const { return records_; }
  const LearnerCapabilities& capabilities() const { return capabilities_; }
  std::vector<WeakLearner*> learners() const;
  const BoostConfig& config() const { return config_; }
  const TaskSpec& task() const { return task_; }
  std::size_t total_epochs() const;

 private:
  BoostConfig config_;
  TaskSpec task_;
  const BoostData& data_;
  LearnerFactory factory_;
  std::vector<std::unique_ptr<WeakLearner>> learners_;
  // [split][r]; index 0 of accumulated_ is F_0.
  std::vector<LogitMatrix> round_logits_[kSplits];
  std::vector<LogitMatrix> accumulated_[kSplits];
  std::vector<RoundRecord> records_;
  LearnerCapabilities capabilities_;
  bool stopped_ = false;
};

struct BoostResult {
  std::vector<RoundRecord> records;
  LogitMatrix final_logits[kSplits];
  std::vector<LogitMatrix> round_logits[kSplits];  // f_r per round
  std::vector<std::string> snapshots;              // per finished round
  LearnerCapabilities capabilities;
  std::size_t total_epochs = 0;
  bool stopped_early = false;
  // Set when a learner failed; rounds before it are kept in `records`.
  std::optional<std::string> failure;
  std::size_t failed_round = 0;
};

BoostResult boost_train(const BoostData& data, const LearnerFactory& factory,
                        const BoostConfig& config, const TaskSpec& task,
                        const ProgressFn& progress = {});

// Left fold of accumulate over per-round logits.
LogitMatrix fold_logits(std::span<const LogitMatrix> round_logits, double eta, double alpha);

// Queries every round's learner on its own round's pairs, accumulates and maps
// to class probabilities.
LogitMatrix predict_ensemble(std::span<WeakLearner* const> learners,
                             std::span<const std::vector<PromptPair>> pairs_by_round,
                             const BoostConfig& config, const TaskSpec& task);

// Header "sample_id,<class or logit columns>", one line per sample.
std::string logits_to_csv(const LogitMatrix& logits, std::span<const std::size_t> sample_ids,
                          const TaskSpec& task, const Schema& schema);

// Learner emitting the same logits for every sample.
class ConstantLearner : public WeakLearner {
 public:
  explicit ConstantLearner(std::vector<double> logits, std::size_t num_classes = 2)
      : logits_(std::move(logits)), num_classes_(num_classes) {}
  LearnerCapabilities capabilities() const override;
  TrainSummary train(const TrainRequest& request, const ProgressFn& progress) override;
  LogitMatrix predict(std::span<const PromptPair> pairs) override;

 private:
  std::vector<double> logits_;
  std::size_t num_classes_;
};

}  // namespace tabboost
