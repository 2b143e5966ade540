#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tabboost/boost.hpp"

namespace tabboost {

inline constexpr std::size_t kDefaultHashDim = 4096;

enum class ViewKind { feature, path };

// Lowercased tokens: runs of letters and digits, with '.' kept between digits
// and a '-' kept in front of a digit when it does not follow a letter or digit.
// Comparison operators (<, <=, >, >=, =) are tokens of their own; all other
// punctuation separates tokens.
std::vector<std::string> tokenize(std::string_view text);

// Bucket of a token: FNV-1a 64 of its bytes, modulo dim.
std::size_t token_bucket(std::string_view token, std::size_t dim);

// Sparse bag of hashed tokens, sorted by bucket.
struct ViewEncoding {
  std::size_t dim = kDefaultHashDim;
  ViewKind source = ViewKind::feature;
  std::vector<std::uint32_t> buckets;
  std::vector<double> counts;

  std::vector<double> dense() const;
  double norm() const;
};

ViewEncoding encode_view(std::string_view text, std::size_t dim = kDefaultHashDim,
                         ViewKind source = ViewKind::feature);

// Elementwise mean of the two dense encodings.
std::vector<double> fuse_views(const ViewEncoding& feature, const ViewEncoding& path);

// ||feature|| / ||path||; empty when the path view has zero norm.
std::optional<double> view_ratio(const ViewEncoding& feature, const ViewEncoding& path);

enum class ViewMode { both, feature_only, path_only };
std::string_view view_mode_name(ViewMode mode);
std::optional<ViewMode> parse_view_mode(std::string_view name);

enum class Optimizer { sgd, adam };

struct ToyLearnerConfig {
  std::size_t dim = kDefaultHashDim;
  ViewMode views = ViewMode::both;
  Optimizer optimizer = Optimizer::sgd;
  double step_size = 0.3;
  std::size_t batch_size = 16;
  double l2 = 0.0;  // on weights, not bias
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;  // throws ConfigError
};

// Linear scores W h + b, with W stored class-major (width rows of dim).
struct ToyParams {
  std::size_t dim = 0;
  std::size_t width = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  ToyParams() = default;
  ToyParams(std::size_t d, std::size_t w) : dim(d), width(w), weights(d * w, 0.0), bias(w, 0.0) {}
  bool operator==(const ToyParams&) const = default;
};

std::vector<double> forward_logits(const ToyParams& params, std::span<const double> fused);

// Sparse input the learner sees for one pair under `mode`; for `both` this is
// the sparse form of fuse_views.
ViewEncoding learner_input(const PromptPair& pair, std::size_t dim, ViewMode mode);
std::vector<double> forward_logits(const ToyParams& params, const ViewEncoding& input);

struct ToyObjective {
  double loss = 0.0;
  std::vector<double> grad_weights;
  std::vector<double> grad_bias;
};

// Mean residual loss of alpha * F_prev + eta * (W h + b) plus l2/2 ||W||^2,
// and its gradient with respect to W and b.
ToyObjective toy_objective(const ToyParams& params, std::span<const ViewEncoding> inputs,
                           std::span<const int> labels, const LogitMatrix& f_prev, double eta,
                           double alpha, const TaskSpec& task, double l2 = 0.0);

class ToyLearner : public WeakLearner {
 public:
  ToyLearner(ToyLearnerConfig config, TaskSpec task);

  LearnerCapabilities capabilities() const override;
  TrainSummary train(const TrainRequest& request, const ProgressFn& progress) override;
  LogitMatrix predict(std::span<const PromptPair> pairs) override;
  std::string snapshot() const override;

  const ToyParams& params() const { return params_; }
  void set_params(ToyParams params);
  // Training residual loss after each epoch of the last train() call.
  const std::vector<double>& epoch_losses() const { return epoch_losses_; }

 private:
  ToyLearnerConfig config_;
  TaskSpec task_;
  ToyParams params_;
  std::vector<double> epoch_losses_;
};

LearnerFactory toy_learner_factory(const ToyLearnerConfig& config, const TaskSpec& task);

// Parameter snapshot: "TBTOYP01", u64 dim, u64 width, then weights and bias as
// little-endian IEEE doubles.
std::string snapshot_bytes(const ToyParams& params);
ToyParams snapshot_from_bytes(std::string_view bytes);

}  // namespace tabboost
