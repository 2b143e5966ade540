#include "tabboost/toy_learner.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <map>
#include <numeric>

#include "json.hpp"
#include "tabboost/error.hpp"
#include "tabboost/kernels.hpp"
#include "tabboost/util.hpp"

namespace tabboost {

namespace {

bool is_word(unsigned char c) { return std::isalnum(c) || c >= 0x80; }
bool is_digit(unsigned char c) { return c >= '0' && c <= '9'; }
bool is_operator(unsigned char c) { return c == '<' || c == '>' || c == '='; }

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  const auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };
  const auto at = [&](std::size_t i) -> unsigned char { return i < text.size() ? text[i] : 0; };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const unsigned char c = text[i];
    if (is_word(c)) {
      current += static_cast<char>(std::tolower(c));
    } else if (c == '.' && !current.empty() && is_digit(current.back()) && is_digit(at(i + 1))) {
      current += '.';
    } else if (c == '-' && current.empty() && is_digit(at(i + 1)) && (i == 0 || !is_word(at(i - 1)))) {
      current += '-';
    } else if (is_operator(c)) {
      flush();
      while (is_operator(at(i))) current += static_cast<char>(text[i++]);
      --i;
      flush();
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

std::size_t token_bucket(std::string_view token, std::size_t dim) {
  return static_cast<std::size_t>(fnv1a64(token) % dim);
}

std::vector<double> ViewEncoding::dense() const {
  std::vector<double> out(dim, 0.0);
  for (std::size_t k = 0; k < buckets.size(); ++k) out[buckets[k]] = counts[k];
  return out;
}

double ViewEncoding::norm() const { return std::sqrt(kernels::sum_squares(counts)); }

ViewEncoding encode_view(std::string_view text, std::size_t dim, ViewKind source) {
  if (dim == 0) throw ConfigError("hash dimension must be positive");
  std::map<std::uint32_t, double> counts;
  for (const auto& token : tokenize(text)) counts[static_cast<std::uint32_t>(token_bucket(token, dim))] += 1.0;
  ViewEncoding enc;
  enc.dim = dim;
  enc.source = source;
  for (const auto& [b, c] : counts) {
    enc.buckets.push_back(b);
    enc.counts.push_back(c);
  }
  return enc;
}

std::vector<double> fuse_views(const ViewEncoding& feature, const ViewEncoding& path) {
  if (feature.dim != path.dim) throw DataError("view encodings differ in dimension");
  const auto a = feature.dense();
  const auto b = path.dense();
  std::vector<double> out(a.size());
  kernels::midpoint(a, b, out);
  return out;
}

std::optional<double> view_ratio(const ViewEncoding& feature, const ViewEncoding& path) {
  const double p = path.norm();
  if (!(p > 0)) return std::nullopt;
  return feature.norm() / p;
}

std::string_view view_mode_name(ViewMode mode) {
  switch (mode) {
    case ViewMode::both: return "both";
    case ViewMode::feature_only: return "feature-only";
    case ViewMode::path_only: return "path-only";
  }
  return "?";
}

std::optional<ViewMode> parse_view_mode(std::string_view name) {
  if (name == "both") return ViewMode::both;
  if (name == "feature-only" || name == "feature") return ViewMode::feature_only;
  if (name == "path-only" || name == "path") return ViewMode::path_only;
  return std::nullopt;
}

void ToyLearnerConfig::validate() const {
  if (dim == 0) throw ConfigError("learner.dim must be positive");
  if (batch_size == 0) throw ConfigError("learner.batch_size must be positive");
  if (!(step_size > 0) || !std::isfinite(step_size)) throw ConfigError("learner.step_size must be positive");
  if (l2 < 0) throw ConfigError("learner.l2 must be non-negative");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) {
    throw ConfigError("learner.beta1 and learner.beta2 must lie in [0, 1)");
  }
}

std::vector<double> forward_logits(const ToyParams& params, std::span<const double> fused) {
  if (fused.size() != params.dim) throw DataError("input dimension does not match the parameters");
  std::vector<double> out(params.width);
  for (std::size_t c = 0; c < params.width; ++c) {
    out[c] = kernels::dot({params.weights.data() + c * params.dim, params.dim}, fused) + params.bias[c];
  }
  return out;
}

std::vector<double> forward_logits(const ToyParams& params, const ViewEncoding& input) {
  if (input.dim != params.dim) throw DataError("input dimension does not match the parameters");
  std::vector<double> out(params.width);
  for (std::size_t c = 0; c < params.width; ++c) {
    const double* w = params.weights.data() + c * params.dim;
    double s = 0.0;
    for (std::size_t k = 0; k < input.buckets.size(); ++k) s += w[input.buckets[k]] * input.counts[k];
    out[c] = s + params.bias[c];
  }
  return out;
}

ViewEncoding learner_input(const PromptPair& pair, std::size_t dim, ViewMode mode) {
  if (mode == ViewMode::feature_only) return encode_view(pair.feature_view, dim, ViewKind::feature);
  if (mode == ViewMode::path_only) return encode_view(pair.path_view, dim, ViewKind::path);
  const ViewEncoding a = encode_view(pair.feature_view, dim, ViewKind::feature);
  const ViewEncoding b = encode_view(pair.path_view, dim, ViewKind::path);
  std::map<std::uint32_t, double> sum;
  for (std::size_t k = 0; k < a.buckets.size(); ++k) sum[a.buckets[k]] += a.counts[k];
  for (std::size_t k = 0; k < b.buckets.size(); ++k) sum[b.buckets[k]] += b.counts[k];
  ViewEncoding out;
  out.dim = dim;
  out.source = ViewKind::path;
  for (const auto& [bucket, v] : sum) {
    out.buckets.push_back(bucket);
    out.counts.push_back(v / 2.0);
  }
  return out;
}

ToyObjective toy_objective(const ToyParams& params, std::span<const ViewEncoding> inputs,
                           std::span<const int> labels, const LogitMatrix& f_prev, double eta,
                           double alpha, const TaskSpec& task, double l2) {
  const std::size_t n = inputs.size();
  if (labels.size() != n || f_prev.rows != n || f_prev.cols != params.width) {
    throw DataError("toy objective: inputs, labels and f_prev disagree in shape");
  }
  LogitMatrix F(n, params.width);
  for (std::size_t i = 0; i < n; ++i) {
    const auto z = forward_logits(params, inputs[i]);
    for (std::size_t c = 0; c < params.width; ++c) F.at(i, c) = alpha * f_prev.at(i, c) + eta * z[c];
  }
  const ResidualLoss rl = residual_loss(F, labels, task, eta);
  ToyObjective out;
  out.loss = rl.loss;
  out.grad_weights.assign(params.weights.size(), 0.0);
  out.grad_bias.assign(params.width, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < params.width; ++c) {
      const double g = rl.grad_f.at(i, c);
      double* gw = out.grad_weights.data() + c * params.dim;
      for (std::size_t k = 0; k < inputs[i].buckets.size(); ++k) gw[inputs[i].buckets[k]] += g * inputs[i].counts[k];
      out.grad_bias[c] += g;
    }
  }
  if (l2 > 0) {
    out.loss += 0.5 * l2 * kernels::sum_squares(params.weights);
    kernels::axpy(l2, params.weights, out.grad_weights);
  }
  return out;
}

ToyLearner::ToyLearner(ToyLearnerConfig config, TaskSpec task)
    : config_(config), task_(task), params_(config.dim, task.width()) {
  config_.validate();
}

LearnerCapabilities ToyLearner::capabilities() const {
  LearnerCapabilities caps;
  caps.num_classes = task_.num_classes;
  caps.reports_view_ratio = config_.views == ViewMode::both;
  nlohmann::ordered_json meta;
  meta["learner"] = "toy";
  meta["views"] = view_mode_name(config_.views);
  meta["dim"] = config_.dim;
  meta["optimizer"] = config_.optimizer == Optimizer::adam ? "adam" : "sgd";
  meta["step_size"] = config_.step_size;
  meta["batch_size"] = config_.batch_size;
  meta["l2"] = config_.l2;
  caps.metadata = meta.dump();
  return caps;
}

void ToyLearner::set_params(ToyParams params) {
  if (params.dim != config_.dim || params.width != task_.width()) {
    throw DataError("snapshot shape does not match the learner");
  }
  params_ = std::move(params);
}

TrainSummary ToyLearner::train(const TrainRequest& request, const ProgressFn& progress) {
  if (!request.f_prev) throw LearnerError("round " + std::to_string(request.round) + ": missing f_prev");
  const std::size_t n = request.pairs.size();
  if (request.labels.size() != n || request.f_prev->rows != n) {
    throw LearnerError("round " + std::to_string(request.round) + ": request shapes disagree");
  }
  params_ = ToyParams(config_.dim, task_.width());
  epoch_losses_.clear();

  std::vector<ViewEncoding> inputs;
  std::vector<std::optional<double>> ratios;
  inputs.reserve(n);
  for (const auto& pair : request.pairs) {
    inputs.push_back(learner_input(pair, config_.dim, config_.views));
    if (config_.views == ViewMode::both) {
      ratios.push_back(view_ratio(encode_view(pair.feature_view, config_.dim, ViewKind::feature),
                                  encode_view(pair.path_view, config_.dim, ViewKind::path)));
    }
  }

  std::vector<double> m_w(params_.weights.size(), 0.0), v_w(params_.weights.size(), 0.0);
  std::vector<double> m_b(params_.width, 0.0), v_b(params_.width, 0.0);
  TrainSummary summary;
  summary.epochs = request.epochs;
  const std::size_t batch = std::min(config_.batch_size, std::max<std::size_t>(n, 1));

  std::vector<std::size_t> order(n);
  std::vector<ViewEncoding> bx;
  std::vector<int> by;
  for (std::size_t epoch = 0; epoch < request.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng(mix_seed(request.seed, epoch));
    shuffle_in_place(order, rng);
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(n, start + batch);
      bx.clear();
      by.clear();
      LogitMatrix bprev(end - start, params_.width);
      double ratio_sum = 0.0;
      std::size_t ratio_count = 0;
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t i = order[k];
        bx.push_back(inputs[i]);
        by.push_back(request.labels[i]);
        std::copy_n(request.f_prev->row(i).begin(), params_.width, bprev.row(k - start).begin());
        if (!ratios.empty() && ratios[i]) {
          ratio_sum += *ratios[i];
          ++ratio_count;
        }
      }
      const ToyObjective obj =
          toy_objective(params_, bx, by, bprev, request.eta, request.alpha, task_, config_.l2);
      ++summary.steps;
      if (config_.optimizer == Optimizer::adam) {
        const double t = static_cast<double>(summary.steps);
        const kernels::AdamStep s{config_.step_size, config_.beta1, config_.beta2, config_.epsilon,
                                  1.0 - std::pow(config_.beta1, t), 1.0 - std::pow(config_.beta2, t)};
        kernels::adam_update(params_.weights, obj.grad_weights, m_w, v_w, s);
        kernels::adam_update(params_.bias, obj.grad_bias, m_b, v_b, s);
      } else {
        kernels::axpy(-config_.step_size, obj.grad_weights, params_.weights);
        kernels::axpy(-config_.step_size, obj.grad_bias, params_.bias);
      }
      std::optional<double> rho;
      if (ratio_count) rho = ratio_sum / static_cast<double>(ratio_count);
      summary.view_ratio.push_back(rho);
      if (progress) progress({summary.steps, rho, obj.loss});
    }
    const double loss = toy_objective(params_, inputs, request.labels, *request.f_prev, request.eta,
                                      request.alpha, task_, config_.l2)
                            .loss;
    if (!std::isfinite(loss)) {
      throw LearnerError("round " + std::to_string(request.round) + ": training diverged at epoch " +
                         std::to_string(epoch + 1) + " (loss " + std::to_string(loss) +
                         ", step size " + std::to_string(config_.step_size) + ")");
    }
    epoch_losses_.push_back(loss);
    summary.final_loss = loss;
  }
  return summary;
}

LogitMatrix ToyLearner::predict(std::span<const PromptPair> pairs) {
  LogitMatrix out(pairs.size(), params_.width);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto z = forward_logits(params_, learner_input(pairs[i], config_.dim, config_.views));
    std::copy(z.begin(), z.end(), out.row(i).begin());
  }
  return out;
}

std::string ToyLearner::snapshot() const { return snapshot_bytes(params_); }

LearnerFactory toy_learner_factory(const ToyLearnerConfig& config, const TaskSpec& task) {
  config.validate();
  return [config, task](std::size_t) { return std::make_unique<ToyLearner>(config, task); };
}

namespace {

constexpr char kSnapshotMagic[8] = {'T', 'B', 'T', 'O', 'Y', 'P', '0', '1'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out += static_cast<char>((v >> (8 * i)) & 0xff);
}

std::uint64_t get_u64(std::string_view bytes, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[at + i])) << (8 * i);
  return v;
}

}  // namespace

std::string snapshot_bytes(const ToyParams& params) {
  std::string out(kSnapshotMagic, sizeof kSnapshotMagic);
  put_u64(out, params.dim);
  put_u64(out, params.width);
  for (const auto* v : {&params.weights, &params.bias}) {
    for (double x : *v) put_u64(out, std::bit_cast<std::uint64_t>(x));
  }
  return out;
}

ToyParams snapshot_from_bytes(std::string_view bytes) {
  if (bytes.size() < 24 || std::memcmp(bytes.data(), kSnapshotMagic, 8) != 0) {
    throw DataError("not a toy learner snapshot");
  }
  const std::uint64_t dim = get_u64(bytes, 8);
  const std::uint64_t width = get_u64(bytes, 16);
  if (dim == 0 || width == 0 || bytes.size() != 24 + 8 * (dim * width + width)) {
    throw DataError("toy learner snapshot is truncated or inconsistent");
  }
  ToyParams params(dim, width);
  std::size_t at = 24;
  for (auto* v : {&params.weights, &params.bias}) {
    for (double& x : *v) {
      x = std::bit_cast<double>(get_u64(bytes, at));
      at += 8;
    }
  }
  return params;
}

}  // namespace tabboost
