#pragma once

// Learner protocol, version 1. Newline-delimited JSON objects over a line
// channel; the engine sends one request at a time and every request gets
// exactly one terminal response echoing its "seq". Requests:
//
//   {"seq","kind":"handshake","version","round","num_classes","logit_width"}
//     -> {"kind":"handshake","version","num_classes","reports_view_ratio",
//         "internal_objectives":[...],"metadata":{...}}
//   {"seq","kind":"train_round","round","eta","alpha","epochs","seed",
//    "pairs":[{"sample_id","feature_view","path_view"}],"labels":[...],
//    "f_prev":[[...],...]}
//     -> zero or more {"kind":"train_progress","step","view_ratio","loss"}
//     -> {"kind":"train_round","status":"done","steps","epochs","loss"}
//   {"seq","kind":"predict","round","pairs":[...]}
//     -> {"kind":"predict_result","logits":[[...],...]}
//   {"seq","kind":"diagnostics"} -> {"kind":"diagnostics","info":{...}}
//   {"seq","kind":"shutdown"} -> {"kind":"shutdown"}
//
// Any request may instead be answered with {"kind":"error","message"}.
// Unknown fields are ignored on both sides. f_prev is the accumulated logit
// F_{r-1} before decay; the learner minimizes the residual loss of
// alpha * f_prev + eta * f_r.

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tabboost/boost.hpp"
#include "tabboost/subprocess.hpp"

namespace tabboost {

inline constexpr int kProtocolVersion = 1;

struct ProtocolTimeouts {
  std::chrono::milliseconds handshake{std::chrono::seconds(60)};
  std::chrono::milliseconds train_round{std::chrono::hours(1)};
  std::chrono::milliseconds predict{std::chrono::hours(1)};
  std::chrono::milliseconds other{std::chrono::seconds(60)};
};

// Request encoders; byte-stable so transcripts can be compared verbatim.
std::string encode_handshake(std::uint64_t seq, std::size_t round, const TaskSpec& task);
std::string encode_train_round(std::uint64_t seq, const TrainRequest& request);
std::string encode_predict(std::uint64_t seq, std::size_t round, std::span<const PromptPair> pairs);
std::string encode_simple(std::uint64_t seq, std::string_view kind);

class ProtocolClient {
 public:
  ProtocolClient(LineChannel& channel, ProtocolTimeouts timeouts = {});

  LearnerCapabilities handshake(std::size_t round, const TaskSpec& task);
  TrainSummary train_round(const TrainRequest& request, const ProgressFn& progress);
  LogitMatrix predict(std::size_t round, std::span<const PromptPair> pairs);
  std::string diagnostics();
  void shutdown();

  // Every line sent ("> ...") and received ("< ..."), in order.
  const std::vector<std::string>& transcript() const { return transcript_; }
  void keep_transcript(bool on) { record_ = on; }

 private:
  std::uint64_t send(const std::string& line);
  std::string receive(std::uint64_t seq, std::chrono::milliseconds timeout, const char* what);

  LineChannel& channel_;
  ProtocolTimeouts timeouts_;
  std::uint64_t seq_ = 0;
  std::vector<std::string> transcript_;
  bool record_ = false;
};

// WeakLearner backed by a protocol peer. The handshake runs in the
// constructor; destruction sends shutdown.
class ExternalLearner : public WeakLearner {
 public:
  ExternalLearner(std::unique_ptr<LineChannel> channel, const TaskSpec& task, std::size_t round,
                  ProtocolTimeouts timeouts = {});
  ~ExternalLearner() override;

  LearnerCapabilities capabilities() const override { return caps_; }
  TrainSummary train(const TrainRequest& request, const ProgressFn& progress) override;
  LogitMatrix predict(std::span<const PromptPair> pairs) override;
  ProtocolClient& client() { return client_; }

 private:
  std::unique_ptr<LineChannel> channel_;
  ProtocolClient client_;
  TaskSpec task_;
  std::size_t round_;
  LearnerCapabilities caps_;
};

// One learner process per round, started from `command`.
LearnerFactory external_learner_factory(std::string command, const TaskSpec& task,
                                        ProtocolTimeouts timeouts = {});

// Learner side of the echo mode: answers every predict with `logits`, trains
// in zero steps, and rejects train requests without f_prev. `version` lets
// tests impersonate incompatible peers.
class EchoServer {
 public:
  explicit EchoServer(std::vector<double> logits, int version = kProtocolVersion)
      : logits_(std::move(logits)), version_(version) {}

  // Response lines for one request line.
  std::vector<std::string> respond(const std::string& line);
  bool shut_down() const { return shut_down_; }

 private:
  std::vector<double> logits_;
  int version_;
  bool shut_down_ = false;
};

}  // namespace tabboost
