#include "tabboost/protocol.hpp"

#include <cmath>

#include "json.hpp"
#include "tabboost/error.hpp"

namespace tabboost {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

ordered_json pairs_json(std::span<const PromptPair> pairs) {
  ordered_json out = ordered_json::array();
  for (const auto& p : pairs) {
    ordered_json item;
    item["sample_id"] = p.sample_id;
    item["feature_view"] = p.feature_view;
    item["path_view"] = p.path_view;
    out.push_back(std::move(item));
  }
  return out;
}

ordered_json header(std::uint64_t seq, std::string_view kind) {
  ordered_json doc;
  doc["seq"] = seq;
  doc["kind"] = kind;
  return doc;
}

json parse_line(const std::string& line) {
  try {
    json doc = json::parse(line);
    if (!doc.is_object()) throw LearnerError("protocol: message is not a JSON object: " + line);
    return doc;
  } catch (const json::exception& e) {
    throw LearnerError(std::string("protocol: malformed message: ") + e.what());
  }
}

}  // namespace

std::string encode_handshake(std::uint64_t seq, std::size_t round, const TaskSpec& task) {
  auto doc = header(seq, "handshake");
  doc["version"] = kProtocolVersion;
  doc["round"] = round;
  doc["num_classes"] = task.num_classes;
  doc["logit_width"] = task.width();
  return doc.dump();
}

std::string encode_train_round(std::uint64_t seq, const TrainRequest& request) {
  if (!request.f_prev) throw LearnerError("train_round request without f_prev");
  auto doc = header(seq, "train_round");
  doc["round"] = request.round;
  doc["eta"] = request.eta;
  doc["alpha"] = request.alpha;
  doc["epochs"] = request.epochs;
  doc["seed"] = request.seed;
  doc["pairs"] = pairs_json(request.pairs);
  doc["labels"] = std::vector<int>(request.labels.begin(), request.labels.end());
  ordered_json prev = ordered_json::array();
  for (std::size_t i = 0; i < request.f_prev->rows; ++i) {
    const auto row = request.f_prev->row(i);
    prev.push_back(std::vector<double>(row.begin(), row.end()));
  }
  doc["f_prev"] = std::move(prev);
  return doc.dump();
}

std::string encode_predict(std::uint64_t seq, std::size_t round, std::span<const PromptPair> pairs) {
  auto doc = header(seq, "predict");
  doc["round"] = round;
  doc["pairs"] = pairs_json(pairs);
  return doc.dump();
}

std::string encode_simple(std::uint64_t seq, std::string_view kind) { return header(seq, kind).dump(); }

ProtocolClient::ProtocolClient(LineChannel& channel, ProtocolTimeouts timeouts)
    : channel_(channel), timeouts_(timeouts) {}

std::uint64_t ProtocolClient::send(const std::string& line) {
  if (record_) transcript_.push_back("> " + line);
  channel_.send(line);
  return seq_;
}

std::string ProtocolClient::receive(std::uint64_t seq, std::chrono::milliseconds timeout,
                                    const char* what) {
  auto line = channel_.receive(timeout);
  if (!line) {
    throw LearnerError(std::string("protocol: timed out waiting for ") + what + " response to seq " +
                       std::to_string(seq));
  }
  if (record_) transcript_.push_back("< " + *line);
  return *line;
}

namespace {

json expect(const std::string& line, std::uint64_t seq, std::initializer_list<std::string_view> kinds) {
  json doc = parse_line(line);
  if (!doc.contains("seq") || !doc["seq"].is_number_unsigned() || doc["seq"].get<std::uint64_t>() != seq) {
    throw LearnerError("protocol: response does not echo seq " + std::to_string(seq) + ": " + line);
  }
  const std::string kind = doc.value("kind", "");
  if (kind == "error") {
    throw LearnerError("learner reported an error: " + doc.value("message", std::string("(no message)")));
  }
  for (auto k : kinds) {
    if (kind == k) return doc;
  }
  throw LearnerError("protocol: unexpected response kind '" + kind + "' to seq " + std::to_string(seq));
}

std::optional<double> optional_number(const json& doc, const char* key) {
  if (!doc.contains(key) || doc[key].is_null()) return std::nullopt;
  if (!doc[key].is_number()) throw LearnerError(std::string("protocol: field '") + key + "' is not a number");
  return doc[key].get<double>();
}

}  // namespace

LearnerCapabilities ProtocolClient::handshake(std::size_t round, const TaskSpec& task) {
  const auto seq = ++seq_;
  send(encode_handshake(seq, round, task));
  const json doc = expect(receive(seq, timeouts_.handshake, "handshake"), seq, {"handshake"});
  LearnerCapabilities caps;
  caps.version = doc.value("version", 0);
  if (caps.version != kProtocolVersion) {
    throw LearnerError("protocol version mismatch: learner speaks " + std::to_string(caps.version) +
                       ", engine speaks " + std::to_string(kProtocolVersion));
  }
  caps.num_classes = doc.value("num_classes", task.num_classes);
  if (caps.num_classes != task.num_classes) {
    throw LearnerError("learner expects " + std::to_string(caps.num_classes) + " classes, task has " +
                       std::to_string(task.num_classes));
  }
  caps.reports_view_ratio = doc.value("reports_view_ratio", false);
  if (doc.contains("internal_objectives") && doc["internal_objectives"].is_array()) {
    for (const auto& o : doc["internal_objectives"]) caps.internal_objectives.push_back(o.get<std::string>());
  }
  caps.metadata = doc.contains("metadata") ? doc["metadata"].dump() : "{}";
  return caps;
}

TrainSummary ProtocolClient::train_round(const TrainRequest& request, const ProgressFn& progress) {
  const auto seq = ++seq_;
  send(encode_train_round(seq, request));
  const auto deadline = std::chrono::steady_clock::now() + timeouts_.train_round;
  TrainSummary summary;
  for (;;) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    const json doc = expect(receive(seq, std::max(left, std::chrono::milliseconds(0)), "train_round"),
                            seq, {"train_progress", "train_round"});
    if (doc["kind"] == "train_progress") {
      TrainProgress p;
      p.step = doc.value("step", summary.view_ratio.size() + 1);
      p.mean_view_ratio = optional_number(doc, "view_ratio");
      p.loss = optional_number(doc, "loss");
      summary.view_ratio.push_back(p.mean_view_ratio);
      if (progress) progress(p);
      continue;
    }
    summary.steps = doc.value("steps", summary.view_ratio.size());
    summary.epochs = doc.value("epochs", request.epochs);
    summary.final_loss = optional_number(doc, "loss").value_or(0.0);
    return summary;
  }
}

LogitMatrix ProtocolClient::predict(std::size_t round, std::span<const PromptPair> pairs) {
  const auto seq = ++seq_;
  send(encode_predict(seq, round, pairs));
  const json doc = expect(receive(seq, timeouts_.predict, "predict"), seq, {"predict_result"});
  if (!doc.contains("logits") || !doc["logits"].is_array()) {
    throw LearnerError("protocol: predict_result without logits");
  }
  const auto& rows = doc["logits"];
  if (rows.size() != pairs.size()) {
    throw LearnerError("protocol: " + std::to_string(rows.size()) + " logit rows for " +
                       std::to_string(pairs.size()) + " samples");
  }
  const std::size_t width = rows.empty() ? 0 : rows[0].size();
  LogitMatrix out(rows.size(), width);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i].is_array() || rows[i].size() != width) throw LearnerError("protocol: ragged logit rows");
    for (std::size_t c = 0; c < width; ++c) {
      if (!rows[i][c].is_number()) throw LearnerError("protocol: non-numeric logit for sample " + std::to_string(i));
      out.at(i, c) = rows[i][c].get<double>();
    }
  }
  return out;
}

std::string ProtocolClient::diagnostics() {
  const auto seq = ++seq_;
  send(encode_simple(seq, "diagnostics"));
  const json doc = expect(receive(seq, timeouts_.other, "diagnostics"), seq, {"diagnostics"});
  return doc.contains("info") ? doc["info"].dump() : "{}";
}

void ProtocolClient::shutdown() {
  const auto seq = ++seq_;
  send(encode_simple(seq, "shutdown"));
  expect(receive(seq, timeouts_.other, "shutdown"), seq, {"shutdown"});
}

ExternalLearner::ExternalLearner(std::unique_ptr<LineChannel> channel, const TaskSpec& task,
                                 std::size_t round, ProtocolTimeouts timeouts)
    : channel_(std::move(channel)), client_(*channel_, timeouts), task_(task), round_(round) {
  caps_ = client_.handshake(round_, task_);
}

ExternalLearner::~ExternalLearner() {
  try {
    client_.shutdown();
  } catch (const std::exception&) {
    // the process is reaped by the channel either way
  }
}

TrainSummary ExternalLearner::train(const TrainRequest& request, const ProgressFn& progress) {
  return client_.train_round(request, progress);
}

LogitMatrix ExternalLearner::predict(std::span<const PromptPair> pairs) {
  return client_.predict(round_, pairs);
}

LearnerFactory external_learner_factory(std::string command, const TaskSpec& task,
                                        ProtocolTimeouts timeouts) {
  if (command.empty()) throw ConfigError("learner command is empty");
  return [command = std::move(command), task, timeouts](std::size_t round) {
    return std::make_unique<ExternalLearner>(std::make_unique<Subprocess>(command), task, round, timeouts);
  };
}

std::vector<std::string> EchoServer::respond(const std::string& line) {
  json req;
  std::uint64_t seq = 0;
  const auto error = [&](const std::string& message) {
    auto doc = header(seq, "error");
    doc["message"] = message;
    return std::vector<std::string>{doc.dump()};
  };
  try {
    req = json::parse(line);
  } catch (const json::exception&) {
    return error("malformed message");
  }
  if (!req.is_object()) return error("message is not an object");
  seq = req.value("seq", std::uint64_t{0});
  const std::string kind = req.value("kind", "");
  if (kind == "handshake") {
    auto doc = header(seq, "handshake");
    doc["version"] = version_;
    doc["num_classes"] = req.value("num_classes", std::size_t{2});
    doc["reports_view_ratio"] = false;
    doc["internal_objectives"] = ordered_json::array();
    doc["metadata"] = {{"mode", "echo"}};
    return {doc.dump()};
  }
  if (kind == "train_round") {
    for (const char* field : {"pairs", "labels", "f_prev", "eta", "alpha", "epochs"}) {
      if (!req.contains(field)) return error(std::string("missing required field '") + field + "'");
    }
    auto doc = header(seq, "train_round");
    doc["status"] = "done";
    doc["steps"] = 0;
    doc["epochs"] = req["epochs"];
    return {doc.dump()};
  }
  if (kind == "predict") {
    if (!req.contains("pairs") || !req["pairs"].is_array()) return error("missing required field 'pairs'");
    auto doc = header(seq, "predict_result");
    ordered_json rows = ordered_json::array();
    for (std::size_t i = 0; i < req["pairs"].size(); ++i) rows.push_back(logits_);
    doc["logits"] = std::move(rows);
    return {doc.dump()};
  }
  if (kind == "diagnostics") {
    auto doc = header(seq, "diagnostics");
    doc["info"] = {{"mode", "echo"}};
    return {doc.dump()};
  }
  if (kind == "shutdown") {
    shut_down_ = true;
    return {header(seq, "shutdown").dump()};
  }
  return error("unknown kind '" + kind + "'");
}

}  // namespace tabboost
