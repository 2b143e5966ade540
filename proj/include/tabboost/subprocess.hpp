#pragma once

#include <chrono>
#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tabboost {

// A bidirectional line transport. receive() returns nullopt on timeout and
// throws LearnerError when the peer has gone away.
class LineChannel {
 public:
  virtual ~LineChannel() = default;
  virtual void send(std::string_view line) = 0;
  virtual std::optional<std::string> receive(std::chrono::milliseconds timeout) = 0;
};

// Child process started through /bin/sh -c, with its stdin and stdout as the
// channel. Stderr is inherited. The destructor closes stdin, gives the child
// a moment to exit, then kills it.
class Subprocess : public LineChannel {
 public:
  explicit Subprocess(const std::string& command);
  ~Subprocess() override;
  Subprocess(const Subprocess&) = delete;
  Subprocess& operator=(const Subprocess&) = delete;

  void send(std::string_view line) override;
  std::optional<std::string> receive(std::chrono::milliseconds timeout) override;

  // Closes stdin and waits up to `grace` for exit; returns the exit status or
  // -1 if the child had to be killed.
  int finish(std::chrono::milliseconds grace = std::chrono::milliseconds(2000));
  int pid() const { return pid_; }

 private:
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
  std::string command_;
  bool exited_ = false;
  int status_ = 0;
};

// In-process peer: every sent line is handed to `handler`, whose returned
// lines are queued for receive(). Used to run protocol clients against fake
// learners without a process.
class LoopbackChannel : public LineChannel {
 public:
  using Handler = std::function<std::vector<std::string>(const std::string& line)>;
  explicit LoopbackChannel(Handler handler) : handler_(std::move(handler)) {}

  void send(std::string_view line) override;
  std::optional<std::string> receive(std::chrono::milliseconds timeout) override;

 private:
  Handler handler_;
  std::deque<std::string> pending_;
};

}  // namespace tabboost
