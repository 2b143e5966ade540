#pragma once

#include <stdexcept>
#include <string>

namespace tabboost {

// Error categories map one-to-one onto CLI exit codes.
enum class ErrorKind { config = 1, data = 2, learner = 3 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

// Two constraints on one feature with an empty intersection. Paths taken by
// a single sample never produce this, so seeing it means a routing bug or
// paths from different samples were mixed.
class MergeConflict : public DataError {
 public:
  explicit MergeConflict(const std::string& what) : DataError("merge conflict: " + what) {}
};

class LearnerError : public Error {
 public:
  explicit LearnerError(const std::string& what) : Error(ErrorKind::learner, what) {}
};

}  // namespace tabboost
