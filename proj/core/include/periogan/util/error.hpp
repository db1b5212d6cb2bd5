#pragma once

#include <stdexcept>
#include <string>

namespace periogan {

/// Failure categories surfaced by the toolkit. Each maps to one documented
/// error condition of the public API.
enum class ErrorKind {
  EmptyCorpus,
  IOFailure,
  InvalidTarget,
  InvalidBatchSize,
  ShapeError,
  ConditioningError,
  DomainError,
  EmptyBatch,
  InvalidBound,
  InvalidConfig,
  DivergedRun,
  ChecksumError,
  EmbedError,
  InsufficientSamples,
  InvalidPerplexity,
  MissingClass,
  UsageError,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(std::string(to_string(kind)) + ": " + msg), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& msg) {
  throw Error(kind, msg);
}

inline void require(bool cond, ErrorKind kind, const std::string& msg) {
  if (!cond) raise(kind, msg);
}

}  // namespace periogan
