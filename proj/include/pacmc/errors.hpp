#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>

namespace pacmc {

struct RunLedger;

/// Argument outside its documented domain.
class ParameterError : public std::invalid_argument {
 public:
  explicit ParameterError(const std::string& what) : std::invalid_argument(what) {}
};

/// A planned count does not fit the 64-bit trial budget.
class OverflowError : public std::runtime_error {
 public:
  explicit OverflowError(const std::string& what) : std::runtime_error(what) {}
};

/// The subject failed outside property semantics (spawn failure, unclaimed
/// timeout, source misbehavior). Carries the trial where it happened.
class InfrastructureError : public std::runtime_error {
 public:
  InfrastructureError(const std::string& what, std::uint64_t trial_index)
      : std::runtime_error(what + " (trial " + std::to_string(trial_index) + ")"),
        trial_index_(trial_index) {}

  std::uint64_t trial_index() const noexcept { return trial_index_; }

  std::shared_ptr<const RunLedger> partial_ledger;

 private:
  std::uint64_t trial_index_;
};

/// A replayed trace ran out of recorded trials before the requested count.
class InsufficientTrialsError : public std::runtime_error {
 public:
  InsufficientTrialsError(const std::string& what, std::uint64_t trial_index)
      : std::runtime_error(what), trial_index_(trial_index) {}

  std::uint64_t trial_index() const noexcept { return trial_index_; }

  std::shared_ptr<const RunLedger> partial_ledger;

 private:
  std::uint64_t trial_index_;
};

/// Snapshot version/config mismatch or corrupted snapshot data.
class CheckpointError : public std::runtime_error {
 public:
  explicit CheckpointError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed trace file line.
class TraceParseError : public std::runtime_error {
 public:
  TraceParseError(const std::string& what, std::uint64_t line)
      : std::runtime_error(what + " (line " + std::to_string(line) + ")"), line_(line) {}

  std::uint64_t line() const noexcept { return line_; }

 private:
  std::uint64_t line_;
};

/// Patch verification cannot be set up (bug never observed).
class CannotVerifyError : public std::runtime_error {
 public:
  explicit CannotVerifyError(const std::string& what) : std::runtime_error(what) {}
};

/// Not enough observations for a diagnostic.
class InsufficientDataError : public std::runtime_error {
 public:
  explicit InsufficientDataError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace pacmc
