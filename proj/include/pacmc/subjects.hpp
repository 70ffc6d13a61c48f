#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "pacmc/trial_engine.hpp"

namespace pacmc {

/// Observable record of one subject execution.
struct ExecutionRecord {
  int exit_code = 0;
  bool timed_out = false;
  double wall_ms = 0.0;
  std::string output;  // stdout and stderr, merged
};

/// A named binary property evaluated over one execution's observable record.
struct PropertyObserver {
  enum class Rule { kExitCodeZero, kOutputMatches, kLatencyBelow, kValueThreshold };

  std::string name;
  Rule rule = Rule::kExitCodeZero;
  std::string pattern;       // kOutputMatches: ECMAScript regex, searched
  double threshold_ms = 0;   // kLatencyBelow
  std::string channel;       // kValueThreshold: "<channel>=<value>" or "<channel>: <value>"
  double bound = 0;          // kValueThreshold: holds iff last value <= bound

  static PropertyObserver exit_code_zero();
  static PropertyObserver output_matches(std::string name, std::string regex);
  static PropertyObserver latency_below(double ms);
  static PropertyObserver value_threshold(std::string channel, double bound);
};

/// Pure evaluation of an observer over a record. Throws InfrastructureError
/// via the caller when a value channel is absent.
bool evaluate_observer(const PropertyObserver& obs, const ExecutionRecord& record);

/// Ground-truth synthetic source: the single property "event" holds with
/// probability mu, driven by the per-trial seed.
std::unique_ptr<TrialSource> bernoulli_source(double mu);

enum class InputKind { kNone, kU32, kU64 };

struct SubprocessSpec {
  /// Shell command. A "{input}" placeholder is replaced by the generated
  /// input; without a placeholder the input is written to stdin.
  std::string command_template;
  InputKind input = InputKind::kNone;
  std::vector<PropertyObserver> observers;
  /// Per-trial wall-clock budget. A timeout is an infrastructure error
  /// unless a latency observer claims it as a deadline violation.
  double timeout_ms = 10'000.0;
};

/// One trial = one process execution on a generated input; outcomes are the
/// observer evaluations over (exit code, captured output, wall clock).
std::unique_ptr<TrialSource> subprocess_source(SubprocessSpec spec);

/// Replay of recorded outcomes. File format: one JSON object per line,
/// {"t": <strictly increasing index>, "props": {"<name>": bool, ...}},
/// with a constant property set across the file.
std::unique_ptr<TrialSource> trace_source(const std::string& path);

/// Write a trace file from per-trial outcomes (bit-exact round-trip with the
/// replayer).
void write_trace(const std::string& path, const std::vector<std::string>& properties,
                 const std::vector<std::vector<bool>>& rows);

}  // namespace pacmc
