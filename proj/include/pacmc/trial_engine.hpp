#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "pacmc/types.hpp"

namespace pacmc {

/// One execution's observed property outcomes, aligned with the source's
/// property_names() order.
struct TrialOutcome {
  std::uint64_t trial_index = 0;
  std::vector<bool> holds;
};

/// Abstract producer of trial outcomes. Implementations must tolerate
/// concurrent invocation and make each outcome a pure function of the trial
/// seed, so that a trial is fully identified by (base_seed, index).
class TrialSource {
 public:
  virtual ~TrialSource() = default;
  virtual const std::vector<std::string>& property_names() const = 0;
  virtual TrialOutcome run_trial(std::uint64_t trial_index, std::uint64_t trial_seed) const = 0;
};

/// Packed per-trial outcome sequence for one property, lowest index first.
struct OutcomeBits {
  std::vector<std::uint64_t> words;
  std::uint64_t stored = 0;
  bool truncated = false;

  void resize_bits(std::uint64_t count) { words.assign((count + 63) / 64, 0); }
  void set(std::uint64_t i, bool v) {
    if (v) {
      words[i >> 6] |= (1ULL << (i & 63));
    }
  }
  bool get(std::uint64_t i) const { return (words[i >> 6] >> (i & 63)) & 1ULL; }
};

struct EngineConfig {
  unsigned workers = 1;
  std::uint64_t batch = 64;  // early-stop check granularity, in trials
  bool retain_outcome_bits = false;
  std::uint64_t outcome_bits_cap = 10'000'000;  // per property
};

struct RunLedger {
  std::uint64_t base_seed = 0;
  std::uint64_t requested = 0;
  std::uint64_t executed = 0;
  bool stopped_early = false;
  std::vector<std::string> properties;
  std::vector<Tally> tallies;  // parallel to properties
  std::vector<std::pair<std::uint64_t, std::uint32_t>> violations;  // (trial, property)
  std::vector<OutcomeBits> bits;  // parallel to properties; empty unless retained
  std::uint64_t config_digest = 0;

  const Tally& tally_of(const std::string& property) const;
};

/// Invoked with the cumulative ledger at batch boundaries; return true to
/// stop the run at that boundary.
using StopCallback = std::function<bool(const RunLedger&)>;

/// Execute `count` trials of `source` (or fewer if `stop` fires). The ledger
/// is bit-identical across runs for fixed inputs, and its tallies do not
/// depend on the worker count.
RunLedger run_trials(const TrialSource& source, std::uint64_t count, std::uint64_t base_seed,
                     const EngineConfig& config = {}, const StopCallback& stop = nullptr);

/// Continue a (possibly early-stopped) run in place until `new_count` trials
/// have executed. Because per-trial seeds are index-based, the result equals
/// a single uninterrupted run of `new_count` trials.
RunLedger extend_run(RunLedger ledger, const TrialSource& source, const EngineConfig& config,
                     std::uint64_t new_count, const StopCallback& stop = nullptr);

/// Serialize a (possibly partial) run into a self-describing JSON snapshot.
std::string checkpoint(const RunLedger& ledger);

/// Continue a snapshotted run to its requested trial count. The final ledger
/// is identical to the one an uninterrupted run would have produced. The
/// engine configuration must match the one the snapshot was taken under.
RunLedger resume(const std::string& snapshot, const TrialSource& source,
                 const EngineConfig& config = {});

/// Serialize a ledger to JSON (same schema as checkpoint).
std::string ledger_to_json(const RunLedger& ledger);

/// Independence diagnostic: strict interior local extrema of a series
/// against their IID moments.
struct IIDDiagnostic {
  std::uint64_t turning_points = 0;
  double expected = 0.0;
  double variance = 0.0;
  double z_statistic = 0.0;
  double two_sided_p = 1.0;
  double tie_fraction = 0.0;
};

/// Turning point test. Counts strict interior local extrema; expected count
/// (2L-4)/3, variance (16L-29)/90. The tie fraction is reported so callers
/// can judge applicability to heavily tied (e.g. binary) data, where the
/// test has low power.
IIDDiagnostic turning_point_test(const std::vector<double>& series);

/// Convenience overload for a packed outcome sequence.
IIDDiagnostic turning_point_test(const OutcomeBits& bits);

}  // namespace pacmc
