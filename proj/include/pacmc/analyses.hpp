#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pacmc/trial_engine.hpp"
#include "pacmc/types.hpp"

namespace pacmc {

enum class AnalysisMethod { kVerify, kQuantifyTheory, kQuantifyPractice, kPatchVerify };

const char* to_string(AnalysisMethod method);

struct AnalysisOptions {
  std::uint64_t seed = 0;
  unsigned workers = 1;
  /// How often the stopping interval is recomputed, in trials. 1 keeps the
  /// per-trial check; larger strides trade fidelity for throughput.
  std::uint64_t cp_stride = 1;
  /// First predictor guess from the succession-rule estimate instead of the
  /// maximum-likelihood one.
  bool laplace_first_guess = false;
};

/// Auditable result of an analysis run.
struct AnalysisReport {
  AnalysisMethod method = AnalysisMethod::kVerify;
  double epsilon = 0.0;
  double delta = 0.0;
  std::uint64_t trials_used = 0;
  std::vector<std::pair<std::string, Tally>> tallies;
  std::optional<Estimate> estimate;
  std::optional<ConfidenceInterval> interval;
  std::string guarantee;
  std::uint64_t base_seed = 0;
  std::uint64_t cp_evaluations = 0;
  std::uint64_t cp_stride = 1;

  bool violation_observed = false;
  std::uint64_t violation_trial = 0;
  std::vector<std::string> violated_properties;

  std::string to_json() const;
};

/// Outcome of a patch check.
struct PatchVerdict {
  enum class Outcome { kNullRejected, kViolationObserved };

  std::uint64_t n_bug = 0;
  std::uint64_t x_bug = 0;
  double p_lower = 0.0;
  std::uint64_t n_fix_required = 0;
  std::uint64_t n_fix_executed = 0;
  Outcome outcome = Outcome::kNullRejected;
  double significance = 0.0;
  std::uint64_t base_seed = 0;
  std::uint64_t violation_trial = 0;  // meaningful when a violation was observed

  std::string to_json() const;
};

/// Run the residual-risk check: ro3_sample_size(params) trials; exit on the
/// first trial violating any property, otherwise return the succession-rule
/// estimate with the [1-epsilon, 1] guarantee per property. The trial count
/// is a function of (epsilon, delta) only, never of the property count.
AnalysisReport verify(const TrialSource& source, const ApproximationParams& params,
                      const AnalysisOptions& opts = {});

/// Sequential estimation bounded by the Hoeffding count, stopping early once
/// the exact interval radius reaches epsilon.
AnalysisReport quantify_theory(const TrialSource& source, const std::string& property,
                               const ApproximationParams& params,
                               const AnalysisOptions& opts = {});

/// Estimation with few interval computations: a rule-of-three phase, then
/// predicted batches until the exact interval radius reaches epsilon, hard
/// capped at the Hoeffding count.
AnalysisReport quantify_practice(const TrialSource& source, const std::string& property,
                                 const ApproximationParams& params,
                                 const AnalysisOptions& opts = {});

/// Patch check: from the buggy program's tally, derive the exposure
/// probability's exact lower confidence limit p_L at level 1-delta, run
/// ceil(log(delta)/log(1-p_L)) trials of the fixed program, and reject the
/// null (no improvement) iff all of them succeed.
PatchVerdict patch_verify(const TrialSource& fix_source, const std::string& property,
                          double delta, const Tally& bug_tally,
                          const AnalysisOptions& opts = {});

}  // namespace pacmc
