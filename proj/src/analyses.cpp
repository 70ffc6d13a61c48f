#include "pacmc/analyses.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "pacmc/binomial_stats.hpp"
#include "pacmc/version.hpp"

namespace pacmc {

namespace {

std::size_t property_index(const TrialSource& source, const std::string& property) {
  const auto& names = source.property_names();
  const auto it = std::find(names.begin(), names.end(), property);
  if (it == names.end()) throw ParameterError("source does not expose property: " + property);
  return static_cast<std::size_t>(it - names.begin());
}

std::string format_number(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

void fill_tallies(AnalysisReport& report, const RunLedger& ledger) {
  report.tallies.clear();
  for (std::size_t p = 0; p < ledger.properties.size(); ++p) {
    report.tallies.emplace_back(ledger.properties[p], ledger.tallies[p]);
  }
}

nlohmann::json interval_json(const ConfidenceInterval& ci) {
  nlohmann::json j;
  j["lower"] = ci.lower;
  j["upper"] = ci.upper;
  j["level"] = ci.level;
  j["method"] = to_string(ci.method);
  return j;
}

EngineConfig engine_config(const AnalysisOptions& opts, std::uint64_t batch) {
  EngineConfig config;
  config.workers = opts.workers;
  config.batch = batch;
  return config;
}

}  // namespace

const char* to_string(AnalysisMethod method) {
  switch (method) {
    case AnalysisMethod::kVerify: return "verify";
    case AnalysisMethod::kQuantifyTheory: return "quantify_theory";
    case AnalysisMethod::kQuantifyPractice: return "quantify_practice";
    case AnalysisMethod::kPatchVerify: return "patch_verify";
  }
  return "unknown";
}

std::string AnalysisReport::to_json() const {
  nlohmann::json j;
  j["tool"] = {{"name", kToolName}, {"version", kToolVersion}};
  j["report_version"] = 1;
  j["method"] = to_string(method);
  j["params"] = {{"epsilon", epsilon}, {"delta", delta}};
  j["seed"] = base_seed;
  j["trials_used"] = trials_used;
  nlohmann::json tj = nlohmann::json::object();
  for (const auto& [name, tally] : tallies) {
    tj[name] = {{"n", tally.n}, {"x", tally.x}};
  }
  j["tallies"] = tj;
  if (estimate) {
    j["estimate"] = {{"value", estimate->value}, {"kind", to_string(estimate->kind)}};
  } else {
    j["estimate"] = nullptr;
  }
  j["interval"] = interval ? interval_json(*interval) : nlohmann::json(nullptr);
  j["guarantee"] = guarantee;
  j["cp_evaluations"] = cp_evaluations;
  j["cp_stride"] = cp_stride;
  if (violation_observed) {
    j["violation"] = {{"trial", violation_trial}, {"properties", violated_properties}};
  } else {
    j["violation"] = nullptr;
  }
  return j.dump(2);
}

std::string PatchVerdict::to_json() const {
  nlohmann::json j;
  j["tool"] = {{"name", kToolName}, {"version", kToolVersion}};
  j["report_version"] = 1;
  j["method"] = "patch_verify";
  j["n_bug"] = n_bug;
  j["x_bug"] = x_bug;
  j["p_lower"] = p_lower;
  j["n_fix_required"] = n_fix_required;
  j["n_fix_executed"] = n_fix_executed;
  j["significance"] = significance;
  j["seed"] = base_seed;
  j["outcome"] = outcome == Outcome::kNullRejected ? "null_rejected" : "violation_observed";
  if (outcome == Outcome::kViolationObserved) j["violation_trial"] = violation_trial;
  return j.dump(2);
}

AnalysisReport verify(const TrialSource& source, const ApproximationParams& params,
                      const AnalysisOptions& opts) {
  if (source.property_names().empty()) {
    throw ParameterError("verify: the source exposes no properties");
  }
  const std::uint64_t n = ro3_sample_size(params);

  AnalysisReport report;
  report.method = AnalysisMethod::kVerify;
  report.epsilon = params.epsilon;
  report.delta = params.delta;
  report.base_seed = opts.seed;
  report.cp_stride = 1;

  const auto stop = [](const RunLedger& ledger) { return !ledger.violations.empty(); };
  const RunLedger ledger = run_trials(source, n, opts.seed, engine_config(opts, 1), stop);

  report.trials_used = ledger.executed;
  fill_tallies(report, ledger);

  if (!ledger.violations.empty()) {
    report.violation_observed = true;
    report.violation_trial = ledger.violations.front().first;
    for (const auto& [trial, prop] : ledger.violations) {
      if (trial == report.violation_trial) {
        report.violated_properties.push_back(ledger.properties[prop]);
      }
    }
    std::ostringstream os;
    os << "Violation observed at trial " << report.violation_trial << " for:";
    for (const auto& p : report.violated_properties) os << ' ' << p;
    report.guarantee = os.str();
    return report;
  }

  report.estimate = laplace_estimate(n);
  report.interval = ConfidenceInterval{1.0 - params.epsilon, 1.0, 1.0 - params.delta,
                                       IntervalMethod::kRuleOfThree};
  std::ostringstream os;
  os << "Every checked property held in all " << n
     << " trials; its probability of holding is estimated at "
     << format_number(report.estimate->value) << " and lies in ["
     << format_number(1.0 - params.epsilon) << ", 1] with probability at least "
     << format_number(1.0 - params.delta) << " (epsilon=" << format_number(params.epsilon)
     << ", delta=" << format_number(params.delta) << ").";
  report.guarantee = os.str();
  return report;
}

namespace {

AnalysisReport make_quantify_report(AnalysisMethod method, const ApproximationParams& params,
                                    const AnalysisOptions& opts, const RunLedger& ledger,
                                    std::size_t prop, std::uint64_t cp_evaluations) {
  AnalysisReport report;
  report.method = method;
  report.epsilon = params.epsilon;
  report.delta = params.delta;
  report.base_seed = opts.seed;
  report.cp_stride = opts.cp_stride;
  report.cp_evaluations = cp_evaluations;
  report.trials_used = ledger.executed;
  fill_tallies(report, ledger);

  const Tally& tally = ledger.tallies[prop];
  report.estimate = mle_estimate(tally);
  report.interval = clopper_pearson(tally, params.delta);
  std::ostringstream os;
  os << "The probability that '" << ledger.properties[prop]
     << "' holds is estimated at " << format_number(report.estimate->value)
     << " and lies within " << format_number(report.estimate->value) << " +/- "
     << format_number(params.epsilon) << " with probability at least "
     << format_number(1.0 - params.delta) << " (epsilon=" << format_number(params.epsilon)
     << ", delta=" << format_number(params.delta) << ").";
  report.guarantee = os.str();
  return report;
}

}  // namespace

AnalysisReport quantify_theory(const TrialSource& source, const std::string& property,
                               const ApproximationParams& params, const AnalysisOptions& opts) {
  const std::size_t prop = property_index(source, property);
  const std::uint64_t cap = hoeffding_sample_size(params);
  const std::uint64_t stride = std::max<std::uint64_t>(1, opts.cp_stride);

  std::uint64_t cp_evaluations = 0;
  const auto stop = [&](const RunLedger& ledger) {
    if (ledger.tallies[prop].n == 0) return false;
    ++cp_evaluations;
    const ConfidenceInterval ci = clopper_pearson(ledger.tallies[prop], params.delta);
    return interval_radius(ci) <= params.epsilon;
  };
  const RunLedger ledger = run_trials(source, cap, opts.seed, engine_config(opts, stride), stop);
  return make_quantify_report(AnalysisMethod::kQuantifyTheory, params, opts, ledger, prop,
                              cp_evaluations);
}

AnalysisReport quantify_practice(const TrialSource& source, const std::string& property,
                                 const ApproximationParams& params, const AnalysisOptions& opts) {
  const std::size_t prop = property_index(source, property);
  const std::uint64_t phase1 = ro3_sample_size(params);
  const std::uint64_t cap = std::max(hoeffding_sample_size(params), phase1);

  RunLedger ledger = run_trials(source, phase1, opts.seed, engine_config(opts, 64));
  std::uint64_t cp_evaluations = 0;

  Tally tally = ledger.tallies[prop];
  if (tally.x == 0 || tally.x == tally.n) {
    // degenerate phase-1 estimate: the rule-of-three count already buys the
    // requested guarantee
    AnalysisReport report;
    report.method = AnalysisMethod::kQuantifyPractice;
    report.epsilon = params.epsilon;
    report.delta = params.delta;
    report.base_seed = opts.seed;
    report.cp_stride = opts.cp_stride;
    report.cp_evaluations = 0;
    report.trials_used = ledger.executed;
    fill_tallies(report, ledger);
    const bool all_held = tally.x == tally.n;
    const double laplace = laplace_estimate(tally.n).value;
    report.estimate = Estimate{all_held ? laplace : 1.0 - laplace, EstimateKind::kLaplace};
    report.interval = all_held
                          ? ConfidenceInterval{1.0 - params.epsilon, 1.0, 1.0 - params.delta,
                                               IntervalMethod::kRuleOfThree}
                          : ConfidenceInterval{0.0, params.epsilon, 1.0 - params.delta,
                                               IntervalMethod::kRuleOfThree};
    std::ostringstream os;
    os << "The probability that '" << property << "' holds is estimated at "
       << format_number(report.estimate->value) << " and lies in ["
       << format_number(report.interval->lower) << ", " << format_number(report.interval->upper)
       << "] with probability at least " << format_number(1.0 - params.delta)
       << " (epsilon=" << format_number(params.epsilon)
       << ", delta=" << format_number(params.delta) << ").";
    report.guarantee = os.str();
    return report;
  }

  // Predictor loop: guess the total demand from the current estimate, run
  // that many more trials, then check the exact interval. A hard cap at the
  // Hoeffding count guarantees termination with the same (epsilon, delta).
  bool first_guess = true;
  for (;;) {
    tally = ledger.tallies[prop];
    // optionally seed the first prediction with the succession-rule
    // estimate; later rounds always use the improved proportion
    const double p0 = opts.laplace_first_guess && first_guess
                          ? (static_cast<double>(tally.x) + 1.0) /
                                (static_cast<double>(tally.n) + 2.0)
                          : static_cast<double>(tally.x) / static_cast<double>(tally.n);
    first_guess = false;
    std::uint64_t next = kp_sample_size(p0, params);
    next = std::min(next, cap - ledger.executed);
    if (next > 0) {
      ledger = extend_run(std::move(ledger), source, engine_config(opts, 64),
                          ledger.executed + next);
    }
    ++cp_evaluations;
    const ConfidenceInterval ci = clopper_pearson(ledger.tallies[prop], params.delta);
    if (interval_radius(ci) <= params.epsilon) break;
    if (ledger.executed >= cap) break;
  }

  return make_quantify_report(AnalysisMethod::kQuantifyPractice, params, opts, ledger, prop,
                              cp_evaluations);
}

PatchVerdict patch_verify(const TrialSource& fix_source, const std::string& property,
                          double delta, const Tally& bug_tally, const AnalysisOptions& opts) {
  if (!(delta > 0.0 && delta < 1.0)) throw ParameterError("delta must lie in (0,1)");
  if (bug_tally.x == 0) {
    throw CannotVerifyError(
        "bug never observed; the exposure lower limit is 0 and no finite trial count can "
        "separate the intervals");
  }
  const std::size_t prop = property_index(fix_source, property);

  const ConfidenceInterval bug_ci = clopper_pearson(bug_tally, delta);
  const double p_lower = bug_ci.lower;
  const double raw = std::log(delta) / std::log1p(-p_lower);
  if (!(raw < 9.2e18)) throw OverflowError("patch_verify: required count overflows");
  const std::uint64_t n_fix = static_cast<std::uint64_t>(std::ceil(raw));

  const auto stop = [&](const RunLedger& ledger) {
    return ledger.tallies[prop].x != ledger.tallies[prop].n;
  };
  const RunLedger ledger =
      run_trials(fix_source, n_fix, opts.seed, engine_config(opts, 1), stop);

  PatchVerdict verdict;
  verdict.n_bug = bug_tally.n;
  verdict.x_bug = bug_tally.x;
  verdict.p_lower = p_lower;
  verdict.n_fix_required = n_fix;
  verdict.n_fix_executed = ledger.executed;
  verdict.significance = delta;
  verdict.base_seed = opts.seed;
  if (ledger.tallies[prop].x == ledger.tallies[prop].n && ledger.executed == n_fix) {
    verdict.outcome = PatchVerdict::Outcome::kNullRejected;
  } else {
    verdict.outcome = PatchVerdict::Outcome::kViolationObserved;
    verdict.violation_trial = ledger.violations.front().first;
  }
  return verdict;
}

}  // namespace pacmc
