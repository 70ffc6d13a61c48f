#include "pacmc/binomial_stats.hpp"

#include <algorithm>
#include <cmath>

#include "pacmc/special_functions.hpp"

namespace pacmc {

namespace {

constexpr double kCountBudget = 9.2e18;  // stays below 2^63

void require_unit_open(double v, const char* what) {
  if (!(v > 0.0 && v < 1.0)) throw ParameterError(std::string(what) + " must lie in (0,1)");
}

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

// Exact binomial tail sums by multiplicative recurrence. Within the brackets
// used below the mode lies on the far side of x, so the terms decay
// geometrically and only O(sqrt(x)) of them contribute.
double tail_at_least(std::uint64_t n, std::uint64_t x, double p) {  // P(X >= x)
  double term = std::exp(log_binomial_pmf(n, x, p));
  double acc = term;
  const double odds = p / (1.0 - p);
  for (std::uint64_t k = x; k < n; ++k) {
    term *= odds * static_cast<double>(n - k) / static_cast<double>(k + 1);
    acc += term;
    if (term <= acc * 1e-18) break;
  }
  return acc;
}

double tail_at_most(std::uint64_t n, std::uint64_t x, double p) {  // P(X <= x)
  double term = std::exp(log_binomial_pmf(n, x, p));
  double acc = term;
  const double odds = p / (1.0 - p);
  for (std::uint64_t k = x; k > 0; --k) {
    term *= static_cast<double>(k) / (odds * static_cast<double>(n - k + 1));
    acc += term;
    if (term <= acc * 1e-18) break;
  }
  return acc;
}

// Lower confidence limit for the skewed regime: solve P(X >= x; p) = target
// on [0, x/n], where the tail sum decays from k = x upward.
double lower_limit_by_tail_sums(std::uint64_t n, std::uint64_t x, double target) {
  double lo = 0.0;
  double hi = static_cast<double>(x) / static_cast<double>(n);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (tail_at_least(n, x, mid) < target) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo <= 1e-16 * hi) break;
  }
  return 0.5 * (lo + hi);
}

// Upper confidence limit for the skewed regime: solve P(X <= x; p) = target
// above x/n, where the tail sum decays from k = x downward.
double upper_limit_by_tail_sums(std::uint64_t n, std::uint64_t x, double target) {
  double lo = static_cast<double>(x) / static_cast<double>(n);
  double hi = std::min(1.0, std::max(lo * 2.0, (static_cast<double>(x) + 10.0) /
                                                   static_cast<double>(n) * 2.0));
  while (hi < 1.0 && tail_at_most(n, x, hi) > target) {
    hi = std::min(1.0, hi * 2.0);
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (tail_at_most(n, x, mid) > target) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo <= 1e-16 * hi) break;
  }
  return 0.5 * (lo + hi);
}

// Above this trial count the incomplete-beta continued fraction converges
// too slowly near the upper limit of a tiny proportion; the exact tail-sum
// route takes over for strongly skewed tallies.
constexpr std::uint64_t kTailSumMinTrials = 500000;
constexpr std::uint64_t kTailSumMaxSuccesses = 20000;

}  // namespace

const char* to_string(EstimateKind kind) {
  switch (kind) {
    case EstimateKind::kMle: return "mle";
    case EstimateKind::kLaplace: return "laplace";
  }
  return "unknown";
}

const char* to_string(IntervalMethod method) {
  switch (method) {
    case IntervalMethod::kClopperPearson: return "clopper_pearson";
    case IntervalMethod::kWald: return "wald";
    case IntervalMethod::kWilson: return "wilson";
    case IntervalMethod::kRuleOfThree: return "rule_of_three";
  }
  return "unknown";
}

Tally merge_tallies(const Tally& a, const Tally& b) {
  const std::uint64_t n = a.n + b.n;
  const std::uint64_t x = a.x + b.x;
  if (n < a.n || x < a.x) throw OverflowError("merge_tallies: count overflow");
  return Tally(n, x);
}

Estimate mle_estimate(const Tally& t) {
  if (t.n == 0) throw ParameterError("mle_estimate: undefined for an empty tally");
  return {static_cast<double>(t.x) / static_cast<double>(t.n), EstimateKind::kMle};
}

Estimate laplace_estimate(std::uint64_t n) {
  const double nd = static_cast<double>(n);
  return {(nd + 1.0) / (nd + 2.0), EstimateKind::kLaplace};
}

std::uint64_t ro3_sample_size(const ApproximationParams& params) {
  const double ratio = std::log(params.delta) / std::log1p(-params.epsilon);
  if (!(ratio < kCountBudget)) {
    throw OverflowError("ro3_sample_size: count exceeds the 64-bit trial budget");
  }
  return static_cast<std::uint64_t>(std::ceil(ratio));
}

double ro3_accuracy(std::uint64_t n, double delta) {
  if (n == 0) throw ParameterError("ro3_accuracy: n must be at least 1");
  require_unit_open(delta, "delta");
  return -std::expm1(std::log(delta) / static_cast<double>(n));
}

double ro3_violation_bound(std::uint64_t n, double epsilon) {
  require_unit_open(epsilon, "epsilon");
  return std::exp(static_cast<double>(n) * std::log1p(-epsilon));
}

double hoeffding_violation_bound(std::uint64_t n, double epsilon) {
  if (!(epsilon > 0.0)) throw ParameterError("epsilon must be positive");
  return std::min(1.0, 2.0 * std::exp(-2.0 * static_cast<double>(n) * epsilon * epsilon));
}

std::uint64_t hoeffding_sample_size(const ApproximationParams& params) {
  const double raw = std::log(2.0 / params.delta) / (2.0 * params.epsilon * params.epsilon);
  if (!(raw < kCountBudget)) {
    throw OverflowError("hoeffding_sample_size: count exceeds the 64-bit trial budget");
  }
  return static_cast<std::uint64_t>(std::ceil(raw));
}

double hoeffding_accuracy(std::uint64_t n, double delta) {
  if (n == 0) throw ParameterError("hoeffding_accuracy: n must be at least 1");
  require_unit_open(delta, "delta");
  return std::sqrt(std::log(2.0 / delta) / (2.0 * static_cast<double>(n)));
}

ConfidenceInterval clopper_pearson(const Tally& t, double delta) {
  if (t.n == 0) throw ParameterError("clopper_pearson: undefined for an empty tally");
  require_unit_open(delta, "delta");
  const double half = delta / 2.0;
  const double nd = static_cast<double>(t.n);

  if (t.n >= kTailSumMinTrials && t.x > 0 && t.x <= kTailSumMaxSuccesses) {
    return {lower_limit_by_tail_sums(t.n, t.x, half),
            upper_limit_by_tail_sums(t.n, t.x, half), 1.0 - delta,
            IntervalMethod::kClopperPearson};
  }
  if (t.n >= kTailSumMinTrials && t.x < t.n && t.n - t.x <= kTailSumMaxSuccesses) {
    // mirrored tally: exchange successes and failures, then flip
    const std::uint64_t flipped = t.n - t.x;
    const double lo = lower_limit_by_tail_sums(t.n, flipped, half);
    const double hi = upper_limit_by_tail_sums(t.n, flipped, half);
    return {1.0 - hi, 1.0 - lo, 1.0 - delta, IntervalMethod::kClopperPearson};
  }

  double lower = 0.0;
  double upper = 1.0;
  if (t.x > 0) {
    lower = (t.x == t.n)
                ? std::exp(std::log(half) / nd)
                : beta_quantile(static_cast<double>(t.x),
                                static_cast<double>(t.n - t.x) + 1.0, half);
  }
  if (t.x < t.n) {
    upper = (t.x == 0)
                ? -std::expm1(std::log(half) / nd)
                : beta_quantile(static_cast<double>(t.x) + 1.0,
                                static_cast<double>(t.n - t.x), 1.0 - half);
  }
  return {lower, upper, 1.0 - delta, IntervalMethod::kClopperPearson};
}

double interval_radius(const ConfidenceInterval& ci) {
  return (ci.upper - ci.lower) / 2.0;
}

ConfidenceInterval wald_interval(const Tally& t, double delta) {
  if (t.n == 0) throw ParameterError("wald_interval: undefined for an empty tally");
  require_unit_open(delta, "delta");
  const double nd = static_cast<double>(t.n);
  const double mu = static_cast<double>(t.x) / nd;
  const double z = normal_quantile(1.0 - delta / 2.0);
  const double half = z * std::sqrt(mu * (1.0 - mu) / nd);
  return {clamp01(mu - half), clamp01(mu + half), 1.0 - delta, IntervalMethod::kWald};
}

ConfidenceInterval wilson_interval(const Tally& t, double delta) {
  if (t.n == 0) throw ParameterError("wilson_interval: undefined for an empty tally");
  require_unit_open(delta, "delta");
  const double nd = static_cast<double>(t.n);
  const double mu = static_cast<double>(t.x) / nd;
  const double z = normal_quantile(1.0 - delta / 2.0);
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nd;
  const double center = (mu + z2 / (2.0 * nd)) / denom;
  const double half = z * std::sqrt(mu * (1.0 - mu) / nd + z2 / (4.0 * nd * nd)) / denom;
  // at the degenerate tallies the relocated bound equals the boundary
  // analytically; rounding would otherwise leave a stray ulp
  const double lower = t.x == 0 ? 0.0 : clamp01(center - half);
  const double upper = t.x == t.n ? 1.0 : clamp01(center + half);
  return {lower, upper, 1.0 - delta, IntervalMethod::kWilson};
}

std::uint64_t kp_sample_size(double p0, const ApproximationParams& params) {
  if (!(p0 > 0.0 && p0 < 1.0)) {
    throw ParameterError("kp_sample_size: p0 must lie strictly in (0,1)");
  }
  const double z = normal_quantile(1.0 - params.delta / 2.0);
  const double q0 = 1.0 - p0;
  const double eps = params.epsilon;
  const double raw = (z * z * p0 * q0 +
                      z * std::sqrt(z * z * p0 * p0 * q0 * q0 + 2.0 * eps * p0 * q0) + eps) /
                     (2.0 * eps * eps);
  if (!(raw < kCountBudget)) {
    throw OverflowError("kp_sample_size: count exceeds the 64-bit trial budget");
  }
  return static_cast<std::uint64_t>(std::ceil(raw));
}

double pac_error_bound(std::uint64_t hypothesis_count, double delta, std::uint64_t n) {
  if (hypothesis_count == 0) throw ParameterError("pac_error_bound: hypothesis class is empty");
  if (n == 0) throw ParameterError("pac_error_bound: n must be at least 1");
  require_unit_open(delta, "delta");
  return (std::log(static_cast<double>(hypothesis_count)) - std::log(delta)) /
         static_cast<double>(n);
}

}  // namespace pacmc
