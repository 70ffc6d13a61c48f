#pragma once

#include <cstdint>

#include "pacmc/errors.hpp"

namespace pacmc {

/// Sufficient statistic of a repeated binary observation: n trials, x of
/// which the property held.
struct Tally {
  std::uint64_t n = 0;
  std::uint64_t x = 0;

  Tally() = default;
  Tally(std::uint64_t n_, std::uint64_t x_) : n(n_), x(x_) {
    if (x > n) throw ParameterError("tally: success count exceeds trial count");
  }
};

/// Merge two tallies. Forms a commutative monoid with identity (0,0).
Tally merge_tallies(const Tally& a, const Tally& b);

/// Accuracy epsilon and confidence-complement delta, both strictly in (0,1).
struct ApproximationParams {
  double epsilon;
  double delta;

  ApproximationParams(double eps, double del) : epsilon(eps), delta(del) {
    if (!(eps > 0.0 && eps < 1.0)) throw ParameterError("epsilon must lie in (0,1)");
    if (!(del > 0.0 && del < 1.0)) throw ParameterError("delta must lie in (0,1)");
  }
};

enum class EstimateKind { kMle, kLaplace };

struct Estimate {
  double value = 0.0;
  EstimateKind kind = EstimateKind::kMle;
};

enum class IntervalMethod { kClopperPearson, kWald, kWilson, kRuleOfThree };

struct ConfidenceInterval {
  double lower = 0.0;
  double upper = 1.0;
  double level = 0.0;  // nominal coverage 1 - delta
  IntervalMethod method = IntervalMethod::kClopperPearson;
};

const char* to_string(EstimateKind kind);
const char* to_string(IntervalMethod method);

}  // namespace pacmc
