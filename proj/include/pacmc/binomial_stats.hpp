#pragma once

#include <cstdint>

#include "pacmc/types.hpp"

namespace pacmc {

/// Maximum-likelihood estimate x/n. Rejects empty tallies.
Estimate mle_estimate(const Tally& t);

/// Succession-rule point estimate (n+1)/(n+2) after n trials with zero
/// violations.
Estimate laplace_estimate(std::uint64_t n);

/// Trials needed so that an all-success run bounds the violation probability
/// by epsilon with confidence 1-delta: ceil(log(delta) / log(1-epsilon)).
std::uint64_t ro3_sample_size(const ApproximationParams& params);

/// Accuracy bought by n all-success trials at confidence 1-delta:
/// 1 - delta^(1/n), evaluated in a form stable for huge n.
double ro3_accuracy(std::uint64_t n, double delta);

/// (1-epsilon)^n, the probability that n all-success trials mislead by more
/// than epsilon.
double ro3_violation_bound(std::uint64_t n, double epsilon);

/// min(1, 2 exp(-2 n epsilon^2)), the distribution-free deviation bound.
double hoeffding_violation_bound(std::uint64_t n, double epsilon);

/// ceil(log(2/delta) / (2 epsilon^2)).
std::uint64_t hoeffding_sample_size(const ApproximationParams& params);

/// sqrt(log(2/delta) / (2n)).
double hoeffding_accuracy(std::uint64_t n, double delta);

/// Exact equal-tailed binomial interval at level 1-delta, computed through
/// the regularized incomplete beta quantile with closed forms at x = 0 and
/// x = n.
ConfidenceInterval clopper_pearson(const Tally& t, double delta);

/// (upper - lower) / 2.
double interval_radius(const ConfidenceInterval& ci);

/// Normal-approximation interval mu_hat +/- z * sqrt(mu_hat(1-mu_hat)/n),
/// clamped to [0,1]. The variance term uses the estimate.
ConfidenceInterval wald_interval(const Tally& t, double delta);

/// Score interval with relocated center and corrected spread, clamped to
/// [0,1].
ConfidenceInterval wilson_interval(const Tally& t, double delta);

/// Predicted trial count for an exact interval of radius epsilon around an
/// anticipated proportion p0 (Krishnamoorthy-Peng predictor). Rejects
/// p0 in {0,1}; callers must branch to the rule-of-three path there.
std::uint64_t kp_sample_size(double p0, const ApproximationParams& params);

/// Generalization error bound log(|H|/delta) / n for a finite hypothesis
/// class of the given size.
double pac_error_bound(std::uint64_t hypothesis_count, double delta, std::uint64_t n);

}  // namespace pacmc
