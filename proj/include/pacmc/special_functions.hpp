#pragma once

#include <cstdint>

namespace pacmc {

/// ln C(n, k).
double log_choose(std::uint64_t n, std::uint64_t k);

/// ln P(Bin(n, p) = k).
double log_binomial_pmf(std::uint64_t n, std::uint64_t k, double p);

/// Regularized incomplete beta function I_x(a, b), continued-fraction
/// evaluation. Relative accuracy near machine precision for the shape ranges
/// used here.
double regularized_incomplete_beta(double a, double b, double x);

/// Functional inverse of I_x(a, b) in x: bracketed bisection refined by
/// Newton steps on the beta density.
double beta_quantile(double a, double b, double q);

/// Standard normal CDF.
double normal_cdf(double z);

/// Standard normal quantile, rational approximation polished by Halley
/// iteration against the erfc-based CDF.
double normal_quantile(double q);

}  // namespace pacmc
