#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pacmc/types.hpp"

namespace pacmc {

/// One-sided exact test that the second sample's proportion is lower than
/// the first's: hypergeometric tail of the 2x2 table under equal
/// proportions, summed in log space.
double fisher_exact_one_sided(const Tally& bug, const Tally& fix);

struct MannWhitneyResult {
  double u = 0.0;            // U statistic of the first sample, ties at half credit
  double z = 0.0;            // normal approximation with tie-corrected variance
  double p = 1.0;            // two-sided
  bool degenerate = false;   // all values tied across both samples
};

/// Rank-sum test on binary samples (counts are sufficient).
MannWhitneyResult mann_whitney_u(const std::vector<std::uint8_t>& sample_a,
                                 const std::vector<std::uint8_t>& sample_b);
MannWhitneyResult mann_whitney_u_counts(std::uint64_t a_zeros, std::uint64_t a_ones,
                                        std::uint64_t b_zeros, std::uint64_t b_ones);

/// Exact binomial draw by pmf inversion expanded outward from the mode
/// (log-space pmf, multiplicative recurrence).
std::uint64_t sample_binomial(std::uint64_t n, double mu, std::uint64_t seed);

struct CoverageRow {
  std::uint64_t seed = 0;
  double mu = 0.0;
  std::uint64_t n = 0;
  std::uint64_t reps = 0;
  IntervalMethod method = IntervalMethod::kClopperPearson;
  double observed_coverage = 0.0;
};

/// Sampled interval coverage per (mu, method) cell: draw X ~ Bin(n, mu) per
/// repetition, build the 1-delta interval, record the containment fraction.
std::vector<CoverageRow> rq1_coverage(const std::vector<double>& mu_grid, std::uint64_t n,
                                      std::uint64_t reps, double delta, std::uint64_t seed);

/// Exact coverage by pmf summation (no sampling); practical for n up to a
/// few thousand.
double exact_coverage(std::uint64_t n, double mu, double delta, IntervalMethod method);

/// Exact coverage over a mu grid with the (n+1) intervals computed once.
std::vector<double> exact_coverage_grid(std::uint64_t n, double delta, IntervalMethod method,
                                        const std::vector<double>& mu_grid);

struct EfficiencyRow {
  std::uint64_t seed = 0;
  double mu = 0.0;
  double epsilon = 0.0;
  double delta = 0.0;
  std::string algorithm;  // "theory" or "practice"
  std::uint64_t reps = 0;
  double mean_trials = 0.0;
  double mean_cp_evaluations = 0.0;
  std::uint64_t ro3_bound = 0;
  std::uint64_t hoeffding_bound = 0;
};

/// Mean sequential trial demand of both estimation algorithms per
/// (mu, epsilon, delta) cell, next to the a-priori bounds.
std::vector<EfficiencyRow> rq2_efficiency(const std::vector<double>& mu_grid,
                                          const std::vector<ApproximationParams>& params_grid,
                                          std::uint64_t reps, std::uint64_t seed);

struct ResidualRiskRow {
  double epsilon = 0.0;
  double delta = 0.0;
  std::uint64_t trials = 0;
};

/// Deterministic table of the all-success trial counts over an epsilon grid.
std::vector<ResidualRiskRow> rq4_residual_risk(const std::vector<double>& epsilon_grid,
                                               double delta);

struct PatchComparisonRow {
  std::uint64_t seed = 0;
  double mu_bug = 0.0;
  std::uint64_t n_bug = 0;
  double alpha = 0.0;
  std::uint64_t reps = 0;
  double mean_nfix_exact_bound = 0.0;  // ceil(log(alpha)/log(1-p_L)) per repetition
  double mean_nfix_fisher = 0.0;
  double mean_nfix_mann_whitney = 0.0;
  double ordering_holds_fraction = 0.0;  // exact_bound <= fisher <= mann-whitney
};

/// Minimum all-success trial count at which each method first rejects at
/// level alpha, averaged over seeded repetitions of the bug-side sample.
std::vector<PatchComparisonRow> rq5_patch_comparison(const std::vector<double>& mu_bug_grid,
                                                     std::uint64_t n_bug,
                                                     const std::vector<double>& alpha_grid,
                                                     std::uint64_t reps, std::uint64_t seed);

struct Fig1Row {
  std::string name;
  double daily_executions = 0.0;
  double hoeffding_accuracy = 0.0;
  double ro3_accuracy = 0.0;
};

/// Accuracy bounds bought by one day of production executions of well-known
/// services, at confidence 1-delta.
std::vector<Fig1Row> fig1_table(double delta);

/// CSV writers; floats rendered with 17 significant digits.
void write_csv(const std::string& path, const std::vector<CoverageRow>& rows);
void write_csv(const std::string& path, const std::vector<EfficiencyRow>& rows);
void write_csv(const std::string& path, const std::vector<ResidualRiskRow>& rows);
void write_csv(const std::string& path, const std::vector<PatchComparisonRow>& rows);
void write_csv(const std::string& path, const std::vector<Fig1Row>& rows);

}  // namespace pacmc
