#include "pacmc/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "pacmc/analyses.hpp"
#include "pacmc/binomial_stats.hpp"
#include "pacmc/seed.hpp"
#include "pacmc/special_functions.hpp"
#include "pacmc/subjects.hpp"

namespace pacmc {

double fisher_exact_one_sided(const Tally& bug, const Tally& fix) {
  const std::uint64_t total = bug.n + fix.n;
  const std::uint64_t marked = bug.x + fix.x;
  if (total == 0) return 1.0;
  // P(fix-side successes <= fix.x) under the hypergeometric null, summed in
  // log space from the observed cell downward
  const std::uint64_t j_min = marked > bug.n ? marked - bug.n : 0;
  if (fix.x < j_min) throw ParameterError("fisher_exact_one_sided: impossible table");
  const double log_denom = log_choose(total, fix.n);
  double acc = -std::numeric_limits<double>::infinity();
  for (std::uint64_t j = j_min; j <= fix.x; ++j) {
    const double term =
        log_choose(marked, j) + log_choose(total - marked, fix.n - j) - log_denom;
    if (term > acc) {
      acc = term + std::log1p(std::exp(acc - term));
    } else {
      acc = acc + std::log1p(std::exp(term - acc));
    }
  }
  return std::min(1.0, std::exp(acc));
}

MannWhitneyResult mann_whitney_u_counts(std::uint64_t a_zeros, std::uint64_t a_ones,
                                        std::uint64_t b_zeros, std::uint64_t b_ones) {
  const double na = static_cast<double>(a_zeros + a_ones);
  const double nb = static_cast<double>(b_zeros + b_ones);
  if (na == 0.0 || nb == 0.0) throw ParameterError("mann_whitney_u: empty sample");
  MannWhitneyResult res;
  res.u = static_cast<double>(a_ones) * static_cast<double>(b_zeros) +
          0.5 * (static_cast<double>(a_ones) * static_cast<double>(b_ones) +
                 static_cast<double>(a_zeros) * static_cast<double>(b_zeros));
  const double mean = na * nb / 2.0;
  const double t0 = static_cast<double>(a_zeros + b_zeros);
  const double t1 = static_cast<double>(a_ones + b_ones);
  const double total = na + nb;
  const double tie_term = (t0 * t0 * t0 - t0 + t1 * t1 * t1 - t1) / (total * (total - 1.0));
  const double variance = na * nb / 12.0 * ((total + 1.0) - tie_term);
  if (!(variance > 0.0)) {
    res.degenerate = true;
    res.z = 0.0;
    res.p = 1.0;
    return res;
  }
  res.z = (res.u - mean) / std::sqrt(variance);
  res.p = std::erfc(std::fabs(res.z) / std::sqrt(2.0));
  return res;
}

MannWhitneyResult mann_whitney_u(const std::vector<std::uint8_t>& sample_a,
                                 const std::vector<std::uint8_t>& sample_b) {
  std::uint64_t a1 = 0;
  std::uint64_t b1 = 0;
  for (auto v : sample_a) a1 += v != 0;
  for (auto v : sample_b) b1 += v != 0;
  return mann_whitney_u_counts(sample_a.size() - a1, a1, sample_b.size() - b1, b1);
}

std::uint64_t sample_binomial(std::uint64_t n, double mu, std::uint64_t seed) {
  if (!(mu >= 0.0 && mu <= 1.0)) throw ParameterError("sample_binomial: mu outside [0,1]");
  if (n == 0 || mu == 0.0) return 0;
  if (mu == 1.0) return n;
  const double u = uniform01(mix64(seed ^ 0xB10Cu));

  const double nd = static_cast<double>(n);
  std::uint64_t mode = static_cast<std::uint64_t>((nd + 1.0) * mu);
  if (mode > n) mode = n;

  const double odds = mu / (1.0 - mu);
  double acc = std::exp(log_binomial_pmf(n, mode, mu));
  if (u < acc) return mode;

  // expand outward from the mode, always taking the heavier side next
  std::uint64_t lo = mode;
  std::uint64_t hi = mode;
  double pmf_lo = acc;
  double pmf_hi = acc;
  double next_lo = lo > 0 ? pmf_lo * static_cast<double>(lo) / (odds * (nd - (lo - 1))) : 0.0;
  double next_hi = hi < n ? pmf_hi * odds * (nd - hi) / static_cast<double>(hi + 1) : 0.0;
  while (lo > 0 || hi < n) {
    if (next_lo >= next_hi && lo > 0) {
      pmf_lo = next_lo;
      --lo;
      acc += pmf_lo;
      if (u < acc) return lo;
      next_lo = lo > 0 ? pmf_lo * static_cast<double>(lo) / (odds * (nd - (lo - 1))) : 0.0;
    } else if (hi < n) {
      pmf_hi = next_hi;
      ++hi;
      acc += pmf_hi;
      if (u < acc) return hi;
      next_hi = hi < n ? pmf_hi * odds * (nd - hi) / static_cast<double>(hi + 1) : 0.0;
    } else {
      break;
    }
    // both tails numerically exhausted
    if (next_lo <= 0.0 && next_hi <= 0.0) break;
  }
  return mode;
}

namespace {

ConfidenceInterval interval_for(IntervalMethod method, const Tally& t, double delta) {
  switch (method) {
    case IntervalMethod::kClopperPearson: return clopper_pearson(t, delta);
    case IntervalMethod::kWald: return wald_interval(t, delta);
    case IntervalMethod::kWilson: return wilson_interval(t, delta);
    case IntervalMethod::kRuleOfThree: break;
  }
  throw ParameterError("unsupported interval method for coverage study");
}

}  // namespace

std::vector<CoverageRow> rq1_coverage(const std::vector<double>& mu_grid, std::uint64_t n,
                                      std::uint64_t reps, double delta, std::uint64_t seed) {
  static const IntervalMethod kMethods[] = {IntervalMethod::kClopperPearson,
                                            IntervalMethod::kWald, IntervalMethod::kWilson};
  std::vector<CoverageRow> rows;
  std::uint64_t cell = 0;
  for (double mu : mu_grid) {
    std::vector<std::uint64_t> draws(reps);
    for (std::uint64_t r = 0; r < reps; ++r) {
      draws[r] = sample_binomial(n, mu, mix64(seed + (++cell) * kSeedStride) + r * 0x9E37ULL);
    }
    // one cell per method over the same draws
    for (IntervalMethod method : kMethods) {
      std::uint64_t covered = 0;
      for (std::uint64_t r = 0; r < reps; ++r) {
        const ConfidenceInterval ci = interval_for(method, Tally(n, draws[r]), delta);
        covered += (ci.lower <= mu && mu <= ci.upper);
      }
      CoverageRow row;
      row.seed = seed;
      row.mu = mu;
      row.n = n;
      row.reps = reps;
      row.method = method;
      row.observed_coverage = static_cast<double>(covered) / static_cast<double>(reps);
      rows.push_back(row);
    }
  }
  return rows;
}

double exact_coverage(std::uint64_t n, double mu, double delta, IntervalMethod method) {
  if (n == 0) throw ParameterError("exact_coverage: n must be at least 1");
  if (!(mu > 0.0 && mu < 1.0)) throw ParameterError("exact_coverage: mu must lie in (0,1)");
  double coverage = 0.0;
  for (std::uint64_t x = 0; x <= n; ++x) {
    const ConfidenceInterval ci = interval_for(method, Tally(n, x), delta);
    if (ci.lower <= mu && mu <= ci.upper) {
      coverage += std::exp(log_binomial_pmf(n, x, mu));
    }
  }
  return coverage;
}

std::vector<double> exact_coverage_grid(std::uint64_t n, double delta, IntervalMethod method,
                                        const std::vector<double>& mu_grid) {
  if (n == 0) throw ParameterError("exact_coverage_grid: n must be at least 1");
  std::vector<double> lower(n + 1);
  std::vector<double> upper(n + 1);
  for (std::uint64_t x = 0; x <= n; ++x) {
    const ConfidenceInterval ci = interval_for(method, Tally(n, x), delta);
    lower[x] = ci.lower;
    upper[x] = ci.upper;
  }
  std::vector<double> coverage;
  coverage.reserve(mu_grid.size());
  for (double mu : mu_grid) {
    double c = 0.0;
    for (std::uint64_t x = 0; x <= n; ++x) {
      if (lower[x] <= mu && mu <= upper[x]) c += std::exp(log_binomial_pmf(n, x, mu));
    }
    coverage.push_back(c);
  }
  return coverage;
}

std::vector<EfficiencyRow> rq2_efficiency(const std::vector<double>& mu_grid,
                                          const std::vector<ApproximationParams>& params_grid,
                                          std::uint64_t reps, std::uint64_t seed) {
  std::vector<EfficiencyRow> rows;
  std::uint64_t cell = 0;
  for (const ApproximationParams& params : params_grid) {
    for (double mu : mu_grid) {
      const auto source = bernoulli_source(mu);
      ++cell;
      for (const char* algorithm : {"theory", "practice"}) {
        double sum_trials = 0.0;
        double sum_cp = 0.0;
        for (std::uint64_t r = 0; r < reps; ++r) {
          AnalysisOptions opts;
          opts.seed = mix64(seed + cell * kSeedStride) + r;
          const AnalysisReport report =
              algorithm == std::string("theory")
                  ? quantify_theory(*source, "event", params, opts)
                  : quantify_practice(*source, "event", params, opts);
          sum_trials += static_cast<double>(report.trials_used);
          sum_cp += static_cast<double>(report.cp_evaluations);
        }
        EfficiencyRow row;
        row.seed = seed;
        row.mu = mu;
        row.epsilon = params.epsilon;
        row.delta = params.delta;
        row.algorithm = algorithm;
        row.reps = reps;
        row.mean_trials = sum_trials / static_cast<double>(reps);
        row.mean_cp_evaluations = sum_cp / static_cast<double>(reps);
        row.ro3_bound = ro3_sample_size(params);
        row.hoeffding_bound = hoeffding_sample_size(params);
        rows.push_back(row);
      }
    }
  }
  return rows;
}

std::vector<ResidualRiskRow> rq4_residual_risk(const std::vector<double>& epsilon_grid,
                                               double delta) {
  std::vector<ResidualRiskRow> rows;
  for (double eps : epsilon_grid) {
    ResidualRiskRow row;
    row.epsilon = eps;
    row.delta = delta;
    row.trials = ro3_sample_size(ApproximationParams(eps, delta));
    rows.push_back(row);
  }
  return rows;
}

namespace {

// Smallest all-success count at which the one-sided exact test rejects.
std::uint64_t fisher_min_nfix(const Tally& bug, double alpha, std::uint64_t limit) {
  std::uint64_t lo = 1;
  std::uint64_t hi = limit;
  if (fisher_exact_one_sided(bug, Tally(hi, 0)) > alpha) return limit;
  while (lo < hi) {
    const std::uint64_t mid = lo + (hi - lo) / 2;
    if (fisher_exact_one_sided(bug, Tally(mid, 0)) <= alpha) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  return lo;
}

// Smallest all-success count at which the rank-sum test rejects (bug-side
// outcome vector against an all-success fix-side vector; "1" marks a trial
// that exposed the bug).
std::uint64_t mann_whitney_min_nfix(const Tally& bug, double alpha, std::uint64_t limit) {
  const auto p_at = [&](std::uint64_t nfix) {
    return mann_whitney_u_counts(bug.n - bug.x, bug.x, nfix, 0).p;
  };
  std::uint64_t lo = 1;
  std::uint64_t hi = limit;
  if (p_at(hi) > alpha) return limit;
  while (lo < hi) {
    const std::uint64_t mid = lo + (hi - lo) / 2;
    if (p_at(mid) <= alpha) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  return lo;
}

}  // namespace

std::vector<PatchComparisonRow> rq5_patch_comparison(const std::vector<double>& mu_bug_grid,
                                                     std::uint64_t n_bug,
                                                     const std::vector<double>& alpha_grid,
                                                     std::uint64_t reps, std::uint64_t seed) {
  constexpr std::uint64_t kSearchLimit = 1ULL << 40;
  std::vector<PatchComparisonRow> rows;
  std::uint64_t cell = 0;
  for (double mu_bug : mu_bug_grid) {
    for (double alpha : alpha_grid) {
      ++cell;
      double sum_bound = 0.0;
      double sum_fisher = 0.0;
      double sum_mw = 0.0;
      std::uint64_t ordered = 0;
      std::uint64_t used = 0;
      for (std::uint64_t r = 0; r < reps; ++r) {
        const std::uint64_t x_bug =
            sample_binomial(n_bug, mu_bug, mix64(seed + cell * kSeedStride) + r);
        if (x_bug == 0) continue;  // the exact bound is undefined without an exposure
        ++used;
        const Tally bug(n_bug, x_bug);
        const double p_lower = clopper_pearson(bug, alpha).lower;
        const std::uint64_t n_exact =
            static_cast<std::uint64_t>(std::ceil(std::log(alpha) / std::log1p(-p_lower)));
        const std::uint64_t n_fisher = fisher_min_nfix(bug, alpha, kSearchLimit);
        const std::uint64_t n_mw = mann_whitney_min_nfix(bug, alpha, kSearchLimit);
        sum_bound += static_cast<double>(n_exact);
        sum_fisher += static_cast<double>(n_fisher);
        sum_mw += static_cast<double>(n_mw);
        ordered += (n_exact <= n_fisher && n_fisher <= n_mw);
      }
      PatchComparisonRow row;
      row.seed = seed;
      row.mu_bug = mu_bug;
      row.n_bug = n_bug;
      row.alpha = alpha;
      row.reps = used;
      if (used > 0) {
        row.mean_nfix_exact_bound = sum_bound / static_cast<double>(used);
        row.mean_nfix_fisher = sum_fisher / static_cast<double>(used);
        row.mean_nfix_mann_whitney = sum_mw / static_cast<double>(used);
        row.ordering_holds_fraction = static_cast<double>(ordered) / static_cast<double>(used);
      }
      rows.push_back(row);
    }
  }
  return rows;
}

std::vector<Fig1Row> fig1_table(double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw ParameterError("delta must lie in (0,1)");
  // daily production execution volumes of well-known services (2018 figures)
  static const std::pair<const char*, double> kDaily[] = {
      {"OSS-Fuzz", 200.0e9}, {"Netflix", 86.4e9}, {"Youtube", 6.2e9},  {"Google", 5.6e9},
      {"Tinder", 2.0e9},     {"Facebook", 1.5e9}, {"Twitter", 681.7e6}, {"Skype", 253.8e6},
      {"Visa", 150.0e6},     {"Instagram", 71.1e6}};
  std::vector<Fig1Row> rows;
  for (const auto& [name, daily] : kDaily) {
    Fig1Row row;
    row.name = name;
    row.daily_executions = daily;
    const std::uint64_t n = static_cast<std::uint64_t>(daily);
    row.hoeffding_accuracy = hoeffding_accuracy(n, delta);
    row.ro3_accuracy = ro3_accuracy(n, delta);
    rows.push_back(row);
  }
  return rows;
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::ofstream open_csv(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParameterError("cannot open for writing: " + path);
  return out;
}

}  // namespace

void write_csv(const std::string& path, const std::vector<CoverageRow>& rows) {
  auto out = open_csv(path);
  out << "seed,mu,n,reps,method,observed_coverage\n";
  for (const auto& r : rows) {
    out << r.seed << ',' << fmt(r.mu) << ',' << r.n << ',' << r.reps << ','
        << to_string(r.method) << ',' << fmt(r.observed_coverage) << '\n';
  }
}

void write_csv(const std::string& path, const std::vector<EfficiencyRow>& rows) {
  auto out = open_csv(path);
  out << "seed,mu,epsilon,delta,algorithm,reps,mean_trials,mean_cp_evaluations,ro3_bound,"
         "hoeffding_bound\n";
  for (const auto& r : rows) {
    out << r.seed << ',' << fmt(r.mu) << ',' << fmt(r.epsilon) << ',' << fmt(r.delta) << ','
        << r.algorithm << ',' << r.reps << ',' << fmt(r.mean_trials) << ','
        << fmt(r.mean_cp_evaluations) << ',' << r.ro3_bound << ',' << r.hoeffding_bound << '\n';
  }
}

void write_csv(const std::string& path, const std::vector<ResidualRiskRow>& rows) {
  auto out = open_csv(path);
  out << "epsilon,delta,trials\n";
  for (const auto& r : rows) {
    out << fmt(r.epsilon) << ',' << fmt(r.delta) << ',' << r.trials << '\n';
  }
}

void write_csv(const std::string& path, const std::vector<PatchComparisonRow>& rows) {
  auto out = open_csv(path);
  out << "seed,mu_bug,n_bug,alpha,reps,mean_nfix_exact_bound,mean_nfix_fisher,"
         "mean_nfix_mann_whitney,ordering_holds_fraction\n";
  for (const auto& r : rows) {
    out << r.seed << ',' << fmt(r.mu_bug) << ',' << r.n_bug << ',' << fmt(r.alpha) << ','
        << r.reps << ',' << fmt(r.mean_nfix_exact_bound) << ',' << fmt(r.mean_nfix_fisher)
        << ',' << fmt(r.mean_nfix_mann_whitney) << ',' << fmt(r.ordering_holds_fraction)
        << '\n';
  }
}

void write_csv(const std::string& path, const std::vector<Fig1Row>& rows) {
  auto out = open_csv(path);
  out << "name,daily_executions,hoeffding_accuracy,ro3_accuracy\n";
  for (const auto& r : rows) {
    out << r.name << ',' << fmt(r.daily_executions) << ',' << fmt(r.hoeffding_accuracy) << ','
        << fmt(r.ro3_accuracy) << '\n';
  }
}

}  // namespace pacmc
