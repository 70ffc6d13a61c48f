#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "oracles.hpp"
#include "pacmc/binomial_stats.hpp"
#include "pacmc/experiments.hpp"
#include "pacmc/special_functions.hpp"

using namespace pacmc;

TEST_CASE("one-sided exact test on pinned tables") {
  // no evidence at all
  CHECK(fisher_exact_one_sided(Tally(20, 0), Tally(20, 0)) == doctest::Approx(1.0));
  // classic 2x2 with an empty fix column: 15504/658008
  CHECK(fisher_exact_one_sided(Tally(20, 5), Tally(20, 0)) ==
        doctest::Approx(0.023562023562023562).epsilon(1e-12));
}

TEST_CASE("one-sided exact test equals integer enumeration on small tables") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 400; ++i) {
    const unsigned n_bug = 1 + rng() % 40;
    const unsigned n_fix = 1 + rng() % (60 - n_bug);
    const unsigned x_bug = rng() % (n_bug + 1);
    const unsigned x_fix = rng() % (n_fix + 1);
    const double got = fisher_exact_one_sided(Tally(n_bug, x_bug), Tally(n_fix, x_fix));
    const double ref = oracle::fisher_one_sided_exact(n_bug, x_bug, n_fix, x_fix);
    CAPTURE(n_bug);
    CAPTURE(x_bug);
    CAPTURE(n_fix);
    CAPTURE(x_fix);
    CHECK(std::fabs(got - ref) <= 1e-12 * std::max(ref, 1e-15));
  }
}

TEST_CASE("the exact test's evidence grows with the clean sample") {
  double last = 1.0;
  for (std::uint64_t n_fix = 10; n_fix <= 100; ++n_fix) {
    const double p = fisher_exact_one_sided(Tally(20, 5), Tally(n_fix, 0));
    CHECK(p <= last + 1e-15);
    last = p;
  }
}

TEST_CASE("rank-sum test on binary samples") {
  // identical mixed samples carry no evidence
  const MannWhitneyResult same = mann_whitney_u({0, 1, 0, 1}, {0, 1, 0, 1});
  CHECK(same.z == doctest::Approx(0.0));
  CHECK(same.p == doctest::Approx(1.0));

  // complete separation is overwhelming evidence
  std::vector<std::uint8_t> zeros(100, 0);
  std::vector<std::uint8_t> ones(100, 1);
  const MannWhitneyResult sep = mann_whitney_u(zeros, ones);
  CHECK(sep.p < 1e-3);

  // everything tied: flagged degenerate, p = 1 by convention
  const MannWhitneyResult tied = mann_whitney_u({1, 1, 1}, {1, 1, 1});
  CHECK(tied.degenerate);
  CHECK(tied.p == 1.0);

  CHECK_THROWS_AS(mann_whitney_u({}, {1}), ParameterError);
}

TEST_CASE("rank-sum normal approximation tracks the exact permutation law") {
  // subsampled instances large enough for the normal regime; the skew of the
  // permutation law shrinks like 1/sqrt(count of ones)
  std::mt19937_64 rng(11);
  for (int i = 0; i < 40; ++i) {
    const std::uint64_t na = 2000 + rng() % 6000;
    const std::uint64_t nb = 1000 + rng() % 3000;
    const std::uint64_t a1 = 20 + rng() % (na / 20);
    const std::uint64_t b1 = rng() % (nb / 40 + 1);
    const MannWhitneyResult approx = mann_whitney_u_counts(na - a1, a1, nb - b1, b1);
    const double exact = oracle::mann_whitney_exact_binary(na - a1, a1, nb - b1, b1);
    CAPTURE(na);
    CAPTURE(a1);
    CAPTURE(nb);
    CAPTURE(b1);
    CHECK(std::fabs(approx.p - exact) <= 0.02 + 0.25 * exact);
  }
}

TEST_CASE("binomial sampler matches the exact distribution") {
  const std::uint64_t n = 10;
  const double mu = 0.3;
  const std::uint64_t draws = 40000;
  std::vector<std::uint64_t> histogram(n + 1, 0);
  for (std::uint64_t i = 0; i < draws; ++i) {
    const std::uint64_t x = sample_binomial(n, mu, 900 + i);
    REQUIRE(x <= n);
    ++histogram[x];
  }
  for (std::uint64_t k = 0; k <= n; ++k) {
    const double expected = std::exp(log_binomial_pmf(n, k, mu));
    const double observed = static_cast<double>(histogram[k]) / static_cast<double>(draws);
    const double tolerance =
        4.0 * std::sqrt(expected * (1.0 - expected) / static_cast<double>(draws)) + 1e-4;
    CAPTURE(k);
    CHECK(std::fabs(observed - expected) <= tolerance);
  }

  CHECK(sample_binomial(50, 0.0, 1) == 0);
  CHECK(sample_binomial(50, 1.0, 1) == 50);
  CHECK(sample_binomial(1000, 0.25, 77) == sample_binomial(1000, 0.25, 77));
}

TEST_CASE("binomial sampler mean at production-like scale") {
  const std::uint64_t n = 1000000;
  const double mu = 1e-3;
  double sum = 0.0;
  const int draws = 200;
  for (int i = 0; i < draws; ++i) sum += static_cast<double>(sample_binomial(n, mu, 31 + i));
  const double mean = sum / draws;
  // mean 1000, sd of the mean ~ sqrt(1000/200) ~ 2.2
  CHECK(std::fabs(mean - 1000.0) <= 12.0);
}

TEST_CASE("coverage study: exact and sampled coverage agree at a small scale") {
  const std::uint64_t n = 200;
  const double delta = 0.05;
  const std::vector<double> mu_grid{1e-3, 0.01, 0.1, 0.5};
  const std::uint64_t reps = 600;
  const auto rows = rq1_coverage(mu_grid, n, reps, delta, 4242);
  REQUIRE(rows.size() == mu_grid.size() * 3);
  for (const auto& row : rows) {
    const double exact = exact_coverage(row.n, row.mu, delta, row.method);
    const double se = std::sqrt(exact * (1.0 - exact) / static_cast<double>(reps));
    CAPTURE(row.mu);
    CAPTURE(static_cast<int>(row.method));
    CHECK(std::fabs(row.observed_coverage - exact) <= 3.0 * se + 1e-9);
    if (row.method == IntervalMethod::kClopperPearson) {
      CHECK(exact >= 1.0 - delta - 1e-12);  // conservative by construction
    }
  }
}

TEST_CASE("coverage study: the normal-approximation interval collapses at tiny mu") {
  // at mu = 1e-4 and n = 10^4 the x = 0 draw (mass ~ e^-1) yields the
  // degenerate [0,0] interval, so coverage cannot reach its nominal level
  const double exact = exact_coverage(10000, 1e-4, 0.05, IntervalMethod::kWald);
  CHECK(exact < 0.90);
  CHECK(exact > 0.40);
  const double cp = exact_coverage(10000, 1e-4, 0.05, IntervalMethod::kClopperPearson);
  CHECK(cp >= 0.95);
}

TEST_CASE("exact coverage grid equals the single-point evaluation") {
  const std::vector<double> grid{0.05, 0.3, 0.777};
  const auto values = exact_coverage_grid(60, 0.1, IntervalMethod::kWilson, grid);
  REQUIRE(values.size() == grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    CHECK(values[i] ==
          doctest::Approx(exact_coverage(60, grid[i], 0.1, IntervalMethod::kWilson))
              .epsilon(1e-12));
  }
}

TEST_CASE("efficiency study emits bracketed rows") {
  std::vector<ApproximationParams> params_grid;
  params_grid.emplace_back(0.05, 0.05);
  const auto rows = rq2_efficiency({0.0, 0.5}, params_grid, 10, 99);
  REQUIRE(rows.size() == 4);  // two mu cells, two algorithms
  for (const auto& row : rows) {
    CHECK(row.mean_trials <= static_cast<double>(row.hoeffding_bound));
    CHECK(row.ro3_bound == 59);
    CHECK(row.hoeffding_bound == 738);
    if (row.mu == 0.5) {
      // interior estimates keep the demand inside the bracket
      CHECK(row.mean_trials >= static_cast<double>(row.ro3_bound));
      if (row.algorithm == "practice") {
        CHECK(row.mean_cp_evaluations <= 5.0);
      }
    }
  }
}

TEST_CASE("residual-risk table is the deterministic planner") {
  const auto rows = rq4_residual_risk({1e-3, 1e-4, 1e-5, 1e-6, 1e-7}, 0.05);
  REQUIRE(rows.size() == 5);
  CHECK(rows[0].trials == 2995);
  CHECK(rows[1].trials == 29956);
  CHECK(rows[2].trials == 299572);
  CHECK(rows[3].trials == 2995731);
  CHECK(rows[4].trials == 29957322);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double ratio =
        static_cast<double>(rows[i].trials) / static_cast<double>(rows[i - 1].trials);
    CHECK(ratio >= 9.9);
    CHECK(ratio <= 10.1);
  }
}

TEST_CASE("patch comparison: the planner column is definitional") {
  const auto rows = rq5_patch_comparison({1e-3}, 100000, {0.01}, 5, 11);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].reps == 5);
  CHECK(rows[0].mean_nfix_exact_bound > 0.0);
  CHECK(rows[0].ordering_holds_fraction >= 0.0);
  CHECK(rows[0].ordering_holds_fraction <= 1.0);

  // definitional identity on a fixed bug tally
  const Tally bug(100000, 100);
  const double alpha = 0.01;
  const double p_lower = clopper_pearson(bug, alpha).lower;
  const std::uint64_t expected =
      static_cast<std::uint64_t>(std::ceil(std::log(alpha) / std::log1p(-p_lower)));
  // the smallest all-success count rejecting under the exact bound
  CHECK(ro3_accuracy(expected, alpha) < p_lower);
  CHECK(ro3_accuracy(expected - 1, alpha) >= p_lower);
}

TEST_CASE("accuracy table rows match the closed forms") {
  const auto rows = fig1_table(0.01);
  REQUIRE(rows.size() == 10);
  CHECK(rows[0].name == "OSS-Fuzz");
  CHECK(rows[0].hoeffding_accuracy ==
        doctest::Approx(3.6394770800720935e-6).epsilon(1e-12));
  CHECK(rows[0].ro3_accuracy == doctest::Approx(2.3025850929675362e-11).epsilon(1e-12));
  CHECK(rows[1].name == "Netflix");
  CHECK(rows[1].hoeffding_accuracy ==
        doctest::Approx(5.5372880396625591e-6).epsilon(1e-12));
  CHECK(rows[9].name == "Instagram");
  CHECK_THROWS_AS(fig1_table(0.0), ParameterError);
}

TEST_CASE("CSV writers reproduce byte-identically for a fixed seed") {
  const std::string path = "/tmp/pacmc_test_efficiency.csv";
  std::vector<ApproximationParams> params_grid;
  params_grid.emplace_back(0.1, 0.1);
  write_csv(path, rq2_efficiency({0.5}, params_grid, 5, 7));
  std::ifstream in1(path);
  std::string first((std::istreambuf_iterator<char>(in1)), std::istreambuf_iterator<char>());
  write_csv(path, rq2_efficiency({0.5}, params_grid, 5, 7));
  std::ifstream in2(path);
  std::string second((std::istreambuf_iterator<char>(in2)), std::istreambuf_iterator<char>());
  CHECK(first == second);
  CHECK(first.rfind("seed,mu,epsilon,delta,algorithm", 0) == 0);
  std::remove(path.c_str());
}
