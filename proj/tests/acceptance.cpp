// Acceptance suite: every release gate runs as its own criterion and prints
// one PASS/FAIL line with the measured numbers. Run with a criterion number
// (1..10) or with no argument for the whole battery.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "pacmc/analyses.hpp"
#include "pacmc/binomial_stats.hpp"
#include "pacmc/experiments.hpp"
#include "pacmc/seed.hpp"
#include "pacmc/special_functions.hpp"
#include "pacmc/subjects.hpp"
#include "pacmc/trial_engine.hpp"

using namespace pacmc;

namespace {

bool g_failed = false;

void report(int criterion, bool pass, const std::string& detail) {
  std::printf("[c%02d] %s %s\n", criterion, pass ? "PASS" : "FAIL", detail.c_str());
  if (!pass) g_failed = true;
}

std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof(buf), format, args);
  va_end(args);
  return buf;
}

// agreement with a value printed to two significant digits: within one unit
// of the printed mantissa's second digit (covers both rounding and
// truncation of the underlying value)
bool matches_two_digits(double computed, double printed) {
  const double unit = std::pow(10.0, std::floor(std::log10(std::fabs(printed))) - 1.0);
  return std::fabs(computed - printed) < unit;
}

// ---------------------------------------------------------------------------
// 1. accuracy table regression: both bound columns at delta = 0.01
void criterion1() {
  struct Expected {
    const char* name;
    double hfd;
    double ro3;
  };
  const Expected table[] = {
      {"OSS-Fuzz", 3.6e-6, 2.3e-11}, {"Netflix", 5.5e-6, 5.3e-11},
      {"Youtube", 2.1e-5, 7.4e-10},  {"Google", 2.1e-5, 8.2e-10},
      {"Tinder", 3.6e-5, 2.3e-9},    {"Facebook", 4.2e-5, 3.1e-9},
      {"Twitter", 6.2e-5, 6.8e-9},   {"Skype", 1.0e-4, 1.8e-8},
      {"Visa", 1.3e-4, 3.1e-8},      {"Instagram", 1.9e-4, 6.5e-8},
  };
  const auto rows = fig1_table(0.01);
  bool pass = rows.size() == 10;
  std::string worst;
  for (std::size_t i = 0; pass && i < rows.size(); ++i) {
    if (rows[i].name != table[i].name ||
        !matches_two_digits(rows[i].hoeffding_accuracy, table[i].hfd) ||
        !matches_two_digits(rows[i].ro3_accuracy, table[i].ro3)) {
      pass = false;
      worst = fmt(" (row %s: %.4e/%.4e vs %.1e/%.1e)", rows[i].name.c_str(),
                  rows[i].hoeffding_accuracy, rows[i].ro3_accuracy, table[i].hfd,
                  table[i].ro3);
    }
  }
  report(1, pass,
         "accuracy table: all 10 rows match the reference pairs to two significant digits" +
             worst);
}

// ---------------------------------------------------------------------------
// 2. planner regression at epsilon = 1e-3, delta = 0.01
void criterion2() {
  const std::uint64_t ro3 = ro3_sample_size(ApproximationParams(1e-3, 0.01));
  const std::uint64_t hfd = hoeffding_sample_size(ApproximationParams(1e-3, 0.01));
  const bool pass = ro3 == 4603 && (hfd + 50000) / 100000 == 26;
  report(2, pass,
         fmt("planners: all-success count %llu (want 4603), distribution-free count %llu "
             "(rounds to 2.6 million)",
             static_cast<unsigned long long>(ro3), static_cast<unsigned long long>(hfd)));
}

// ---------------------------------------------------------------------------
// 3. sequential estimation demand on a rare event, 100 seeds
void criterion3() {
  const ApproximationParams params(1e-3, 0.01);
  const auto source = bernoulli_source(1e-4);
  const std::uint64_t seeds = 100;
  double sum = 0.0;
  std::uint64_t min_trials = UINT64_MAX;
  std::uint64_t max_trials = 0;
  for (std::uint64_t s = 0; s < seeds; ++s) {
    AnalysisOptions opts;
    opts.seed = mix64(0xC3 + s);
    const AnalysisReport r = quantify_theory(*source, "event", params, opts);
    sum += static_cast<double>(r.trials_used);
    min_trials = std::min(min_trials, r.trials_used);
    max_trials = std::max(max_trials, r.trials_used);
  }
  const double mean = sum / static_cast<double>(seeds);
  const bool mean_ok = mean >= 4809.0 * 0.9 && mean <= 4809.0 * 1.1;
  const bool range_ok = min_trials >= 4603 && max_trials <= 2649160;
  report(3, mean_ok && range_ok,
         fmt("sequential demand at mu=1e-4: mean %.1f (target 4809 +/- 10%%), range "
             "[%llu, %llu] (target within [4603, 2649160]); the exact-interval early exit "
             "stops all-failure streams at 2647 trials, so this target is not reachable "
             "by the implemented stopping rule",
             mean, static_cast<unsigned long long>(min_trials),
             static_cast<unsigned long long>(max_trials)));
}

// ---------------------------------------------------------------------------
// 4. desk-scale coverage study
void criterion4() {
  const double delta = 0.05;
  std::vector<double> mu_grid;
  for (int i = 0; i < 21; ++i) {
    mu_grid.push_back(std::pow(10.0, -4.0 + (std::log10(0.5) + 4.0) * i / 20.0));
  }
  const std::uint64_t reps = 2000;
  const auto rows = rq1_coverage(mu_grid, 10000, reps, delta, 0xBEEF01);

  bool cp_ok = true;
  double cp_min = 1.0;
  bool wald_low_ok = false;
  double wald_at_tiny = 1.0;
  for (const auto& row : rows) {
    if (row.method == IntervalMethod::kClopperPearson) {
      cp_min = std::min(cp_min, row.observed_coverage);
      cp_ok = cp_ok && row.observed_coverage >= 0.94;
    }
    if (row.method == IntervalMethod::kWald && row.mu == mu_grid.front()) {
      wald_at_tiny = row.observed_coverage;
      wald_low_ok = row.observed_coverage <= 0.90;
    }
  }

  // cross-check against exact coverage by pmf summation at n = 200
  const std::uint64_t n_small = 200;
  const std::vector<double> small_grid{1e-3, 0.01, 0.1, 0.5};
  bool cross_ok = true;
  for (IntervalMethod method : {IntervalMethod::kClopperPearson, IntervalMethod::kWald,
                                IntervalMethod::kWilson}) {
    const auto sampled = rq1_coverage(small_grid, n_small, reps, delta, 0xBEEF01 + 1);
    const auto exact = exact_coverage_grid(n_small, delta, method, small_grid);
    for (std::size_t i = 0; i < small_grid.size(); ++i) {
      for (const auto& row : sampled) {
        if (row.method != method || row.mu != small_grid[i]) continue;
        const double se =
            std::sqrt(exact[i] * (1.0 - exact[i]) / static_cast<double>(reps));
        if (std::fabs(row.observed_coverage - exact[i]) > 3.0 * se + 1e-9) cross_ok = false;
      }
    }
  }
  report(4, cp_ok && wald_low_ok && cross_ok,
         fmt("coverage at n=1e4, 2000 reps, 21 points: exact-interval minimum %.4f "
             "(need >= 0.94), normal-approximation coverage %.4f at mu=1e-4 (need <= 0.90), "
             "pmf-summation cross-check at n=200 %s",
             cp_min, wald_at_tiny, cross_ok ? "within 3 standard errors" : "FAILED"));
}

// ---------------------------------------------------------------------------
// 5. residual-risk planner: exact value and decade scaling
void criterion5() {
  const std::uint64_t n5 = ro3_sample_size(ApproximationParams(1e-5, 0.05));
  // exact evaluation of ceil(log(delta)/log(1-epsilon)); a nearby reference
  // constant of 299573 circulates but is off by one from the exact value
  const bool value_ok = n5 == 299572 && (n5 + 50000) / 100000 == 3;
  const auto rows = rq4_residual_risk({1e-3, 1e-4, 1e-5, 1e-6, 1e-7}, 0.05);
  bool ratios_ok = true;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double ratio =
        static_cast<double>(rows[i].trials) / static_cast<double>(rows[i - 1].trials);
    ratios_ok = ratios_ok && ratio >= 9.9 && ratio <= 10.1;
  }
  report(5, value_ok && ratios_ok,
         fmt("residual risk: n(1e-5, 0.05) = %llu (exact evaluation; approximately 3e5), "
             "each epsilon decade multiplies the demand by 10 within [9.9, 10.1]",
             static_cast<unsigned long long>(n5)));
}

// ---------------------------------------------------------------------------
// 6. patch-check soundness at the exposure boundary
void criterion6() {
  const Tally bug(10000, 50);
  bool pass = true;
  std::string detail = "patch soundness with the fix at the exposure limit:";
  for (double delta : {0.05, 0.01}) {
    const double p_lower = clopper_pearson(bug, delta).lower;
    const auto fix = bernoulli_source(1.0 - p_lower);
    const std::uint64_t reps = 2000;
    std::uint64_t rejected = 0;
    for (std::uint64_t r = 0; r < reps; ++r) {
      AnalysisOptions opts;
      opts.seed = mix64(0xF1E + r * 131 + static_cast<std::uint64_t>(delta * 1000));
      const PatchVerdict verdict = patch_verify(*fix, "event", delta, bug, opts);
      rejected += verdict.outcome == PatchVerdict::Outcome::kNullRejected;
    }
    const double rate = static_cast<double>(rejected) / static_cast<double>(reps);
    const double bound = delta + 3.0 * std::sqrt(delta / static_cast<double>(reps));
    pass = pass && rate <= bound;
    detail += fmt(" delta=%.2f rate %.4f (bound %.4f);", delta, rate, bound);
  }
  report(6, pass, detail);
}

// ---------------------------------------------------------------------------
// 7. clean-trial demand after one day of production traffic
void criterion7() {
  const Tally bug(86400000000ULL, 1000);
  const double delta = 0.01;
  const double p_lower = clopper_pearson(bug, delta).lower;
  const std::uint64_t n_fix =
      static_cast<std::uint64_t>(std::ceil(std::log(delta) / std::log1p(-p_lower)));

  // independent tail-sum bisection in extended precision
  const double p_oracle = oracle::cp_lower(86400000000.0, 1000, delta);
  const std::uint64_t n_oracle =
      static_cast<std::uint64_t>(std::ceil(std::log(delta) / std::log1p(-p_oracle)));

  const bool pinned = n_fix == 432286297ULL;  // 40-digit reference evaluation
  // the extended-precision tail-sum oracle carries ~2e-7 relative noise at
  // this scale, about 80 trials of slack on the demand
  const bool near_oracle =
      n_fix + 500 >= n_oracle && n_oracle + 500 >= n_fix;
  const bool in_band = n_fix >= 0.85 * 4e8 && n_fix <= 1.15 * 4e8;

  // the operational path end to end at a desk-scale tally
  const auto fix = bernoulli_source(1.0);
  const PatchVerdict verdict = patch_verify(*fix, "event", 0.001, Tally(1000000, 1000));
  const bool operational = verdict.outcome == PatchVerdict::Outcome::kNullRejected &&
                           verdict.n_fix_required == 7679;

  report(7, pinned && near_oracle && in_band && operational,
         fmt("clean-trial demand for 1000 exposures in 8.64e10 trials: %llu (reference "
             "432286297, oracle %llu, within 15%% of 4e8 at +%.1f%%); desk-scale "
             "operational check %s",
             static_cast<unsigned long long>(n_fix),
             static_cast<unsigned long long>(n_oracle),
             (static_cast<double>(n_fix) / 4e8 - 1.0) * 100.0,
             operational ? "rejects the null at 7679 trials" : "FAILED"));
}

// ---------------------------------------------------------------------------
// 8. method comparison for patch rejection
void criterion8() {
  const auto rows =
      rq5_patch_comparison({1e-3}, 1000000, {0.05, 0.01, 0.001}, 200, 0xFADE);
  double ordering_at_strictest = 0.0;
  std::vector<double> ratios;
  for (const auto& row : rows) {
    if (row.alpha == 0.001) ordering_at_strictest = row.ordering_holds_fraction;
    ratios.push_back(row.mean_nfix_fisher / row.mean_nfix_exact_bound);
  }
  const bool ordering_ok = ordering_at_strictest >= 0.90;
  const bool ratio_monotone = ratios.size() == 3 && ratios[0] >= ratios[1] - 0.002 &&
                              ratios[1] >= ratios[2] - 0.002;
  report(8, ordering_ok && ratio_monotone,
         fmt("patch method comparison at mu=1e-3, n=1e6: exact-bound <= one-sided-exact-test "
             "<= rank-sum ordering holds in %.0f%% of repetitions at alpha=0.001 (need "
             ">= 90%%; the one-sided exact test provably needs ~10%% fewer clean trials "
             "than the exact-bound planner here), test/planner ratio across alpha "
             "{0.05, 0.01, 0.001} = {%.3f, %.3f, %.3f} (monotone decrease: %s)",
             ordering_at_strictest * 100.0, ratios.size() > 0 ? ratios[0] : 0.0,
             ratios.size() > 1 ? ratios[1] : 0.0, ratios.size() > 2 ? ratios[2] : 0.0,
             ratio_monotone ? "yes" : "no"));
}

// ---------------------------------------------------------------------------
// 9. numeric kernel property battery
void criterion9() {
  // (a) exact conservative coverage for every n up to 200
  bool coverage_ok = true;
  double coverage_min = 1.0;
  std::vector<double> mu_grid;
  for (int i = 1; i <= 199; ++i) mu_grid.push_back(i / 200.0);
  mu_grid.push_back(1e-4);
  mu_grid.push_back(1e-3);
  mu_grid.push_back(1.0 - 1e-3);
  for (std::uint64_t n = 1; n <= 200; ++n) {
    for (double delta : {0.1, 0.05, 0.01}) {
      const auto cov =
          exact_coverage_grid(n, delta, IntervalMethod::kClopperPearson, mu_grid);
      for (double c : cov) {
        coverage_min = std::min(coverage_min, c - (1.0 - delta));
        if (c < 1.0 - delta - 1e-12) coverage_ok = false;
      }
    }
  }

  // (b) tail-sum round trip at 1e-9
  bool roundtrip_ok = true;
  SplitMix64 rng(0x901);
  for (int i = 0; i < 500; ++i) {
    const std::uint64_t n = 2 + rng.next() % 10000;
    const std::uint64_t x = 1 + rng.next() % (n - 1);
    const double delta = 0.01 + 0.09 * rng.next_unit();
    const ConfidenceInterval ci = clopper_pearson(Tally(n, x), delta);
    const double up = regularized_incomplete_beta(static_cast<double>(x),
                                                  static_cast<double>(n - x) + 1.0, ci.lower);
    const double down = 1.0 - regularized_incomplete_beta(static_cast<double>(x) + 1.0,
                                                          static_cast<double>(n - x), ci.upper);
    if (std::fabs(up - delta / 2.0) > 1e-9 || std::fabs(down - delta / 2.0) > 1e-9) {
      roundtrip_ok = false;
    }
  }
  // production-scale spot check against 40-digit reference limits
  const ConfidenceInterval big = clopper_pearson(Tally(86400000000ULL, 1000), 0.01);
  roundtrip_ok = roundtrip_ok &&
                 std::fabs(big.lower - 1.0653056094697872e-8) <= 1e-11 * big.lower &&
                 std::fabs(big.upper - 1.255061189276532e-8) <= 1e-11 * big.upper;

  // (c) lower-limit sandwich on 1e4 randomized instances (x >= 10; the
  // rule-of-three side provably fails for tiny success counts)
  bool sandwich_ok = true;
  std::uint64_t sandwich_tested = 0;
  std::uint64_t sandwich_skipped = 0;
  SplitMix64 rng2(0x902);
  while (sandwich_tested < 10000) {
    const double span = 3.0 * rng2.next_unit();
    const std::uint64_t n = static_cast<std::uint64_t>(1e3 * std::pow(10.0, span));
    const double mu = 0.02 + 0.96 * rng2.next_unit();
    const std::uint64_t x = sample_binomial(n, mu, rng2.next());
    if (x < 10 || x >= n) {
      ++sandwich_skipped;
      continue;
    }
    ++sandwich_tested;
    const double delta = sandwich_tested % 2 == 0 ? 0.05 : 0.01;
    const double mu_hat = static_cast<double>(x) / static_cast<double>(n);
    const double p_lower = clopper_pearson(Tally(n, x), delta).lower;
    if (mu_hat - hoeffding_accuracy(n, delta) > p_lower + 1e-12 ||
        p_lower > mu_hat - ro3_accuracy(n, delta) + 1e-12) {
      sandwich_ok = false;
    }
  }

  // (d) nesting and symmetry
  bool shape_ok = true;
  SplitMix64 rng3(0x903);
  for (int i = 0; i < 300; ++i) {
    const std::uint64_t n = 1 + rng3.next() % 400;
    const std::uint64_t x = rng3.next() % (n + 1);
    const ConfidenceInterval wide = clopper_pearson(Tally(n, x), 0.01);
    const ConfidenceInterval narrow = clopper_pearson(Tally(n, x), 0.10);
    shape_ok = shape_ok && wide.lower <= narrow.lower + 1e-15 &&
               narrow.upper <= wide.upper + 1e-15;
    const ConfidenceInterval a = clopper_pearson(Tally(n, x), 0.05);
    const ConfidenceInterval b = clopper_pearson(Tally(n, n - x), 0.05);
    shape_ok = shape_ok && std::fabs(a.lower - (1.0 - b.upper)) <= 1e-11 &&
               std::fabs(a.upper - (1.0 - b.lower)) <= 1e-11;
  }

  // (e) one-sided exact test equals integer enumeration on every table with
  // at most 60 observations
  bool fisher_ok = true;
  for (unsigned n_bug = 1; n_bug <= 59 && fisher_ok; ++n_bug) {
    for (unsigned n_fix = 1; n_fix + n_bug <= 60; ++n_fix) {
      for (unsigned x_bug = 0; x_bug <= n_bug; ++x_bug) {
        for (unsigned x_fix = 0; x_fix <= n_fix; ++x_fix) {
          const double got =
              fisher_exact_one_sided(Tally(n_bug, x_bug), Tally(n_fix, x_fix));
          const double ref = oracle::fisher_one_sided_exact(n_bug, x_bug, n_fix, x_fix);
          if (std::fabs(got - ref) > 1e-12 * std::max(ref, 1e-15)) fisher_ok = false;
        }
      }
    }
  }

  report(9, coverage_ok && roundtrip_ok && sandwich_ok && shape_ok && fisher_ok,
         fmt("kernel battery: exact coverage >= nominal for all n <= 200 (worst margin "
             "%+.2e), tail round-trip within 1e-9 (%s), lower-limit sandwich on %llu "
             "instances (%s; %llu draws below the x >= 10 scope skipped), "
             "nesting/symmetry (%s), exact-test enumeration to 1e-12 (%s)",
             coverage_min, roundtrip_ok ? "ok" : "FAILED",
             static_cast<unsigned long long>(sandwich_tested),
             sandwich_ok ? "ok" : "FAILED",
             static_cast<unsigned long long>(sandwich_skipped), shape_ok ? "ok" : "FAILED",
             fisher_ok ? "ok" : "FAILED"));
}

// ---------------------------------------------------------------------------
// 10. engine determinism and interruption
void criterion10() {
  const auto source = bernoulli_source(0.3);
  EngineConfig config;
  config.workers = 2;
  const std::string once = ledger_to_json(run_trials(*source, 4096, 0xD00D, config));
  const std::string twice = ledger_to_json(run_trials(*source, 4096, 0xD00D, config));
  const bool repeat_ok = once == twice;

  EngineConfig w1;
  w1.workers = 1;
  EngineConfig w4;
  w4.workers = 4;
  const bool workers_ok =
      ledger_to_json(run_trials(*source, 4096, 0xD00D, w1)) == once &&
      ledger_to_json(run_trials(*source, 4096, 0xD00D, w4)) == once;

  EngineConfig tight;
  tight.batch = 1;
  const std::uint64_t total = 1000;
  const std::string full = ledger_to_json(run_trials(*source, total, 0xD00D, tight));
  bool resume_ok = true;
  for (std::uint64_t cut : std::vector<std::uint64_t>{0, 1, 500, total - 1}) {
    const auto interrupt = [cut](const RunLedger& l) { return l.executed >= cut; };
    const RunLedger partial = run_trials(*source, total, 0xD00D, tight, interrupt);
    if (partial.executed != cut) resume_ok = false;
    const RunLedger resumed = resume(checkpoint(partial), *source, tight);
    if (ledger_to_json(resumed) != full) resume_ok = false;
  }

  report(10, repeat_ok && workers_ok && resume_ok,
         fmt("engine determinism: repeated runs byte-identical (%s), ledgers invariant "
             "across 1/2/4 workers (%s), interrupt-and-resume identical at cuts "
             "{0, 1, 500, 999} (%s)",
             repeat_ok ? "yes" : "no", workers_ok ? "yes" : "no", resume_ok ? "yes" : "no"));
}

}  // namespace

int main(int argc, char** argv) {
  void (*criteria[])() = {criterion1, criterion2, criterion3, criterion4, criterion5,
                          criterion6, criterion7, criterion8, criterion9, criterion10};
  if (argc > 1) {
    const int k = std::atoi(argv[1]);
    if (k < 1 || k > 10) {
      std::fprintf(stderr, "usage: %s [criterion 1..10]\n", argv[0]);
      return 2;
    }
    criteria[k - 1]();
  } else {
    for (auto* criterion : criteria) criterion();
  }
  return g_failed ? 1 : 0;
}
