// Command-line surface: sample-size planners, the four analyses, the
// independence diagnostic, and the simulation suite.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pacmc/analyses.hpp"
#include "pacmc/binomial_stats.hpp"
#include "pacmc/experiments.hpp"
#include "pacmc/subjects.hpp"
#include "pacmc/trial_engine.hpp"
#include "pacmc/version.hpp"

namespace {

// Exit code contract: 0 guarantee produced / null rejected, 1 usage or
// infrastructure error, 2 violation observed, 3 inconclusive (e.g. trace
// exhausted before the required trial count).
constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitViolation = 2;
constexpr int kExitInconclusive = 3;

struct CommonOptions {
  std::string source_spec;
  std::string command;
  std::string input_kind = "none";
  std::vector<std::string> props;
  double timeout_ms = 10000.0;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  std::string output;
  std::string format = "json";
};

std::uint64_t default_seed() {
  if (const char* env = std::getenv("PACMC_SEED")) {
    return std::strtoull(env, nullptr, 10);
  }
  return 0;
}

pacmc::PropertyObserver parse_observer(const std::string& spec) {
  using pacmc::PropertyObserver;
  if (spec == "exit-zero") return PropertyObserver::exit_code_zero();
  const auto colon = spec.find(':');
  if (colon != std::string::npos) {
    const std::string kind = spec.substr(0, colon);
    const std::string rest = spec.substr(colon + 1);
    if (kind == "output-matches") {
      return PropertyObserver::output_matches("output-matches", rest);
    }
    if (kind == "latency-below") {
      return PropertyObserver::latency_below(std::stod(rest));
    }
    if (kind == "value-below") {
      const auto sep = rest.find(':');
      if (sep == std::string::npos) {
        throw pacmc::ParameterError("value-below needs CHANNEL:BOUND");
      }
      return PropertyObserver::value_threshold(rest.substr(0, sep),
                                               std::stod(rest.substr(sep + 1)));
    }
  }
  throw pacmc::ParameterError(
      "unknown property spec '" + spec +
      "' (expected exit-zero | output-matches:REGEX | latency-below:MS | "
      "value-below:CHANNEL:BOUND)");
}

std::unique_ptr<pacmc::TrialSource> make_source(const CommonOptions& opts) {
  if (!opts.command.empty()) {
    pacmc::SubprocessSpec spec;
    spec.command_template = opts.command;
    spec.timeout_ms = opts.timeout_ms;
    if (opts.input_kind == "none") {
      spec.input = pacmc::InputKind::kNone;
    } else if (opts.input_kind == "u32") {
      spec.input = pacmc::InputKind::kU32;
    } else if (opts.input_kind == "u64") {
      spec.input = pacmc::InputKind::kU64;
    } else {
      throw pacmc::ParameterError("unknown input kind: " + opts.input_kind);
    }
    if (opts.props.empty()) {
      spec.observers.push_back(pacmc::PropertyObserver::exit_code_zero());
    } else {
      for (const auto& p : opts.props) spec.observers.push_back(parse_observer(p));
    }
    return pacmc::subprocess_source(std::move(spec));
  }
  if (opts.source_spec.rfind("bernoulli:", 0) == 0) {
    return pacmc::bernoulli_source(std::stod(opts.source_spec.substr(10)));
  }
  if (opts.source_spec.rfind("trace:", 0) == 0) {
    return pacmc::trace_source(opts.source_spec.substr(6));
  }
  throw pacmc::ParameterError(
      "no source: pass --cmd TEMPLATE or --source bernoulli:MU | trace:PATH");
}

void emit(const CommonOptions& opts, const std::string& payload) {
  if (opts.output.empty() || opts.output == "-") {
    std::cout << payload << '\n';
    return;
  }
  std::ofstream out(opts.output);
  if (!out) throw pacmc::ParameterError("cannot open output file: " + opts.output);
  out << payload << '\n';
}

// reports carry the fully resolved invocation so they can be reproduced
nlohmann::json resolved_config(const CommonOptions& opts) {
  nlohmann::json j;
  j["source"] = opts.command.empty() ? opts.source_spec : ("cmd:" + opts.command);
  if (!opts.command.empty()) {
    j["input"] = opts.input_kind;
    j["props"] = opts.props;
    j["timeout_ms"] = opts.timeout_ms;
  }
  j["workers"] = opts.workers;
  return j;
}

std::string with_config(const std::string& report_json, const CommonOptions& opts) {
  nlohmann::json j = nlohmann::json::parse(report_json);
  j["config"] = resolved_config(opts);
  return j.dump(2);
}

void add_common(CLI::App* cmd, CommonOptions& opts, bool with_source) {
  if (with_source) {
    cmd->add_option("--source", opts.source_spec, "bernoulli:MU or trace:PATH");
    cmd->add_option("--cmd", opts.command, "shell command template ({input} placeholder)");
    cmd->add_option("--input", opts.input_kind, "per-trial input: none|u32|u64");
    cmd->add_option("--prop", opts.props,
                    "property observer (exit-zero | output-matches:REGEX | "
                    "latency-below:MS | value-below:CHANNEL:BOUND)");
    cmd->add_option("--timeout-ms", opts.timeout_ms, "per-trial subject timeout");
  }
  cmd->add_option("--seed", opts.seed, "base seed (default: PACMC_SEED or 0)");
  cmd->add_option("--workers", opts.workers, "worker threads");
  cmd->add_option("-o,--output", opts.output, "output path (default stdout)");
  cmd->add_option("--format", opts.format, "json|text");
}

int exit_code_for(const pacmc::AnalysisReport& report) {
  return report.violation_observed ? kExitViolation : kExitOk;
}

std::string render_text(const pacmc::AnalysisReport& report) {
  std::string out = report.guarantee;
  out += "\n(trials=" + std::to_string(report.trials_used) +
         ", seed=" + std::to_string(report.base_seed) + ")";
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte-Carlo trial analysis with distribution-free guarantees"};
  app.set_version_flag("--version", std::string(pacmc::kToolName) + " " + pacmc::kToolVersion);
  app.require_subcommand(1);

  CommonOptions opts;
  opts.seed = default_seed();

  // plan
  auto* plan = app.add_subcommand("plan", "print the trial count a guarantee costs");
  std::string plan_method;
  double plan_eps = 0.0;
  double plan_delta = 0.0;
  double plan_p0 = -1.0;
  plan->add_option("method", plan_method, "ro3 | hoeffding | kp")->required();
  plan->add_option("--epsilon", plan_eps, "accuracy")->required();
  plan->add_option("--delta", plan_delta, "confidence complement")->required();
  plan->add_option("--p0", plan_p0, "anticipated proportion (kp only)");
  add_common(plan, opts, false);

  // verify
  auto* verify_cmd = app.add_subcommand("verify", "residual-risk check over all properties");
  double v_eps = 0.0;
  double v_delta = 0.0;
  verify_cmd->add_option("--epsilon", v_eps, "allowable residual risk")->required();
  verify_cmd->add_option("--delta", v_delta, "confidence complement")->required();
  add_common(verify_cmd, opts, true);

  // quantify
  auto* quantify_cmd = app.add_subcommand("quantify", "estimate a property's probability");
  double q_eps = 0.0;
  double q_delta = 0.0;
  std::string q_prop = "event";
  std::string q_algorithm = "theory";
  std::uint64_t q_stride = 1;
  bool q_laplace = false;
  quantify_cmd->add_option("--epsilon", q_eps, "accuracy")->required();
  quantify_cmd->add_option("--delta", q_delta, "confidence complement")->required();
  quantify_cmd->add_option("--prop-name", q_prop, "property to estimate (default: event)");
  quantify_cmd->add_option("--algorithm", q_algorithm, "theory | practice");
  quantify_cmd->add_option("--stride", q_stride, "interval check stride in trials");
  quantify_cmd->add_flag("--laplace-first-guess", q_laplace,
                         "seed the predictor with the succession-rule estimate");
  add_common(quantify_cmd, opts, true);

  // patch-verify
  auto* patch_cmd = app.add_subcommand("patch-verify", "check that a fix reduced the failure rate");
  double p_delta = 0.0;
  std::uint64_t p_bug_n = 0;
  std::uint64_t p_bug_x = 0;
  std::string p_prop;
  patch_cmd->add_option("--delta", p_delta, "significance level")->required();
  patch_cmd->add_option("--bug-n", p_bug_n, "trials observed on the buggy version")->required();
  patch_cmd->add_option("--bug-x", p_bug_x, "trials exposing the bug")->required();
  patch_cmd->add_option("--prop-name", p_prop, "property that must hold on the fix");
  add_common(patch_cmd, opts, true);

  // iid-check
  auto* iid_cmd = app.add_subcommand("iid-check", "turning point independence diagnostic");
  std::uint64_t iid_trials = 0;
  iid_cmd->add_option("--trials", iid_trials, "trials to run")->required();
  add_common(iid_cmd, opts, true);

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "run a simulation study, write CSV");
  std::string sim_study;
  std::string sim_out_dir = ".";
  std::uint64_t sim_reps = 0;
  sim_cmd->add_option("study", sim_study, "coverage | efficiency | residual-risk | patch | accuracy-table")
      ->required();
  sim_cmd->add_option("--out-dir", sim_out_dir, "output directory");
  sim_cmd->add_option("--reps", sim_reps, "repetitions per cell (study defaults apply)");
  add_common(sim_cmd, opts, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitError;
  }

  try {
    if (plan->parsed()) {
      const pacmc::ApproximationParams params(plan_eps, plan_delta);
      std::uint64_t n = 0;
      std::string sentence;
      if (plan_method == "ro3") {
        n = pacmc::ro3_sample_size(params);
        sentence = "trials that all succeed bound the violation probability by epsilon";
      } else if (plan_method == "hoeffding") {
        n = pacmc::hoeffding_sample_size(params);
        sentence = "trials bound the estimate error by epsilon for every true probability";
      } else if (plan_method == "kp") {
        if (!(plan_p0 > 0.0 && plan_p0 < 1.0)) {
          throw pacmc::ParameterError("kp planning needs --p0 strictly inside (0,1)");
        }
        n = pacmc::kp_sample_size(plan_p0, params);
        sentence = "trials are predicted to shrink the exact interval radius to epsilon";
      } else {
        throw pacmc::ParameterError("unknown plan method: " + plan_method);
      }
      nlohmann::json j;
      j["tool"] = {{"name", pacmc::kToolName}, {"version", pacmc::kToolVersion}};
      j["method"] = plan_method;
      j["epsilon"] = plan_eps;
      j["delta"] = plan_delta;
      if (plan_p0 > 0.0) j["p0"] = plan_p0;
      j["trials"] = n;
      j["guarantee"] = std::to_string(n) + " " + sentence + " with probability at least " +
                       std::to_string(1.0 - plan_delta);
      if (opts.format == "text") {
        emit(opts, std::to_string(n));
      } else {
        emit(opts, j.dump(2));
      }
      return kExitOk;
    }

    if (verify_cmd->parsed()) {
      const auto source = make_source(opts);
      pacmc::AnalysisOptions aopts;
      aopts.seed = opts.seed;
      aopts.workers = opts.workers;
      const auto report =
          pacmc::verify(*source, pacmc::ApproximationParams(v_eps, v_delta), aopts);
      emit(opts, opts.format == "text" ? render_text(report)
                                       : with_config(report.to_json(), opts));
      return exit_code_for(report);
    }

    if (quantify_cmd->parsed()) {
      const auto source = make_source(opts);
      pacmc::AnalysisOptions aopts;
      aopts.seed = opts.seed;
      aopts.workers = opts.workers;
      aopts.cp_stride = q_stride;
      aopts.laplace_first_guess = q_laplace;
      const pacmc::ApproximationParams params(q_eps, q_delta);
      const auto report = q_algorithm == "practice"
                              ? pacmc::quantify_practice(*source, q_prop, params, aopts)
                              : pacmc::quantify_theory(*source, q_prop, params, aopts);
      emit(opts, opts.format == "text" ? render_text(report)
                                       : with_config(report.to_json(), opts));
      return exit_code_for(report);
    }

    if (patch_cmd->parsed()) {
      const auto source = make_source(opts);
      pacmc::AnalysisOptions aopts;
      aopts.seed = opts.seed;
      aopts.workers = opts.workers;
      const std::string prop = p_prop.empty() ? source->property_names().front() : p_prop;
      const auto verdict = pacmc::patch_verify(*source, prop, p_delta,
                                               pacmc::Tally(p_bug_n, p_bug_x), aopts);
      emit(opts, with_config(verdict.to_json(), opts));
      return verdict.outcome == pacmc::PatchVerdict::Outcome::kNullRejected ? kExitOk
                                                                            : kExitViolation;
    }

    if (iid_cmd->parsed()) {
      const auto source = make_source(opts);
      pacmc::EngineConfig config;
      config.workers = opts.workers;
      config.retain_outcome_bits = true;
      const auto ledger = pacmc::run_trials(*source, iid_trials, opts.seed, config);
      nlohmann::json j;
      j["tool"] = {{"name", pacmc::kToolName}, {"version", pacmc::kToolVersion}};
      j["seed"] = opts.seed;
      j["trials"] = ledger.executed;
      nlohmann::json diags = nlohmann::json::object();
      for (std::size_t p = 0; p < ledger.properties.size(); ++p) {
        const auto diag = pacmc::turning_point_test(ledger.bits[p]);
        diags[ledger.properties[p]] = {
            {"turning_points", diag.turning_points}, {"expected", diag.expected},
            {"variance", diag.variance},             {"z", diag.z_statistic},
            {"two_sided_p", diag.two_sided_p},       {"tie_fraction", diag.tie_fraction}};
      }
      j["diagnostics"] = diags;
      j["note"] = "the turning point test has low power on heavily tied binary sequences; "
                  "judge applicability by the tie fraction";
      emit(opts, j.dump(2));
      return kExitOk;
    }

    if (sim_cmd->parsed()) {
      const std::string dir = sim_out_dir + "/";
      if (sim_study == "coverage") {
        std::vector<double> mu_grid;
        for (int i = 0; i < 21; ++i) {
          mu_grid.push_back(std::pow(10.0, -4.0 + (std::log10(0.5) + 4.0) * i / 20.0));
        }
        const std::uint64_t reps = sim_reps ? sim_reps : 2000;
        write_csv(dir + "coverage.csv",
                  pacmc::rq1_coverage(mu_grid, 10000, reps, 0.05, opts.seed));
      } else if (sim_study == "efficiency") {
        const std::uint64_t reps = sim_reps ? sim_reps : 20;
        std::vector<pacmc::ApproximationParams> grid;
        grid.emplace_back(1e-3, 0.01);
        write_csv(dir + "efficiency.csv",
                  pacmc::rq2_efficiency({0.0, 1e-4, 1e-3, 1e-2}, grid, reps, opts.seed));
      } else if (sim_study == "residual-risk") {
        write_csv(dir + "residual_risk.csv",
                  pacmc::rq4_residual_risk({1e-3, 1e-4, 1e-5, 1e-6, 1e-7}, 0.05));
      } else if (sim_study == "patch") {
        const std::uint64_t reps = sim_reps ? sim_reps : 100;
        write_csv(dir + "patch_comparison.csv",
                  pacmc::rq5_patch_comparison({1e-3}, 1000000, {0.05, 0.01, 0.001}, reps,
                                              opts.seed));
      } else if (sim_study == "accuracy-table") {
        write_csv(dir + "accuracy_table.csv", pacmc::fig1_table(0.01));
      } else {
        throw pacmc::ParameterError("unknown study: " + sim_study);
      }
      return kExitOk;
    }
  } catch (const pacmc::InsufficientTrialsError& e) {
    std::cerr << "inconclusive: " << e.what() << '\n';
    return kExitInconclusive;
  } catch (const pacmc::CannotVerifyError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
