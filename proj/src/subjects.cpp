#include "pacmc/subjects.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstring>
#include <fstream>
#include <regex>
#include <sstream>

#include <json.hpp>

#include "pacmc/seed.hpp"

namespace pacmc {

PropertyObserver PropertyObserver::exit_code_zero() {
  PropertyObserver obs;
  obs.name = "exit-zero";
  obs.rule = Rule::kExitCodeZero;
  return obs;
}

PropertyObserver PropertyObserver::output_matches(std::string name, std::string regex) {
  PropertyObserver obs;
  obs.name = std::move(name);
  obs.rule = Rule::kOutputMatches;
  obs.pattern = std::move(regex);
  return obs;
}

PropertyObserver PropertyObserver::latency_below(double ms) {
  PropertyObserver obs;
  obs.name = "latency-below-" + std::to_string(static_cast<long long>(ms)) + "ms";
  obs.rule = Rule::kLatencyBelow;
  obs.threshold_ms = ms;
  return obs;
}

PropertyObserver PropertyObserver::value_threshold(std::string channel, double bound) {
  PropertyObserver obs;
  obs.name = channel + "-below";
  obs.rule = Rule::kValueThreshold;
  obs.channel = std::move(channel);
  obs.bound = bound;
  return obs;
}

namespace {

bool extract_channel_value(const std::string& output, const std::string& channel, double* value) {
  const std::regex re(channel + R"(\s*[=:]\s*([-+]?[0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?))");
  bool found = false;
  for (auto it = std::sregex_iterator(output.begin(), output.end(), re);
       it != std::sregex_iterator(); ++it) {
    *value = std::stod((*it)[1].str());
    found = true;
  }
  return found;
}

}  // namespace

bool evaluate_observer(const PropertyObserver& obs, const ExecutionRecord& record) {
  switch (obs.rule) {
    case PropertyObserver::Rule::kExitCodeZero:
      return record.exit_code == 0;
    case PropertyObserver::Rule::kOutputMatches: {
      const std::regex re(obs.pattern);
      return std::regex_search(record.output, re);
    }
    case PropertyObserver::Rule::kLatencyBelow:
      return !record.timed_out && record.wall_ms < obs.threshold_ms;
    case PropertyObserver::Rule::kValueThreshold: {
      double value = 0.0;
      if (!extract_channel_value(record.output, obs.channel, &value)) {
        throw std::runtime_error("value channel '" + obs.channel + "' absent from output");
      }
      return value <= obs.bound;
    }
  }
  return false;
}

namespace {

class BernoulliSource final : public TrialSource {
 public:
  explicit BernoulliSource(double mu) : mu_(mu), names_{"event"} {
    if (!(mu >= 0.0 && mu <= 1.0)) throw ParameterError("bernoulli source: mu outside [0,1]");
  }

  const std::vector<std::string>& property_names() const override { return names_; }

  TrialOutcome run_trial(std::uint64_t trial_index, std::uint64_t trial_seed) const override {
    TrialOutcome out;
    out.trial_index = trial_index;
    out.holds = {uniform01(trial_seed) < mu_};
    return out;
  }

 private:
  double mu_;
  std::vector<std::string> names_;
};

ExecutionRecord run_command(const std::string& command, const std::string& stdin_data,
                            bool use_stdin, double timeout_ms, std::uint64_t trial_index) {
  int out_pipe[2];
  int in_pipe[2] = {-1, -1};
  if (pipe(out_pipe) != 0) throw InfrastructureError("pipe creation failed", trial_index);
  if (use_stdin && pipe(in_pipe) != 0) {
    close(out_pipe[0]);
    close(out_pipe[1]);
    throw InfrastructureError("pipe creation failed", trial_index);
  }

  const auto start = std::chrono::steady_clock::now();
  const pid_t pid = fork();
  if (pid < 0) {
    close(out_pipe[0]);
    close(out_pipe[1]);
    if (use_stdin) {
      close(in_pipe[0]);
      close(in_pipe[1]);
    }
    throw InfrastructureError("fork failed", trial_index);
  }
  if (pid == 0) {
    // child: wire stdio and exec through the shell
    dup2(out_pipe[1], STDOUT_FILENO);
    dup2(out_pipe[1], STDERR_FILENO);
    close(out_pipe[0]);
    close(out_pipe[1]);
    if (use_stdin) {
      dup2(in_pipe[0], STDIN_FILENO);
      close(in_pipe[0]);
      close(in_pipe[1]);
    } else {
      const int devnull = open("/dev/null", O_RDONLY);
      if (devnull >= 0) dup2(devnull, STDIN_FILENO);
    }
    execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }

  close(out_pipe[1]);
  if (use_stdin) {
    close(in_pipe[0]);
    ssize_t ignored = write(in_pipe[1], stdin_data.data(), stdin_data.size());
    (void)ignored;
    close(in_pipe[1]);
  }

  ExecutionRecord record;
  bool killed = false;
  char buf[4096];
  for (;;) {
    const auto now = std::chrono::steady_clock::now();
    const double elapsed_ms =
        std::chrono::duration_cast<std::chrono::duration<double, std::milli>>(now - start)
            .count();
    const int remaining = killed ? 1000 : static_cast<int>(timeout_ms - elapsed_ms);
    if (!killed && remaining <= 0) {
      kill(pid, SIGKILL);
      killed = true;
      record.timed_out = true;
      continue;
    }
    pollfd pfd{out_pipe[0], POLLIN, 0};
    const int rc = poll(&pfd, 1, std::max(1, remaining));
    if (rc > 0) {
      const ssize_t got = read(out_pipe[0], buf, sizeof(buf));
      if (got > 0) {
        record.output.append(buf, static_cast<std::size_t>(got));
        continue;
      }
      break;  // EOF or error: child side closed
    }
    if (rc == 0 && killed) break;
  }
  close(out_pipe[0]);

  int status = 0;
  waitpid(pid, &status, 0);
  const auto end = std::chrono::steady_clock::now();
  record.wall_ms =
      std::chrono::duration_cast<std::chrono::duration<double, std::milli>>(end - start).count();
  if (WIFEXITED(status)) {
    record.exit_code = WEXITSTATUS(status);
  } else if (WIFSIGNALED(status)) {
    record.exit_code = 128 + WTERMSIG(status);
  } else {
    record.exit_code = -1;
  }
  return record;
}

class SubprocessSource final : public TrialSource {
 public:
  explicit SubprocessSource(SubprocessSpec spec) : spec_(std::move(spec)) {
    if (spec_.command_template.empty()) {
      throw ParameterError("subprocess source: empty command");
    }
    if (spec_.observers.empty()) {
      throw ParameterError("subprocess source: at least one observer is required");
    }
    for (const auto& obs : spec_.observers) names_.push_back(obs.name);
    has_latency_claim_ = false;
    for (const auto& obs : spec_.observers) {
      has_latency_claim_ |= obs.rule == PropertyObserver::Rule::kLatencyBelow;
    }
    placeholder_pos_ = spec_.command_template.find("{input}");
  }

  const std::vector<std::string>& property_names() const override { return names_; }

  TrialOutcome run_trial(std::uint64_t trial_index, std::uint64_t trial_seed) const override {
    std::string input;
    switch (spec_.input) {
      case InputKind::kNone:
        break;
      case InputKind::kU32:
        input = std::to_string(static_cast<std::uint32_t>(trial_seed & 0xFFFFFFFFULL));
        break;
      case InputKind::kU64:
        input = std::to_string(trial_seed);
        break;
    }
    std::string command = spec_.command_template;
    bool use_stdin = false;
    if (placeholder_pos_ != std::string::npos) {
      command.replace(placeholder_pos_, 7, input);
    } else if (spec_.input != InputKind::kNone) {
      use_stdin = true;
      input.push_back('\n');
    }

    const ExecutionRecord record =
        run_command(command, input, use_stdin, spec_.timeout_ms, trial_index);
    if (record.timed_out && !has_latency_claim_) {
      throw InfrastructureError("subject timed out", trial_index);
    }

    TrialOutcome out;
    out.trial_index = trial_index;
    out.holds.reserve(names_.size());
    for (const auto& obs : spec_.observers) {
      try {
        out.holds.push_back(evaluate_observer(obs, record));
      } catch (const std::runtime_error& e) {
        throw InfrastructureError(e.what(), trial_index);
      }
    }
    return out;
  }

 private:
  SubprocessSpec spec_;
  std::vector<std::string> names_;
  bool has_latency_claim_ = false;
  std::size_t placeholder_pos_ = std::string::npos;
};

class TraceSource final : public TrialSource {
 public:
  explicit TraceSource(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParameterError("trace source: cannot open " + path);
    std::string line;
    std::uint64_t line_no = 0;
    std::int64_t last_index = -1;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw TraceParseError(std::string("malformed trace record: ") + e.what(), line_no);
      }
      if (!j.contains("t") || !j.contains("props") || !j["props"].is_object()) {
        throw TraceParseError("trace record must carry 't' and 'props'", line_no);
      }
      const std::int64_t t = j["t"].get<std::int64_t>();
      if (t <= last_index) {
        throw TraceParseError("trace indices must be strictly increasing", line_no);
      }
      last_index = t;
      std::vector<std::string> row_names;
      std::vector<bool> row;
      for (auto it = j["props"].begin(); it != j["props"].end(); ++it) {
        if (!it.value().is_boolean()) {
          throw TraceParseError("property outcomes must be booleans", line_no);
        }
        row_names.push_back(it.key());
        row.push_back(it.value().get<bool>());
      }
      if (names_.empty()) {
        names_ = row_names;
      } else if (names_ != row_names) {
        throw TraceParseError("property set must be constant across the trace", line_no);
      }
      rows_.push_back(std::move(row));
    }
    if (names_.empty()) names_ = {"event"};
  }

  const std::vector<std::string>& property_names() const override { return names_; }

  TrialOutcome run_trial(std::uint64_t trial_index, std::uint64_t) const override {
    if (trial_index >= rows_.size()) {
      throw InsufficientTrialsError(
          "trace exhausted after " + std::to_string(rows_.size()) + " recorded trials",
          trial_index);
    }
    TrialOutcome out;
    out.trial_index = trial_index;
    out.holds = rows_[trial_index];
    return out;
  }

  std::size_t recorded_trials() const { return rows_.size(); }

 private:
  std::vector<std::string> names_;
  std::vector<std::vector<bool>> rows_;
};

}  // namespace

std::unique_ptr<TrialSource> bernoulli_source(double mu) {
  return std::make_unique<BernoulliSource>(mu);
}

std::unique_ptr<TrialSource> subprocess_source(SubprocessSpec spec) {
  return std::make_unique<SubprocessSource>(std::move(spec));
}

std::unique_ptr<TrialSource> trace_source(const std::string& path) {
  return std::make_unique<TraceSource>(path);
}

void write_trace(const std::string& path, const std::vector<std::string>& properties,
                 const std::vector<std::vector<bool>>& rows) {
  std::ofstream out(path);
  if (!out) throw ParameterError("cannot open trace file for writing: " + path);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    nlohmann::json props;
    for (std::size_t p = 0; p < properties.size(); ++p) props[properties[p]] = rows[i][p];
    nlohmann::json j;
    j["t"] = i;
    j["props"] = props;
    out << j.dump() << '\n';
  }
}

}  // namespace pacmc
