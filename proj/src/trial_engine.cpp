#include "pacmc/trial_engine.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "pacmc/seed.hpp"

namespace pacmc {

namespace {

constexpr int kSnapshotVersion = 1;

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t config_digest(const EngineConfig& config, std::uint64_t base_seed,
                            std::uint64_t requested, const std::vector<std::string>& properties) {
  std::ostringstream os;
  os << config.workers << '|' << config.batch << '|' << config.retain_outcome_bits << '|'
     << config.outcome_bits_cap << '|' << base_seed << '|' << requested;
  for (const auto& p : properties) os << '|' << p;
  return fnv1a64(os.str());
}

struct WorkerPartial {
  std::vector<Tally> tallies;
  std::vector<std::pair<std::uint64_t, std::uint32_t>> violations;
  std::exception_ptr error;
};

void execute_range(const TrialSource& source, std::uint64_t base_seed, std::uint64_t begin,
                   std::uint64_t end, std::size_t nprops, WorkerPartial& out,
                   std::vector<OutcomeBits>* bits, std::uint64_t bits_cap) {
  out.tallies.assign(nprops, Tally());
  try {
    for (std::uint64_t i = begin; i < end; ++i) {
      TrialOutcome outcome = source.run_trial(i, derive_trial_seed(base_seed, i));
      if (outcome.holds.size() != nprops) {
        throw InfrastructureError("source reported a wrong property count", i);
      }
      for (std::size_t p = 0; p < nprops; ++p) {
        out.tallies[p].n += 1;
        if (outcome.holds[p]) {
          out.tallies[p].x += 1;
        } else {
          out.violations.emplace_back(i, static_cast<std::uint32_t>(p));
        }
        if (bits && i < bits_cap) (*bits)[p].set(i, outcome.holds[p]);
      }
    }
  } catch (...) {
    out.error = std::current_exception();
  }
}

void merge_partial(RunLedger& ledger, const WorkerPartial& part) {
  for (std::size_t p = 0; p < ledger.tallies.size(); ++p) {
    ledger.tallies[p] = merge_tallies(ledger.tallies[p], part.tallies[p]);
  }
  ledger.violations.insert(ledger.violations.end(), part.violations.begin(),
                           part.violations.end());
}

void attach_partial_and_rethrow(const RunLedger& ledger) {
  auto partial = std::make_shared<RunLedger>(ledger);
  try {
    throw;
  } catch (InfrastructureError& e) {
    e.partial_ledger = partial;
    throw e;
  } catch (InsufficientTrialsError& e) {
    e.partial_ledger = partial;
    throw e;
  }
}

// Parallel execution without an early-stop callback: contiguous chunks,
// aligned to 64 trials so packed-bit writes never share a word.
void run_plain(const TrialSource& source, RunLedger& ledger, const EngineConfig& config) {
  const std::size_t nprops = ledger.properties.size();
  std::uint64_t begin = ledger.executed;
  const std::uint64_t end = ledger.requested;
  if (begin >= end) return;
  auto* bits = config.retain_outcome_bits ? &ledger.bits : nullptr;

  std::uint64_t total = end - begin;
  unsigned workers = std::max(1u, config.workers);
  if (workers > 1 && total < 256) workers = 1;

  if (workers == 1) {
    WorkerPartial part;
    execute_range(source, ledger.base_seed, begin, end, nprops, part, bits,
                  config.outcome_bits_cap);
    merge_partial(ledger, part);
    ledger.executed = begin + (nprops ? part.tallies[0].n : 0);
    if (part.error) {
      try {
        std::rethrow_exception(part.error);
      } catch (...) {
        attach_partial_and_rethrow(ledger);
      }
    }
    ledger.executed = end;
    return;
  }

  // packed-bit writes must never share a word across workers: peel off any
  // unaligned prefix (a continued run may start mid-word), then hand out
  // chunks whose boundaries are multiples of 64
  if (bits != nullptr && begin % 64 != 0) {
    const std::uint64_t prefix_end = std::min(end, begin + (64 - begin % 64));
    WorkerPartial prefix;
    execute_range(source, ledger.base_seed, begin, prefix_end, nprops, prefix, bits,
                  config.outcome_bits_cap);
    merge_partial(ledger, prefix);
    ledger.executed = begin + (nprops ? prefix.tallies[0].n : 0);
    if (prefix.error) {
      try {
        std::rethrow_exception(prefix.error);
      } catch (...) {
        attach_partial_and_rethrow(ledger);
      }
    }
    begin = prefix_end;
    ledger.executed = begin;
    if (begin >= end) {
      return;
    }
    total = end - begin;
  }

  std::uint64_t chunk = (total + workers - 1) / workers;
  chunk = ((chunk + 63) / 64) * 64;
  std::vector<WorkerPartial> parts(workers);
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    const std::uint64_t b = begin + static_cast<std::uint64_t>(w) * chunk;
    const std::uint64_t e = std::min(end, b + chunk);
    if (b >= e) {
      parts[w].tallies.assign(nprops, Tally());
      continue;
    }
    pool.emplace_back(execute_range, std::cref(source), ledger.base_seed, b, e, nprops,
                      std::ref(parts[w]), bits, config.outcome_bits_cap);
  }
  for (auto& t : pool) t.join();

  std::exception_ptr first_error;
  std::uint64_t executed_ok = end;
  for (unsigned w = 0; w < workers; ++w) {
    if (parts[w].error && !first_error) {
      first_error = parts[w].error;
      const std::uint64_t b = begin + static_cast<std::uint64_t>(w) * chunk;
      executed_ok = std::min(executed_ok, b + (nprops ? parts[w].tallies[0].n : 0));
    }
  }
  for (unsigned w = 0; w < workers; ++w) merge_partial(ledger, parts[w]);
  std::sort(ledger.violations.begin(), ledger.violations.end());
  if (first_error) {
    ledger.executed = executed_ok;
    try {
      std::rethrow_exception(first_error);
    } catch (...) {
      attach_partial_and_rethrow(ledger);
    }
  }
  ledger.executed = end;
}

// Execution with an early-stop callback: rounds of workers*batch trials,
// buffered, then committed in index order with the callback evaluated at
// batch boundaries. The stop decision therefore depends only on the batch
// size, never on scheduling.
void run_with_stop(const TrialSource& source, RunLedger& ledger, const EngineConfig& config,
                   const StopCallback& stop) {
  const std::size_t nprops = ledger.properties.size();
  const std::uint64_t batch = std::max<std::uint64_t>(1, config.batch);
  const unsigned workers = std::max(1u, config.workers);
  auto* bits = config.retain_outcome_bits ? &ledger.bits : nullptr;

  // the zeroth boundary: a session may be interrupted before any trial
  if (stop(ledger)) {
    ledger.stopped_early = ledger.executed < ledger.requested;
    return;
  }

  std::uint64_t next_boundary = ledger.executed + batch;
  while (ledger.executed < ledger.requested) {
    const std::uint64_t round_begin = ledger.executed;
    const std::uint64_t round_end =
        std::min(ledger.requested, round_begin + batch * workers);

    // execute the round into a buffer (parallel when it pays off)
    const std::uint64_t count = round_end - round_begin;
    std::vector<TrialOutcome> buffer(static_cast<std::size_t>(count));
    auto run_span = [&](std::uint64_t b, std::uint64_t e, std::exception_ptr& err) {
      try {
        for (std::uint64_t i = b; i < e; ++i) {
          buffer[static_cast<std::size_t>(i - round_begin)] =
              source.run_trial(i, derive_trial_seed(ledger.base_seed, i));
        }
      } catch (...) {
        err = std::current_exception();
      }
    };
    std::exception_ptr err;
    if (workers == 1 || count < 64) {
      run_span(round_begin, round_end, err);
    } else {
      const std::uint64_t chunk = (count + workers - 1) / workers;
      std::vector<std::exception_ptr> errs(workers);
      std::vector<std::thread> pool;
      for (unsigned w = 0; w < workers; ++w) {
        const std::uint64_t b = round_begin + w * chunk;
        const std::uint64_t e = std::min(round_end, b + chunk);
        if (b < e) pool.emplace_back(run_span, b, e, std::ref(errs[w]));
      }
      for (auto& t : pool) t.join();
      for (auto& e : errs) {
        if (e) {
          err = e;
          break;
        }
      }
    }

    // commit in order; an execution error surfaces at its own trial index
    for (std::uint64_t i = round_begin; i < round_end; ++i) {
      const TrialOutcome& outcome = buffer[static_cast<std::size_t>(i - round_begin)];
      if (outcome.holds.size() != nprops) {
        // either the source misbehaved or this buffered slot was never
        // filled because an error occurred at or before this index
        if (err) {
          try {
            std::rethrow_exception(err);
          } catch (...) {
            attach_partial_and_rethrow(ledger);
          }
        }
        try {
          throw InfrastructureError("source reported a wrong property count", i);
        } catch (...) {
          attach_partial_and_rethrow(ledger);
        }
      }
      for (std::size_t p = 0; p < nprops; ++p) {
        ledger.tallies[p].n += 1;
        if (outcome.holds[p]) {
          ledger.tallies[p].x += 1;
        } else {
          ledger.violations.emplace_back(i, static_cast<std::uint32_t>(p));
        }
        if (bits && i < config.outcome_bits_cap) (*bits)[p].set(i, outcome.holds[p]);
      }
      ledger.executed = i + 1;
      if (ledger.executed == next_boundary || ledger.executed == ledger.requested) {
        next_boundary = ledger.executed + batch;
        if (stop(ledger)) {
          ledger.stopped_early = ledger.executed < ledger.requested;
          return;
        }
      }
    }
    if (err) {
      // the error lay beyond the final committed trial of this round
      try {
        std::rethrow_exception(err);
      } catch (...) {
        attach_partial_and_rethrow(ledger);
      }
    }
  }
}

void finalize_bits(RunLedger& ledger, const EngineConfig& config) {
  if (!config.retain_outcome_bits) return;
  for (auto& b : ledger.bits) {
    b.stored = std::min(ledger.executed, config.outcome_bits_cap);
    b.truncated = ledger.executed > config.outcome_bits_cap;
    b.words.resize((b.stored + 63) / 64);
  }
}

}  // namespace

const Tally& RunLedger::tally_of(const std::string& property) const {
  for (std::size_t p = 0; p < properties.size(); ++p) {
    if (properties[p] == property) return tallies[p];
  }
  throw ParameterError("unknown property: " + property);
}

RunLedger run_trials(const TrialSource& source, std::uint64_t count, std::uint64_t base_seed,
                     const EngineConfig& config, const StopCallback& stop) {
  RunLedger ledger;
  ledger.base_seed = base_seed;
  ledger.requested = count;
  ledger.properties = source.property_names();
  ledger.tallies.assign(ledger.properties.size(), Tally());
  ledger.config_digest = config_digest(config, base_seed, count, ledger.properties);
  if (config.retain_outcome_bits) {
    ledger.bits.resize(ledger.properties.size());
    const std::uint64_t cap = std::min(count, config.outcome_bits_cap);
    for (auto& b : ledger.bits) b.resize_bits(cap);
  }
  if (stop) {
    run_with_stop(source, ledger, config, stop);
  } else {
    run_plain(source, ledger, config);
    std::sort(ledger.violations.begin(), ledger.violations.end());
  }
  finalize_bits(ledger, config);
  return ledger;
}

RunLedger extend_run(RunLedger ledger, const TrialSource& source, const EngineConfig& config,
                     std::uint64_t new_count, const StopCallback& stop) {
  if (new_count < ledger.executed) {
    throw ParameterError("extend_run: new count precedes already executed trials");
  }
  ledger.requested = new_count;
  ledger.stopped_early = false;
  ledger.config_digest = config_digest(config, ledger.base_seed, new_count, ledger.properties);
  if (config.retain_outcome_bits) {
    if (ledger.bits.empty()) ledger.bits.resize(ledger.properties.size());
    const std::uint64_t cap = std::min(new_count, config.outcome_bits_cap);
    for (auto& b : ledger.bits) b.words.resize((cap + 63) / 64, 0);
  }
  if (stop) {
    run_with_stop(source, ledger, config, stop);
    finalize_bits(ledger, config);
    return ledger;
  }
  run_plain(source, ledger, config);
  std::sort(ledger.violations.begin(), ledger.violations.end());
  finalize_bits(ledger, config);
  return ledger;
}

namespace {

std::string bits_to_hex(const OutcomeBits& bits) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(bits.words.size() * 16);
  for (std::uint64_t w : bits.words) {
    for (int shift = 60; shift >= 0; shift -= 4) out.push_back(digits[(w >> shift) & 0xF]);
  }
  return out;
}

OutcomeBits bits_from_hex(const std::string& hex, std::uint64_t stored, bool truncated) {
  OutcomeBits bits;
  bits.stored = stored;
  bits.truncated = truncated;
  if (hex.size() % 16 != 0) throw CheckpointError("corrupted outcome bits");
  bits.words.reserve(hex.size() / 16);
  for (std::size_t i = 0; i < hex.size(); i += 16) {
    std::uint64_t w = 0;
    for (std::size_t j = 0; j < 16; ++j) {
      const char c = hex[i + j];
      w <<= 4;
      if (c >= '0' && c <= '9') {
        w |= static_cast<std::uint64_t>(c - '0');
      } else if (c >= 'a' && c <= 'f') {
        w |= static_cast<std::uint64_t>(c - 'a' + 10);
      } else {
        throw CheckpointError("corrupted outcome bits");
      }
    }
    bits.words.push_back(w);
  }
  return bits;
}

}  // namespace

namespace {

nlohmann::json ledger_json_impl(const RunLedger& ledger, bool with_digest) {
  nlohmann::json j;
  j["format"] = "pacmc-run";
  j["version"] = kSnapshotVersion;
  j["base_seed"] = ledger.base_seed;
  j["requested"] = ledger.requested;
  j["executed"] = ledger.executed;
  j["stopped_early"] = ledger.stopped_early;
  if (with_digest) j["config_digest"] = ledger.config_digest;
  nlohmann::json props = nlohmann::json::array();
  for (std::size_t p = 0; p < ledger.properties.size(); ++p) {
    nlohmann::json entry;
    entry["name"] = ledger.properties[p];
    entry["n"] = ledger.tallies[p].n;
    entry["x"] = ledger.tallies[p].x;
    if (p < ledger.bits.size() && ledger.bits[p].stored > 0) {
      entry["bits"] = bits_to_hex(ledger.bits[p]);
      entry["bits_stored"] = ledger.bits[p].stored;
      entry["bits_truncated"] = ledger.bits[p].truncated;
    }
    props.push_back(entry);
  }
  j["properties"] = props;
  nlohmann::json viol = nlohmann::json::array();
  for (const auto& [trial, prop] : ledger.violations) {
    viol.push_back(nlohmann::json::array({trial, ledger.properties[prop]}));
  }
  j["violations"] = viol;
  return j;
}

}  // namespace

std::string ledger_to_json(const RunLedger& ledger) {
  return ledger_json_impl(ledger, false).dump();
}

std::string checkpoint(const RunLedger& ledger) {
  return ledger_json_impl(ledger, true).dump();
}

RunLedger resume(const std::string& snapshot, const TrialSource& source,
                 const EngineConfig& config) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(snapshot);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("unreadable snapshot: ") + e.what());
  }
  try {
    if (j.at("format") != "pacmc-run" || j.at("version") != kSnapshotVersion) {
      throw CheckpointError("snapshot version mismatch");
    }
    RunLedger ledger;
    ledger.base_seed = j.at("base_seed").get<std::uint64_t>();
    ledger.requested = j.at("requested").get<std::uint64_t>();
    ledger.executed = j.at("executed").get<std::uint64_t>();
    for (const auto& entry : j.at("properties")) {
      ledger.properties.push_back(entry.at("name").get<std::string>());
      ledger.tallies.emplace_back(entry.at("n").get<std::uint64_t>(),
                                  entry.at("x").get<std::uint64_t>());
      if (config.retain_outcome_bits) {
        if (entry.contains("bits")) {
          ledger.bits.push_back(bits_from_hex(entry.at("bits").get<std::string>(),
                                              entry.at("bits_stored").get<std::uint64_t>(),
                                              entry.at("bits_truncated").get<bool>()));
        } else {
          OutcomeBits b;
          ledger.bits.push_back(b);
        }
      }
    }
    for (const auto& v : j.at("violations")) {
      const std::uint64_t trial = v.at(0).get<std::uint64_t>();
      const std::string name = v.at(1).get<std::string>();
      const auto it = std::find(ledger.properties.begin(), ledger.properties.end(), name);
      if (it == ledger.properties.end()) throw CheckpointError("snapshot names unknown property");
      ledger.violations.emplace_back(
          trial, static_cast<std::uint32_t>(it - ledger.properties.begin()));
    }
    ledger.config_digest =
        config_digest(config, ledger.base_seed, ledger.requested, ledger.properties);
    if (ledger.config_digest != j.at("config_digest").get<std::uint64_t>()) {
      throw CheckpointError("snapshot was taken under a different engine configuration");
    }
    if (ledger.properties != source.property_names()) {
      throw CheckpointError("snapshot property set does not match the source");
    }
    if (config.retain_outcome_bits) {
      const std::uint64_t cap = std::min(ledger.requested, config.outcome_bits_cap);
      for (auto& b : ledger.bits) b.words.resize((cap + 63) / 64);
    }
    run_plain(source, ledger, config);
    std::sort(ledger.violations.begin(), ledger.violations.end());
    finalize_bits(ledger, config);
    return ledger;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("corrupted snapshot: ") + e.what());
  }
}

IIDDiagnostic turning_point_test(const std::vector<double>& series) {
  const std::size_t len = series.size();
  if (len < 4) throw InsufficientDataError("turning point test needs at least 4 observations");
  std::uint64_t turning = 0;
  std::uint64_t ties = 0;
  for (std::size_t i = 0; i + 1 < len; ++i) ties += series[i] == series[i + 1];
  for (std::size_t i = 1; i + 1 < len; ++i) {
    const bool peak = series[i - 1] < series[i] && series[i] > series[i + 1];
    const bool valley = series[i - 1] > series[i] && series[i] < series[i + 1];
    turning += peak || valley;
  }
  IIDDiagnostic diag;
  diag.turning_points = turning;
  const double ld = static_cast<double>(len);
  diag.expected = 2.0 * (ld - 2.0) / 3.0;
  diag.variance = (16.0 * ld - 29.0) / 90.0;
  diag.z_statistic = (static_cast<double>(turning) - diag.expected) / std::sqrt(diag.variance);
  diag.two_sided_p = std::erfc(std::fabs(diag.z_statistic) / std::sqrt(2.0));
  diag.tie_fraction = static_cast<double>(ties) / static_cast<double>(len - 1);
  return diag;
}

IIDDiagnostic turning_point_test(const OutcomeBits& bits) {
  std::vector<double> series;
  series.reserve(static_cast<std::size_t>(bits.stored));
  for (std::uint64_t i = 0; i < bits.stored; ++i) series.push_back(bits.get(i) ? 1.0 : 0.0);
  return turning_point_test(series);
}

}  // namespace pacmc
