#include "refresh/simulator.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace refresh {

std::vector<QueryHistory> initial_histories(const ChangeTrace& trace) {
  std::vector<QueryHistory> histories(trace.n_queries());
  for (QueryId q = 0; q < trace.n_queries(); ++q) {
    histories[q].add_execution(0, trace.duration_ms(q, 0), false, 0.0);
  }
  return histories;
}

ExecutionLog run_simulation(const ChangeTrace& trace, const RunConfig& cfg) {
  if (cfg.budget_ms <= 0) {
    throw std::invalid_argument("budget must be positive");
  }
  const std::int32_t n_queries = trace.n_queries();
  const std::int32_t n_slots = trace.n_revisions();

  ExecutionLog log;
  log.n_queries = n_queries;
  log.n_slots = n_slots;
  log.slots.resize(n_slots);

  std::vector<QueryHistory> histories = initial_histories(trace);
  PolicyState state = make_policy_state(cfg.policy, n_queries);
  // Result each query's next observation compares against: the result seen at
  // its most recent successful execution. kFailed when nothing is known yet
  // (possible only when revision 0 recorded a failure).
  std::vector<std::int32_t> baseline(n_queries);
  for (QueryId q = 0; q < n_queries; ++q) {
    baseline[q] = trace.result_id(q, 0);
  }

  const bool is_cv = cfg.policy.kind == PolicyKind::clairvoyant;
  const bool is_ttl = cfg.policy.kind == PolicyKind::ttl;

  for (std::int32_t i = 1; i <= n_slots; ++i) {
    if (is_cv) {
      for (QueryId q : changed_set(trace, i)) {
        state.pending_first_change.try_emplace(q, i);
      }
    }

    Schedule schedule = build_schedule(cfg.policy, i, cfg.budget_ms, histories, state,
                                       trace.slot_durations(i));
    if (schedule.spent_ms > cfg.budget_ms) {
      throw std::logic_error("schedule exceeded the budget");  // must never happen
    }

    SlotLog& slot_log = log.slot(i);
    slot_log.spent_ms = schedule.spent_ms;
    slot_log.carryover = schedule.carryover;
    for (QueryId q : schedule.executed) {
      ExecutedQuery entry;
      entry.query = q;
      entry.duration_ms = trace.duration_ms(q, i);
      std::int32_t observed = trace.result_id(q, i);
      if (observed == ChangeTrace::kFailed) {
        // no observation: the query stays due and histories stay untouched
        entry.failed = true;
      } else {
        if (baseline[q] != ChangeTrace::kFailed) {
          const ResultSnapshot& prev = trace.snapshot(baseline[q]);
          const ResultSnapshot& cur = trace.snapshot(observed);
          entry.changed = baseline[q] != observed && result_changed(prev, cur);
          entry.jaccard = jaccard_distance(prev, cur);
        }
        baseline[q] = observed;
        histories[q].add_execution(i, entry.duration_ms, entry.changed, entry.jaccard);
        if (is_ttl) {
          state.ttl[q] = ttl_update(state.ttl[q], i, entry.changed, cfg.policy);
        }
        if (is_cv) {
          state.pending_first_change.erase(q);
        }
      }
      slot_log.executed.push_back(entry);
    }
  }
  return log;
}

bool replay_check(const ExecutionLog& log, const ChangeTrace& trace) {
  if (log.n_queries != trace.n_queries() || log.n_slots != trace.n_revisions() ||
      static_cast<std::int32_t>(log.slots.size()) != log.n_slots) {
    return false;
  }
  std::vector<std::int32_t> baseline(trace.n_queries());
  for (QueryId q = 0; q < trace.n_queries(); ++q) {
    baseline[q] = trace.result_id(q, 0);
  }
  for (std::int32_t i = 1; i <= log.n_slots; ++i) {
    const SlotLog& slot_log = log.slot(i);
    std::int64_t spent = 0;
    std::vector<char> seen(trace.n_queries(), 0);
    for (const ExecutedQuery& entry : slot_log.executed) {
      if (entry.query < 0 || entry.query >= trace.n_queries() || seen[entry.query]) {
        return false;
      }
      seen[entry.query] = 1;
      if (entry.duration_ms != trace.duration_ms(entry.query, i)) {
        return false;
      }
      spent += entry.duration_ms;
      std::int32_t observed = trace.result_id(entry.query, i);
      if (entry.failed != (observed == ChangeTrace::kFailed)) {
        return false;
      }
      if (entry.failed) {
        continue;
      }
      bool changed = false;
      double jaccard = 0.0;
      if (baseline[entry.query] != ChangeTrace::kFailed) {
        const ResultSnapshot& prev = trace.snapshot(baseline[entry.query]);
        const ResultSnapshot& cur = trace.snapshot(observed);
        changed = baseline[entry.query] != observed && result_changed(prev, cur);
        jaccard = jaccard_distance(prev, cur);
      }
      if (entry.changed != changed || entry.jaccard != jaccard) {
        return false;
      }
      baseline[entry.query] = observed;
    }
    if (spent != slot_log.spent_ms) {
      return false;
    }
  }
  return true;
}

namespace {

std::string format_double(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

}  // namespace

void write_log(const ExecutionLog& log, std::ostream& out) {
  out << "LOG v1 queries=" << log.n_queries << " slots=" << log.n_slots << "\n";
  for (std::int32_t i = 1; i <= log.n_slots; ++i) {
    for (const ExecutedQuery& e : log.slot(i).executed) {
      if (e.failed) {
        out << "F " << i << ' ' << e.query << ' ' << e.duration_ms << "\n";
      } else {
        out << "X " << i << ' ' << e.query << ' ' << e.duration_ms << ' ' << (e.changed ? 1 : 0)
            << ' ' << format_double(e.jaccard) << "\n";
      }
    }
  }
}

ExecutionLog read_log(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("empty log file");
  }
  ExecutionLog log;
  {
    std::istringstream header(line);
    std::string magic, version, qfield, sfield;
    header >> magic >> version >> qfield >> sfield;
    if (!header || magic != "LOG" || version != "v1" || !qfield.starts_with("queries=") ||
        !sfield.starts_with("slots=")) {
      throw std::runtime_error("bad log header: '" + line + "'");
    }
    log.n_queries = std::stoi(qfield.substr(8));
    log.n_slots = std::stoi(sfield.substr(6));
    if (log.n_queries <= 0 || log.n_slots < 0) {
      throw std::runtime_error("bad counts in log header");
    }
  }
  log.slots.resize(log.n_slots);
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      continue;
    }
    std::istringstream rec(line);
    char tag = 0;
    std::int32_t slot = 0;
    ExecutedQuery entry;
    rec >> tag >> slot >> entry.query >> entry.duration_ms;
    if (tag == 'X') {
      int changed = 0;
      std::string jaccard;
      rec >> changed >> jaccard;
      if (!rec) {
        throw std::runtime_error("line " + std::to_string(line_no) + ": malformed X record");
      }
      entry.changed = changed != 0;
      entry.jaccard = std::strtod(jaccard.c_str(), nullptr);
    } else if (tag == 'F') {
      if (!rec) {
        throw std::runtime_error("line " + std::to_string(line_no) + ": malformed F record");
      }
      entry.failed = true;
    } else {
      throw std::runtime_error("line " + std::to_string(line_no) + ": unknown record");
    }
    if (slot < 1 || slot > log.n_slots) {
      throw std::runtime_error("line " + std::to_string(line_no) + ": slot out of range");
    }
    log.slot(slot).executed.push_back(entry);
    log.slot(slot).spent_ms += entry.duration_ms;
  }
  return log;
}

void save_log(const ExecutionLog& log, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write log file: " + path.string());
  }
  write_log(log, out);
}

ExecutionLog load_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open log file: " + path.string());
  }
  return read_log(in);
}

}  // namespace refresh
