#include "refresh/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>
#include <vector>

namespace refresh {

namespace {

void check_shapes(const ExecutionLog& log, const ChangeTrace& trace) {
  if (log.n_queries != trace.n_queries() || log.n_slots != trace.n_revisions() ||
      static_cast<std::int32_t>(log.slots.size()) != log.n_slots) {
    throw std::invalid_argument("execution log does not match the trace");
  }
}

}  // namespace

MetricsReport compute_metrics(const ExecutionLog& log, const ChangeTrace& trace) {
  check_shapes(log, trace);
  const std::int32_t n_queries = trace.n_queries();

  // ground-truth change slots per query
  std::vector<std::vector<std::int32_t>> changes(n_queries);
  for (std::int32_t i = 1; i <= trace.n_revisions(); ++i) {
    for (QueryId q : changed_set(trace, i)) {
      changes[q].push_back(i);
    }
  }

  MetricsReport report;
  std::vector<std::size_t> next_change(n_queries, 0);  // first change not yet covered
  std::vector<std::int64_t> misses(n_queries, 0);

  for (std::int32_t i = 1; i <= log.n_slots; ++i) {
    for (const ExecutedQuery& entry : log.slot(i).executed) {
      ++report.total_executions;
      if (entry.failed) {
        ++report.irrelevant;
        continue;
      }
      QueryId q = entry.query;
      std::size_t first = next_change[q];
      std::size_t covered = first;
      while (covered < changes[q].size() && changes[q][covered] <= i) {
        ++covered;
      }
      if (covered == first) {
        ++report.irrelevant;
        continue;
      }
      ++report.relevant;
      std::int64_t delay = i - changes[q][first];
      report.abs_delay += delay;
      report.max_delay = std::max(report.max_delay, delay);
      misses[q] += static_cast<std::int64_t>(covered - first) - 1;
      next_change[q] = covered;
    }
  }
  // changes never covered by an execution are missed at the end of the run
  for (QueryId q = 0; q < n_queries; ++q) {
    misses[q] += static_cast<std::int64_t>(changes[q].size() - next_change[q]);
    report.abs_miss += misses[q];
    report.max_miss = std::max(report.max_miss, misses[q]);
  }
  if (report.total_executions > 0) {
    report.effectivity =
        static_cast<double>(report.relevant) / static_cast<double>(report.total_executions);
  }
  return report;
}

MetricsReport brute_force_metrics(const ExecutionLog& log, const ChangeTrace& trace) {
  check_shapes(log, trace);
  MetricsReport report;

  for (std::int32_t i = 1; i <= log.n_slots; ++i) {
    report.total_executions += static_cast<std::int64_t>(log.slot(i).executed.size());
  }

  for (QueryId q = 0; q < trace.n_queries(); ++q) {
    // successful executions of q, rebuilt from scratch
    std::vector<std::int32_t> execs;
    for (std::int32_t i = 1; i <= log.n_slots; ++i) {
      for (const ExecutedQuery& entry : log.slot(i).executed) {
        if (entry.query == q && !entry.failed) {
          execs.push_back(i);
        }
      }
    }
    std::int64_t missed = 0;
    for (std::int32_t c = 1; c <= trace.n_revisions(); ++c) {
      if (!query_changed_at(trace, q, c)) {
        continue;
      }
      // first execution at or after the change
      std::int32_t exec_at = -1;
      std::int32_t exec_before = 0;
      for (std::int32_t e : execs) {
        if (e >= c) {
          exec_at = e;
          break;
        }
        exec_before = e;
      }
      if (exec_at < 0) {
        ++missed;  // run ended before anyone looked again
        continue;
      }
      // detected only if no earlier change sits in the same window
      bool earliest = true;
      for (std::int32_t c2 = exec_before + 1; c2 < c; ++c2) {
        if (query_changed_at(trace, q, c2)) {
          earliest = false;
          break;
        }
      }
      if (earliest) {
        ++report.relevant;
        std::int64_t delay = exec_at - c;
        report.abs_delay += delay;
        report.max_delay = std::max(report.max_delay, delay);
      } else {
        ++missed;
      }
    }
    report.abs_miss += missed;
    report.max_miss = std::max(report.max_miss, missed);
  }

  report.irrelevant = report.total_executions - report.relevant;
  if (report.total_executions > 0) {
    report.effectivity =
        static_cast<double>(report.relevant) / static_cast<double>(report.total_executions);
  }
  return report;
}

std::string metrics_csv_header(char sep) {
  std::string names[] = {"total_qe", "irrelevant", "relevant", "eff_pct",
                         "abs_delay", "max_delay", "abs_miss", "max_miss"};
  std::string out;
  for (const auto& name : names) {
    if (!out.empty()) out += sep;
    out += name;
  }
  return out;
}

std::string metrics_csv_row(const MetricsReport& r, char sep) {
  char eff[32];
  std::snprintf(eff, sizeof eff, "%.2f", r.effectivity * 100.0);
  std::string out;
  auto add = [&](const std::string& field) {
    if (!out.empty()) out += sep;
    out += field;
  };
  add(std::to_string(r.total_executions));
  add(std::to_string(r.irrelevant));
  add(std::to_string(r.relevant));
  add(eff);
  add(std::to_string(r.abs_delay));
  add(std::to_string(r.max_delay));
  add(std::to_string(r.abs_miss));
  add(std::to_string(r.max_miss));
  return out;
}

}  // namespace refresh
