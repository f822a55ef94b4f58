#pragma once

#include <cstdint>
#include <string>

#include "refresh/simulator.hpp"
#include "refresh/trace.hpp"

namespace refresh {

// Evaluation metrics of one (policy, budget, trace) run.
struct MetricsReport {
  std::int64_t total_executions = 0;
  std::int64_t irrelevant = 0;  // executions that observed no change
  std::int64_t relevant = 0;    // executions that detected at least one change
  double effectivity = 0.0;     // relevant / total, 0 when nothing ran
  std::int64_t abs_delay = 0;   // slots between earliest undetected change and detection, summed
  std::int64_t max_delay = 0;   // largest single-execution delay
  std::int64_t abs_miss = 0;    // changes never individually observed
  std::int64_t max_miss = 0;    // largest per-query miss count

  bool operator==(const MetricsReport&) const = default;
};

// Execution-centric computation: classifies every execution by the ground
// truth changes since the query's previous successful execution. Changes
// still undetected when the run ends count as misses.
MetricsReport compute_metrics(const ExecutionLog& log, const ChangeTrace& trace);

// Change-centric recomputation by exhaustive scan, kept free of incremental
// state so it can serve as an independent oracle. Must equal compute_metrics
// on every valid log.
MetricsReport brute_force_metrics(const ExecutionLog& log, const ChangeTrace& trace);

// One row in the column order total qe, irrelevant, relevant, eff(%),
// abs delay, max delay, abs miss, max miss.
std::string metrics_csv_header(char sep = ',');
std::string metrics_csv_row(const MetricsReport& report, char sep = ',');

}  // namespace refresh
