#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "refresh/policy.hpp"
#include "refresh/trace.hpp"

namespace refresh {

struct ExecutedQuery {
  QueryId query = 0;
  std::int64_t duration_ms = 0;
  bool failed = false;    // sentinel execution: consumed budget, observed nothing
  bool changed = false;   // result differed from the previous observed result
  double jaccard = 0.0;   // distance between those same two results
};

struct SlotLog {
  std::vector<ExecutedQuery> executed;  // in execution order
  std::int64_t spent_ms = 0;
  std::vector<QueryId> carryover;
};

struct ExecutionLog {
  std::int32_t n_queries = 0;
  std::int32_t n_slots = 0;
  std::vector<SlotLog> slots;  // slots[i-1] holds slot i

  const SlotLog& slot(std::int32_t i) const { return slots[i - 1]; }
  SlotLog& slot(std::int32_t i) { return slots[i - 1]; }
};

struct RunConfig {
  PolicyConfig policy;
  std::int64_t budget_ms = 0;  // per-slot execution time bound
};

// Histories as every policy sees them at slot 1: the initial execution of
// each query at slot 0 with its recorded duration.
std::vector<QueryHistory> initial_histories(const ChangeTrace& trace);

// Replays the trace slot by slot under the configured policy and budget.
// Policies observe only what their own executions revealed.
ExecutionLog run_simulation(const ChangeTrace& trace, const RunConfig& cfg);

// True iff the log is contiguous and every recorded observation matches a
// recomputation from the raw snapshots.
bool replay_check(const ExecutionLog& log, const ChangeTrace& trace);

// Line-oriented audit format:
//   LOG v1 queries=<N> slots=<n>
//   X <slot> <query-id> <duration_ms> <changed:0|1> <jaccard>
//   F <slot> <query-id> <duration_ms>
void write_log(const ExecutionLog& log, std::ostream& out);
ExecutionLog read_log(std::istream& in);
void save_log(const ExecutionLog& log, const std::filesystem::path& path);
ExecutionLog load_log(const std::filesystem::path& path);

}  // namespace refresh
