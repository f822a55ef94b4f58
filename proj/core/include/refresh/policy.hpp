#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "refresh/trace.hpp"

namespace refresh {

enum class PolicyKind {
  round_robin,
  shortest_job_first,
  longest_job_first,
  change_rate,
  dynamics_jaccard,
  ttl,
  clairvoyant,
};

bool is_selective(PolicyKind kind);  // ttl and clairvoyant

struct PolicyConfig {
  PolicyKind kind = PolicyKind::round_robin;
  double lambda = 0.0;  // decay rate for sjf/ljf/cr; dynamics defaults to 1
  int median_window = 5;
  int ttl_max = 32;
  bool ttl_reset_on_change = false;  // halve otherwise

  // Parses "name[:k=v,...]", e.g. "cr:lambda=0.5" or "ttl:max=32,on_change=reset".
  // Names: rr sjf ljf cr dj ttl cv. Throws std::invalid_argument on bad input.
  static PolicyConfig parse(std::string_view spec);
  // Name plus any parameters that differ from the defaults, in parse syntax.
  std::string canonical_name() const;
};

// What a policy legitimately knows about one query: its past executions and
// what they observed. Entry 0 is the initial execution at slot 0; it seeds
// the runtime estimate but carries no change observation.
struct QueryHistory {
  std::vector<std::int32_t> exec_slots;    // strictly ascending, starts at 0
  std::vector<std::int64_t> durations_ms;  // aligned with exec_slots
  std::vector<std::uint8_t> change_flags;  // aligned; [0] is a placeholder
  std::vector<double> jaccard_obs;         // aligned; [0] is a placeholder

  std::int32_t last_exec() const { return exec_slots.back(); }
  std::size_t size() const { return exec_slots.size(); }
  void add_execution(std::int32_t slot, std::int64_t duration_ms, bool changed, double jaccard);
};

// Eq-style ranks. RR/SJF/LJF order ascending (smaller executes first);
// CR/DJ order descending. Ties everywhere: greater age, then smaller id.
double rank_rr(std::int32_t slot, const QueryHistory& h);
double rank_sjf(std::int32_t slot, const QueryHistory& h, double lambda, int window);
double rank_ljf(std::int32_t slot, const QueryHistory& h, double lambda, int window);
double rank_cr(std::int32_t slot, const QueryHistory& h, double lambda);
double rank_dj(std::int32_t slot, const QueryHistory& h, double lambda);

// Median of the most recent `window` observed durations; even counts take the
// lower median.
std::int64_t estimate_runtime(const QueryHistory& h, int window);

// +1 if the execution at slot `exec_slot` observed a changed result, -1 if
// not. Only executions that had a previous result to compare against qualify;
// anything else throws std::invalid_argument.
int change_indicator(const QueryHistory& h, std::int32_t exec_slot);

struct TtlEntry {
  int ttl = 1;
  std::int32_t due_at = 1;
};

// Doubles the interval (capped) when the result was stable, shrinks it
// (halve or reset to 1) when a change was observed.
TtlEntry ttl_update(TtlEntry entry, std::int32_t slot, bool changed, const PolicyConfig& cfg);

// The executions of one time slot, in execution order.
struct Schedule {
  std::int32_t slot = 0;
  std::vector<QueryId> executed;
  std::int64_t spent_ms = 0;
  std::vector<QueryId> carryover;  // selective policies: deferred to slot+1
};

// Per-run mutable policy state, owned by a single simulation run.
struct PolicyState {
  std::vector<TtlEntry> ttl;                               // ttl
  std::vector<QueryId> ttl_carryover;                      // ttl, FIFO
  std::map<QueryId, std::int32_t> pending_first_change;    // cv: earliest undetected change
};

PolicyState make_policy_state(const PolicyConfig& cfg, std::int32_t n_queries);

// Executes the pending change queue (oldest change first, ties by id) until
// the budget would overflow; the rest stays pending.
Schedule select_clairvoyant(const std::map<QueryId, std::int32_t>& pending_first_change,
                            std::int32_t slot, std::int64_t budget_ms,
                            std::span<const std::int64_t> slot_durations);

// Ranks candidates per the configured policy, then walks them in order,
// executing while the actual durations fit the budget; the walk stops at the
// first candidate that would overflow. Histories must reflect only
// information from slots before `slot`.
Schedule build_schedule(const PolicyConfig& cfg, std::int32_t slot, std::int64_t budget_ms,
                        std::span<const QueryHistory> histories, PolicyState& state,
                        std::span<const std::int64_t> slot_durations);

}  // namespace refresh
