#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace refresh {

// Queries are identified by dense indices 0..N-1 within a trace.
using QueryId = std::int32_t;

// Canonicalized query result. `elements` is the deduplicated token set used
// for set comparison and Jaccard distance; `sequence` keeps the original row
// order (with duplicates) for results of queries that impose an ordering.
struct ResultSnapshot {
  std::vector<std::string> elements;  // sorted, unique
  std::vector<std::string> sequence;  // present iff ordered
  bool ordered = false;

  static ResultSnapshot from_set(std::vector<std::string> tokens);
  static ResultSnapshot from_sequence(std::vector<std::string> tokens);
  static ResultSnapshot from_ask(bool value);

  bool operator==(const ResultSnapshot&) const = default;
};

// True iff `cur` counts as a change relative to `prev`: element-wise sequence
// inequality for ordered results, set inequality otherwise. Throws
// std::invalid_argument when the ordered flags disagree.
bool result_changed(const ResultSnapshot& prev, const ResultSnapshot& cur);

// 1 - |a.elements ∩ b.elements| / |a.elements ∪ b.elements|.
// Two empty results are identical, so the distance is 0.
double jaccard_distance(const ResultSnapshot& a, const ResultSnapshot& b);

class TraceError : public std::runtime_error {
 public:
  enum class Kind {
    bad_header,
    bad_record,
    bad_value,
    duplicate_result,
    duplicate_record,
    dangling_result,
    incomplete_grid,
    out_of_range,
  };

  TraceError(Kind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// Replayable record of query results and execution durations over a sequence
// of dataset revisions. The grid is complete: every (query, revision) cell
// holds a duration and either a result reference or the failed-execution
// sentinel. Revision 0 is the initial known state. Distinct results are
// stored once and shared by reference.
//
// Immutable once built/loaded; safe to share read-only between runs.
class ChangeTrace {
 public:
  static constexpr std::int32_t kFailed = -1;

  ChangeTrace() = default;
  ChangeTrace(std::int32_t n_queries, std::int32_t n_revisions);

  std::int32_t n_queries() const { return n_queries_; }
  // Revisions beyond the initial one; the grid covers 0..n_revisions().
  std::int32_t n_revisions() const { return n_revisions_; }
  std::int32_t n_results() const { return static_cast<std::int32_t>(results_.size()); }

  // Grows the grid by one revision of unset cells; returns its index.
  std::int32_t add_revision();

  // Registers a snapshot, reusing the id of a previously interned equal one.
  std::int32_t intern_result(ResultSnapshot snapshot);
  void set_record(QueryId q, std::int32_t revision, std::int64_t duration_ms,
                  std::int32_t result_id);
  void set_failed(QueryId q, std::int32_t revision, std::int64_t duration_ms);

  std::int64_t duration_ms(QueryId q, std::int32_t revision) const;
  // kFailed for sentinel cells.
  std::int32_t result_id(QueryId q, std::int32_t revision) const;
  // nullptr for sentinel cells.
  const ResultSnapshot* result(QueryId q, std::int32_t revision) const;
  const ResultSnapshot& snapshot(std::int32_t result_id) const;

  // Most recent non-failed result at revision <= rev; nullptr if none.
  const ResultSnapshot* last_known_result(QueryId q, std::int32_t rev) const;

  // Durations of one revision row, indexed by query id.
  std::span<const std::int64_t> slot_durations(std::int32_t revision) const;
  // Largest total duration of any single revision 1..n (revision 0 if n == 0).
  std::int64_t max_slot_total_ms() const;

  // Checks grid completeness; throws TraceError naming the offending cell.
  void validate() const;

  bool operator==(const ChangeTrace& other) const {
    return n_queries_ == other.n_queries_ && n_revisions_ == other.n_revisions_ &&
           results_ == other.results_ && durations_ == other.durations_ &&
           result_ids_ == other.result_ids_;
  }

 private:
  std::size_t cell(QueryId q, std::int32_t revision) const;
  void check_bounds(QueryId q, std::int32_t revision) const;

  std::int32_t n_queries_ = 0;
  std::int32_t n_revisions_ = 0;
  std::vector<ResultSnapshot> results_;
  std::unordered_map<std::string, std::int32_t> result_index_;
  std::vector<std::int64_t> durations_;   // revision-major; 0 = unset
  std::vector<std::int32_t> result_ids_;  // aligned with durations_
};

// Queries whose result at `revision` differs from their most recent known
// earlier result. This is the ground truth used by metrics and the
// clairvoyant policy; other policies never see it.
std::vector<QueryId> changed_set(const ChangeTrace& trace, std::int32_t revision);
bool query_changed_at(const ChangeTrace& trace, QueryId q, std::int32_t revision);

ChangeTrace read_trace(std::istream& in);
void write_trace(const ChangeTrace& trace, std::ostream& out);
ChangeTrace load_trace(const std::filesystem::path& path);
// Writes to a temporary file and renames, so an existing file is never left
// half-written.
void save_trace(const ChangeTrace& trace, const std::filesystem::path& path);

}  // namespace refresh
