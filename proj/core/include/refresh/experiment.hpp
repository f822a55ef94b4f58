#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "refresh/metrics.hpp"
#include "refresh/policy.hpp"
#include "refresh/trace.hpp"

namespace refresh {

// Per-slot execution time bound. "inf" stands for a budget large enough to
// execute every query in every slot; it is resolved against the trace.
struct Budget {
  std::int64_t ms = 0;
  bool unlimited = false;

  // Accepts "inf", "<n>s", "<n>ms", or a bare number of seconds.
  static Budget parse(std::string_view text);
  std::string display() const;  // "inf" or the millisecond count

  bool operator==(const Budget&) const = default;
};

std::int64_t resolve_budget_ms(const Budget& budget, const ChangeTrace& trace);

enum class TableFormat { csv, tsv, markdown };
TableFormat parse_table_format(std::string_view text);

struct ExperimentMatrix {
  std::vector<PolicyConfig> policies;
  std::vector<Budget> budgets;
  TableFormat format = TableFormat::csv;
};

struct MatrixCell {
  PolicyConfig policy;
  Budget budget;
  MetricsReport report;
};

// One simulation per (policy, budget); rows sorted by budget, then policy
// name. Throws std::invalid_argument on an empty policy or budget list.
std::vector<MatrixCell> run_matrix(const ChangeTrace& trace, const ExperimentMatrix& matrix);

std::string format_table(const std::vector<MatrixCell>& cells, TableFormat format);

// Per-revision change counts: revision,changed_queries,cumulative_distinct_changed
std::string inspect_csv(const ChangeTrace& trace);
// Change scatter data: query,revision rows, one per (query, change slot).
std::string per_query_changes_csv(const ChangeTrace& trace);

}  // namespace refresh
