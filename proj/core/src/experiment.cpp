#include "refresh/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <stdexcept>

#include "refresh/simulator.hpp"

namespace refresh {

Budget Budget::parse(std::string_view text) {
  if (text == "inf") {
    return Budget{0, true};
  }
  std::string_view digits = text;
  std::int64_t scale = 1000;  // bare numbers are seconds
  if (text.ends_with("ms")) {
    digits = text.substr(0, text.size() - 2);
    scale = 1;
  } else if (text.ends_with("s")) {
    digits = text.substr(0, text.size() - 1);
  }
  std::int64_t value = 0;
  auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
  if (ec != std::errc() || p != digits.data() + digits.size() || value <= 0) {
    throw std::invalid_argument("bad budget '" + std::string(text) +
                                "' (expected inf, <sec>s, or <ms>ms)");
  }
  return Budget{value * scale, false};
}

std::string Budget::display() const {
  return unlimited ? "inf" : std::to_string(ms);
}

std::int64_t resolve_budget_ms(const Budget& budget, const ChangeTrace& trace) {
  if (!budget.unlimited) {
    return budget.ms;
  }
  return trace.max_slot_total_ms() + 1;
}

TableFormat parse_table_format(std::string_view text) {
  if (text == "csv") return TableFormat::csv;
  if (text == "tsv") return TableFormat::tsv;
  if (text == "markdown") return TableFormat::markdown;
  throw std::invalid_argument("unknown format '" + std::string(text) +
                              "' (expected csv, tsv, or markdown)");
}

std::vector<MatrixCell> run_matrix(const ChangeTrace& trace, const ExperimentMatrix& matrix) {
  if (matrix.policies.empty()) {
    throw std::invalid_argument("experiment needs at least one policy");
  }
  if (matrix.budgets.empty()) {
    throw std::invalid_argument("experiment needs at least one budget");
  }
  std::vector<MatrixCell> cells;
  cells.reserve(matrix.policies.size() * matrix.budgets.size());
  for (const Budget& budget : matrix.budgets) {
    for (const PolicyConfig& policy : matrix.policies) {
      RunConfig run{policy, resolve_budget_ms(budget, trace)};
      ExecutionLog log = run_simulation(trace, run);
      cells.push_back(MatrixCell{policy, budget, compute_metrics(log, trace)});
    }
  }
  auto budget_key = [](const Budget& b) {
    return b.unlimited ? std::pair<int, std::int64_t>(1, 0) : std::pair<int, std::int64_t>(0, b.ms);
  };
  std::sort(cells.begin(), cells.end(), [&](const MatrixCell& a, const MatrixCell& b) {
    auto ka = budget_key(a.budget);
    auto kb = budget_key(b.budget);
    if (ka != kb) return ka < kb;
    return a.policy.canonical_name() < b.policy.canonical_name();
  });
  return cells;
}

std::string format_table(const std::vector<MatrixCell>& cells, TableFormat format) {
  std::string out;
  if (format == TableFormat::markdown) {
    out += "| policy | budget | ";
    std::string header = metrics_csv_header('|');
    for (char& c : header) {
      if (c == '|') {
        out += " | ";
      } else {
        out += c;
      }
    }
    out += " |\n|---|---|---|---|---|---|---|---|---|---|\n";
    for (const MatrixCell& cell : cells) {
      out += "| " + cell.policy.canonical_name() + " | " + cell.budget.display() + " | ";
      std::string row = metrics_csv_row(cell.report, '|');
      for (char c : row) {
        if (c == '|') {
          out += " | ";
        } else {
          out += c;
        }
      }
      out += " |\n";
    }
    return out;
  }
  const char sep = format == TableFormat::csv ? ',' : '\t';
  out += "policy";
  out += sep;
  out += "budget";
  out += sep;
  out += metrics_csv_header(sep);
  out += "\n";
  for (const MatrixCell& cell : cells) {
    out += cell.policy.canonical_name();
    out += sep;
    out += cell.budget.display();
    out += sep;
    out += metrics_csv_row(cell.report, sep);
    out += "\n";
  }
  return out;
}

std::string inspect_csv(const ChangeTrace& trace) {
  std::string out = "revision,changed_queries,cumulative_distinct_changed\n";
  std::vector<char> ever_changed(trace.n_queries(), 0);
  std::int64_t distinct = 0;
  for (std::int32_t i = 1; i <= trace.n_revisions(); ++i) {
    std::vector<QueryId> changed = changed_set(trace, i);
    for (QueryId q : changed) {
      if (!ever_changed[q]) {
        ever_changed[q] = 1;
        ++distinct;
      }
    }
    out += std::to_string(i);
    out += ',';
    out += std::to_string(changed.size());
    out += ',';
    out += std::to_string(distinct);
    out += '\n';
  }
  return out;
}

std::string per_query_changes_csv(const ChangeTrace& trace) {
  std::string out = "query,revision\n";
  for (std::int32_t i = 1; i <= trace.n_revisions(); ++i) {
    for (QueryId q : changed_set(trace, i)) {
      out += std::to_string(q);
      out += ',';
      out += std::to_string(i);
      out += '\n';
    }
  }
  return out;
}

}  // namespace refresh
