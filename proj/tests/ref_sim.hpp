#pragma once

#include <cstdint>
#include <vector>

#include "refresh/policy.hpp"
#include "refresh/trace.hpp"

namespace refresh_test {

struct RefSlot {
  std::vector<refresh::QueryId> executed;
  std::int64_t spent_ms = 0;
  std::vector<refresh::QueryId> carryover;
};

// Slot-by-slot re-derivation of a simulation run, written independently of
// the production scheduler: plain observation lists, scores recomputed from
// the literal formulas each slot, tuple sorts for the orderings. Used only to
// cross-check run_simulation.
std::vector<RefSlot> reference_schedules(const refresh::ChangeTrace& trace,
                                         const refresh::PolicyConfig& policy,
                                         std::int64_t budget_ms);

}  // namespace refresh_test
