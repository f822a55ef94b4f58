#include "ref_sim.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>

namespace refresh_test {

using refresh::ChangeTrace;
using refresh::PolicyConfig;
using refresh::PolicyKind;
using refresh::QueryId;
using refresh::ResultSnapshot;

namespace {

struct Observation {
  std::int32_t slot = 0;
  std::int64_t duration_ms = 0;
  bool changed = false;
  double jaccard = 0.0;
};

double median_of_recent(const std::vector<Observation>& observations, int window) {
  std::vector<std::int64_t> durations;
  for (const Observation& o : observations) {
    durations.push_back(o.duration_ms);
  }
  if (static_cast<int>(durations.size()) > window) {
    durations.erase(durations.begin(), durations.end() - window);
  }
  std::sort(durations.begin(), durations.end());
  return static_cast<double>(durations[(durations.size() - 1) / 2]);
}

double score_of(const PolicyConfig& policy, std::int32_t slot,
                const std::vector<Observation>& observations) {
  const std::int32_t last = observations.back().slot;
  const double age = static_cast<double>(slot - last);
  switch (policy.kind) {
    case PolicyKind::round_robin:
      return 1.0 / age;
    case PolicyKind::shortest_job_first:
      return std::exp(-policy.lambda * age) * median_of_recent(observations, policy.median_window);
    case PolicyKind::longest_job_first:
      return std::exp(-policy.lambda * age) / median_of_recent(observations, policy.median_window);
    case PolicyKind::change_rate: {
      double sum = 0.0;
      for (std::size_t k = 1; k < observations.size(); ++k) {
        double weight = std::exp(-policy.lambda * (slot - observations[k].slot));
        sum += observations[k].changed ? weight : -weight;
      }
      return sum;
    }
    case PolicyKind::dynamics_jaccard: {
      double sum = 0.0;
      for (std::size_t k = 1; k < observations.size(); ++k) {
        sum += std::exp(-policy.lambda * (slot - observations[k].slot)) * observations[k].jaccard;
      }
      return sum;
    }
    default:
      return 0.0;
  }
}

}  // namespace

std::vector<RefSlot> reference_schedules(const ChangeTrace& trace, const PolicyConfig& policy,
                                         std::int64_t budget_ms) {
  const std::int32_t n = trace.n_queries();
  std::vector<std::vector<Observation>> observations(n);
  std::vector<std::int32_t> baseline(n);
  for (QueryId q = 0; q < n; ++q) {
    observations[q].push_back({0, trace.duration_ms(q, 0), false, 0.0});
    baseline[q] = trace.result_id(q, 0);
  }

  std::vector<int> ttl(n, 1);
  std::vector<std::int32_t> due(n, 1);
  std::vector<QueryId> carryover;
  std::set<std::pair<std::int32_t, QueryId>> pending;  // (change slot, query)
  std::vector<char> is_pending(n, 0);

  std::vector<RefSlot> out;
  for (std::int32_t slot = 1; slot <= trace.n_revisions(); ++slot) {
    if (policy.kind == PolicyKind::clairvoyant) {
      for (QueryId q = 0; q < n; ++q) {
        if (is_pending[q]) {
          continue;
        }
        const ResultSnapshot* cur = trace.result(q, slot);
        const ResultSnapshot* prev = slot >= 1 ? trace.last_known_result(q, slot - 1) : nullptr;
        if (cur != nullptr && prev != nullptr && refresh::result_changed(*prev, *cur)) {
          pending.emplace(slot, q);
          is_pending[q] = 1;
        }
      }
    }

    // candidate order
    std::vector<QueryId> candidates;
    if (policy.kind == PolicyKind::clairvoyant) {
      for (const auto& [change_slot, q] : pending) {
        candidates.push_back(q);
      }
    } else if (policy.kind == PolicyKind::ttl) {
      candidates = carryover;
      std::vector<std::tuple<std::int32_t, QueryId>> due_now;
      for (QueryId q = 0; q < n; ++q) {
        if (due[q] <= slot &&
            std::find(carryover.begin(), carryover.end(), q) == carryover.end()) {
          due_now.emplace_back(due[q], q);
        }
      }
      std::sort(due_now.begin(), due_now.end());
      for (const auto& [due_at, q] : due_now) {
        candidates.push_back(q);
      }
    } else {
      std::vector<std::tuple<double, std::int32_t, QueryId>> keyed;
      const bool descending = policy.kind == PolicyKind::change_rate ||
                              policy.kind == PolicyKind::dynamics_jaccard;
      for (QueryId q = 0; q < n; ++q) {
        double score = score_of(policy, slot, observations[q]);
        std::int32_t age = slot - observations[q].back().slot;
        keyed.emplace_back(descending ? -score : score, -age, q);
      }
      std::stable_sort(keyed.begin(), keyed.end());
      for (const auto& [key, neg_age, q] : keyed) {
        candidates.push_back(q);
      }
    }

    // budget walk, stopping at the first overflow
    RefSlot ref;
    std::size_t stop = candidates.size();
    for (std::size_t k = 0; k < candidates.size(); ++k) {
      std::int64_t d = trace.duration_ms(candidates[k], slot);
      if (ref.spent_ms + d > budget_ms) {
        stop = k;
        break;
      }
      ref.spent_ms += d;
      ref.executed.push_back(candidates[k]);
    }
    if (policy.kind == PolicyKind::ttl || policy.kind == PolicyKind::clairvoyant) {
      ref.carryover.assign(candidates.begin() + stop, candidates.end());
    }
    if (policy.kind == PolicyKind::ttl) {
      carryover = ref.carryover;
    }

    // observations
    for (QueryId q : ref.executed) {
      std::int32_t observed = trace.result_id(q, slot);
      if (observed == ChangeTrace::kFailed) {
        continue;  // nothing observed, query stays due/pending
      }
      bool changed = false;
      double jaccard = 0.0;
      if (baseline[q] != ChangeTrace::kFailed) {
        const ResultSnapshot& prev = trace.snapshot(baseline[q]);
        const ResultSnapshot& cur = trace.snapshot(observed);
        changed = refresh::result_changed(prev, cur);
        jaccard = refresh::jaccard_distance(prev, cur);
      }
      observations[q].push_back({slot, trace.duration_ms(q, slot), changed, jaccard});
      baseline[q] = observed;
      if (policy.kind == PolicyKind::ttl) {
        if (changed) {
          ttl[q] = policy.ttl_reset_on_change ? 1 : std::max(1, ttl[q] / 2);
        } else {
          ttl[q] = std::min(2 * ttl[q], policy.ttl_max);
        }
        due[q] = slot + ttl[q];
      }
      if (policy.kind == PolicyKind::clairvoyant) {
        for (auto it = pending.begin(); it != pending.end();) {
          if (it->second == q) {
            it = pending.erase(it);
          } else {
            ++it;
          }
        }
        is_pending[q] = 0;
      }
    }
    out.push_back(std::move(ref));
  }
  return out;
}

}  // namespace refresh_test
