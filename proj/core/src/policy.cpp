#include "refresh/policy.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <stdexcept>

namespace refresh {

bool is_selective(PolicyKind kind) {
  return kind == PolicyKind::ttl || kind == PolicyKind::clairvoyant;
}

namespace {

struct KindName {
  PolicyKind kind;
  const char* name;
};

constexpr KindName kKindNames[] = {
    {PolicyKind::round_robin, "rr"},
    {PolicyKind::shortest_job_first, "sjf"},
    {PolicyKind::longest_job_first, "ljf"},
    {PolicyKind::change_rate, "cr"},
    {PolicyKind::dynamics_jaccard, "dj"},
    {PolicyKind::ttl, "ttl"},
    {PolicyKind::clairvoyant, "cv"},
};

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c += 'a' - 'A';
  }
  return out;
}

double default_lambda(PolicyKind kind) {
  return kind == PolicyKind::dynamics_jaccard ? 1.0 : 0.0;
}

double parse_double(std::string_view text, const std::string& what) {
  std::string buf(text);
  char* end = nullptr;
  double v = std::strtod(buf.c_str(), &end);
  if (end != buf.c_str() + buf.size() || buf.empty()) {
    throw std::invalid_argument("bad " + what + ": '" + buf + "'");
  }
  return v;
}

int parse_int(std::string_view text, const std::string& what) {
  int v = 0;
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || p != text.data() + text.size()) {
    throw std::invalid_argument("bad " + what + ": '" + std::string(text) + "'");
  }
  return v;
}

std::string format_double(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

}  // namespace

PolicyConfig PolicyConfig::parse(std::string_view spec) {
  std::string_view name = spec;
  std::string_view params;
  if (auto colon = spec.find(':'); colon != std::string_view::npos) {
    name = spec.substr(0, colon);
    params = spec.substr(colon + 1);
  }
  std::string lname = to_lower(name);
  PolicyConfig cfg;
  bool found = false;
  for (const auto& [kind, kname] : kKindNames) {
    if (lname == kname) {
      cfg.kind = kind;
      found = true;
      break;
    }
  }
  if (!found) {
    throw std::invalid_argument("unknown policy '" + std::string(name) + "'");
  }
  cfg.lambda = default_lambda(cfg.kind);

  while (!params.empty()) {
    auto comma = params.find(',');
    std::string_view item = params.substr(0, comma);
    params = comma == std::string_view::npos ? std::string_view{} : params.substr(comma + 1);
    auto eq = item.find('=');
    if (eq == std::string_view::npos) {
      throw std::invalid_argument("expected key=value, got '" + std::string(item) + "'");
    }
    std::string key = to_lower(item.substr(0, eq));
    std::string_view value = item.substr(eq + 1);
    if (key == "lambda") {
      cfg.lambda = parse_double(value, "lambda");
      if (cfg.lambda < 0) {
        throw std::invalid_argument("lambda must be non-negative");
      }
    } else if (key == "window") {
      cfg.median_window = parse_int(value, "window");
      if (cfg.median_window < 1) {
        throw std::invalid_argument("window must be positive");
      }
    } else if (key == "max") {
      cfg.ttl_max = parse_int(value, "max");
      if (cfg.ttl_max < 1) {
        throw std::invalid_argument("max must be positive");
      }
    } else if (key == "on_change") {
      std::string mode = to_lower(value);
      if (mode == "reset") {
        cfg.ttl_reset_on_change = true;
      } else if (mode == "halve") {
        cfg.ttl_reset_on_change = false;
      } else {
        throw std::invalid_argument("on_change must be halve or reset");
      }
    } else {
      throw std::invalid_argument("unknown policy parameter '" + key + "'");
    }
  }
  return cfg;
}

std::string PolicyConfig::canonical_name() const {
  std::string name;
  for (const auto& [kind, kname] : kKindNames) {
    if (kind == this->kind) {
      name = kname;
      break;
    }
  }
  std::vector<std::string> params;
  switch (kind) {
    case PolicyKind::shortest_job_first:
    case PolicyKind::longest_job_first:
    case PolicyKind::change_rate:
    case PolicyKind::dynamics_jaccard:
      if (lambda != default_lambda(kind)) {
        params.push_back("lambda=" + format_double(lambda));
      }
      if (median_window != 5 &&
          (kind == PolicyKind::shortest_job_first || kind == PolicyKind::longest_job_first)) {
        params.push_back("window=" + std::to_string(median_window));
      }
      break;
    case PolicyKind::ttl:
      if (ttl_max != 32) {
        params.push_back("max=" + std::to_string(ttl_max));
      }
      if (ttl_reset_on_change) {
        params.push_back("on_change=reset");
      }
      break;
    default:
      break;
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    name += i == 0 ? ":" : ",";
    name += params[i];
  }
  return name;
}

void QueryHistory::add_execution(std::int32_t slot, std::int64_t duration_ms, bool changed,
                                 double jaccard) {
  exec_slots.push_back(slot);
  durations_ms.push_back(duration_ms);
  change_flags.push_back(changed ? 1 : 0);
  jaccard_obs.push_back(jaccard);
}

double rank_rr(std::int32_t slot, const QueryHistory& h) {
  return 1.0 / static_cast<double>(slot - h.last_exec());
}

std::int64_t estimate_runtime(const QueryHistory& h, int window) {
  std::size_t n = h.durations_ms.size();
  std::size_t k = std::min<std::size_t>(n, static_cast<std::size_t>(window));
  std::vector<std::int64_t> recent(h.durations_ms.end() - k, h.durations_ms.end());
  auto mid = recent.begin() + (k - 1) / 2;  // lower median for even counts
  std::nth_element(recent.begin(), mid, recent.end());
  return *mid;
}

double rank_sjf(std::int32_t slot, const QueryHistory& h, double lambda, int window) {
  double age = static_cast<double>(slot - h.last_exec());
  return std::exp(-lambda * age) * static_cast<double>(estimate_runtime(h, window));
}

double rank_ljf(std::int32_t slot, const QueryHistory& h, double lambda, int window) {
  double age = static_cast<double>(slot - h.last_exec());
  return std::exp(-lambda * age) / static_cast<double>(estimate_runtime(h, window));
}

int change_indicator(const QueryHistory& h, std::int32_t exec_slot) {
  auto it = std::lower_bound(h.exec_slots.begin(), h.exec_slots.end(), exec_slot);
  if (it == h.exec_slots.end() || *it != exec_slot) {
    throw std::invalid_argument("slot " + std::to_string(exec_slot) + " is not an execution slot");
  }
  std::size_t idx = static_cast<std::size_t>(it - h.exec_slots.begin());
  if (idx == 0) {
    throw std::invalid_argument("the initial execution has no change observation");
  }
  return h.change_flags[idx] ? 1 : -1;
}

double rank_cr(std::int32_t slot, const QueryHistory& h, double lambda) {
  double sum = 0.0;
  for (std::size_t k = 1; k < h.size(); ++k) {
    double age = static_cast<double>(slot - h.exec_slots[k]);
    sum += std::exp(-lambda * age) * (h.change_flags[k] ? 1.0 : -1.0);
  }
  return sum;
}

double rank_dj(std::int32_t slot, const QueryHistory& h, double lambda) {
  double sum = 0.0;
  for (std::size_t k = 1; k < h.size(); ++k) {
    double age = static_cast<double>(slot - h.exec_slots[k]);
    sum += std::exp(-lambda * age) * h.jaccard_obs[k];
  }
  return sum;
}

TtlEntry ttl_update(TtlEntry entry, std::int32_t slot, bool changed, const PolicyConfig& cfg) {
  if (changed) {
    entry.ttl = cfg.ttl_reset_on_change ? 1 : std::max(1, entry.ttl / 2);
  } else {
    entry.ttl = std::min(2 * entry.ttl, cfg.ttl_max);
  }
  entry.due_at = slot + entry.ttl;
  return entry;
}

PolicyState make_policy_state(const PolicyConfig& cfg, std::int32_t n_queries) {
  PolicyState state;
  if (cfg.kind == PolicyKind::ttl) {
    state.ttl.assign(n_queries, TtlEntry{});
  }
  return state;
}

namespace {

Schedule budget_walk(std::int32_t slot, std::int64_t budget_ms, std::vector<QueryId> candidates,
                     std::span<const std::int64_t> slot_durations, bool keep_carryover) {
  Schedule schedule;
  schedule.slot = slot;
  std::size_t next = 0;
  while (next < candidates.size()) {
    std::int64_t d = slot_durations[candidates[next]];
    if (schedule.spent_ms + d > budget_ms) {
      break;
    }
    schedule.spent_ms += d;
    schedule.executed.push_back(candidates[next]);
    ++next;
  }
  if (keep_carryover) {
    schedule.carryover.assign(candidates.begin() + next, candidates.end());
  }
  return schedule;
}

}  // namespace

Schedule select_clairvoyant(const std::map<QueryId, std::int32_t>& pending_first_change,
                            std::int32_t slot, std::int64_t budget_ms,
                            std::span<const std::int64_t> slot_durations) {
  // oldest undetected change first, ties by query id
  std::vector<std::pair<std::int32_t, QueryId>> queue;
  queue.reserve(pending_first_change.size());
  for (const auto& [q, change_slot] : pending_first_change) {
    queue.emplace_back(change_slot, q);
  }
  std::sort(queue.begin(), queue.end());
  std::vector<QueryId> candidates;
  candidates.reserve(queue.size());
  for (const auto& [change_slot, q] : queue) {
    candidates.push_back(q);
  }
  return budget_walk(slot, budget_ms, std::move(candidates), slot_durations, true);
}

Schedule build_schedule(const PolicyConfig& cfg, std::int32_t slot, std::int64_t budget_ms,
                        std::span<const QueryHistory> histories, PolicyState& state,
                        std::span<const std::int64_t> slot_durations) {
  const std::int32_t n = static_cast<std::int32_t>(histories.size());

  switch (cfg.kind) {
    case PolicyKind::round_robin:
    case PolicyKind::shortest_job_first:
    case PolicyKind::longest_job_first:
    case PolicyKind::change_rate:
    case PolicyKind::dynamics_jaccard: {
      // ascending rank for rr/sjf/ljf, descending for cr/dj
      double direction = (cfg.kind == PolicyKind::change_rate ||
                          cfg.kind == PolicyKind::dynamics_jaccard)
                             ? -1.0
                             : 1.0;
      std::vector<double> key(n);
      for (QueryId q = 0; q < n; ++q) {
        double r = 0.0;
        switch (cfg.kind) {
          case PolicyKind::round_robin: r = rank_rr(slot, histories[q]); break;
          case PolicyKind::shortest_job_first:
            r = rank_sjf(slot, histories[q], cfg.lambda, cfg.median_window);
            break;
          case PolicyKind::longest_job_first:
            r = rank_ljf(slot, histories[q], cfg.lambda, cfg.median_window);
            break;
          case PolicyKind::change_rate: r = rank_cr(slot, histories[q], cfg.lambda); break;
          default: r = rank_dj(slot, histories[q], cfg.lambda); break;
        }
        key[q] = direction * r;
      }
      std::vector<QueryId> candidates(n);
      for (QueryId q = 0; q < n; ++q) candidates[q] = q;
      std::sort(candidates.begin(), candidates.end(), [&](QueryId a, QueryId b) {
        if (key[a] != key[b]) return key[a] < key[b];
        std::int32_t age_a = slot - histories[a].last_exec();
        std::int32_t age_b = slot - histories[b].last_exec();
        if (age_a != age_b) return age_a > age_b;
        return a < b;
      });
      return budget_walk(slot, budget_ms, std::move(candidates), slot_durations, false);
    }

    case PolicyKind::ttl: {
      std::vector<QueryId> candidates = state.ttl_carryover;
      std::vector<char> queued(n, 0);
      for (QueryId q : candidates) queued[q] = 1;
      std::vector<QueryId> due;
      for (QueryId q = 0; q < n; ++q) {
        if (!queued[q] && state.ttl[q].due_at <= slot) {
          due.push_back(q);
        }
      }
      // most overdue first, ties by query id
      std::sort(due.begin(), due.end(), [&](QueryId a, QueryId b) {
        if (state.ttl[a].due_at != state.ttl[b].due_at) {
          return state.ttl[a].due_at < state.ttl[b].due_at;
        }
        return a < b;
      });
      candidates.insert(candidates.end(), due.begin(), due.end());
      Schedule schedule = budget_walk(slot, budget_ms, std::move(candidates), slot_durations, true);
      state.ttl_carryover = schedule.carryover;
      return schedule;
    }

    case PolicyKind::clairvoyant:
      return select_clairvoyant(state.pending_first_change, slot, budget_ms, slot_durations);
  }
  throw std::invalid_argument("unknown policy kind");
}

}  // namespace refresh
