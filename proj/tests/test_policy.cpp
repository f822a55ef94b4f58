#include <doctest.h>

#include <cmath>

#include "refresh/policy.hpp"

using namespace refresh;

namespace {

QueryHistory history_with(std::vector<std::int32_t> slots, std::vector<std::int64_t> durations,
                          std::vector<bool> changed = {}, std::vector<double> jaccard = {}) {
  QueryHistory h;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    h.add_execution(slots[i], durations[i], !changed.empty() && changed[i],
                    jaccard.empty() ? 0.0 : jaccard[i]);
  }
  return h;
}

std::vector<std::int64_t> unit_durations(std::size_t n) {
  return std::vector<std::int64_t>(n, 1);
}

}  // namespace

TEST_CASE("rank_rr is the reciprocal of the age") {
  QueryHistory h = history_with({0, 4}, {1, 1});
  CHECK(rank_rr(5, h) == 1.0);   // executed one slot ago
  CHECK(rank_rr(8, h) == 0.25);  // executed four slots ago
}

TEST_CASE("rr prefers the larger gap") {
  QueryHistory gap2 = history_with({0, 3}, {1, 1});
  QueryHistory gap3 = history_with({0, 2}, {1, 1});
  CHECK(rank_rr(5, gap3) < rank_rr(5, gap2));
}

TEST_CASE("estimate_runtime takes the lower median of the recent window") {
  CHECK(estimate_runtime(history_with({0}, {7}), 5) == 7);
  // last five: 5 3 8 3 9 -> sorted 3 3 5 8 9
  CHECK(estimate_runtime(history_with({0, 1, 2, 3, 4}, {5, 3, 8, 3, 9}), 5) == 5);
  // even count takes the lower middle
  CHECK(estimate_runtime(history_with({0, 1}, {4, 10}), 5) == 4);
  // a window smaller than the history look at the most recent entries only
  CHECK(estimate_runtime(history_with({0, 1, 2, 3}, {100, 1, 2, 3}), 3) == 2);
}

TEST_CASE("sjf and ljf pull in opposite directions on the median") {
  QueryHistory fast = history_with({0}, {3});
  QueryHistory slow = history_with({0}, {9});
  CHECK(rank_sjf(1, fast, 0.0, 5) < rank_sjf(1, slow, 0.0, 5));
  CHECK(rank_ljf(1, slow, 0.0, 5) < rank_ljf(1, fast, 0.0, 5));
}

TEST_CASE("sjf closed form") {
  QueryHistory h = history_with({0}, {10});
  CHECK(rank_sjf(2, h, 0.5, 5) == doctest::Approx(10.0 * std::exp(-1.0)).epsilon(1e-12));
}

TEST_CASE("exponential aging sends old queries to the front") {
  QueryHistory h = history_with({0}, {1000});
  double previous = rank_sjf(1, h, 0.5, 5);
  for (std::int32_t slot = 2; slot < 60; ++slot) {
    double r = rank_sjf(slot, h, 0.5, 5);
    CHECK(r < previous);
    previous = r;
  }
  CHECK(previous < 1e-9);  // decays toward the front of the ascending order
}

TEST_CASE("change_indicator maps flags to +1/-1") {
  QueryHistory h = history_with({0, 2, 5}, {1, 1, 1}, {false, true, false});
  CHECK(change_indicator(h, 2) == 1);
  CHECK(change_indicator(h, 5) == -1);
  CHECK_THROWS_AS(change_indicator(h, 3), std::invalid_argument);
  CHECK_THROWS_AS(change_indicator(h, 0), std::invalid_argument);  // no observation yet
}

TEST_CASE("rank_cr sums decayed change indicators") {
  // flags +,+,- with no decay
  QueryHistory h =
      history_with({0, 1, 2, 3}, {1, 1, 1, 1}, {false, true, true, false});
  CHECK(rank_cr(4, h, 0.0) == 1.0);
  // all-negative history of length k scores -k
  QueryHistory neg = history_with({0, 1, 2, 3}, {1, 1, 1, 1}, {false, false, false, false});
  CHECK(rank_cr(4, neg, 0.0) == -3.0);
  // fresh query: nothing observed, score 0
  QueryHistory fresh = history_with({0}, {1});
  CHECK(rank_cr(3, fresh, 0.0) == 0.0);
  // single change two slots ago
  QueryHistory single = history_with({0, 3}, {1, 1}, {false, true});
  CHECK(rank_cr(5, single, 0.5) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
}

TEST_CASE("rank_dj sums decayed jaccard observations") {
  QueryHistory zeros = history_with({0, 1, 2}, {1, 1, 1}, {false, false, false}, {0, 0, 0});
  CHECK(rank_dj(3, zeros, 1.0) == 0.0);
  QueryHistory one = history_with({0, 4}, {1, 1}, {false, true}, {0, 1.0});
  CHECK(rank_dj(5, one, 1.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  QueryHistory two = history_with({0, 3, 4}, {1, 1, 1}, {false, true, true}, {0, 0.5, 0.5});
  CHECK(rank_dj(5, two, 0.0) == 1.0);
}

TEST_CASE("scaling all decay weights does not change cr/dj order") {
  std::vector<QueryHistory> histories;
  histories.push_back(history_with({0, 1, 3}, {1, 1, 1}, {false, true, false}, {0, 0.3, 0.0}));
  histories.push_back(history_with({0, 2}, {1, 1}, {false, true}, {0, 0.9}));
  histories.push_back(history_with({0, 1, 2, 3}, {1, 1, 1, 1}, {false, true, true, true},
                                   {0, 0.2, 0.1, 0.4}));
  histories.push_back(history_with({0}, {1}));
  for (double scale : {2.0, 0.5, 8.0}) {
    for (double lambda : {0.0, 0.5, 1.0}) {
      std::vector<double> cr, dj;
      for (const auto& h : histories) {
        cr.push_back(rank_cr(5, h, lambda));
        dj.push_back(rank_dj(5, h, lambda));
      }
      for (std::size_t a = 0; a < histories.size(); ++a) {
        for (std::size_t b = 0; b < histories.size(); ++b) {
          CHECK((cr[a] < cr[b]) == (scale * cr[a] < scale * cr[b]));
          CHECK((dj[a] < dj[b]) == (scale * dj[a] < scale * dj[b]));
        }
      }
    }
  }
}

TEST_CASE("ttl_update doubles on stability and shrinks on change") {
  PolicyConfig cfg = PolicyConfig::parse("ttl:max=32");
  TtlEntry e{1, 1};
  std::vector<int> seen;
  for (std::int32_t slot = 1; slot <= 7; ++slot) {
    e = ttl_update(e, slot, false, cfg);
    seen.push_back(e.ttl);
  }
  CHECK(seen == std::vector<int>{2, 4, 8, 16, 32, 32, 32});
  CHECK(e.due_at == 7 + 32);

  TtlEntry full{32, 0};
  CHECK(ttl_update(full, 10, true, cfg).ttl == 16);  // halve mode
  PolicyConfig reset = PolicyConfig::parse("ttl:max=32,on_change=reset");
  CHECK(ttl_update(full, 10, true, reset).ttl == 1);
  TtlEntry one{1, 0};
  CHECK(ttl_update(one, 10, true, cfg).ttl == 1);  // floor at 1
}

TEST_CASE("policy specs parse and render canonically") {
  CHECK(PolicyConfig::parse("rr").kind == PolicyKind::round_robin);
  CHECK(PolicyConfig::parse("CR:lambda=0.5").lambda == 0.5);
  CHECK(PolicyConfig::parse("dj").lambda == 1.0);  // dynamics decay defaults to 1
  CHECK(PolicyConfig::parse("sjf").lambda == 0.0);
  PolicyConfig ttl = PolicyConfig::parse("ttl:max=128,on_change=reset");
  CHECK(ttl.ttl_max == 128);
  CHECK(ttl.ttl_reset_on_change);
  CHECK(ttl.canonical_name() == "ttl:max=128,on_change=reset");
  CHECK(PolicyConfig::parse("ttl").canonical_name() == "ttl");
  CHECK(PolicyConfig::parse("cr:lambda=0.5").canonical_name() == "cr:lambda=0.5");
  CHECK(PolicyConfig::parse("dj").canonical_name() == "dj");
  CHECK(PolicyConfig::parse("sjf:window=5").canonical_name() == "sjf");
  CHECK_THROWS_AS(PolicyConfig::parse("nope"), std::invalid_argument);
  CHECK_THROWS_AS(PolicyConfig::parse("rr:bogus=1"), std::invalid_argument);
  CHECK_THROWS_AS(PolicyConfig::parse("ttl:max=0"), std::invalid_argument);
  CHECK_THROWS_AS(PolicyConfig::parse("cr:lambda=-1"), std::invalid_argument);
  CHECK_THROWS_AS(PolicyConfig::parse("ttl:on_change=sometimes"), std::invalid_argument);
}

TEST_CASE("round robin rotates from a cold start") {
  PolicyConfig cfg = PolicyConfig::parse("rr");
  std::vector<QueryHistory> histories;
  for (int q = 0; q < 3; ++q) {
    histories.push_back(history_with({0}, {1}));
  }
  PolicyState state = make_policy_state(cfg, 3);
  std::vector<std::int64_t> durations = unit_durations(3);
  std::vector<QueryId> order;
  for (std::int32_t slot = 1; slot <= 6; ++slot) {
    Schedule s = build_schedule(cfg, slot, 1, histories, state, durations);
    REQUIRE(s.executed.size() == 1);
    order.push_back(s.executed[0]);
    histories[s.executed[0]].add_execution(slot, 1, false, 0.0);
  }
  CHECK(order == std::vector<QueryId>{0, 1, 2, 0, 1, 2});
}

TEST_CASE("non-selective schedules execute everything under a loose budget") {
  PolicyConfig cfg = PolicyConfig::parse("cr");
  std::vector<QueryHistory> histories;
  for (int q = 0; q < 5; ++q) {
    histories.push_back(history_with({0}, {10}));
  }
  PolicyState state = make_policy_state(cfg, 5);
  std::vector<std::int64_t> durations(5, 10);
  Schedule s = build_schedule(cfg, 1, 1000, histories, state, durations);
  CHECK(s.executed.size() == 5);
  CHECK(s.spent_ms == 50);
  CHECK(s.carryover.empty());
}

TEST_CASE("the budget walk stops at the first overflowing candidate") {
  PolicyConfig cfg = PolicyConfig::parse("sjf");
  // medians 2 and 5; budget 6 fits the short query, then stops at the long one
  std::vector<QueryHistory> histories;
  histories.push_back(history_with({0}, {2}));
  histories.push_back(history_with({0}, {5}));
  PolicyState state = make_policy_state(cfg, 2);
  std::vector<std::int64_t> durations = {2, 5};
  Schedule s = build_schedule(cfg, 1, 6, histories, state, durations);
  CHECK(s.executed == std::vector<QueryId>{0});
  CHECK(s.spent_ms == 2);
}

TEST_CASE("ttl carries over an unaffordable due query") {
  PolicyConfig cfg = PolicyConfig::parse("ttl:max=4");
  std::vector<QueryHistory> histories{history_with({0}, {50})};
  PolicyState state = make_policy_state(cfg, 1);
  std::vector<std::int64_t> durations = {50};
  Schedule s = build_schedule(cfg, 1, 10, histories, state, durations);
  CHECK(s.executed.empty());
  CHECK(s.carryover == std::vector<QueryId>{0});
  CHECK(state.ttl_carryover == std::vector<QueryId>{0});
  // still first in line next slot
  Schedule s2 = build_schedule(cfg, 2, 100, histories, state, durations);
  CHECK(s2.executed == std::vector<QueryId>{0});
  CHECK(state.ttl_carryover.empty());
}

TEST_CASE("ttl orders due queries by overdue amount then id") {
  PolicyConfig cfg = PolicyConfig::parse("ttl:max=8");
  std::vector<QueryHistory> histories;
  for (int q = 0; q < 3; ++q) histories.push_back(history_with({0}, {1}));
  PolicyState state = make_policy_state(cfg, 3);
  state.ttl[0] = TtlEntry{2, 5};  // due later
  state.ttl[1] = TtlEntry{2, 3};  // most overdue
  state.ttl[2] = TtlEntry{2, 5};
  std::vector<std::int64_t> durations = unit_durations(3);
  Schedule s = build_schedule(cfg, 5, 100, histories, state, durations);
  CHECK(s.executed == std::vector<QueryId>{1, 0, 2});
}

TEST_CASE("clairvoyant executes the oldest pending change first") {
  std::map<QueryId, std::int32_t> pending;
  SUBCASE("no pending changes, empty schedule") {
    Schedule s = select_clairvoyant(pending, 3, 100, unit_durations(2));
    CHECK(s.executed.empty());
    CHECK(s.spent_ms == 0);
  }
  SUBCASE("budget fits one of two") {
    pending[0] = 2;
    pending[1] = 1;  // older change
    Schedule s = select_clairvoyant(pending, 3, 1, unit_durations(2));
    CHECK(s.executed == std::vector<QueryId>{1});
    CHECK(s.carryover == std::vector<QueryId>{0});
  }
  SUBCASE("same change slot breaks ties by id") {
    pending[2] = 1;
    pending[1] = 1;
    Schedule s = select_clairvoyant(pending, 3, 100, unit_durations(3));
    CHECK(s.executed == std::vector<QueryId>{1, 2});
  }
}

TEST_CASE("ties fall back to age and then id") {
  PolicyConfig cfg = PolicyConfig::parse("cr");  // cold start: every score is 0
  std::vector<QueryHistory> histories;
  histories.push_back(history_with({0, 2}, {1, 1}, {false, false}));  // age 1 at slot 3
  histories.push_back(history_with({0}, {1}));                        // age 3 at slot 3
  histories.push_back(history_with({0}, {1}));                        // age 3 at slot 3
  // scores: q0 = -e^0 < 0 (one unchanged observation), q1 = q2 = 0
  PolicyState state = make_policy_state(cfg, 3);
  Schedule s = build_schedule(cfg, 3, 100, histories, state, unit_durations(3));
  // descending score puts the zeros first; age equal, so id decides; q0 last
  CHECK(s.executed == std::vector<QueryId>{1, 2, 0});
}
