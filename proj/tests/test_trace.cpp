#include <doctest.h>

#include <random>
#include <sstream>

#include "refresh/trace.hpp"

using namespace refresh;

namespace {

ResultSnapshot set_of(std::vector<std::string> tokens) {
  return ResultSnapshot::from_set(std::move(tokens));
}

// 2 queries, 3 revisions; query 1 changes at revision 2.
ChangeTrace small_trace() {
  ChangeTrace t(2, 3);
  std::int32_t r0 = t.intern_result(set_of({"a", "b"}));
  std::int32_t r1 = t.intern_result(set_of({"x"}));
  std::int32_t r2 = t.intern_result(set_of({"y"}));
  for (std::int32_t rev = 0; rev <= 3; ++rev) {
    t.set_record(0, rev, 10, r0);
    t.set_record(1, rev, 20, rev < 2 ? r1 : r2);
  }
  t.validate();
  return t;
}

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

ResultSnapshot random_snapshot(std::mt19937_64& rng) {
  std::size_t n = rng() % 8;
  std::vector<std::string> tokens;
  for (std::size_t i = 0; i < n; ++i) {
    tokens.push_back("t" + std::to_string(rng() % 10));
  }
  return ResultSnapshot::from_set(std::move(tokens));
}

}  // namespace

TEST_CASE("result_changed compares sets for unordered snapshots") {
  CHECK_FALSE(result_changed(set_of({"a", "b"}), set_of({"b", "a"})));
  CHECK(result_changed(set_of({"a", "b"}), set_of({"a", "b", "c"})));
  CHECK_FALSE(result_changed(set_of({}), set_of({})));
}

TEST_CASE("result_changed compares sequences for ordered snapshots") {
  auto ab = ResultSnapshot::from_sequence({"a", "b"});
  auto ba = ResultSnapshot::from_sequence({"b", "a"});
  CHECK(result_changed(ab, ba));
  CHECK_FALSE(result_changed(ab, ab));
  CHECK_THROWS_AS(result_changed(ab, set_of({"a", "b"})), std::invalid_argument);
}

TEST_CASE("result_changed is false on identical snapshots") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 200; ++i) {
    ResultSnapshot s = random_snapshot(rng);
    CHECK_FALSE(result_changed(s, s));
  }
}

TEST_CASE("unordered snapshots ignore enumeration order") {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 200; ++i) {
    std::vector<std::string> tokens;
    std::size_t n = 1 + rng() % 8;
    for (std::size_t k = 0; k < n; ++k) {
      tokens.push_back("t" + std::to_string(rng() % 12));
    }
    std::vector<std::string> shuffled = tokens;
    for (std::size_t k = shuffled.size(); k > 1; --k) {
      std::swap(shuffled[k - 1], shuffled[rng() % k]);
    }
    CHECK_FALSE(result_changed(ResultSnapshot::from_set(tokens),
                               ResultSnapshot::from_set(shuffled)));
  }
}

TEST_CASE("jaccard_distance on the worked examples") {
  CHECK(jaccard_distance(set_of({"a", "b", "c"}), set_of({"a", "b", "c"})) == 0.0);
  CHECK(jaccard_distance(set_of({"a", "b"}), set_of({"c", "d"})) == 1.0);
  // |intersection| = 2, |union| = 4
  CHECK(jaccard_distance(set_of({"a", "b", "c"}), set_of({"b", "c", "d"})) == 0.5);
  CHECK(jaccard_distance(set_of({}), set_of({})) == 0.0);
  CHECK(jaccard_distance(set_of({}), set_of({"a"})) == 1.0);
}

TEST_CASE("jaccard_distance is a bounded symmetric distance") {
  std::mt19937_64 rng(42);
  for (int i = 0; i < 2000; ++i) {
    ResultSnapshot a = random_snapshot(rng);
    ResultSnapshot b = random_snapshot(rng);
    double d = jaccard_distance(a, b);
    CHECK(d >= 0.0);
    CHECK(d <= 1.0);
    CHECK(d == jaccard_distance(b, a));
    CHECK(jaccard_distance(a, a) == 0.0);
  }
}

TEST_CASE("ask snapshots produce 0/1 jaccard") {
  auto yes = ResultSnapshot::from_ask(true);
  auto no = ResultSnapshot::from_ask(false);
  CHECK(jaccard_distance(yes, yes) == 0.0);
  CHECK(jaccard_distance(yes, no) == 1.0);
}

TEST_CASE("changed_set finds exactly the changed queries") {
  ChangeTrace t = small_trace();
  CHECK(changed_set(t, 1).empty());
  CHECK(changed_set(t, 2) == std::vector<QueryId>{1});
  CHECK(changed_set(t, 3).empty());
  CHECK_THROWS_AS(changed_set(t, 0), TraceError);
  CHECK_THROWS_AS(changed_set(t, 4), TraceError);
}

TEST_CASE("changed_set covers the full id set when everything changes") {
  ChangeTrace t(3, 1);
  std::int32_t before = t.intern_result(set_of({"a"}));
  std::int32_t after = t.intern_result(set_of({"b"}));
  for (QueryId q = 0; q < 3; ++q) {
    t.set_record(q, 0, 5, before);
    t.set_record(q, 1, 5, after);
  }
  CHECK(changed_set(t, 1) == std::vector<QueryId>{0, 1, 2});
}

TEST_CASE("changed_set equals brute-force recomputation from raw snapshots") {
  std::mt19937_64 rng(99);
  for (int instance = 0; instance < 50; ++instance) {
    std::int32_t nq = 1 + static_cast<std::int32_t>(rng() % 5);
    std::int32_t nrev = 1 + static_cast<std::int32_t>(rng() % 10);
    ChangeTrace t(nq, nrev);
    std::vector<std::int32_t> cur(nq);
    int counter = 0;
    for (QueryId q = 0; q < nq; ++q) {
      cur[q] = t.intern_result(set_of({"s" + std::to_string(counter++)}));
      t.set_record(q, 0, 1, cur[q]);
    }
    for (std::int32_t rev = 1; rev <= nrev; ++rev) {
      for (QueryId q = 0; q < nq; ++q) {
        if (uniform01(rng) < 0.3) {
          cur[q] = t.intern_result(set_of({"s" + std::to_string(counter++)}));
        }
        t.set_record(q, rev, 1, cur[q]);
      }
    }
    for (std::int32_t rev = 1; rev <= nrev; ++rev) {
      std::vector<QueryId> expected;
      for (QueryId q = 0; q < nq; ++q) {
        if (result_changed(*t.result(q, rev - 1), *t.result(q, rev))) {
          expected.push_back(q);
        }
      }
      CHECK(changed_set(t, rev) == expected);
    }
  }
}

TEST_CASE("trace save/load round-trips structurally") {
  ChangeTrace t = small_trace();
  std::stringstream buffer;
  write_trace(t, buffer);
  ChangeTrace loaded = read_trace(buffer);
  CHECK(loaded == t);
}

TEST_CASE("tokens with tabs, newlines, and percents survive the file format") {
  ChangeTrace t(1, 0);
  std::int32_t r = t.intern_result(set_of({"a\tb", "c\nd", "50%", "plain"}));
  t.set_record(0, 0, 7, r);
  std::stringstream buffer;
  write_trace(t, buffer);
  ChangeTrace loaded = read_trace(buffer);
  CHECK(loaded == t);
}

TEST_CASE("ordered snapshots keep their sequence through the file format") {
  ChangeTrace t(1, 1);
  std::int32_t r0 = t.intern_result(ResultSnapshot::from_sequence({"b", "a"}));
  std::int32_t r1 = t.intern_result(ResultSnapshot::from_sequence({"a", "b"}));
  t.set_record(0, 0, 3, r0);
  t.set_record(0, 1, 3, r1);
  std::stringstream buffer;
  write_trace(t, buffer);
  ChangeTrace loaded = read_trace(buffer);
  CHECK(loaded == t);
  CHECK(changed_set(loaded, 1) == std::vector<QueryId>{0});
}

TEST_CASE("load rejects a missing grid record") {
  std::string text =
      "TRACE v1 queries=2 revisions=2\n"
      "R 0 ordered=0 a\n"
      "E 0 0 5 0\nE 0 1 5 0\nE 0 2 5 0\n"
      "E 1 0 5 0\nE 1 2 5 0\n";  // (q=1, rev=1) missing
  std::istringstream in(text);
  try {
    read_trace(in);
    FAIL("expected incomplete grid");
  } catch (const TraceError& e) {
    CHECK(e.kind() == TraceError::Kind::incomplete_grid);
    CHECK(std::string(e.what()).find("query 1") != std::string::npos);
    CHECK(std::string(e.what()).find("revision 1") != std::string::npos);
  }
}

TEST_CASE("load rejects a dangling result id") {
  std::string text =
      "TRACE v1 queries=1 revisions=0\n"
      "R r1 ordered=0 a\n"
      "E 0 0 5 r99\n";
  std::istringstream in(text);
  try {
    read_trace(in);
    FAIL("expected dangling result");
  } catch (const TraceError& e) {
    CHECK(e.kind() == TraceError::Kind::dangling_result);
    CHECK(std::string(e.what()).find("r99") != std::string::npos);
  }
}

TEST_CASE("load rejects a malformed header") {
  std::istringstream in("TRACE v2 queries=1 revisions=0\n");
  try {
    read_trace(in);
    FAIL("expected bad header");
  } catch (const TraceError& e) {
    CHECK(e.kind() == TraceError::Kind::bad_header);
  }
}

TEST_CASE("load rejects duplicates and bad values") {
  SUBCASE("duplicate result id") {
    std::istringstream in(
        "TRACE v1 queries=1 revisions=0\nR 0 ordered=0 a\nR 0 ordered=0 b\nE 0 0 5 0\n");
    CHECK_THROWS_AS(read_trace(in), TraceError);
  }
  SUBCASE("duplicate execution record") {
    std::istringstream in(
        "TRACE v1 queries=1 revisions=0\nR 0 ordered=0 a\nE 0 0 5 0\nE 0 0 6 0\n");
    CHECK_THROWS_AS(read_trace(in), TraceError);
  }
  SUBCASE("non-positive duration") {
    std::istringstream in("TRACE v1 queries=1 revisions=0\nR 0 ordered=0 a\nE 0 0 0 0\n");
    CHECK_THROWS_AS(read_trace(in), TraceError);
  }
  SUBCASE("revision out of range") {
    std::istringstream in(
        "TRACE v1 queries=1 revisions=0\nR 0 ordered=0 a\nE 0 0 5 0\nE 0 1 5 0\n");
    CHECK_THROWS_AS(read_trace(in), TraceError);
  }
}

TEST_CASE("failed executions round-trip as sentinels") {
  ChangeTrace t(2, 1);
  std::int32_t r = t.intern_result(set_of({"a"}));
  t.set_record(0, 0, 5, r);
  t.set_record(1, 0, 5, r);
  t.set_record(0, 1, 5, r);
  t.set_failed(1, 1, 9);
  t.validate();
  std::stringstream buffer;
  write_trace(t, buffer);
  ChangeTrace loaded = read_trace(buffer);
  CHECK(loaded == t);
  CHECK(loaded.result(1, 1) == nullptr);
  CHECK(loaded.duration_ms(1, 1) == 9);
  // a failed poll is observably unchanged
  CHECK(changed_set(loaded, 1).empty());
  // last known result skips the sentinel
  CHECK(loaded.last_known_result(1, 1) == loaded.result(1, 0));
}

TEST_CASE("interning stores each distinct result once") {
  ChangeTrace t(1, 2);
  std::int32_t a = t.intern_result(set_of({"x", "y"}));
  std::int32_t b = t.intern_result(set_of({"y", "x"}));  // same set
  std::int32_t c = t.intern_result(set_of({"z"}));
  CHECK(a == b);
  CHECK(a != c);
  CHECK(t.n_results() == 2);
}
