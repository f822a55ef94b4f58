#include "refresh/trace.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace refresh {

namespace {

std::vector<std::string> sorted_unique(std::vector<std::string> tokens) {
  std::sort(tokens.begin(), tokens.end());
  tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
  return tokens;
}

// Dedup key for interning: length-prefixed tokens, immune to token content.
std::string intern_key(const ResultSnapshot& s) {
  std::string key = s.ordered ? "o" : "u";
  const auto& tokens = s.ordered ? s.sequence : s.elements;
  for (const auto& t : tokens) {
    key += std::to_string(t.size());
    key += ':';
    key += t;
  }
  return key;
}

std::string encode_token(const std::string& token) {
  std::string out;
  out.reserve(token.size());
  for (char c : token) {
    switch (c) {
      case '%': out += "%25"; break;
      case '\t': out += "%09"; break;
      case '\n': out += "%0A"; break;
      case '\r': out += "%0D"; break;
      default: out += c;
    }
  }
  return out;
}

int hex_digit(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

std::string decode_token(std::string_view raw, int line_no) {
  std::string out;
  out.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] != '%') {
      out += raw[i];
      continue;
    }
    if (i + 2 >= raw.size()) {
      throw TraceError(TraceError::Kind::bad_value,
                       "line " + std::to_string(line_no) + ": truncated %-escape in token");
    }
    int hi = hex_digit(raw[i + 1]);
    int lo = hex_digit(raw[i + 2]);
    if (hi < 0 || lo < 0) {
      throw TraceError(TraceError::Kind::bad_value,
                       "line " + std::to_string(line_no) + ": bad %-escape in token");
    }
    out += static_cast<char>(hi * 16 + lo);
    i += 2;
  }
  return out;
}

}  // namespace

ResultSnapshot ResultSnapshot::from_set(std::vector<std::string> tokens) {
  ResultSnapshot s;
  s.elements = sorted_unique(std::move(tokens));
  s.ordered = false;
  return s;
}

ResultSnapshot ResultSnapshot::from_sequence(std::vector<std::string> tokens) {
  ResultSnapshot s;
  s.elements = sorted_unique(tokens);
  s.sequence = std::move(tokens);
  s.ordered = true;
  return s;
}

ResultSnapshot ResultSnapshot::from_ask(bool value) {
  ResultSnapshot s;
  s.elements = {value ? "true" : "false"};
  s.ordered = false;
  return s;
}

bool result_changed(const ResultSnapshot& prev, const ResultSnapshot& cur) {
  if (prev.ordered != cur.ordered) {
    throw std::invalid_argument("cannot compare ordered and unordered result snapshots");
  }
  if (prev.ordered) {
    return prev.sequence != cur.sequence;
  }
  return prev.elements != cur.elements;
}

double jaccard_distance(const ResultSnapshot& a, const ResultSnapshot& b) {
  const auto& x = a.elements;
  const auto& y = b.elements;
  if (x.empty() && y.empty()) {
    return 0.0;
  }
  std::size_t inter = 0;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < x.size() && j < y.size()) {
    int cmp = x[i].compare(y[j]);
    if (cmp == 0) {
      ++inter;
      ++i;
      ++j;
    } else if (cmp < 0) {
      ++i;
    } else {
      ++j;
    }
  }
  std::size_t uni = x.size() + y.size() - inter;
  return 1.0 - static_cast<double>(inter) / static_cast<double>(uni);
}

ChangeTrace::ChangeTrace(std::int32_t n_queries, std::int32_t n_revisions)
    : n_queries_(n_queries), n_revisions_(n_revisions) {
  if (n_queries <= 0) {
    throw TraceError(TraceError::Kind::bad_value, "trace needs at least one query");
  }
  if (n_revisions < 0) {
    throw TraceError(TraceError::Kind::bad_value, "negative revision count");
  }
  std::size_t cells = static_cast<std::size_t>(n_queries) * (n_revisions + 1);
  durations_.assign(cells, 0);
  result_ids_.assign(cells, kFailed);
}

std::int32_t ChangeTrace::add_revision() {
  ++n_revisions_;
  durations_.resize(durations_.size() + n_queries_, 0);
  result_ids_.resize(result_ids_.size() + n_queries_, kFailed);
  return n_revisions_;
}

std::size_t ChangeTrace::cell(QueryId q, std::int32_t revision) const {
  return static_cast<std::size_t>(revision) * n_queries_ + q;
}

void ChangeTrace::check_bounds(QueryId q, std::int32_t revision) const {
  if (q < 0 || q >= n_queries_) {
    throw TraceError(TraceError::Kind::out_of_range,
                     "query id " + std::to_string(q) + " outside 0.." + std::to_string(n_queries_ - 1));
  }
  if (revision < 0 || revision > n_revisions_) {
    throw TraceError(TraceError::Kind::out_of_range,
                     "revision " + std::to_string(revision) + " outside 0.." + std::to_string(n_revisions_));
  }
}

std::int32_t ChangeTrace::intern_result(ResultSnapshot snapshot) {
  std::string key = intern_key(snapshot);
  auto it = result_index_.find(key);
  if (it != result_index_.end()) {
    return it->second;
  }
  std::int32_t id = static_cast<std::int32_t>(results_.size());
  results_.push_back(std::move(snapshot));
  result_index_.emplace(std::move(key), id);
  return id;
}

void ChangeTrace::set_record(QueryId q, std::int32_t revision, std::int64_t dur,
                             std::int32_t result_id) {
  check_bounds(q, revision);
  if (dur <= 0) {
    throw TraceError(TraceError::Kind::bad_value,
                     "non-positive duration for query " + std::to_string(q) + " revision " +
                         std::to_string(revision));
  }
  if (result_id < 0 || result_id >= n_results()) {
    throw TraceError(TraceError::Kind::dangling_result,
                     "unknown result id " + std::to_string(result_id));
  }
  std::size_t c = cell(q, revision);
  if (durations_[c] != 0) {
    throw TraceError(TraceError::Kind::duplicate_record,
                     "duplicate record for query " + std::to_string(q) + " revision " +
                         std::to_string(revision));
  }
  durations_[c] = dur;
  result_ids_[c] = result_id;
}

void ChangeTrace::set_failed(QueryId q, std::int32_t revision, std::int64_t dur) {
  check_bounds(q, revision);
  if (dur <= 0) {
    throw TraceError(TraceError::Kind::bad_value,
                     "non-positive duration for query " + std::to_string(q) + " revision " +
                         std::to_string(revision));
  }
  std::size_t c = cell(q, revision);
  if (durations_[c] != 0) {
    throw TraceError(TraceError::Kind::duplicate_record,
                     "duplicate record for query " + std::to_string(q) + " revision " +
                         std::to_string(revision));
  }
  durations_[c] = dur;
  result_ids_[c] = kFailed;
}

std::int64_t ChangeTrace::duration_ms(QueryId q, std::int32_t revision) const {
  check_bounds(q, revision);
  return durations_[cell(q, revision)];
}

std::int32_t ChangeTrace::result_id(QueryId q, std::int32_t revision) const {
  check_bounds(q, revision);
  return result_ids_[cell(q, revision)];
}

const ResultSnapshot* ChangeTrace::result(QueryId q, std::int32_t revision) const {
  std::int32_t id = result_id(q, revision);
  return id == kFailed ? nullptr : &results_[id];
}

const ResultSnapshot& ChangeTrace::snapshot(std::int32_t result_id) const {
  return results_.at(result_id);
}

const ResultSnapshot* ChangeTrace::last_known_result(QueryId q, std::int32_t rev) const {
  check_bounds(q, rev);
  for (std::int32_t r = rev; r >= 0; --r) {
    std::int32_t id = result_ids_[cell(q, r)];
    if (id != kFailed) {
      return &results_[id];
    }
  }
  return nullptr;
}

std::span<const std::int64_t> ChangeTrace::slot_durations(std::int32_t revision) const {
  check_bounds(0, revision);
  return {durations_.data() + cell(0, revision), static_cast<std::size_t>(n_queries_)};
}

std::int64_t ChangeTrace::max_slot_total_ms() const {
  std::int64_t best = 0;
  std::int32_t first = n_revisions_ == 0 ? 0 : 1;
  for (std::int32_t r = first; r <= n_revisions_; ++r) {
    std::int64_t total = 0;
    for (std::int64_t d : slot_durations(r)) {
      total += d;
    }
    best = std::max(best, total);
  }
  return best;
}

void ChangeTrace::validate() const {
  if (n_queries_ <= 0) {
    throw TraceError(TraceError::Kind::bad_value, "trace has no queries");
  }
  for (std::int32_t r = 0; r <= n_revisions_; ++r) {
    for (QueryId q = 0; q < n_queries_; ++q) {
      if (durations_[cell(q, r)] == 0) {
        throw TraceError(TraceError::Kind::incomplete_grid,
                         "missing record for query " + std::to_string(q) + " revision " +
                             std::to_string(r));
      }
    }
  }
  for (const auto& s : results_) {
    for (const auto& t : s.elements) {
      if (t.empty()) {
        throw TraceError(TraceError::Kind::bad_value, "empty element token");
      }
    }
  }
}

bool query_changed_at(const ChangeTrace& trace, QueryId q, std::int32_t revision) {
  if (revision < 1 || revision > trace.n_revisions()) {
    throw TraceError(TraceError::Kind::out_of_range,
                     "revision " + std::to_string(revision) + " outside 1.." +
                         std::to_string(trace.n_revisions()));
  }
  const ResultSnapshot* cur = trace.result(q, revision);
  if (cur == nullptr) {
    return false;  // failed execution: nothing observable changed at this slot
  }
  const ResultSnapshot* prev = trace.last_known_result(q, revision - 1);
  if (prev == nullptr) {
    return false;  // first known result is the baseline, not a change
  }
  if (prev == cur) {
    return false;
  }
  return result_changed(*prev, *cur);
}

std::vector<QueryId> changed_set(const ChangeTrace& trace, std::int32_t revision) {
  if (revision < 1 || revision > trace.n_revisions()) {
    throw TraceError(TraceError::Kind::out_of_range,
                     "revision " + std::to_string(revision) + " outside 1.." +
                         std::to_string(trace.n_revisions()));
  }
  std::vector<QueryId> changed;
  for (QueryId q = 0; q < trace.n_queries(); ++q) {
    if (query_changed_at(trace, q, revision)) {
      changed.push_back(q);
    }
  }
  return changed;
}

namespace {

struct HeaderFields {
  std::int32_t queries = 0;
  std::int32_t revisions = 0;
};

HeaderFields parse_header(const std::string& line) {
  std::istringstream in(line);
  std::string magic, version, qfield, rfield;
  in >> magic >> version >> qfield >> rfield;
  if (!in || magic != "TRACE" || version != "v1" || !qfield.starts_with("queries=") ||
      !rfield.starts_with("revisions=")) {
    throw TraceError(TraceError::Kind::bad_header,
                     "expected 'TRACE v1 queries=<N> revisions=<n>', got '" + line + "'");
  }
  std::string rest;
  if (in >> rest) {
    throw TraceError(TraceError::Kind::bad_header, "trailing data in header: '" + rest + "'");
  }
  HeaderFields h;
  auto parse_int = [&](std::string_view text, std::int32_t& out) {
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    if (ec != std::errc() || p != text.data() + text.size()) {
      throw TraceError(TraceError::Kind::bad_header, "bad count in header: '" + line + "'");
    }
  };
  parse_int(std::string_view(qfield).substr(8), h.queries);
  parse_int(std::string_view(rfield).substr(10), h.revisions);
  return h;
}

}  // namespace

ChangeTrace read_trace(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) {
    throw TraceError(TraceError::Kind::bad_header, "empty trace file");
  }
  HeaderFields h = parse_header(line);
  if (h.queries <= 0 || h.revisions < 0) {
    throw TraceError(TraceError::Kind::bad_header, "bad counts in header: '" + line + "'");
  }
  ChangeTrace trace(h.queries, h.revisions);
  std::unordered_map<std::string, std::int32_t> file_ids;

  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      continue;
    }
    if (line.starts_with("R ")) {
      std::size_t id_end = line.find(' ', 2);
      if (id_end == std::string::npos) {
        throw TraceError(TraceError::Kind::bad_record,
                         "line " + std::to_string(line_no) + ": truncated R record");
      }
      std::string file_id = line.substr(2, id_end - 2);
      if (file_ids.contains(file_id)) {
        throw TraceError(TraceError::Kind::duplicate_result,
                         "line " + std::to_string(line_no) + ": duplicate result id '" + file_id + "'");
      }
      std::size_t flag_pos = id_end + 1;
      if (line.compare(flag_pos, 8, "ordered=") != 0 || flag_pos + 8 >= line.size() ||
          (line[flag_pos + 8] != '0' && line[flag_pos + 8] != '1')) {
        throw TraceError(TraceError::Kind::bad_record,
                         "line " + std::to_string(line_no) + ": expected ordered=<0|1>");
      }
      bool ordered = line[flag_pos + 8] == '1';
      std::vector<std::string> tokens;
      std::size_t body = flag_pos + 9;
      if (body < line.size()) {
        if (line[body] != ' ') {
          throw TraceError(TraceError::Kind::bad_record,
                           "line " + std::to_string(line_no) + ": malformed R record");
        }
        std::size_t pos = body + 1;
        while (true) {
          std::size_t tab = line.find('\t', pos);
          std::string raw = line.substr(pos, tab == std::string::npos ? std::string::npos : tab - pos);
          std::string token = decode_token(raw, line_no);
          if (token.empty()) {
            throw TraceError(TraceError::Kind::bad_value,
                             "line " + std::to_string(line_no) + ": empty element token");
          }
          tokens.push_back(std::move(token));
          if (tab == std::string::npos) {
            break;
          }
          pos = tab + 1;
        }
      }
      ResultSnapshot snap = ordered ? ResultSnapshot::from_sequence(std::move(tokens))
                                    : ResultSnapshot::from_set(std::move(tokens));
      file_ids.emplace(std::move(file_id), trace.intern_result(std::move(snap)));
    } else if (line.starts_with("E ")) {
      std::istringstream rec(line.substr(2));
      std::int64_t q = -1, rev = -1, dur = 0;
      std::string rid;
      rec >> q >> rev >> dur >> rid;
      if (!rec) {
        throw TraceError(TraceError::Kind::bad_record,
                         "line " + std::to_string(line_no) + ": malformed E record");
      }
      std::string rest;
      if (rec >> rest) {
        throw TraceError(TraceError::Kind::bad_record,
                         "line " + std::to_string(line_no) + ": trailing data in E record");
      }
      if (rid == "-") {
        trace.set_failed(static_cast<QueryId>(q), static_cast<std::int32_t>(rev), dur);
      } else {
        auto it = file_ids.find(rid);
        if (it == file_ids.end()) {
          throw TraceError(TraceError::Kind::dangling_result,
                           "line " + std::to_string(line_no) + ": execution of query " +
                               std::to_string(q) + " revision " + std::to_string(rev) +
                               " references unknown result id '" + rid + "'");
        }
        trace.set_record(static_cast<QueryId>(q), static_cast<std::int32_t>(rev), dur, it->second);
      }
    } else {
      throw TraceError(TraceError::Kind::bad_record,
                       "line " + std::to_string(line_no) + ": unknown record '" +
                           line.substr(0, 16) + "'");
    }
  }
  trace.validate();
  return trace;
}

void write_trace(const ChangeTrace& trace, std::ostream& out) {
  out << "TRACE v1 queries=" << trace.n_queries() << " revisions=" << trace.n_revisions() << "\n";
  for (std::int32_t id = 0; id < trace.n_results(); ++id) {
    const ResultSnapshot& s = trace.snapshot(id);
    out << "R " << id << " ordered=" << (s.ordered ? 1 : 0);
    const auto& tokens = s.ordered ? s.sequence : s.elements;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      out << (i == 0 ? ' ' : '\t') << encode_token(tokens[i]);
    }
    out << "\n";
  }
  for (std::int32_t r = 0; r <= trace.n_revisions(); ++r) {
    for (QueryId q = 0; q < trace.n_queries(); ++q) {
      std::int32_t id = trace.result_id(q, r);
      out << "E " << q << ' ' << r << ' ' << trace.duration_ms(q, r) << ' ';
      if (id == ChangeTrace::kFailed) {
        out << '-';
      } else {
        out << id;
      }
      out << "\n";
    }
  }
}

ChangeTrace load_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw TraceError(TraceError::Kind::bad_header, "cannot open trace file: " + path.string());
  }
  return read_trace(in);
}

void save_trace(const ChangeTrace& trace, const std::filesystem::path& path) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) {
      throw std::runtime_error("cannot write trace file: " + tmp.string());
    }
    write_trace(trace, out);
    out.flush();
    if (!out) {
      throw std::runtime_error("write failed: " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace refresh
