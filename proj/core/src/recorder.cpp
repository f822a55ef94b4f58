#include "refresh/recorder.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <stdexcept>
#include <thread>

#include <httplib.h>

namespace refresh {

namespace {

// --- base64 ---------------------------------------------------------------

constexpr char kB64Alphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string base64_encode(std::string_view in) {
  std::string out;
  out.reserve((in.size() + 2) / 3 * 4);
  std::size_t i = 0;
  while (i + 2 < in.size()) {
    unsigned v = (static_cast<unsigned char>(in[i]) << 16) |
                 (static_cast<unsigned char>(in[i + 1]) << 8) |
                 static_cast<unsigned char>(in[i + 2]);
    out += kB64Alphabet[(v >> 18) & 63];
    out += kB64Alphabet[(v >> 12) & 63];
    out += kB64Alphabet[(v >> 6) & 63];
    out += kB64Alphabet[v & 63];
    i += 3;
  }
  if (i + 1 == in.size()) {
    unsigned v = static_cast<unsigned char>(in[i]) << 16;
    out += kB64Alphabet[(v >> 18) & 63];
    out += kB64Alphabet[(v >> 12) & 63];
    out += "==";
  } else if (i + 2 == in.size()) {
    unsigned v = (static_cast<unsigned char>(in[i]) << 16) |
                 (static_cast<unsigned char>(in[i + 1]) << 8);
    out += kB64Alphabet[(v >> 18) & 63];
    out += kB64Alphabet[(v >> 12) & 63];
    out += kB64Alphabet[(v >> 6) & 63];
    out += '=';
  }
  return out;
}

int b64_value(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '+') return 62;
  if (c == '/') return 63;
  return -1;
}

std::string base64_decode(std::string_view in) {
  std::string out;
  out.reserve(in.size() / 4 * 3);
  unsigned buffer = 0;
  int bits = 0;
  for (char c : in) {
    if (c == '=') break;
    int v = b64_value(c);
    if (v < 0) {
      throw std::invalid_argument("bad base64 character");
    }
    buffer = (buffer << 6) | static_cast<unsigned>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out += static_cast<char>((buffer >> bits) & 0xFF);
    }
  }
  return out;
}

// --- url ------------------------------------------------------------------

std::string url_encode(std::string_view in) {
  static constexpr char hex[] = "0123456789ABCDEF";
  std::string out;
  out.reserve(in.size());
  for (char c : in) {
    bool unreserved = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') ||
                      (c >= '0' && c <= '9') || c == '-' || c == '.' || c == '_' || c == '~';
    if (unreserved) {
      out += c;
    } else {
      out += '%';
      out += hex[(static_cast<unsigned char>(c) >> 4) & 15];
      out += hex[static_cast<unsigned char>(c) & 15];
    }
  }
  return out;
}

struct SplitUrl {
  std::string base;  // scheme://host[:port]
  std::string path;  // leading '/', possibly just "/"
};

SplitUrl split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw std::invalid_argument("endpoint url lacks a scheme: '" + url + "'");
  }
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    return {url, "/"};
  }
  return {url.substr(0, path_start), url.substr(path_start)};
}

std::string accept_header(QueryForm form) {
  if (form == QueryForm::construct || form == QueryForm::describe) {
    return "application/n-triples, text/plain;q=0.9";
  }
  return "application/sparql-results+json, application/sparql-results+xml;q=0.9";
}

}  // namespace

// --- query list -----------------------------------------------------------

std::vector<QueryRegistration> load_query_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::invalid_argument("cannot open query list: " + path.string());
  }
  std::vector<QueryRegistration> registrations;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t pos = 0;
    while (fields.size() < 3) {
      auto tab = line.find('\t', pos);
      if (tab == std::string::npos) {
        throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) +
                                    ": expected <id>\\t<form>\\t<ordered>\\t<base64>");
      }
      fields.push_back(line.substr(pos, tab - pos));
      pos = tab + 1;
    }
    QueryRegistration reg;
    reg.id = static_cast<QueryId>(std::stol(fields[0]));
    reg.form = parse_query_form(fields[1]);
    if (fields[2] != "0" && fields[2] != "1") {
      throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) +
                                  ": ordered flag must be 0 or 1");
    }
    reg.ordered = fields[2] == "1";
    reg.text = base64_decode(std::string_view(line).substr(pos));

    if (reg.ordered && reg.form != QueryForm::select) {
      throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) +
                                  ": ordered requires a SELECT query");
    }
    QueryForm detected = detect_query_form(reg.text);
    if (detected != reg.form) {
      throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) +
                                  ": declared form " + std::string(query_form_name(reg.form)) +
                                  " but the query reads " +
                                  std::string(query_form_name(detected)));
    }
    registrations.push_back(std::move(reg));
  }
  std::sort(registrations.begin(), registrations.end(),
            [](const auto& a, const auto& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < registrations.size(); ++i) {
    if (registrations[i].id != static_cast<QueryId>(i)) {
      throw std::invalid_argument(path.string() + ": query ids must be dense 0..N-1");
    }
  }
  return registrations;
}

void save_query_list(const std::vector<QueryRegistration>& registrations,
                     const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write query list: " + path.string());
  }
  for (const auto& reg : registrations) {
    out << reg.id << '\t' << query_form_name(reg.form) << '\t' << (reg.ordered ? 1 : 0) << '\t'
        << base64_encode(reg.text) << "\n";
  }
}

// --- endpoint client --------------------------------------------------------

struct EndpointClient::Impl {
  EndpointConfig cfg;
  SplitUrl url;
  httplib::Client http;
  std::chrono::steady_clock::time_point last_request{};
  bool any_request = false;

  explicit Impl(EndpointConfig c) : cfg(std::move(c)), url(split_url(cfg.endpoint_url)), http(url.base) {
    http.set_connection_timeout(std::chrono::milliseconds(cfg.timeout_ms));
    http.set_read_timeout(std::chrono::milliseconds(cfg.timeout_ms));
    http.set_write_timeout(std::chrono::milliseconds(cfg.timeout_ms));
    http.set_keep_alive(true);
  }

  void wait_politely() {
    if (cfg.polite_delay_ms > 0 && any_request) {
      auto ready = last_request + std::chrono::milliseconds(cfg.polite_delay_ms);
      std::this_thread::sleep_until(ready);
    }
    last_request = std::chrono::steady_clock::now();
    any_request = true;
  }
};

EndpointClient::EndpointClient(EndpointConfig cfg) : impl_(std::make_unique<Impl>(std::move(cfg))) {}
EndpointClient::~EndpointClient() = default;
EndpointClient::EndpointClient(EndpointClient&&) noexcept = default;
EndpointClient& EndpointClient::operator=(EndpointClient&&) noexcept = default;

const EndpointConfig& EndpointClient::config() const { return impl_->cfg; }

ExecutionOutcome EndpointClient::execute(const QueryRegistration& registration) {
  ExecutionOutcome outcome;
  const httplib::Headers headers = {{"Accept", accept_header(registration.form)}};
  const std::string get_target = impl_->url.path + "?query=" + url_encode(registration.text);
  const bool use_post = get_target.size() > 6000;

  std::int64_t elapsed_total = 0;
  const int attempts_allowed = 1 + std::max(0, impl_->cfg.max_retries);
  for (int attempt = 1; attempt <= attempts_allowed; ++attempt) {
    impl_->wait_politely();
    outcome.attempts = attempt;
    auto start = std::chrono::steady_clock::now();
    httplib::Result result =
        use_post ? impl_->http.Post(impl_->url.path, headers,
                                    "query=" + url_encode(registration.text),
                                    "application/x-www-form-urlencoded")
                 : impl_->http.Get(get_target, headers);
    if (!result) {
      auto end = std::chrono::steady_clock::now();
      elapsed_total +=
          std::chrono::duration_cast<std::chrono::milliseconds>(end - start).count();
      outcome.status = ExecutionOutcome::Status::transport_error;
      outcome.error = httplib::to_string(result.error());
      continue;
    }
    if (result->status != 200) {
      auto end = std::chrono::steady_clock::now();
      elapsed_total +=
          std::chrono::duration_cast<std::chrono::milliseconds>(end - start).count();
      outcome.status = ExecutionOutcome::Status::http_error;
      outcome.error = "HTTP status " + std::to_string(result->status);
      continue;
    }
    try {
      outcome.snapshot = canonicalize_result(result->body,
                                             result->get_header_value("Content-Type"),
                                             registration.form, registration.ordered);
    } catch (const SparqlParseError& e) {
      auto end = std::chrono::steady_clock::now();
      elapsed_total +=
          std::chrono::duration_cast<std::chrono::milliseconds>(end - start).count();
      outcome.status = ExecutionOutcome::Status::malformed_response;
      outcome.error = e.what();
      continue;
    }
    auto end = std::chrono::steady_clock::now();
    outcome.status = ExecutionOutcome::Status::ok;
    outcome.error.clear();
    outcome.duration_ms = std::max<std::int64_t>(
        1, std::chrono::duration_cast<std::chrono::milliseconds>(end - start).count());
    return outcome;
  }
  outcome.duration_ms = std::max<std::int64_t>(1, elapsed_total);
  return outcome;
}

ExecutionOutcome execute_query(const EndpointConfig& cfg, const QueryRegistration& registration) {
  EndpointClient client(cfg);
  return client.execute(registration);
}

std::int32_t record_revision(EndpointClient& client,
                             const std::vector<QueryRegistration>& registrations,
                             ChangeTrace& trace) {
  if (static_cast<std::int32_t>(registrations.size()) != trace.n_queries()) {
    throw std::invalid_argument("query list does not match the trace");
  }
  // revision 0 is still unset on a freshly constructed trace
  bool initial = trace.duration_ms(0, 0) == 0;
  std::int32_t revision = initial ? 0 : trace.add_revision();
  for (const QueryRegistration& reg : registrations) {
    ExecutionOutcome outcome = client.execute(reg);
    if (outcome.ok()) {
      trace.set_record(reg.id, revision, outcome.duration_ms,
                       trace.intern_result(std::move(outcome.snapshot)));
    } else {
      trace.set_failed(reg.id, revision, outcome.duration_ms);
    }
  }
  return revision;
}

ChangeTrace record_trace(const EndpointConfig& cfg,
                         const std::vector<QueryRegistration>& registrations,
                         const std::filesystem::path& trace_path, int polls) {
  if (registrations.empty()) {
    throw std::invalid_argument("no registered queries");
  }
  ChangeTrace trace;
  if (std::filesystem::exists(trace_path)) {
    trace = load_trace(trace_path);  // rejects half-written files
    if (static_cast<std::int32_t>(registrations.size()) != trace.n_queries()) {
      throw std::invalid_argument("existing trace has " + std::to_string(trace.n_queries()) +
                                  " queries, the query list has " +
                                  std::to_string(registrations.size()));
    }
  } else {
    trace = ChangeTrace(static_cast<std::int32_t>(registrations.size()), 0);
  }
  EndpointClient client(cfg);
  for (int poll = 0; poll < polls; ++poll) {
    record_revision(client, registrations, trace);
    save_trace(trace, trace_path);
  }
  return trace;
}

}  // namespace refresh
