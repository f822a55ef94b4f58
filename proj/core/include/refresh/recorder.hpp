#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "refresh/sparql.hpp"
#include "refresh/trace.hpp"

namespace refresh {

struct EndpointConfig {
  std::string endpoint_url;  // e.g. http://host:port/sparql
  int timeout_ms = 30000;
  int polite_delay_ms = 0;  // minimum spacing between consecutive requests
  int max_retries = 2;      // additional attempts after the first
};

struct QueryRegistration {
  QueryId id = 0;
  std::string text;
  QueryForm form = QueryForm::select;
  bool ordered = false;  // the query imposes a result ordering
};

// Query list file: one query per line, <id>\t<form>\t<ordered>\t<base64 text>.
// Ids must be dense 0..N-1; the form must match the query text and ordered
// requires SELECT.
std::vector<QueryRegistration> load_query_list(const std::filesystem::path& path);
void save_query_list(const std::vector<QueryRegistration>& registrations,
                     const std::filesystem::path& path);

struct ExecutionOutcome {
  enum class Status { ok, transport_error, http_error, malformed_response };
  Status status = Status::ok;
  ResultSnapshot snapshot;      // valid when status == ok
  std::int64_t duration_ms = 1; // request-to-parse wall time (all attempts when failed)
  int attempts = 0;
  std::string error;

  bool ok() const { return status == Status::ok; }
};

// Issues queries over the SPARQL HTTP protocol, retrying failures and pacing
// requests per the politeness delay. One client per endpoint; requests are
// sequential.
class EndpointClient {
 public:
  explicit EndpointClient(EndpointConfig cfg);
  ~EndpointClient();
  EndpointClient(EndpointClient&&) noexcept;
  EndpointClient& operator=(EndpointClient&&) noexcept;

  ExecutionOutcome execute(const QueryRegistration& registration);
  const EndpointConfig& config() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// One-shot convenience wrapper.
ExecutionOutcome execute_query(const EndpointConfig& cfg, const QueryRegistration& registration);

// Executes every registered query once and appends the results as a new
// revision (revision 0 when the trace is still empty). Failed executions
// become sentinel entries; other queries are unaffected. Returns the revision
// index written.
std::int32_t record_revision(EndpointClient& client,
                             const std::vector<QueryRegistration>& registrations,
                             ChangeTrace& trace);

// Records `polls` revisions, persisting the trace after each one so a crash
// never loses a completed revision. Resumes an existing trace file.
ChangeTrace record_trace(const EndpointConfig& cfg,
                         const std::vector<QueryRegistration>& registrations,
                         const std::filesystem::path& trace_path, int polls);

}  // namespace refresh
