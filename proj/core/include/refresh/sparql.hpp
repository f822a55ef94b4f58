#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "refresh/trace.hpp"

namespace refresh {

enum class QueryForm { select, ask, construct, describe };

QueryForm parse_query_form(std::string_view name);
std::string_view query_form_name(QueryForm form);
// First query keyword after prologue (PREFIX/BASE) and comments.
QueryForm detect_query_form(std::string_view query_text);

struct SparqlParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Term {
  enum class Kind { iri, literal, blank };
  Kind kind = Kind::iri;
  std::string value;     // iri, lexical form, or blank label
  std::string datatype;  // literals only
  std::string lang;      // literals only

  bool operator==(const Term&) const = default;
};

// Fixed lexical rendering: <iri>, _:label, "text"@lang or "text"^^<datatype>.
std::string render_term(const Term& term);

// One solution row; variables sorted by name.
using Solution = std::vector<std::pair<std::string, Term>>;

struct ParsedResults {
  bool is_boolean = false;
  bool boolean_value = false;
  std::vector<Solution> solutions;  // in response order
};

ParsedResults parse_results_json(const std::string& body);
ParsedResults parse_results_xml(const std::string& body);

struct Triple {
  Term subject, predicate, object;
};

std::vector<Triple> parse_ntriples(const std::string& body);

// Snapshot builders. Blank-node labels are renamed by first occurrence over
// the canonical processing order (sorted raw renderings, or the original
// sequence for ordered results), which makes the common relabelings of the
// same shape compare equal.
ResultSnapshot snapshot_from_solutions(std::vector<Solution> solutions, bool ordered);
ResultSnapshot snapshot_from_triples(std::vector<Triple> triples);
ResultSnapshot snapshot_from_boolean(bool value);

// Parses the standard response serialization indicated by `content_type`
// (sniffing the body when absent) and canonicalizes per the query form.
// Throws SparqlParseError on malformed or unsupported responses.
ResultSnapshot canonicalize_result(const std::string& body, std::string_view content_type,
                                   QueryForm form, bool ordered);

}  // namespace refresh
