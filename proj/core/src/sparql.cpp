#include "refresh/sparql.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <nlohmann/json.hpp>

namespace refresh {

namespace {

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(a[i])) !=
        std::tolower(static_cast<unsigned char>(b[i]))) {
      return false;
    }
  }
  return true;
}

}  // namespace

QueryForm parse_query_form(std::string_view name) {
  if (iequals(name, "select")) return QueryForm::select;
  if (iequals(name, "ask")) return QueryForm::ask;
  if (iequals(name, "construct")) return QueryForm::construct;
  if (iequals(name, "describe")) return QueryForm::describe;
  throw std::invalid_argument("unknown query form '" + std::string(name) + "'");
}

std::string_view query_form_name(QueryForm form) {
  switch (form) {
    case QueryForm::select: return "SELECT";
    case QueryForm::ask: return "ASK";
    case QueryForm::construct: return "CONSTRUCT";
    case QueryForm::describe: return "DESCRIBE";
  }
  return "?";
}

QueryForm detect_query_form(std::string_view text) {
  std::size_t pos = 0;
  auto skip_ws_and_comments = [&] {
    while (pos < text.size()) {
      char c = text[pos];
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos;
      } else if (c == '#') {
        while (pos < text.size() && text[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
  };
  auto next_word = [&]() -> std::string_view {
    skip_ws_and_comments();
    std::size_t start = pos;
    while (pos < text.size() && !std::isspace(static_cast<unsigned char>(text[pos])) &&
           text[pos] != '<' && text[pos] != '#') {
      ++pos;
    }
    return text.substr(start, pos - start);
  };
  auto skip_iri = [&] {
    skip_ws_and_comments();
    if (pos < text.size() && text[pos] == '<') {
      while (pos < text.size() && text[pos] != '>') ++pos;
      if (pos < text.size()) ++pos;
    }
  };

  while (true) {
    std::string_view word = next_word();
    if (word.empty()) {
      throw std::invalid_argument("cannot detect query form: no query keyword found");
    }
    if (iequals(word, "prefix")) {
      next_word();  // the namespace label
      skip_iri();
    } else if (iequals(word, "base")) {
      skip_iri();
    } else {
      return parse_query_form(word);
    }
  }
}

std::string render_term(const Term& term) {
  switch (term.kind) {
    case Term::Kind::iri:
      return "<" + term.value + ">";
    case Term::Kind::blank:
      return "_:" + term.value;
    case Term::Kind::literal: {
      std::string out = "\"";
      for (char c : term.value) {
        switch (c) {
          case '\\': out += "\\\\"; break;
          case '"': out += "\\\""; break;
          case '\n': out += "\\n"; break;
          case '\r': out += "\\r"; break;
          case '\t': out += "\\t"; break;
          default: out += c;
        }
      }
      out += '"';
      if (!term.lang.empty()) {
        out += '@';
        out += term.lang;
      } else if (!term.datatype.empty()) {
        out += "^^<" + term.datatype + ">";
      }
      return out;
    }
  }
  return {};
}

// ---------------------------------------------------------------------------
// SPARQL results JSON

ParsedResults parse_results_json(const std::string& body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw SparqlParseError(std::string("bad results JSON: ") + e.what());
  }
  ParsedResults out;
  if (j.contains("boolean")) {
    if (!j["boolean"].is_boolean()) {
      throw SparqlParseError("boolean field is not a boolean");
    }
    out.is_boolean = true;
    out.boolean_value = j["boolean"].get<bool>();
    return out;
  }
  if (!j.contains("results") || !j["results"].contains("bindings")) {
    throw SparqlParseError("results JSON lacks results.bindings");
  }
  const auto& bindings = j["results"]["bindings"];
  if (!bindings.is_array()) {
    throw SparqlParseError("results.bindings is not an array");
  }
  for (const auto& row : bindings) {
    if (!row.is_object()) {
      throw SparqlParseError("binding row is not an object");
    }
    Solution solution;
    for (const auto& [var, cell] : row.items()) {
      if (!cell.contains("type") || !cell.contains("value")) {
        throw SparqlParseError("binding for ?" + var + " lacks type or value");
      }
      std::string type = cell["type"].get<std::string>();
      Term term;
      term.value = cell["value"].get<std::string>();
      if (type == "uri") {
        term.kind = Term::Kind::iri;
      } else if (type == "bnode") {
        term.kind = Term::Kind::blank;
      } else if (type == "literal" || type == "typed-literal") {
        term.kind = Term::Kind::literal;
        if (cell.contains("datatype")) term.datatype = cell["datatype"].get<std::string>();
        if (cell.contains("xml:lang")) term.lang = cell["xml:lang"].get<std::string>();
      } else {
        throw SparqlParseError("unknown binding type '" + type + "'");
      }
      solution.emplace_back(var, std::move(term));
    }
    std::sort(solution.begin(), solution.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    out.solutions.push_back(std::move(solution));
  }
  return out;
}

// ---------------------------------------------------------------------------
// SPARQL results XML (minimal scanner for the fixed result format)

namespace {

std::string xml_unescape(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] != '&') {
      out += raw[i];
      continue;
    }
    std::size_t semi = raw.find(';', i);
    if (semi == std::string_view::npos) {
      throw SparqlParseError("unterminated XML entity");
    }
    std::string_view entity = raw.substr(i + 1, semi - i - 1);
    if (entity == "amp") out += '&';
    else if (entity == "lt") out += '<';
    else if (entity == "gt") out += '>';
    else if (entity == "quot") out += '"';
    else if (entity == "apos") out += '\'';
    else if (entity.starts_with("#")) {
      long code = entity.starts_with("#x") || entity.starts_with("#X")
                      ? std::strtol(std::string(entity.substr(2)).c_str(), nullptr, 16)
                      : std::strtol(std::string(entity.substr(1)).c_str(), nullptr, 10);
      // encode as UTF-8
      if (code < 0x80) {
        out += static_cast<char>(code);
      } else if (code < 0x800) {
        out += static_cast<char>(0xC0 | (code >> 6));
        out += static_cast<char>(0x80 | (code & 0x3F));
      } else if (code < 0x10000) {
        out += static_cast<char>(0xE0 | (code >> 12));
        out += static_cast<char>(0x80 | ((code >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (code & 0x3F));
      } else {
        out += static_cast<char>(0xF0 | (code >> 18));
        out += static_cast<char>(0x80 | ((code >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((code >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (code & 0x3F));
      }
    } else {
      throw SparqlParseError("unknown XML entity '&" + std::string(entity) + ";'");
    }
    i = semi;
  }
  return out;
}

// attribute value from an opening tag's text, or empty
std::string tag_attribute(std::string_view tag, std::string_view name) {
  std::string needle = std::string(name) + "=\"";
  auto pos = tag.find(needle);
  if (pos == std::string_view::npos) {
    return {};
  }
  pos += needle.size();
  auto end = tag.find('"', pos);
  if (end == std::string_view::npos) {
    throw SparqlParseError("unterminated attribute in results XML");
  }
  return xml_unescape(tag.substr(pos, end - pos));
}

}  // namespace

ParsedResults parse_results_xml(const std::string& body) {
  ParsedResults out;
  std::string_view text(body);

  if (auto pos = text.find("<boolean>"); pos != std::string_view::npos) {
    auto end = text.find("</boolean>", pos);
    if (end == std::string_view::npos) {
      throw SparqlParseError("unterminated <boolean>");
    }
    std::string_view value = text.substr(pos + 9, end - pos - 9);
    if (value != "true" && value != "false") {
      throw SparqlParseError("bad boolean value in results XML");
    }
    out.is_boolean = true;
    out.boolean_value = value == "true";
    return out;
  }

  if (text.find("<sparql") == std::string_view::npos) {
    throw SparqlParseError("not a SPARQL results XML document");
  }

  std::size_t cursor = 0;
  while (true) {
    std::size_t row_start = text.find("<result>", cursor);
    if (row_start == std::string_view::npos) {
      break;
    }
    std::size_t row_end = text.find("</result>", row_start);
    if (row_end == std::string_view::npos) {
      throw SparqlParseError("unterminated <result>");
    }
    std::string_view row = text.substr(row_start, row_end - row_start);
    Solution solution;
    std::size_t pos = 0;
    while (true) {
      std::size_t b = row.find("<binding", pos);
      if (b == std::string_view::npos) {
        break;
      }
      std::size_t open_end = row.find('>', b);
      if (open_end == std::string_view::npos) {
        throw SparqlParseError("unterminated <binding>");
      }
      std::string var = tag_attribute(row.substr(b, open_end - b), "name");
      if (var.empty()) {
        throw SparqlParseError("<binding> without a name");
      }
      std::size_t value_start = row.find('<', open_end + 1);
      if (value_start == std::string_view::npos) {
        throw SparqlParseError("<binding> without a value element");
      }
      std::size_t value_open_end = row.find('>', value_start);
      if (value_open_end == std::string_view::npos) {
        throw SparqlParseError("unterminated value element");
      }
      std::string_view open_tag = row.substr(value_start, value_open_end - value_start + 1);
      Term term;
      std::string_view tag_name;
      if (open_tag.starts_with("<uri")) {
        term.kind = Term::Kind::iri;
        tag_name = "uri";
      } else if (open_tag.starts_with("<literal")) {
        term.kind = Term::Kind::literal;
        term.datatype = tag_attribute(open_tag, "datatype");
        term.lang = tag_attribute(open_tag, "xml:lang");
        tag_name = "literal";
      } else if (open_tag.starts_with("<bnode")) {
        term.kind = Term::Kind::blank;
        tag_name = "bnode";
      } else {
        throw SparqlParseError("unknown binding value element");
      }
      if (open_tag.ends_with("/>")) {
        pos = value_open_end + 1;
      } else {
        std::string close = "</" + std::string(tag_name) + ">";
        std::size_t value_end = row.find(close, value_open_end);
        if (value_end == std::string_view::npos) {
          throw SparqlParseError("unterminated <" + std::string(tag_name) + ">");
        }
        term.value = xml_unescape(row.substr(value_open_end + 1, value_end - value_open_end - 1));
        pos = value_end + close.size();
      }
      solution.emplace_back(std::move(var), std::move(term));
    }
    std::sort(solution.begin(), solution.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    out.solutions.push_back(std::move(solution));
    cursor = row_end + 9;
  }
  return out;
}

// ---------------------------------------------------------------------------
// N-Triples

namespace {

struct NtCursor {
  std::string_view text;
  std::size_t pos = 0;
  int line = 1;

  [[noreturn]] void fail(const std::string& message) const {
    throw SparqlParseError("N-Triples line " + std::to_string(line) + ": " + message);
  }
  bool eof() const { return pos >= text.size(); }
  char peek() const { return text[pos]; }
  void skip_space() {
    while (!eof() && (peek() == ' ' || peek() == '\t')) ++pos;
  }
};

void append_codepoint(std::string& out, unsigned long code) {
  if (code < 0x80) {
    out += static_cast<char>(code);
  } else if (code < 0x800) {
    out += static_cast<char>(0xC0 | (code >> 6));
    out += static_cast<char>(0x80 | (code & 0x3F));
  } else if (code < 0x10000) {
    out += static_cast<char>(0xE0 | (code >> 12));
    out += static_cast<char>(0x80 | ((code >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (code & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (code >> 18));
    out += static_cast<char>(0x80 | ((code >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((code >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (code & 0x3F));
  }
}

std::string unescape_nt(NtCursor& cur, std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] != '\\') {
      out += raw[i];
      continue;
    }
    if (i + 1 >= raw.size()) cur.fail("trailing backslash");
    char e = raw[++i];
    switch (e) {
      case 't': out += '\t'; break;
      case 'b': out += '\b'; break;
      case 'n': out += '\n'; break;
      case 'r': out += '\r'; break;
      case 'f': out += '\f'; break;
      case '"': out += '"'; break;
      case '\'': out += '\''; break;
      case '\\': out += '\\'; break;
      case 'u':
      case 'U': {
        std::size_t width = e == 'u' ? 4 : 8;
        if (i + width >= raw.size()) cur.fail("truncated unicode escape");
        unsigned long code = std::strtoul(std::string(raw.substr(i + 1, width)).c_str(), nullptr, 16);
        append_codepoint(out, code);
        i += width;
        break;
      }
      default: cur.fail(std::string("unknown escape \\") + e);
    }
  }
  return out;
}

Term parse_nt_term(NtCursor& cur) {
  cur.skip_space();
  if (cur.eof()) cur.fail("unexpected end of line");
  Term term;
  char c = cur.peek();
  if (c == '<') {
    std::size_t end = cur.text.find('>', cur.pos);
    if (end == std::string_view::npos) cur.fail("unterminated IRI");
    term.kind = Term::Kind::iri;
    term.value = unescape_nt(cur, cur.text.substr(cur.pos + 1, end - cur.pos - 1));
    cur.pos = end + 1;
    return term;
  }
  if (c == '_') {
    if (cur.pos + 1 >= cur.text.size() || cur.text[cur.pos + 1] != ':') cur.fail("bad blank node");
    std::size_t start = cur.pos + 2;
    std::size_t end = start;
    while (end < cur.text.size() && !std::isspace(static_cast<unsigned char>(cur.text[end])) &&
           cur.text[end] != '.') {
      ++end;
    }
    if (end == start) cur.fail("empty blank node label");
    term.kind = Term::Kind::blank;
    term.value = std::string(cur.text.substr(start, end - start));
    cur.pos = end;
    return term;
  }
  if (c == '"') {
    std::size_t end = cur.pos + 1;
    while (end < cur.text.size()) {
      if (cur.text[end] == '\\') {
        end += 2;
        continue;
      }
      if (cur.text[end] == '"') break;
      ++end;
    }
    if (end >= cur.text.size()) cur.fail("unterminated literal");
    term.kind = Term::Kind::literal;
    term.value = unescape_nt(cur, cur.text.substr(cur.pos + 1, end - cur.pos - 1));
    cur.pos = end + 1;
    if (!cur.eof() && cur.peek() == '@') {
      std::size_t start = cur.pos + 1;
      std::size_t lang_end = start;
      while (lang_end < cur.text.size() &&
             !std::isspace(static_cast<unsigned char>(cur.text[lang_end])) &&
             cur.text[lang_end] != '.') {
        ++lang_end;
      }
      term.lang = std::string(cur.text.substr(start, lang_end - start));
      cur.pos = lang_end;
    } else if (cur.pos + 1 < cur.text.size() && cur.peek() == '^' && cur.text[cur.pos + 1] == '^') {
      cur.pos += 2;
      if (cur.eof() || cur.peek() != '<') cur.fail("expected datatype IRI");
      std::size_t dt_end = cur.text.find('>', cur.pos);
      if (dt_end == std::string_view::npos) cur.fail("unterminated datatype IRI");
      term.datatype = unescape_nt(cur, cur.text.substr(cur.pos + 1, dt_end - cur.pos - 1));
      cur.pos = dt_end + 1;
    }
    return term;
  }
  cur.fail(std::string("unexpected character '") + c + "'");
}

}  // namespace

std::vector<Triple> parse_ntriples(const std::string& body) {
  std::vector<Triple> triples;
  std::size_t line_start = 0;
  int line_no = 0;
  while (line_start <= body.size()) {
    std::size_t line_end = body.find('\n', line_start);
    if (line_end == std::string::npos) line_end = body.size();
    std::string_view line(body.data() + line_start, line_end - line_start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++line_no;

    NtCursor cur{line, 0, line_no};
    cur.skip_space();
    if (!cur.eof() && cur.peek() != '#') {
      Triple t;
      t.subject = parse_nt_term(cur);
      t.predicate = parse_nt_term(cur);
      t.object = parse_nt_term(cur);
      cur.skip_space();
      if (cur.eof() || cur.peek() != '.') cur.fail("expected terminating '.'");
      ++cur.pos;
      cur.skip_space();
      if (!cur.eof() && cur.peek() != '#') cur.fail("trailing data after '.'");
      if (t.subject.kind == Term::Kind::literal) cur.fail("literal subject");
      if (t.predicate.kind != Term::Kind::iri) cur.fail("predicate must be an IRI");
      triples.push_back(std::move(t));
    }
    if (line_end == body.size()) break;
    line_start = line_end + 1;
  }
  return triples;
}

// ---------------------------------------------------------------------------
// Canonical snapshots

namespace {

constexpr char kFieldSep = '\x1f';

std::string solution_token(const Solution& solution) {
  std::string out;
  for (const auto& [var, term] : solution) {
    if (!out.empty()) out += kFieldSep;
    out += '?';
    out += var;
    out += '=';
    for (char c : render_term(term)) {
      if (c == kFieldSep) {
        out += "\\u001F";
      } else {
        out += c;
      }
    }
  }
  return out.empty() ? "()" : out;  // zero-variable solution (e.g. ASK-like SELECT *)
}

std::string triple_token(const Triple& t) {
  return render_term(t.subject) + " " + render_term(t.predicate) + " " + render_term(t.object);
}

// first-occurrence blank labels over the given processing order
template <typename Item, typename ForEachBlank>
std::map<std::string, std::string> blank_renaming(const std::vector<const Item*>& in_order,
                                                  ForEachBlank&& for_each_blank) {
  std::map<std::string, std::string> renaming;
  for (const Item* item : in_order) {
    for_each_blank(*item, [&](const std::string& label) {
      if (!renaming.contains(label)) {
        renaming.emplace(label, "b" + std::to_string(renaming.size()));
      }
    });
  }
  return renaming;
}

}  // namespace

ResultSnapshot snapshot_from_solutions(std::vector<Solution> solutions, bool ordered) {
  // raw renderings decide the processing order for unordered results
  std::vector<std::string> raw(solutions.size());
  for (std::size_t i = 0; i < solutions.size(); ++i) {
    raw[i] = solution_token(solutions[i]);
  }
  std::vector<const Solution*> order(solutions.size());
  for (std::size_t i = 0; i < solutions.size(); ++i) order[i] = &solutions[i];
  if (!ordered) {
    std::sort(order.begin(), order.end(), [&](const Solution* a, const Solution* b) {
      return raw[a - solutions.data()] < raw[b - solutions.data()];
    });
  }
  auto renaming = blank_renaming<Solution>(order, [](const Solution& s, auto&& visit) {
    for (const auto& [var, term] : s) {
      if (term.kind == Term::Kind::blank) visit(term.value);
    }
  });
  if (!renaming.empty()) {
    for (Solution& s : solutions) {
      for (auto& [var, term] : s) {
        if (term.kind == Term::Kind::blank) term.value = renaming.at(term.value);
      }
    }
  }
  std::vector<std::string> tokens(solutions.size());
  for (std::size_t i = 0; i < solutions.size(); ++i) {
    tokens[i] = solution_token(solutions[i]);
  }
  return ordered ? ResultSnapshot::from_sequence(std::move(tokens))
                 : ResultSnapshot::from_set(std::move(tokens));
}

ResultSnapshot snapshot_from_triples(std::vector<Triple> triples) {
  std::vector<const Triple*> order(triples.size());
  for (std::size_t i = 0; i < triples.size(); ++i) order[i] = &triples[i];
  std::vector<std::string> raw(triples.size());
  for (std::size_t i = 0; i < triples.size(); ++i) raw[i] = triple_token(triples[i]);
  std::sort(order.begin(), order.end(), [&](const Triple* a, const Triple* b) {
    return raw[a - triples.data()] < raw[b - triples.data()];
  });
  auto renaming = blank_renaming<Triple>(order, [](const Triple& t, auto&& visit) {
    if (t.subject.kind == Term::Kind::blank) visit(t.subject.value);
    if (t.object.kind == Term::Kind::blank) visit(t.object.value);
  });
  if (!renaming.empty()) {
    for (Triple& t : triples) {
      if (t.subject.kind == Term::Kind::blank) t.subject.value = renaming.at(t.subject.value);
      if (t.object.kind == Term::Kind::blank) t.object.value = renaming.at(t.object.value);
    }
  }
  std::vector<std::string> tokens(triples.size());
  for (std::size_t i = 0; i < triples.size(); ++i) tokens[i] = triple_token(triples[i]);
  return ResultSnapshot::from_set(std::move(tokens));
}

ResultSnapshot snapshot_from_boolean(bool value) {
  return ResultSnapshot::from_ask(value);
}

ResultSnapshot canonicalize_result(const std::string& body, std::string_view content_type,
                                   QueryForm form, bool ordered) {
  std::string type = to_lower(content_type);
  auto body_looks_like = [&](char c) {
    for (char b : body) {
      if (!std::isspace(static_cast<unsigned char>(b))) return b == c;
    }
    return false;
  };

  if (form == QueryForm::construct || form == QueryForm::describe) {
    if (type.find("json") != std::string::npos || type.find("xml") != std::string::npos) {
      throw SparqlParseError("unsupported graph serialization '" + type +
                             "' (expected N-Triples)");
    }
    return snapshot_from_triples(parse_ntriples(body));
  }

  ParsedResults parsed;
  bool is_json = type.find("json") != std::string::npos;
  bool is_xml = type.find("xml") != std::string::npos;
  if (!is_json && !is_xml) {
    is_json = body_looks_like('{');
    is_xml = body_looks_like('<');
  }
  if (is_json) {
    parsed = parse_results_json(body);
  } else if (is_xml) {
    parsed = parse_results_xml(body);
  } else {
    throw SparqlParseError("unrecognized results serialization");
  }

  if (form == QueryForm::ask) {
    if (!parsed.is_boolean) {
      throw SparqlParseError("ASK response lacks a boolean");
    }
    return snapshot_from_boolean(parsed.boolean_value);
  }
  if (parsed.is_boolean) {
    throw SparqlParseError("SELECT response carries a boolean, not bindings");
  }
  return snapshot_from_solutions(std::move(parsed.solutions), ordered);
}

}  // namespace refresh
