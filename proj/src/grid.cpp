#include "scr/grid.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <set>

#include <nlohmann/json.hpp>

#include "scr/digest.hpp"
#include "scr/error.hpp"

namespace scr {

std::string_view to_string(CellKind k) {
  switch (k) {
    case CellKind::Empty: return "Empty";
    case CellKind::Number: return "Number";
    case CellKind::Text: return "Text";
    case CellKind::Boolean: return "Boolean";
    case CellKind::Formula: return "Formula";
  }
  return "?";
}

namespace {

bool parse_finite_number(std::string_view s, double& out) {
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || p != s.data() + s.size()) return false;
  // from_chars also accepts "inf"/"nan" spellings.
  return std::isfinite(out);
}

bool is_bool_word(std::string_view s, bool& out) {
  if (s.size() != 4 && s.size() != 5) return false;
  std::string u(s);
  for (auto& c : u) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (u == "TRUE") { out = true; return true; }
  if (u == "FALSE") { out = false; return true; }
  return false;
}

}  // namespace

std::string CellContent::canonical_text() const {
  switch (kind) {
    case CellKind::Empty: return "";
    case CellKind::Number: return format_number(number());
    case CellKind::Boolean: return boolean() ? "TRUE" : "FALSE";
    case CellKind::Formula: return render_formula(*ast);
    case CellKind::Text: {
      const auto& t = text();
      double d;
      bool b;
      // Anything that would otherwise classify differently gets the
      // apostrophe escape.
      if (t.empty() || t.front() == '=' || t.front() == '\'' || parse_finite_number(t, d) || is_bool_word(t, b))
        return "'" + t;
      return t;
    }
  }
  return "";
}

bool same_content(const CellContent& a, const CellContent& b) {
  return a.kind == b.kind && a.canonical_text() == b.canonical_text();
}

CellContent classify_cell(std::string_view source, const CellAddress& origin) {
  CellContent c;
  c.source = std::string(source);
  if (source.empty()) return c;
  if (source.front() == '=') {
    c.kind = CellKind::Formula;
    c.ast = parse_formula(source, origin);
    return c;
  }
  if (source.front() == '\'') {
    c.kind = CellKind::Text;
    c.literal = std::string(source.substr(1));
    return c;
  }
  double d;
  if (parse_finite_number(source, d)) {
    c.kind = CellKind::Number;
    c.literal = d;
    return c;
  }
  bool b;
  if (is_bool_word(source, b)) {
    c.kind = CellKind::Boolean;
    c.literal = b;
    return c;
  }
  c.kind = CellKind::Text;
  c.literal = std::string(source);
  return c;
}

Sheet::Sheet(std::string name, CellMap cells) : name_(std::move(name)), cells_(std::move(cells)) {
  if (name_.empty()) throw ingestion_error("sheet name must not be empty");
  std::erase_if(cells_, [](const auto& kv) { return kv.second.is_empty(); });
  for (const auto& [pos, _] : cells_)
    if (!in_grid_bounds(pos.column, pos.row))
      throw ingestion_error("cell outside grid bounds on sheet " + name_);
}

const CellContent* Sheet::find(std::uint32_t column, std::uint32_t row) const {
  auto it = cells_.find(CellPos{row, column});
  return it == cells_.end() ? nullptr : &it->second;
}

Workbook::Workbook(std::string name, std::vector<Sheet> sheets)
    : name_(std::move(name)), sheets_(std::move(sheets)) {
  std::set<std::string> seen;
  for (const auto& s : sheets_)
    if (!seen.insert(s.name()).second) throw ingestion_error("duplicate sheet name '" + s.name() + "'");
}

const Sheet* Workbook::find_sheet(std::string_view name) const {
  for (const auto& s : sheets_)
    if (s.name() == name) return &s;
  return nullptr;
}

const CellContent& Workbook::at(const CellAddress& a) const {
  static const CellContent kEmpty;
  const Sheet* s = find_sheet(a.sheet);
  if (!s) return kEmpty;
  const CellContent* c = s->find(a.column, a.row);
  return c ? *c : kEmpty;
}

std::size_t Workbook::cell_count() const {
  std::size_t n = 0;
  for (const auto& s : sheets_) n += s.size();
  return n;
}

// ---------------------------------------------------------------------------
// Interchange format

namespace {

using nlohmann::json;

// Rejects duplicate keys, which nlohmann would otherwise silently collapse.
class DuplicateKeyGuard {
 public:
  bool operator()(int, json::parse_event_t event, json& parsed) {
    switch (event) {
      case json::parse_event_t::object_start:
        keys_.emplace_back();
        break;
      case json::parse_event_t::object_end:
        keys_.pop_back();
        break;
      case json::parse_event_t::key: {
        const auto& k = parsed.get_ref<const std::string&>();
        if (!keys_.back().insert(k).second) throw ingestion_error("duplicate key '" + k + "'");
        break;
      }
      default:
        break;
    }
    return true;
  }

 private:
  std::vector<std::set<std::string>> keys_;
};

}  // namespace

Workbook parse_workbook(std::string_view document) {
  json doc;
  try {
    auto guard = std::make_shared<DuplicateKeyGuard>();
    doc = json::parse(document, [guard](int d, json::parse_event_t e, json& j) { return (*guard)(d, e, j); });
  } catch (const json::parse_error& e) {
    throw ingestion_error(std::string("malformed document: ") + e.what());
  }
  if (!doc.is_object()) throw ingestion_error("document root must be an object");
  for (const auto& [k, _] : doc.items())
    if (k != "name" && k != "sheets") throw ingestion_error("unknown top-level field '" + k + "'");
  if (!doc.contains("name") || !doc["name"].is_string()) throw ingestion_error("field 'name' must be a string");
  if (!doc.contains("sheets") || !doc["sheets"].is_array()) throw ingestion_error("field 'sheets' must be an array");

  std::vector<Sheet> sheets;
  std::set<std::string> names;
  const auto& jsheets = doc["sheets"];
  for (std::size_t i = 0; i < jsheets.size(); ++i) {
    const auto& js = jsheets[i];
    std::string where = "sheets[" + std::to_string(i) + "]";
    if (!js.is_object()) throw ingestion_error(where + " must be an object");
    for (const auto& [k, _] : js.items())
      if (k != "name" && k != "cells") throw ingestion_error(where + ": unknown field '" + k + "'");
    if (!js.contains("name") || !js["name"].is_string() || js["name"].get<std::string>().empty())
      throw ingestion_error(where + ".name must be a non-empty string");
    std::string name = js["name"];
    if (!names.insert(name).second) throw ingestion_error(where + ": duplicate sheet name '" + name + "'");
    CellMap cells;
    if (js.contains("cells")) {
      if (!js["cells"].is_object()) throw ingestion_error(where + ".cells must be an object");
      for (const auto& [key, value] : js["cells"].items()) {
        std::string cell_where = where + ".cells[\"" + key + "\"]";
        if (key.find('!') != std::string::npos || key.find('$') != std::string::npos)
          throw ingestion_error(cell_where + ": cell keys are plain A1 addresses");
        CellAddress addr;
        try {
          addr = parse_address(key, name);
        } catch (const ParseError& e) {
          throw ingestion_error(cell_where + ": " + e.what());
        }
        if (!value.is_string()) throw ingestion_error(cell_where + " must be a string");
        CellPos pos{addr.row, addr.column};
        if (cells.contains(pos)) throw ingestion_error(cell_where + ": duplicate cell address");
        CellContent content;
        try {
          content = classify_cell(value.get<std::string>(), addr);
        } catch (const ParseError& e) {
          throw ingestion_error(cell_where + ": " + e.what());
        }
        if (!content.is_empty()) cells.emplace(pos, std::move(content));
      }
    }
    sheets.emplace_back(std::move(name), std::move(cells));
  }
  return Workbook(doc["name"].get<std::string>(), std::move(sheets));
}

std::string serialize_workbook(const Workbook& w) {
  nlohmann::ordered_json doc;
  doc["name"] = w.name();
  doc["sheets"] = nlohmann::ordered_json::array();
  for (const auto& s : w.sheets()) {
    nlohmann::ordered_json js;
    js["name"] = s.name();
    js["cells"] = nlohmann::ordered_json::object();
    for (const auto& [pos, c] : s.cells()) js["cells"][render_local(pos.column, pos.row)] = c.canonical_text();
    doc["sheets"].push_back(std::move(js));
  }
  return doc.dump(2) + "\n";
}

std::string snapshot_id(const Workbook& w) { return sha256_hex(serialize_workbook(w)); }

}  // namespace scr
