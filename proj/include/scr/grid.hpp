#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "scr/address.hpp"
#include "scr/formula.hpp"

namespace scr {

enum class CellKind { Empty, Number, Text, Boolean, Formula };

std::string_view to_string(CellKind k);

struct CellContent {
  CellKind kind = CellKind::Empty;
  std::variant<std::monostate, double, std::string, bool> literal;
  // Raw text as ingested. Formula sources are kept as written; the canonical
  // spelling is available from canonical_text().
  std::string source;
  ExprPtr ast;  // set iff kind == Formula

  bool is_formula() const { return kind == CellKind::Formula; }
  bool is_empty() const { return kind == CellKind::Empty; }
  double number() const { return std::get<double>(literal); }
  const std::string& text() const { return std::get<std::string>(literal); }
  bool boolean() const { return std::get<bool>(literal); }

  // The interchange spelling that reclassifies to the same content.
  std::string canonical_text() const;
};

// Content equality by canonical spelling.
bool same_content(const CellContent& a, const CellContent& b);

// Row-major key so that map iteration is (row, column) order.
struct CellPos {
  std::uint32_t row = 1;
  std::uint32_t column = 1;
  friend auto operator<=>(const CellPos&, const CellPos&) = default;
};

using CellMap = std::map<CellPos, CellContent>;

class Sheet {
 public:
  Sheet(std::string name, CellMap cells);

  const std::string& name() const { return name_; }
  const CellMap& cells() const { return cells_; }
  const CellContent* find(std::uint32_t column, std::uint32_t row) const;
  std::size_t size() const { return cells_.size(); }

 private:
  std::string name_;
  CellMap cells_;  // never holds Empty contents
};

class Workbook {
 public:
  Workbook() = default;
  Workbook(std::string name, std::vector<Sheet> sheets);

  const std::string& name() const { return name_; }
  const std::vector<Sheet>& sheets() const { return sheets_; }
  const Sheet* find_sheet(std::string_view name) const;
  // Empty content for absent cells or sheets.
  const CellContent& at(const CellAddress& a) const;
  std::size_t cell_count() const;

 private:
  std::string name_;
  std::vector<Sheet> sheets_;
};

// Classifies raw cell text hosted at `origin`. A leading apostrophe forces
// Text of the remainder. Throws ParseError for malformed formulas.
CellContent classify_cell(std::string_view source, const CellAddress& origin);

// Interchange document -> Workbook. Errors carry the offending location.
Workbook parse_workbook(std::string_view document);
// Canonical interchange text (2-space indent, trailing newline).
std::string serialize_workbook(const Workbook& w);
// SHA-256 of the canonical serialization.
std::string snapshot_id(const Workbook& w);

// serialize_workbook(Workbook{}).
inline constexpr std::string_view kEmptyWorkbookDocument = "{\n  \"name\": \"\",\n  \"sheets\": []\n}\n";

}  // namespace scr
