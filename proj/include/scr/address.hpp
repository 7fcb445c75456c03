#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace scr {

inline constexpr std::uint32_t kMaxColumn = 16384;
inline constexpr std::uint32_t kMaxRow = 1048576;

// A single cell position. Ordering is (sheet, row, column), which is the
// documented tie-break used for graph orders and delta lists.
struct CellAddress {
  std::string sheet;
  std::uint32_t column = 1;
  std::uint32_t row = 1;

  friend bool operator==(const CellAddress&, const CellAddress&) = default;
  friend std::strong_ordering operator<=>(const CellAddress& a,
                                          const CellAddress& b) {
    if (auto c = a.sheet <=> b.sheet; c != 0) return c;
    if (auto c = a.row <=> b.row; c != 0) return c;
    return a.column <=> b.column;
  }
};

// "A" -> 1, "Z" -> 26, "AA" -> 27. Throws ParseError on bad input.
std::uint32_t column_from_letters(std::string_view letters);
std::string column_to_letters(std::uint32_t column);

// Parses `[Sheet!]$?COL$?ROW`; the sheet may be single-quoted with ''
// escaping. `$` markers are accepted and dropped. Letters are
// case-insensitive.
CellAddress parse_address(std::string_view text, std::string_view default_sheet);

// "B3" (no sheet, no `$`).
std::string render_local(std::uint32_t column, std::uint32_t row);
// "S1!B3", quoting the sheet name when it is not a plain identifier.
std::string render_address(const CellAddress& a);
// Sheet prefix as it appears in a formula: `Name` or `'My Sheet'`.
std::string quote_sheet_name(std::string_view sheet);

bool in_grid_bounds(std::int64_t column, std::int64_t row);

// A rectangular range on one sheet (inclusive corners, first <= last).
struct CellRange {
  std::string sheet;
  std::uint32_t first_column = 1;
  std::uint32_t first_row = 1;
  std::uint32_t last_column = 1;
  std::uint32_t last_row = 1;

  std::uint64_t size() const {
    return std::uint64_t(last_column - first_column + 1) *
           (last_row - first_row + 1);
  }
  bool contains(const CellAddress& a) const {
    return a.sheet == sheet && a.column >= first_column &&
           a.column <= last_column && a.row >= first_row && a.row <= last_row;
  }
  friend bool operator==(const CellRange&, const CellRange&) = default;
};

// Parses "A1", "A1:B2", "S2!A1:B2"; corners are normalized so first <= last.
CellRange parse_range(std::string_view text, std::string_view default_sheet);
std::string render_range(const CellRange& r);

}  // namespace scr
