#include "scr/address.hpp"

#include <algorithm>
#include <cctype>

#include "scr/error.hpp"

namespace scr {

namespace {

bool is_plain_sheet_name(std::string_view s) {
  if (s.empty()) return false;
  if (!(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_'))
    return false;
  for (char c : s) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.'))
      return false;
  }
  return true;
}

}  // namespace

std::uint32_t column_from_letters(std::string_view letters) {
  if (letters.empty()) throw ParseError("expected column letters", 0);
  std::uint64_t value = 0;
  for (std::size_t i = 0; i < letters.size(); ++i) {
    char c = static_cast<char>(std::toupper(static_cast<unsigned char>(letters[i])));
    if (c < 'A' || c > 'Z') throw ParseError("invalid column letter", i);
    value = value * 26 + std::uint64_t(c - 'A' + 1);
    if (value > kMaxColumn) throw ParseError("column beyond grid bounds", i);
  }
  return static_cast<std::uint32_t>(value);
}

std::string column_to_letters(std::uint32_t column) {
  std::string out;
  while (column > 0) {
    std::uint32_t rem = (column - 1) % 26;
    out.insert(out.begin(), static_cast<char>('A' + rem));
    column = (column - 1) / 26;
  }
  return out;
}

bool in_grid_bounds(std::int64_t column, std::int64_t row) {
  return column >= 1 && column <= kMaxColumn && row >= 1 && row <= kMaxRow;
}

std::string render_local(std::uint32_t column, std::uint32_t row) {
  return column_to_letters(column) + std::to_string(row);
}

std::string quote_sheet_name(std::string_view sheet) {
  if (is_plain_sheet_name(sheet)) return std::string(sheet);
  std::string out = "'";
  for (char c : sheet) {
    if (c == '\'') out += '\'';
    out += c;
  }
  out += '\'';
  return out;
}

std::string render_address(const CellAddress& a) {
  return quote_sheet_name(a.sheet) + "!" + render_local(a.column, a.row);
}

namespace {

// Splits an optional sheet prefix off `text`; returns the offset where the
// local part begins.
std::size_t split_sheet(std::string_view text, std::string& sheet) {
  if (!text.empty() && text[0] == '\'') {
    std::string name;
    std::size_t i = 1;
    for (;;) {
      if (i >= text.size()) throw ParseError("unterminated quoted sheet name", i);
      if (text[i] == '\'') {
        if (i + 1 < text.size() && text[i + 1] == '\'') {
          name += '\'';
          i += 2;
          continue;
        }
        ++i;
        break;
      }
      name += text[i++];
    }
    if (i >= text.size() || text[i] != '!') throw ParseError("expected '!'", i);
    if (name.empty()) throw ParseError("empty sheet name", 0);
    sheet = std::move(name);
    return i + 1;
  }
  auto bang = text.find('!');
  if (bang == std::string_view::npos) return 0;
  if (bang == 0) throw ParseError("empty sheet name", 0);
  sheet = std::string(text.substr(0, bang));
  return bang + 1;
}

CellAddress parse_local(std::string_view text, std::size_t base, std::string sheet) {
  std::size_t i = base;
  if (i < text.size() && text[i] == '$') ++i;
  std::size_t letters_begin = i;
  while (i < text.size() && std::isalpha(static_cast<unsigned char>(text[i]))) ++i;
  if (i == letters_begin) throw ParseError("expected column letters", i);
  if (i - letters_begin > 3) throw ParseError("column beyond grid bounds", letters_begin + 3);
  std::uint32_t column;
  try {
    column = column_from_letters(text.substr(letters_begin, i - letters_begin));
  } catch (const ParseError& e) {
    throw ParseError("invalid column", letters_begin + e.position());
  }
  if (i < text.size() && text[i] == '$') ++i;
  std::size_t digits_begin = i;
  std::uint64_t row = 0;
  while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) {
    row = row * 10 + std::uint64_t(text[i] - '0');
    if (row > kMaxRow) throw ParseError("row beyond grid bounds", i);
    ++i;
  }
  if (i == digits_begin) throw ParseError("expected row number", i);
  if (text[digits_begin] == '0') throw ParseError("row must be positive", digits_begin);
  if (i != text.size()) throw ParseError("unexpected character", i);
  return CellAddress{std::move(sheet), column, static_cast<std::uint32_t>(row)};
}

}  // namespace

CellAddress parse_address(std::string_view text, std::string_view default_sheet) {
  std::string sheet(default_sheet);
  std::size_t base = split_sheet(text, sheet);
  if (sheet.empty()) throw ParseError("missing sheet name", 0);
  return parse_local(text, base, std::move(sheet));
}

CellRange parse_range(std::string_view text, std::string_view default_sheet) {
  std::string sheet(default_sheet);
  std::size_t base = split_sheet(text, sheet);
  if (sheet.empty()) throw ParseError("missing sheet name", 0);
  auto rest = text.substr(base);
  auto colon = rest.find(':');
  CellAddress a = parse_local(rest.substr(0, colon), 0, sheet);
  CellAddress b = a;
  if (colon != std::string_view::npos) {
    try {
      b = parse_local(rest.substr(colon + 1), 0, sheet);
    } catch (const ParseError& e) {
      throw ParseError("invalid range end", base + colon + 1 + e.position());
    }
  }
  return CellRange{sheet, std::min(a.column, b.column), std::min(a.row, b.row),
                   std::max(a.column, b.column), std::max(a.row, b.row)};
}

std::string render_range(const CellRange& r) {
  std::string out = quote_sheet_name(r.sheet) + "!" + render_local(r.first_column, r.first_row);
  if (r.first_column != r.last_column || r.first_row != r.last_row)
    out += ":" + render_local(r.last_column, r.last_row);
  return out;
}

}  // namespace scr
