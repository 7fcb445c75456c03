#pragma once

// Random generators and naive helpers shared by unit and acceptance tests.

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "scr/formula.hpp"
#include "scr/grid.hpp"

#include <nlohmann/json.hpp>

namespace testsupport {

using Rng = std::mt19937_64;

inline std::uint32_t pick(Rng& rng, std::uint32_t lo, std::uint32_t hi) {
  return std::uniform_int_distribution<std::uint32_t>(lo, hi)(rng);
}

inline bool coin(Rng& rng, double p = 0.5) { return std::bernoulli_distribution(p)(rng); }

// Random expression tree whose references stay inside
// [1, max_col] x [1, max_row] on `sheet` (or `other_sheet` occasionally).
inline scr::ExprPtr random_expr(Rng& rng, int depth, const std::string& sheet, std::uint32_t max_col,
                                std::uint32_t max_row, const std::string& other_sheet = "") {
  auto ref = [&] {
    scr::Reference r;
    r.sheet = sheet;
    if (!other_sheet.empty() && coin(rng, 0.1)) {
      r.sheet = other_sheet;
      r.sheet_explicit = true;
    }
    r.column = pick(rng, 1, max_col);
    r.row = pick(rng, 1, max_row);
    r.column_absolute = coin(rng, 0.25);
    r.row_absolute = coin(rng, 0.25);
    return r;
  };
  int choice = depth <= 0 ? int(pick(rng, 0, 3)) : int(pick(rng, 0, 9));
  switch (choice) {
    case 0: return scr::make_number(double(pick(rng, 0, 20)) / (coin(rng) ? 1 : 4));
    case 1: return scr::make_ref(ref());
    case 2: {
      auto a = ref();
      auto b = ref();
      b.sheet = a.sheet;
      b.sheet_explicit = a.sheet_explicit;
      return scr::make_range(a, b);
    }
    case 3: return coin(rng) ? scr::make_bool(coin(rng)) : scr::make_text(coin(rng) ? "a\"b" : "t");
    case 4: return scr::make_unary(scr::UnaryOp::Negate, random_expr(rng, depth - 1, sheet, max_col, max_row, other_sheet));
    case 5:
    case 6:
    case 7: {
      static constexpr scr::BinaryOp ops[] = {
          scr::BinaryOp::Add, scr::BinaryOp::Sub, scr::BinaryOp::Mul, scr::BinaryOp::Div,
          scr::BinaryOp::Pow, scr::BinaryOp::Concat, scr::BinaryOp::Eq, scr::BinaryOp::Ne,
          scr::BinaryOp::Lt, scr::BinaryOp::Le, scr::BinaryOp::Gt, scr::BinaryOp::Ge};
      auto op = ops[pick(rng, 0, 11)];
      return scr::make_binary(op, random_expr(rng, depth - 1, sheet, max_col, max_row, other_sheet),
                              random_expr(rng, depth - 1, sheet, max_col, max_row, other_sheet));
    }
    default: {
      static const char* fns[] = {"SUM", "MAX", "MIN", "AVERAGE", "COUNT", "IF", "ABS"};
      std::string f = fns[pick(rng, 0, 6)];
      std::size_t n = f == "IF" ? 3 : f == "ABS" ? 1 : pick(rng, 1, 3);
      std::vector<scr::ExprPtr> args;
      for (std::size_t i = 0; i < n; ++i)
        args.push_back(random_expr(rng, depth - 1, sheet, max_col, max_row, other_sheet));
      return scr::make_call(f, std::move(args));
    }
  }
}

// Builds a workbook from {sheet -> {A1 -> raw text}} via the interchange
// parser so tests exercise the real ingestion path.
inline scr::Workbook book(const std::vector<std::pair<std::string, std::map<std::string, std::string>>>& sheets,
                          const std::string& name = "book") {
  nlohmann::json doc;
  doc["name"] = name;
  doc["sheets"] = nlohmann::json::array();
  for (const auto& [sn, cells] : sheets) {
    nlohmann::json js;
    js["name"] = sn;
    js["cells"] = nlohmann::json::object();
    for (const auto& [k, v] : cells) js["cells"][k] = v;
    doc["sheets"].push_back(js);
  }
  return scr::parse_workbook(doc.dump());
}

inline scr::Workbook sheet1(const std::map<std::string, std::string>& cells) { return book({{"S1", cells}}); }

// Random workbook with at most `max_cells` cells on up to two sheets
// inside a small grid so blocks, copies and references collide often.
inline scr::Workbook random_workbook(Rng& rng, std::size_t max_cells, std::uint32_t grid = 8) {
  std::vector<std::pair<std::string, std::map<std::string, std::string>>> sheets;
  std::uint32_t nsheets = pick(rng, 1, 2);
  std::size_t budget = pick(rng, 0, std::uint32_t(max_cells));
  for (std::uint32_t s = 0; s < nsheets; ++s) {
    std::string name = "S" + std::to_string(s + 1);
    std::string other = nsheets == 2 ? (s == 0 ? "S2" : "S1") : "";
    std::map<std::string, std::string> cells;
    std::size_t n = s + 1 == nsheets ? budget : pick(rng, 0, std::uint32_t(budget));
    budget -= n;
    // A small pool of formula "templates" written as relative copies makes
    // repeated NormalForms likely.
    std::vector<scr::ExprPtr> pool;
    for (int i = 0; i < 3; ++i) pool.push_back(random_expr(rng, 2, name, grid, grid, other));
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t col = pick(rng, 1, grid), row = pick(rng, 1, grid);
      std::string key = scr::render_local(col, row);
      std::string raw;
      switch (pick(rng, 0, 5)) {
        case 0: raw = std::to_string(pick(rng, 0, 50)); break;
        case 1: raw = coin(rng) ? "TRUE" : "label"; break;
        case 2: raw = scr::render_formula(*pool[pick(rng, 0, 2)]); break;
        case 3: {
          // Relative formula referring to a neighbour, copied often.
          raw = row > 1 ? "=" + scr::render_local(col, row - 1) + "+1" : "=1+1";
          break;
        }
        case 4: raw = scr::render_formula(*random_expr(rng, 2, name, grid, grid, other)); break;
        default: raw = "=SUM(" + scr::render_local(1, 1) + ":" + scr::render_local(1, std::max<std::uint32_t>(1, row - 1)) + ")"; break;
      }
      cells[key] = raw;
    }
    sheets.emplace_back(name, std::move(cells));
  }
  return book(sheets, "random");
}

}  // namespace testsupport
