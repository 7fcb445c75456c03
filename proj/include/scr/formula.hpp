#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "scr/address.hpp"

namespace scr {

// A cell reference as written in a formula. `sheet` is always resolved
// (defaulting to the host cell's sheet); `sheet_explicit` records whether
// the source spelled it out.
struct Reference {
  std::string sheet;
  bool sheet_explicit = false;
  std::uint32_t column = 1;
  std::uint32_t row = 1;
  bool column_absolute = false;
  bool row_absolute = false;

  CellAddress address() const { return CellAddress{sheet, column, row}; }
  friend bool operator==(const Reference&, const Reference&) = default;
};

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

enum class UnaryOp { Negate };
enum class BinaryOp { Add, Sub, Mul, Div, Pow, Concat, Eq, Ne, Lt, Le, Gt, Ge };

struct NumberLit { double value; };
struct TextLit { std::string value; };
struct BoolLit { bool value; };
struct RefExpr { Reference ref; };
struct RangeExpr { Reference first; Reference last; };
struct UnaryExpr { UnaryOp op; ExprPtr operand; };
struct BinaryExpr { BinaryOp op; ExprPtr lhs; ExprPtr rhs; };
// `name` is stored upper-cased.
struct CallExpr { std::string name; std::vector<ExprPtr> args; };

struct Expr {
  std::variant<NumberLit, TextLit, BoolLit, RefExpr, RangeExpr, UnaryExpr,
               BinaryExpr, CallExpr>
      node;
};

// Structural equality (not pointer identity).
bool operator==(const Expr& a, const Expr& b);

ExprPtr make_number(double v);
ExprPtr make_text(std::string v);
ExprPtr make_bool(bool v);
ExprPtr make_ref(Reference r);
ExprPtr make_range(Reference first, Reference last);
ExprPtr make_unary(UnaryOp op, ExprPtr operand);
ExprPtr make_binary(BinaryOp op, ExprPtr lhs, ExprPtr rhs);
ExprPtr make_call(std::string name, std::vector<ExprPtr> args);

std::string_view binary_op_symbol(BinaryOp op);

// Parses `source` (which must start with "=") for a formula hosted at
// `origin`. Throws ParseError with the character offset into `source`.
ExprPtr parse_formula(std::string_view source, const CellAddress& origin);

// Canonical A1 rendering including the leading "=". Parsing the rendering
// at the same origin reproduces the tree.
std::string render_formula(const Expr& ast);

// Every referenced cell; ranges are expanded. Throws an analysis error when
// the expansion would exceed `kMaxRangeExpansion` cells.
inline constexpr std::uint64_t kMaxRangeExpansion = 1'000'000;
std::set<CellAddress> extract_references(const Expr& ast);

// Position-independent rendering: relative components become R[dr]/C[dc]
// offsets from `origin`, absolute ones R<n>/C<n>.
std::string normalize(const Expr& ast, const CellAddress& origin);

// Total node count; a range counts as one node.
std::size_t formula_length(const Expr& ast);

// Number literals whose value is outside `whitelist`. A negated literal
// counts as the negative constant, so `-1` can be whitelisted.
std::size_t count_magic_constants(const Expr& ast, const std::set<double>& whitelist);

// Names of called functions that are not in the supported set.
std::vector<std::string> unknown_functions(const Expr& ast);
bool is_known_function(std::string_view upper_name);

// Shortest round-trip decimal rendering used for all number output.
std::string format_number(double v);

}  // namespace scr
