#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "scr/grid.hpp"
#include "scr/json.hpp"
#include "scr/timestamp.hpp"

namespace scr {

enum class DeltaKind { Added, Removed, ValueChanged, FormulaChanged, FormulaIntroduced, FormulaRemoved };
std::string_view to_string(DeltaKind k);

struct CellDelta {
  CellAddress address;
  CellContent before;  // Empty when the cell is new
  CellContent after;   // Empty when the cell is gone
  DeltaKind kind = DeltaKind::ValueChanged;

  bool touches_formula() const { return before.is_formula() || after.is_formula(); }
};

// Kind of a change between two differing contents. Two formulas that differ
// always differ in NormalForm, so the kinds alone decide.
DeltaKind delta_kind(const CellContent& before, const CellContent& after);

enum class SheetOpKind { Added, Removed, Renamed };

struct SheetOp {
  SheetOpKind kind;
  std::string sheet;
  std::string renamed_to;  // Renamed only
  friend bool operator==(const SheetOp&, const SheetOp&) = default;
};

struct Layout {
  std::string name;
  std::vector<std::string> sheets;
  friend bool operator==(const Layout&, const Layout&) = default;
};

struct ChangeSet {
  std::string id;
  std::string author;
  Timestamp timestamp{};
  std::string description;
  std::string base;
  std::string result;
  Layout before_layout;
  Layout after_layout;
  std::vector<SheetOp> sheet_ops;
  std::vector<CellDelta> deltas;  // sorted by (sheet, row, column)

  bool empty() const { return deltas.empty() && sheet_ops.empty() && before_layout == after_layout; }
};

// Canonical record; the id is SHA-256 over this record without its "id".
Json changeset_to_json(const ChangeSet& cs);
// Verifies the id and every delta kind; throws an integrity error otherwise.
ChangeSet changeset_from_json(const Json& j);
std::string changeset_digest(const ChangeSet& cs);

struct ChangeMeta {
  std::string author;
  Timestamp timestamp{};
  std::string description;
  // Declared renames (old -> new). Undeclared renames show up as a removed
  // and an added sheet.
  std::map<std::string, std::string> renames;
};

ChangeSet diff(const Workbook& before, const Workbook& after, const ChangeMeta& meta);

enum class ChangeClass { Structural, NonStructural };
std::string_view to_string(ChangeClass c);

// Structural iff a formula is touched, a sheet is added/removed/renamed/
// reordered, or an added/removed cell is referenced by a formula in either
// version.
ChangeClass classify(const ChangeSet& cs, const Workbook& before, const Workbook& after);

struct RiskWeights {
  double formula = 5;
  double fan_out = 1;  // per referencing formula
  double cross_sheet = 2;
  double endpoint = 3;
};

struct RankedChange {
  CellDelta delta;
  double score = 0;
  double formula_component = 0;
  double fan_out_component = 0;
  double cross_sheet_component = 0;
  double endpoint_component = 0;
};

// Descending score, ties in address order.
std::vector<RankedChange> rank_by_risk(const ChangeSet& cs, const Workbook& before, const Workbook& after,
                                       const RiskWeights& weights = {});
Json ranked_to_json(const std::vector<RankedChange>& ranked);

// Refuses when snapshot_id(w) != cs.base; verifies the result digest.
Workbook apply(const Workbook& w, const ChangeSet& cs);
ChangeSet invert(const ChangeSet& cs);

// Number of change sets to apply, or a cut-off instant (inclusive).
using ReplayLimit = std::variant<std::size_t, Timestamp>;

// Folds apply() over the prefix of `log` selected by `upto`; the whole log
// must be chain-consistent.
Workbook replay(const Workbook& base, const std::vector<ChangeSet>& log, ReplayLimit upto);

}  // namespace scr
