#pragma once

#include <map>
#include <set>
#include <string>
#include <variant>
#include <vector>


#include "scr/address.hpp"
#include "scr/grid.hpp"
#include "scr/json.hpp"

namespace scr {

// Edge u -> v means the formula at v reads u.
struct DependencyGraph {
  std::vector<CellAddress> nodes;  // sorted
  std::map<CellAddress, std::set<CellAddress>> inputs;   // v -> {u}
  std::map<CellAddress, std::set<CellAddress>> outputs;  // u -> {v}

  std::size_t edge_count() const;
  // All edges in (from, to) order.
  std::vector<std::pair<CellAddress, CellAddress>> edges() const;
};

DependencyGraph build_graph(const Workbook& w);

struct TopoResult {
  // Nodes not on and not downstream of a cycle, inputs first. Ties are
  // broken by address order (sheet, row, column).
  std::vector<CellAddress> order;
  // Every node lying on at least one cycle (including self-loops).
  std::set<CellAddress> cycle;
  // Nodes downstream of a cycle but not on one.
  std::set<CellAddress> cycle_dependents;

  bool has_cycle() const { return !cycle.empty(); }
};

TopoResult topological_order(const DependencyGraph& g);

enum class ErrorKind { Div0, Value, Cycle, Name };
std::string_view to_string(ErrorKind k);

struct Blank {
  friend bool operator==(Blank, Blank) { return true; }
};
struct EvalError {
  ErrorKind kind;
  friend bool operator==(EvalError, EvalError) = default;
};

using EvalValue = std::variant<Blank, double, std::string, bool, EvalError>;

std::string render_value(const EvalValue& v);
Json value_to_json(const EvalValue& v);

using ValueMap = std::map<CellAddress, EvalValue>;

// Values for every graph node. Cells on cycles and their dependents are
// Error(CYCLE); references into missing sheets read as Error(NAME).
ValueMap evaluate(const Workbook& w);

// --- expected-value rules ---------------------------------------------------

enum class Predicate { Between, Nonnegative, EqualsSumOf, NotError };

struct ExpectedValueRule {
  std::string id;
  std::string target;  // A1 range text; unqualified ranges mean the first sheet
  Predicate predicate = Predicate::NotError;
  double low = 0, high = 0;   // Between
  std::string sum_range;      // EqualsSumOf
};

struct RuleViolation {
  std::string rule_id;
  CellAddress address;
  EvalValue observed;
  std::string message;
};

struct RuleOptions {
  double sum_tolerance = 1e-9;
};

// Throws a config error for malformed rules or targets outside the grid
// or the workbook's sheets.
std::vector<RuleViolation> check_rules(const Workbook& w, const std::vector<ExpectedValueRule>& rules,
                                       const RuleOptions& options = {});

std::vector<ExpectedValueRule> rules_from_json(const Json& j);
Json rules_to_json(const std::vector<ExpectedValueRule>& rules);
Json violations_to_json(const std::vector<RuleViolation>& v);

}  // namespace scr
