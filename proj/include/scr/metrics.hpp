#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "scr/address.hpp"
#include "scr/evaluator.hpp"
#include "scr/grid.hpp"
#include "scr/json.hpp"

namespace scr {

struct SizeMetrics {
  std::size_t cells = 0;          // non-empty cells
  std::size_t columns = 0;        // distinct used column indices, summed over sheets
  std::size_t rows = 0;           // distinct used row indices, summed over sheets
  std::size_t sheets = 0;
  std::size_t formulas = 0;
  std::size_t unique_formulas = 0;  // distinct NormalForms across the workbook
  std::size_t data_elements = 0;    // Number + Boolean cells; Text cells are labels

  friend bool operator==(const SizeMetrics&, const SizeMetrics&) = default;
};

enum class Orientation { Vertical, Horizontal, Square };
std::string_view to_string(Orientation o);

// A 4-connected component of non-empty cells on one sheet.
struct Block {
  std::string sheet;
  std::set<CellAddress> members;
  std::uint32_t min_row = 0, max_row = 0, min_column = 0, max_column = 0;
  Orientation orientation = Orientation::Square;

  CellRange box() const { return CellRange{sheet, min_column, min_row, max_column, max_row}; }
};

struct CouplingMetrics {
  std::map<CellAddress, std::size_t> fan_in;    // per formula cell
  std::map<CellAddress, std::size_t> fan_out;   // per referenced cell (may be empty cells)
  std::map<CellAddress, std::size_t> cross_sheet_by_formula;
  std::size_t cross_sheet_refs = 0;
};

struct AnalysisConfig {
  std::size_t long_formula_threshold = 20;
  std::set<double> constant_whitelist{0, 1, -1, 100};
  double sum_tolerance = 1e-9;
};

AnalysisConfig analysis_config_from_json(const Json& j);
Json analysis_config_to_json(const AnalysisConfig& c);

struct FormulaFinding {
  CellAddress address;
  std::size_t value = 0;
};

struct MetricsReport {
  std::string snapshot;
  SizeMetrics size;
  std::size_t max_fan_in = 0;
  double mean_fan_in = 0;
  std::size_t max_fan_out = 0;
  std::size_t cross_sheet_refs = 0;
  std::vector<FormulaFinding> fan_in;       // every formula
  std::vector<FormulaFinding> cross_sheet;  // formulas with cross-sheet references
  std::vector<Block> blocks;
  std::set<CellAddress> inconsistent_cells;
  std::set<CellAddress> endpoints;
  std::vector<FormulaFinding> long_formulas;
  std::vector<FormulaFinding> magic_constants;
  std::size_t max_formula_length = 0;
  std::size_t max_magic_constants = 0;
  std::size_t long_formula_threshold = 0;
};

SizeMetrics size_metrics(const Workbook& w);
std::vector<Block> detect_blocks(const Workbook& w);
CouplingMetrics coupling_metrics(const Workbook& w, const DependencyGraph& g);
std::set<CellAddress> inconsistent_cells(const Workbook& w, const std::vector<Block>& blocks);
std::set<CellAddress> computation_endpoints(const Workbook& w, const DependencyGraph& g);
MetricsReport metrics_report(const Workbook& w, const AnalysisConfig& config = {});

Json metrics_to_json(const MetricsReport& r);

}  // namespace scr
