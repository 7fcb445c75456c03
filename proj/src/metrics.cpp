#include "scr/metrics.hpp"

#include <algorithm>
#include <deque>

#include "scr/error.hpp"

namespace scr {

std::string_view to_string(Orientation o) {
  switch (o) {
    case Orientation::Vertical: return "Vertical";
    case Orientation::Horizontal: return "Horizontal";
    case Orientation::Square: return "Square";
  }
  return "?";
}

SizeMetrics size_metrics(const Workbook& w) {
  SizeMetrics m;
  m.sheets = w.sheets().size();
  std::set<std::string> normal_forms;
  for (const auto& sheet : w.sheets()) {
    std::set<std::uint32_t> cols, rows;
    for (const auto& [pos, c] : sheet.cells()) {
      ++m.cells;
      cols.insert(pos.column);
      rows.insert(pos.row);
      switch (c.kind) {
        case CellKind::Formula:
          ++m.formulas;
          normal_forms.insert(normalize(*c.ast, CellAddress{sheet.name(), pos.column, pos.row}));
          break;
        case CellKind::Number:
        case CellKind::Boolean:
          ++m.data_elements;
          break;
        default:
          break;
      }
    }
    m.columns += cols.size();
    m.rows += rows.size();
  }
  m.unique_formulas = normal_forms.size();
  return m;
}

std::vector<Block> detect_blocks(const Workbook& w) {
  std::vector<Block> blocks;
  for (const auto& sheet : w.sheets()) {
    std::set<CellPos> seen;
    for (const auto& [start, _] : sheet.cells()) {
      if (seen.contains(start)) continue;
      Block b;
      b.sheet = sheet.name();
      b.min_row = b.max_row = start.row;
      b.min_column = b.max_column = start.column;
      std::deque<CellPos> queue{start};
      seen.insert(start);
      while (!queue.empty()) {
        CellPos p = queue.front();
        queue.pop_front();
        b.members.insert(CellAddress{sheet.name(), p.column, p.row});
        b.min_row = std::min(b.min_row, p.row);
        b.max_row = std::max(b.max_row, p.row);
        b.min_column = std::min(b.min_column, p.column);
        b.max_column = std::max(b.max_column, p.column);
        const CellPos around[] = {{p.row - 1, p.column}, {p.row + 1, p.column}, {p.row, p.column - 1}, {p.row, p.column + 1}};
        for (const auto& q : around) {
          if (q.row == 0 || q.column == 0) continue;
          if (!sheet.cells().contains(q) || !seen.insert(q).second) continue;
          queue.push_back(q);
        }
      }
      auto height = b.max_row - b.min_row + 1, width = b.max_column - b.min_column + 1;
      b.orientation = height > width ? Orientation::Vertical : width > height ? Orientation::Horizontal : Orientation::Square;
      blocks.push_back(std::move(b));
    }
  }
  return blocks;
}

CouplingMetrics coupling_metrics(const Workbook& w, const DependencyGraph& g) {
  CouplingMetrics m;
  for (const auto& sheet : w.sheets()) {
    for (const auto& [pos, c] : sheet.cells()) {
      if (!c.is_formula()) continue;
      CellAddress here{sheet.name(), pos.column, pos.row};
      auto it = g.inputs.find(here);
      std::size_t fan_in = 0, cross = 0;
      if (it != g.inputs.end()) {
        fan_in = it->second.size();
        for (const auto& u : it->second) {
          ++m.fan_out[u];
          if (u.sheet != here.sheet) ++cross;
        }
      }
      m.fan_in[here] = fan_in;
      if (cross) m.cross_sheet_by_formula[here] = cross;
      m.cross_sheet_refs += cross;
    }
  }
  return m;
}

namespace {

struct SegmentCell {
  std::uint32_t key;  // column for a row pass, row for a column pass
  CellAddress address;
  const CellContent* content;
};

void scan_segment(std::vector<SegmentCell>& seg, const std::map<CellAddress, std::string>& nf,
                  std::set<CellAddress>& out) {
  std::sort(seg.begin(), seg.end(), [](const auto& a, const auto& b) { return a.key < b.key; });
  std::map<std::string, std::size_t> freq;
  std::map<std::string, std::uint32_t> first_seen;
  std::uint32_t lo = 0, hi = 0;
  std::size_t formulas = 0;
  for (const auto& c : seg) {
    if (!c.content->is_formula()) continue;
    const auto& form = nf.at(c.address);
    ++freq[form];
    first_seen.emplace(form, c.key);
    if (formulas++ == 0) lo = c.key;
    hi = c.key;
  }
  if (formulas < 2) return;
  // Modal NormalForm; ties go to the one whose first cell is leftmost/topmost.
  const std::string* modal = nullptr;
  for (const auto& [form, n] : freq) {
    if (!modal || n > freq.at(*modal) || (n == freq.at(*modal) && first_seen.at(form) < first_seen.at(*modal)))
      modal = &form;
  }
  for (const auto& c : seg) {
    if (c.content->is_formula()) {
      if (nf.at(c.address) != *modal) out.insert(c.address);
    } else if ((c.content->kind == CellKind::Number || c.content->kind == CellKind::Boolean) && c.key > lo && c.key < hi) {
      out.insert(c.address);
    }
  }
}

}  // namespace

std::set<CellAddress> inconsistent_cells(const Workbook& w, const std::vector<Block>& blocks) {
  std::set<CellAddress> out;
  for (const auto& b : blocks) {
    std::map<CellAddress, std::string> nf;
    std::map<std::uint32_t, std::vector<SegmentCell>> by_row, by_column;
    for (const auto& a : b.members) {
      const auto& c = w.at(a);
      if (c.is_formula()) nf[a] = normalize(*c.ast, a);
      by_row[a.row].push_back({a.column, a, &c});
      by_column[a.column].push_back({a.row, a, &c});
    }
    for (auto& [_, seg] : by_row) scan_segment(seg, nf, out);
    for (auto& [_, seg] : by_column) scan_segment(seg, nf, out);
  }
  return out;
}

std::set<CellAddress> computation_endpoints(const Workbook& w, const DependencyGraph& g) {
  std::set<CellAddress> out;
  for (const auto& sheet : w.sheets())
    for (const auto& [pos, c] : sheet.cells()) {
      if (!c.is_formula()) continue;
      CellAddress here{sheet.name(), pos.column, pos.row};
      auto it = g.outputs.find(here);
      if (it == g.outputs.end() || it->second.empty()) out.insert(here);
    }
  return out;
}

MetricsReport metrics_report(const Workbook& w, const AnalysisConfig& config) {
  MetricsReport r;
  r.snapshot = snapshot_id(w);
  r.size = size_metrics(w);
  auto g = build_graph(w);
  auto coupling = coupling_metrics(w, g);
  std::size_t total_fan_in = 0;
  for (const auto& [a, n] : coupling.fan_in) {
    r.fan_in.push_back({a, n});
    r.max_fan_in = std::max(r.max_fan_in, n);
    total_fan_in += n;
  }
  r.mean_fan_in = coupling.fan_in.empty() ? 0.0 : double(total_fan_in) / double(coupling.fan_in.size());
  for (const auto& [_, n] : coupling.fan_out) r.max_fan_out = std::max(r.max_fan_out, n);
  r.cross_sheet_refs = coupling.cross_sheet_refs;
  for (const auto& [a, n] : coupling.cross_sheet_by_formula) r.cross_sheet.push_back({a, n});
  r.blocks = detect_blocks(w);
  r.inconsistent_cells = inconsistent_cells(w, r.blocks);
  r.endpoints = computation_endpoints(w, g);
  r.long_formula_threshold = config.long_formula_threshold;
  for (const auto& sheet : w.sheets())
    for (const auto& [pos, c] : sheet.cells()) {
      if (!c.is_formula()) continue;
      CellAddress here{sheet.name(), pos.column, pos.row};
      auto len = formula_length(*c.ast);
      auto magic = count_magic_constants(*c.ast, config.constant_whitelist);
      r.max_formula_length = std::max(r.max_formula_length, len);
      r.max_magic_constants = std::max(r.max_magic_constants, magic);
      if (len > config.long_formula_threshold) r.long_formulas.push_back({here, len});
      if (magic > 0) r.magic_constants.push_back({here, magic});
    }
  return r;
}

AnalysisConfig analysis_config_from_json(const Json& j) {
  AnalysisConfig c;
  if (!j.is_object()) throw config_error("analysis config must be an object");
  try {
    if (j.contains("long_formula_threshold")) c.long_formula_threshold = j["long_formula_threshold"].get<std::size_t>();
    if (j.contains("constant_whitelist")) {
      c.constant_whitelist.clear();
      for (const auto& v : j["constant_whitelist"]) c.constant_whitelist.insert(v.get<double>());
    }
    if (j.contains("sum_tolerance")) c.sum_tolerance = j["sum_tolerance"].get<double>();
  } catch (const Json::exception& e) {
    throw config_error(std::string("analysis config: ") + e.what());
  }
  return c;
}

Json analysis_config_to_json(const AnalysisConfig& c) {
  Json j;
  j["long_formula_threshold"] = c.long_formula_threshold;
  j["constant_whitelist"] = Json::array();
  for (double v : c.constant_whitelist) j["constant_whitelist"].push_back(v);
  j["sum_tolerance"] = c.sum_tolerance;
  return j;
}

namespace {

Json findings(const std::vector<FormulaFinding>& xs, const char* field) {
  auto out = Json::array();
  for (const auto& f : xs) {
    Json j;
    j["address"] = render_address(f.address);
    j[field] = f.value;
    out.push_back(std::move(j));
  }
  return out;
}

Json addresses(const std::set<CellAddress>& xs) {
  auto out = Json::array();
  for (const auto& a : xs) out.push_back(render_address(a));
  return out;
}

}  // namespace

Json metrics_to_json(const MetricsReport& r) {
  Json j;
  j["snapshot"] = r.snapshot;
  Json size;
  size["cells"] = r.size.cells;
  size["columns"] = r.size.columns;
  size["rows"] = r.size.rows;
  size["sheets"] = r.size.sheets;
  size["formulas"] = r.size.formulas;
  size["unique_formulas"] = r.size.unique_formulas;
  size["data_elements"] = r.size.data_elements;
  j["size"] = std::move(size);
  Json coupling;
  coupling["max_fan_in"] = r.max_fan_in;
  coupling["mean_fan_in"] = r.mean_fan_in;
  coupling["max_fan_out"] = r.max_fan_out;
  coupling["cross_sheet_refs"] = r.cross_sheet_refs;
  coupling["fan_in"] = findings(r.fan_in, "fan_in");
  coupling["cross_sheet"] = findings(r.cross_sheet, "refs");
  j["coupling"] = std::move(coupling);
  auto blocks = Json::array();
  for (const auto& b : r.blocks) {
    Json jb;
    jb["range"] = render_range(b.box());
    jb["cells"] = b.members.size();
    jb["orientation"] = to_string(b.orientation);
    blocks.push_back(std::move(jb));
  }
  j["blocks"] = std::move(blocks);
  j["inconsistent_cells"] = addresses(r.inconsistent_cells);
  j["endpoints"] = addresses(r.endpoints);
  Json smells;
  smells["long_formula_threshold"] = r.long_formula_threshold;
  smells["max_formula_length"] = r.max_formula_length;
  smells["long_formulas"] = findings(r.long_formulas, "length");
  smells["max_magic_constants"] = r.max_magic_constants;
  smells["magic_constants"] = findings(r.magic_constants, "count");
  j["smells"] = std::move(smells);
  return j;
}

}  // namespace scr
