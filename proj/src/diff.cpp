#include "scr/diff.hpp"

#include <algorithm>
#include <set>

#include "scr/digest.hpp"
#include "scr/error.hpp"
#include "scr/evaluator.hpp"
#include "scr/metrics.hpp"

namespace scr {

namespace {

constexpr std::string_view kDeltaNames[] = {"Added",          "Removed",           "ValueChanged",
                                            "FormulaChanged", "FormulaIntroduced", "FormulaRemoved"};
constexpr std::string_view kSheetOpNames[] = {"Added", "Removed", "Renamed"};

template <typename E, std::size_t N>
E enum_from(std::string_view text, const std::string_view (&names)[N], const char* what) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == text) return static_cast<E>(i);
  }
  throw integrity_error(std::string("unknown ") + what + " '" + std::string(text) + "'");
}

CellContent rehome(const CellContent& c, const CellAddress& at) {
  if (c.is_empty()) return c;
  return classify_cell(c.canonical_text(), at);
}

Json content_json(const CellContent& c) {
  if (c.is_empty()) return nullptr;
  return c.canonical_text();
}

CellContent content_from(const Json& j, const CellAddress& at) {
  if (j.is_null()) return {};
  if (!j.is_string()) throw integrity_error("cell content must be a string or null at " + render_address(at));
  return classify_cell(j.get<std::string>(), at);
}

Json layout_json(const Layout& l) {
  Json j = Json::object();
  j["name"] = l.name;
  j["sheets"] = l.sheets;
  return j;
}

Layout layout_from(const Json& j) {
  return {j.at("name").get<std::string>(), j.at("sheets").get<std::vector<std::string>>()};
}

Layout layout_of(const Workbook& w) {
  Layout l{w.name(), {}};
  for (const auto& s : w.sheets()) l.sheets.push_back(s.name());
  return l;
}

// old -> new for declared renames in this change set.
std::map<std::string, std::string> renames_of(const ChangeSet& cs) {
  std::map<std::string, std::string> r;
  for (const auto& op : cs.sheet_ops) {
    if (op.kind == SheetOpKind::Renamed) r[op.sheet] = op.renamed_to;
  }
  return r;
}

// Maps an address in the after naming back to the before naming.
CellAddress before_name(const CellAddress& a, const std::map<std::string, std::string>& renames) {
  for (const auto& [from, to] : renames) {
    if (to == a.sheet) return {from, a.column, a.row};
  }
  return a;
}

bool reads_other_sheet(const CellContent& c, const std::string& sheet) {
  if (!c.is_formula()) return false;
  for (const auto& ref : extract_references(*c.ast)) {
    if (ref.sheet != sheet) return true;
  }
  return false;
}

}  // namespace

std::string_view to_string(DeltaKind k) { return kDeltaNames[static_cast<int>(k)]; }

std::string_view to_string(ChangeClass c) { return c == ChangeClass::Structural ? "Structural" : "NonStructural"; }

DeltaKind delta_kind(const CellContent& before, const CellContent& after) {
  if (before.is_empty()) return after.is_formula() ? DeltaKind::FormulaIntroduced : DeltaKind::Added;
  if (after.is_empty()) return before.is_formula() ? DeltaKind::FormulaRemoved : DeltaKind::Removed;
  if (!before.is_formula() && !after.is_formula()) return DeltaKind::ValueChanged;
  return DeltaKind::FormulaChanged;
}

Json changeset_to_json(const ChangeSet& cs) {
  Json j = Json::object();
  j["id"] = cs.id;
  j["base"] = cs.base;
  j["result"] = cs.result;
  j["author"] = cs.author;
  j["timestamp"] = format_timestamp(cs.timestamp);
  j["description"] = cs.description;
  j["layout"] = Json::object();
  j["layout"]["before"] = layout_json(cs.before_layout);
  j["layout"]["after"] = layout_json(cs.after_layout);
  j["sheet_ops"] = Json::array();
  for (const auto& op : cs.sheet_ops) {
    Json o = Json::object();
    o["op"] = kSheetOpNames[static_cast<int>(op.kind)];
    o["sheet"] = op.sheet;
    if (op.kind == SheetOpKind::Renamed) o["to"] = op.renamed_to;
    j["sheet_ops"].push_back(std::move(o));
  }
  j["deltas"] = Json::array();
  for (const auto& d : cs.deltas) {
    Json o = Json::object();
    o["address"] = render_address(d.address);
    o["kind"] = to_string(d.kind);
    o["before"] = content_json(d.before);
    o["after"] = content_json(d.after);
    j["deltas"].push_back(std::move(o));
  }
  return j;
}

std::string changeset_digest(const ChangeSet& cs) {
  Json j = changeset_to_json(cs);
  j.erase("id");
  return sha256_hex(j.dump());
}

ChangeSet changeset_from_json(const Json& j) {
  ChangeSet cs;
  try {
    cs.id = j.at("id").get<std::string>();
    cs.base = j.at("base").get<std::string>();
    cs.result = j.at("result").get<std::string>();
    cs.author = j.at("author").get<std::string>();
    cs.timestamp = parse_timestamp(j.at("timestamp").get<std::string>());
    cs.description = j.at("description").get<std::string>();
    cs.before_layout = layout_from(j.at("layout").at("before"));
    cs.after_layout = layout_from(j.at("layout").at("after"));
    for (const auto& o : j.at("sheet_ops")) {
      SheetOp op{enum_from<SheetOpKind>(o.at("op").get<std::string>(), kSheetOpNames, "sheet op"),
                 o.at("sheet").get<std::string>(), ""};
      if (op.kind == SheetOpKind::Renamed) op.renamed_to = o.at("to").get<std::string>();
      cs.sheet_ops.push_back(std::move(op));
    }
    for (const auto& o : j.at("deltas")) {
      CellDelta d;
      d.address = parse_address(o.at("address").get<std::string>(), "");
      d.before = content_from(o.at("before"), d.address);
      d.after = content_from(o.at("after"), d.address);
      if (same_content(d.before, d.after)) {
        throw integrity_error("delta at " + render_address(d.address) + " does not change anything");
      }
      d.kind = delta_kind(d.before, d.after);
      if (to_string(d.kind) != o.at("kind").get<std::string>()) {
        throw integrity_error("delta kind mismatch at " + render_address(d.address));
      }
      cs.deltas.push_back(std::move(d));
    }
  } catch (const Json::exception& e) {
    throw integrity_error(std::string("malformed change set: ") + e.what());
  } catch (const Error& e) {
    if (e.error_class() == ErrorClass::Integrity) throw;
    throw integrity_error(std::string("malformed change set: ") + e.what());
  }
  if (changeset_digest(cs) != cs.id) throw integrity_error("change set id does not match its content: " + cs.id);
  return cs;
}

ChangeSet diff(const Workbook& before, const Workbook& after, const ChangeMeta& meta) {
  ChangeSet cs;
  cs.author = meta.author;
  cs.timestamp = meta.timestamp;
  cs.description = meta.description;
  cs.base = snapshot_id(before);
  cs.result = snapshot_id(after);
  cs.before_layout = layout_of(before);
  cs.after_layout = layout_of(after);

  std::set<std::string> targets;
  for (const auto& [from, to] : meta.renames) {
    if (!before.find_sheet(from)) throw validation_error("renamed sheet '" + from + "' is not in the base workbook");
    if (!after.find_sheet(to)) throw validation_error("rename target '" + to + "' is not in the new workbook");
    if (after.find_sheet(from)) throw validation_error("renamed sheet '" + from + "' still exists");
    if (before.find_sheet(to)) throw validation_error("rename target '" + to + "' already existed");
    if (!targets.insert(to).second) throw validation_error("two sheets renamed to '" + to + "'");
    cs.sheet_ops.push_back({SheetOpKind::Renamed, from, to});
  }

  auto emit = [&](const CellAddress& at, const CellContent& b, const CellContent& a) {
    cs.deltas.push_back({at, b, a, delta_kind(b, a)});
  };

  std::set<std::string> matched;
  for (const auto& bs : before.sheets()) {
    auto it = meta.renames.find(bs.name());
    const std::string target = it == meta.renames.end() ? bs.name() : it->second;
    const Sheet* as = after.find_sheet(target);
    if (!as) {
      cs.sheet_ops.push_back({SheetOpKind::Removed, bs.name(), ""});
      for (const auto& [pos, c] : bs.cells()) emit({bs.name(), pos.column, pos.row}, c, {});
      continue;
    }
    matched.insert(target);
    const bool renamed = target != bs.name();
    auto bi = bs.cells().begin(), be = bs.cells().end();
    auto ai = as->cells().begin(), ae = as->cells().end();
    while (bi != be || ai != ae) {
      if (ai == ae || (bi != be && bi->first < ai->first)) {
        CellAddress at{target, bi->first.column, bi->first.row};
        emit(at, renamed ? rehome(bi->second, at) : bi->second, {});
        ++bi;
      } else if (bi == be || ai->first < bi->first) {
        emit({target, ai->first.column, ai->first.row}, {}, ai->second);
        ++ai;
      } else {
        if (!same_content(bi->second, ai->second)) {
          CellAddress at{target, ai->first.column, ai->first.row};
          emit(at, renamed ? rehome(bi->second, at) : bi->second, ai->second);
        }
        ++bi;
        ++ai;
      }
    }
  }
  for (const auto& as : after.sheets()) {
    if (matched.count(as.name())) continue;
    cs.sheet_ops.push_back({SheetOpKind::Added, as.name(), ""});
    for (const auto& [pos, c] : as.cells()) emit({as.name(), pos.column, pos.row}, {}, c);
  }
  std::sort(cs.deltas.begin(), cs.deltas.end(),
            [](const CellDelta& x, const CellDelta& y) { return x.address < y.address; });
  cs.id = changeset_digest(cs);
  return cs;
}

ChangeClass classify(const ChangeSet& cs, const Workbook& before, const Workbook& after) {
  if (!cs.sheet_ops.empty()) return ChangeClass::Structural;
  if (cs.before_layout.sheets != cs.after_layout.sheets) return ChangeClass::Structural;
  bool needs_refs = false;
  for (const auto& d : cs.deltas) {
    if (d.touches_formula()) return ChangeClass::Structural;
    if (d.kind == DeltaKind::Added || d.kind == DeltaKind::Removed) needs_refs = true;
  }
  if (!needs_refs) return ChangeClass::NonStructural;
  const auto renames = renames_of(cs);
  const auto gb = build_graph(before);
  const auto ga = build_graph(after);
  for (const auto& d : cs.deltas) {
    if (d.kind != DeltaKind::Added && d.kind != DeltaKind::Removed) continue;
    auto ob = gb.outputs.find(before_name(d.address, renames));
    auto oa = ga.outputs.find(d.address);
    if ((ob != gb.outputs.end() && !ob->second.empty()) || (oa != ga.outputs.end() && !oa->second.empty())) {
      return ChangeClass::Structural;
    }
  }
  return ChangeClass::NonStructural;
}

std::vector<RankedChange> rank_by_risk(const ChangeSet& cs, const Workbook& before, const Workbook& after,
                                       const RiskWeights& weights) {
  const auto renames = renames_of(cs);
  const auto gb = build_graph(before);
  const auto ga = build_graph(after);
  const auto endpoints = computation_endpoints(after, ga);

  auto referrers_elsewhere = [](const DependencyGraph& g, const CellAddress& a) {
    auto it = g.outputs.find(a);
    if (it == g.outputs.end()) return false;
    return std::any_of(it->second.begin(), it->second.end(),
                       [&](const CellAddress& v) { return v.sheet != a.sheet; });
  };

  std::vector<RankedChange> out;
  out.reserve(cs.deltas.size());
  for (const auto& d : cs.deltas) {
    RankedChange r;
    r.delta = d;
    const CellAddress old_at = before_name(d.address, renames);
    if (d.touches_formula()) r.formula_component = weights.formula;
    auto it = ga.outputs.find(d.address);
    const std::size_t fan_out = it == ga.outputs.end() ? 0 : it->second.size();
    r.fan_out_component = weights.fan_out * static_cast<double>(fan_out);
    const bool cross = reads_other_sheet(d.before, d.address.sheet) || reads_other_sheet(d.after, d.address.sheet) ||
                       referrers_elsewhere(ga, d.address) || referrers_elsewhere(gb, old_at);
    if (cross) r.cross_sheet_component = weights.cross_sheet;
    if (endpoints.count(d.address)) r.endpoint_component = weights.endpoint;
    r.score = r.formula_component + r.fan_out_component + r.cross_sheet_component + r.endpoint_component;
    out.push_back(std::move(r));
  }
  std::stable_sort(out.begin(), out.end(), [](const RankedChange& x, const RankedChange& y) {
    if (x.score != y.score) return x.score > y.score;
    return x.delta.address < y.delta.address;
  });
  return out;
}

Json ranked_to_json(const std::vector<RankedChange>& ranked) {
  Json arr = Json::array();
  for (const auto& r : ranked) {
    Json o = Json::object();
    o["address"] = render_address(r.delta.address);
    o["kind"] = to_string(r.delta.kind);
    o["before"] = content_json(r.delta.before);
    o["after"] = content_json(r.delta.after);
    o["score"] = r.score;
    o["rationale"] = Json::object();
    o["rationale"]["formula"] = r.formula_component;
    o["rationale"]["fan_out"] = r.fan_out_component;
    o["rationale"]["cross_sheet"] = r.cross_sheet_component;
    o["rationale"]["endpoint"] = r.endpoint_component;
    arr.push_back(std::move(o));
  }
  return arr;
}

Workbook apply(const Workbook& w, const ChangeSet& cs) {
  const std::string have = snapshot_id(w);
  if (have != cs.base) {
    throw state_error("change set " + cs.id + " expects base " + cs.base + " but the workbook is " + have);
  }
  std::map<std::string, CellMap> sheets;
  for (const auto& s : w.sheets()) sheets[s.name()] = s.cells();

  for (const auto& op : cs.sheet_ops) {
    if (op.kind != SheetOpKind::Renamed) continue;
    auto node = sheets.extract(op.sheet);
    if (node.empty() || sheets.count(op.renamed_to)) {
      throw integrity_error("cannot rename sheet '" + op.sheet + "' to '" + op.renamed_to + "'");
    }
    CellMap moved;
    for (const auto& [pos, c] : node.mapped()) moved[pos] = rehome(c, {op.renamed_to, pos.column, pos.row});
    sheets[op.renamed_to] = std::move(moved);
  }
  for (const auto& op : cs.sheet_ops) {
    if (op.kind != SheetOpKind::Added) continue;
    if (!sheets.emplace(op.sheet, CellMap{}).second) throw integrity_error("added sheet '" + op.sheet + "' exists");
  }
  for (const auto& d : cs.deltas) {
    auto s = sheets.find(d.address.sheet);
    if (s == sheets.end()) throw integrity_error("delta targets missing sheet at " + render_address(d.address));
    CellPos pos{d.address.row, d.address.column};
    auto it = s->second.find(pos);
    static const CellContent kEmpty;
    const CellContent& current = it == s->second.end() ? kEmpty : it->second;
    if (!same_content(current, d.before)) {
      throw integrity_error("delta at " + render_address(d.address) + " does not match the base content");
    }
    if (d.after.is_empty()) {
      s->second.erase(pos);
    } else {
      s->second[pos] = d.after;
    }
  }
  for (const auto& op : cs.sheet_ops) {
    if (op.kind != SheetOpKind::Removed) continue;
    auto s = sheets.find(op.sheet);
    if (s == sheets.end() || !s->second.empty()) {
      throw integrity_error("removed sheet '" + op.sheet + "' is missing or still has cells");
    }
    sheets.erase(s);
  }
  if (sheets.size() != cs.after_layout.sheets.size()) throw integrity_error("sheet set does not match the layout");
  std::vector<Sheet> ordered;
  for (const auto& name : cs.after_layout.sheets) {
    auto s = sheets.find(name);
    if (s == sheets.end()) throw integrity_error("layout names unknown sheet '" + name + "'");
    ordered.emplace_back(name, std::move(s->second));
  }
  Workbook out(cs.after_layout.name, std::move(ordered));
  const std::string got = snapshot_id(out);
  if (got != cs.result) {
    throw integrity_error("applying " + cs.id + " produced " + got + ", expected " + cs.result);
  }
  return out;
}

ChangeSet invert(const ChangeSet& cs) {
  ChangeSet inv;
  inv.author = cs.author;
  inv.timestamp = cs.timestamp;
  inv.description = cs.description;
  inv.base = cs.result;
  inv.result = cs.base;
  inv.before_layout = cs.after_layout;
  inv.after_layout = cs.before_layout;
  const auto renames = renames_of(cs);
  for (const auto& op : cs.sheet_ops) {
    switch (op.kind) {
      case SheetOpKind::Added:
        inv.sheet_ops.push_back({SheetOpKind::Removed, op.sheet, ""});
        break;
      case SheetOpKind::Removed:
        inv.sheet_ops.push_back({SheetOpKind::Added, op.sheet, ""});
        break;
      case SheetOpKind::Renamed:
        inv.sheet_ops.push_back({SheetOpKind::Renamed, op.renamed_to, op.sheet});
        break;
    }
  }
  for (const auto& d : cs.deltas) {
    // Deltas are addressed in the naming of the result side.
    CellAddress at = before_name(d.address, renames);
    if (at == d.address) {
      inv.deltas.push_back({at, d.after, d.before, delta_kind(d.after, d.before)});
    } else {
      inv.deltas.push_back({at, rehome(d.after, at), rehome(d.before, at), delta_kind(d.after, d.before)});
    }
  }
  std::sort(inv.deltas.begin(), inv.deltas.end(),
            [](const CellDelta& x, const CellDelta& y) { return x.address < y.address; });
  inv.id = changeset_digest(inv);
  return inv;
}

Workbook replay(const Workbook& base, const std::vector<ChangeSet>& log, ReplayLimit upto) {
  if (!log.empty()) {
    const std::string start = snapshot_id(base);
    if (log.front().base != start) {
      throw integrity_error("chain break between base snapshot " + start + " and change set 1 (" + log.front().id +
                            ")");
    }
  }
  for (std::size_t i = 0; i + 1 < log.size(); ++i) {
    if (log[i].result != log[i + 1].base) {
      throw integrity_error("chain break between change set " + std::to_string(i + 1) + " (" + log[i].id +
                            ") and change set " + std::to_string(i + 2) + " (" + log[i + 1].id + ")");
    }
  }
  std::size_t count = 0;
  if (const auto* n = std::get_if<std::size_t>(&upto)) {
    if (*n > log.size()) {
      throw validation_error("replay index " + std::to_string(*n) + " exceeds log length " +
                             std::to_string(log.size()));
    }
    count = *n;
  } else {
    const Timestamp t = std::get<Timestamp>(upto);
    while (count < log.size() && log[count].timestamp <= t) ++count;
  }
  Workbook w = base;
  for (std::size_t i = 0; i < count; ++i) w = apply(w, log[i]);
  return w;
}

}  // namespace scr
