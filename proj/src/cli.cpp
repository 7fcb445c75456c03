#include "scr/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <CLI11.hpp>

#include "scr/api.hpp"
#include "scr/workflow.hpp"

namespace scr::cli {

namespace fs = std::filesystem;

Environment environment_from_process() {
  Environment env;
  if (const char* s = std::getenv("SCR_STORE"); s && *s) env.store = s;
  if (const char* a = std::getenv("SCR_ACTOR"); a && *a) {
    env.actor = a;
  } else if (const char* u = std::getenv("USER"); u && *u) {
    env.actor = u;
  }
  return env;
}

int exit_code(ErrorClass c) {
  switch (c) {
    case ErrorClass::Domain: return 1;
    case ErrorClass::Usage: return 2;
    case ErrorClass::Integrity: return 3;
  }
  return 3;
}

namespace {

struct Globals {
  std::string store;
  bool json = false;
  std::string at;
  std::string actor;
};

struct Context {
  Globals g;
  const Environment& env;
  std::ostream& out;
  std::ostream& err;

  Timestamp now() const { return g.at.empty() ? now_utc() : parse_timestamp(g.at); }

  std::string actor() const {
    if (!g.actor.empty()) return g.actor;
    if (env.actor) return *env.actor;
    throw usage_error("no actor: pass --actor or set SCR_ACTOR");
  }

  fs::path store_path() const {
    if (!g.store.empty()) return g.store;
    if (env.store) return *env.store;
    throw usage_error("no store: pass --store or set SCR_STORE");
  }

  Workflow workflow() const { return Workflow(Store::open(store_path())); }

  void emit(const Json& j) const { out << j.dump(2) << "\n"; }
};

std::string slurp(const std::string& path) {
  if (path == "-") {
    std::ostringstream s;
    s << std::cin.rdbuf();
    return s.str();
  }
  if (!fs::is_regular_file(path)) throw io_error("cannot read " + path);
  return read_file(path);
}

Json load_json(const std::string& path) {
  std::string text = slurp(path);
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw validation_error(path + ": malformed JSON: " + e.what());
  }
}

Workbook load_workbook(const std::string& path) { return parse_workbook(slurp(path)); }

std::map<std::string, std::string> parse_renames(const std::vector<std::string>& specs) {
  std::map<std::string, std::string> renames;
  for (const auto& s : specs) {
    auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == s.size()) throw usage_error("rename must be OLD=NEW: " + s);
    renames[s.substr(0, eq)] = s.substr(eq + 1);
  }
  return renames;
}

std::string content_text(const CellContent& c) { return c.is_empty() ? "(empty)" : c.canonical_text(); }

std::string delta_line(const CellDelta& d) {
  return render_address(d.address) + " " + std::string(to_string(d.kind)) + ": " + content_text(d.before) + " -> " +
         content_text(d.after);
}

void print_entry(const Context& c, const InventoryEntry& e) {
  c.out << e.id << "  " << e.name << "  " << to_string(e.classification) << "  " << to_string(e.state)
        << "  owner=" << e.owner << "\n";
}

void print_changeset(const Context& c, const ChangeSet& cs) {
  if (cs.empty()) {
    c.out << "no changes\n";
    return;
  }
  for (const auto& op : cs.sheet_ops) {
    switch (op.kind) {
      case SheetOpKind::Added: c.out << "sheet added: " << op.sheet << "\n"; break;
      case SheetOpKind::Removed: c.out << "sheet removed: " << op.sheet << "\n"; break;
      case SheetOpKind::Renamed: c.out << "sheet renamed: " << op.sheet << " -> " << op.renamed_to << "\n"; break;
    }
  }
  if (cs.before_layout.sheets != cs.after_layout.sheets && cs.sheet_ops.empty()) c.out << "sheets reordered\n";
  for (const auto& d : cs.deltas) c.out << delta_line(d) << "\n";
}

void print_ranked(const Context& c, const std::vector<RankedChange>& ranked) {
  for (const auto& r : ranked) c.out << std::setw(6) << r.score << "  " << delta_line(r.delta) << "\n";
}

void print_metrics(const Context& c, const MetricsReport& r) {
  c.out << "snapshot        " << r.snapshot << "\n"
        << "sheets          " << r.size.sheets << "\n"
        << "cells           " << r.size.cells << "\n"
        << "formulas        " << r.size.formulas << " (" << r.size.unique_formulas << " unique)\n"
        << "data elements   " << r.size.data_elements << "\n"
        << "max fan-in      " << r.max_fan_in << "\n"
        << "max fan-out     " << r.max_fan_out << "\n"
        << "cross-sheet     " << r.cross_sheet_refs << "\n"
        << "blocks          " << r.blocks.size() << "\n"
        << "inconsistent    " << r.inconsistent_cells.size() << "\n"
        << "endpoints       " << r.endpoints.size() << "\n"
        << "long formulas   " << r.long_formulas.size() << " (threshold " << r.long_formula_threshold << ")\n"
        << "magic constants " << r.magic_constants.size() << "\n";
}

void print_evaluation(const Context& c, const EvaluationReport& e) {
  c.out << "recommendation: " << to_string(e.recommendation) << "\n";
  for (const auto& [metric, rating] : e.ratings) {
    c.out << "  " << std::left << std::setw(22) << metric << std::right << " " << e.values.at(metric) << " -> "
          << rating << "\n";
  }
  for (const auto& i : e.issues) c.out << "issue " << i.metric << " at " << i.location << ": " << i.description << "\n";
  for (const auto& a : e.areas_to_improve) c.out << "improve: " << a << "\n";
}

void print_review(const Context& c, const ReviewRecord& r, const InventoryEntry& e) {
  c.out << e.id << " review " << r.id << " " << to_string(r.decision) << " -> " << to_string(e.state) << "\n";
  if (!r.statement.empty()) c.out << "\n" << r.statement;
}

std::string text_of(const Json& p, const char* key) {
  auto it = p.find(key);
  return it != p.end() && it->is_string() ? it->get<std::string>() : "";
}

std::string event_summary(const AuditEvent& ev) {
  const Json& p = ev.payload;
  if (ev.kind == "state-change") {
    std::string from = text_of(p, "from");
    return (from.empty() ? "(new)" : from) + " -> " + text_of(p, "to");
  }
  if (ev.kind == "snapshot") return text_of(p, "snapshot");
  if (ev.kind == "change-submitted") return text_of(p, "change") + " " + text_of(p, "classification");
  if (ev.kind == "review" && p.contains("review")) return text_of(p["review"], "decision");
  if (ev.kind == "evaluation" && p.contains("report")) return text_of(p["report"], "recommendation");
  if (ev.kind == "registered") return text_of(p, "name") + " " + text_of(p, "classification");
  if (ev.kind == "archive") return text_of(p, "tag");
  return "";
}

// Base snapshot and change log of an entry, in submission order.
struct EntryHistory {
  Workbook base;
  std::vector<ChangeSet> log;
};

EntryHistory entry_history(const Workflow& wf, const std::string& id) {
  const Store& store = wf.store();
  auto events = wf.audit_log(id);
  EntryHistory h;
  bool have_base = false;
  for (const auto& ev : events) {
    if (!have_base && ev.kind == "snapshot") {
      h.base = store.get_snapshot(ev.payload.at("snapshot").get<std::string>());
      have_base = true;
    } else if (ev.kind == "change-submitted") {
      h.log.push_back(store.get_changeset(ev.payload.at("change").get<std::string>()));
    }
  }
  if (!have_base) throw integrity_error(id + ": audit log has no snapshot");
  return h;
}

ChecklistInstance build_checklist(const Workflow& wf, ChecklistKind kind, const std::string& file, bool pass_all,
                                  const std::vector<std::string>& fails, const std::vector<std::string>& nas) {
  ChecklistInstance inst;
  if (!file.empty()) {
    inst = checklist_from_json(load_json(file));
  } else if (pass_all) {
    inst = fill_checklist(wf.checklist(kind), ItemStatus::Pass);
  } else {
    inst.kind = kind;
  }
  auto set = [&](const std::string& spec, ItemStatus status) {
    auto eq = spec.find('=');
    std::string item = spec.substr(0, eq);
    std::string note = eq == std::string::npos ? "" : spec.substr(eq + 1);
    for (auto& r : inst.results) {
      if (r.item == item) {
        r.status = status;
        r.note = note;
        return;
      }
    }
    inst.results.push_back({item, status, note, std::nullopt});
  };
  for (const auto& f : fails) set(f, ItemStatus::Fail);
  for (const auto& n : nas) set(n, ItemStatus::NA);
  return inst;
}

std::array<double, 4> parse_percentiles(const std::string& text) {
  std::array<double, 4> p{};
  std::istringstream in(text);
  std::string part;
  std::size_t i = 0;
  while (std::getline(in, part, ',')) {
    if (i == 4) throw usage_error("--percentiles takes exactly four values");
    try {
      std::size_t used = 0;
      p[i] = std::stod(part, &used);
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw usage_error("bad percentile: " + part);
    }
    ++i;
  }
  if (i != 4) throw usage_error("--percentiles takes exactly four values");
  return p;
}

Policy policy_from_file(const std::string& path) {
  Json j = load_json(path);
  Policy p;
  try {
    p.redevelop_count = j.value("redevelop_count", p.redevelop_count);
    p.restructure_floor = j.value("restructure_floor", p.restructure_floor);
  } catch (const Json::exception& e) {
    throw config_error(std::string("malformed policy: ") + e.what());
  }
  return p;
}

// --- command registration ---------------------------------------------------------

using Action = std::function<void(Context&)>;

struct Registry {
  std::vector<std::pair<CLI::App*, Action>> commands;
  void add(CLI::App* sub, Action a) { commands.emplace_back(sub, std::move(a)); }
};

void add_commands(CLI::App& app, Registry& reg) {
  // Option storage lives as long as the app; shared_ptr keeps lambdas copyable.
  {
    auto* sub = app.add_subcommand("init", "Create an empty store");
    reg.add(sub, [](Context& c) {
      auto path = c.store_path();
      Store::init(path);
      if (c.g.json) {
        c.emit(Json{{"store", path.string()}});
      } else {
        c.out << "initialized store at " << path.string() << "\n";
      }
    });
  }
  {
    struct O {
      std::string in, name, owner, cls = "Critical", rules;
    };
    auto o = std::make_shared<O>();
    auto* sub = app.add_subcommand("register", "Register a workbook in the inventory");
    sub->add_option("--in", o->in, "Workbook interchange file")->required();
    sub->add_option("--name", o->name, "Inventory name")->required();
    sub->add_option("--owner", o->owner, "Business owner")->required();
    sub->add_option("--class", o->cls, "Critical, Operational or Throwaway");
    sub->add_option("--rules", o->rules, "Expected-value rules file");
    reg.add(sub, [o](Context& c) {
      Registration r;
      r.name = o->name;
      r.owner = o->owner;
      r.classification = classification_from_string(o->cls);
      if (!o->rules.empty()) r.rules = rules_from_json(load_json(o->rules));
      auto wb = load_workbook(o->in);
      auto e = c.workflow().register_workbook(wb, r, c.actor(), c.now());
      if (c.g.json) {
        c.emit(entry_to_json(e));
      } else {
        print_entry(c, e);
      }
    });
  }
  {
    struct O {
      std::string entry, cls = "Critical";
    };
    auto o = std::make_shared<O>();
    auto* sub = app.add_subcommand("promote", "Send a registered entry to in-depth review");
    sub->add_option("--entry", o->entry)->required();
    sub->add_option("--class", o->cls, "Classification after promotion");
    reg.add(sub, [o](Context& c) {
      auto e = c.workflow().promote(o->entry, classification_from_string(o->cls), c.actor(), c.now());
      if (c.g.json) {
        c.emit(entry_to_json(e));
      } else {
        print_entry(c, e);
      }
    });
  }
  {
    struct O {
      std::string entry, in, description;
      std::vector<std::string> renames;
    };
    auto o = std::make_shared<O>();
    auto* sub = app.add_subcommand("submit", "Submit a new version of an inventoried workbook");
    sub->add_option("--entry", o->entry)->required();
    sub->add_option("--in", o->in, "New workbook version")->required();
    sub->add_option("--description", o->description);
    sub->add_option("--rename", o->renames, "Declared sheet rename OLD=NEW");
    reg.add(sub, [o](Context& c) {
      auto wb = load_workbook(o->in);
      auto r = c.workflow().submit_change(o->entry, wb, c.actor(), o->description, c.now(), parse_renames(o->renames));
      if (c.g.json) {
        c.emit(Json{{"change", changeset_to_json(r.change)},
                    {"classification", to_string(r.change_class)},
                    {"entry", entry_to_json(r.entry)}});
      } else {
        c.out << r.entry.id << " change " << r.change.id << " " << to_string(r.change_class) << " -> "
              << to_string(r.entry.state) << "\n";
      }
    });
  }
  {
    struct O {
      std::string before, after, entry, change;
      std::vector<std::string> renames;
      bool rank = false;
    };
    auto o = std::make_shared<O>();
    auto* sub = app.add_subcommand("diff", "Structural diff of two workbooks, or of a stored change");
    sub->add_option("--before", o->before);
    sub->add_option("--after", o->after);
    sub->add_option("--rename", o->renames, "Declared sheet rename OLD=NEW");
    sub->add_option("--entry", o->entry, "Entry owning --change");
    sub->add_option("--change", o->change, "Stored change-set id");
    sub->add_flag("--rank", o->rank, "Order deltas by risk score");
    reg.add(sub, [o](Context& c) {
      ChangeSet cs;
      Workbook before, after;
      if (!o->change.empty()) {
        if (!o->before.empty() || !o->after.empty()) throw usage_error("--change excludes --before/--after");
        auto wf = c.workflow();
        if (!o->entry.empty()) wf.get(o->entry);
        cs = wf.store().get_changeset(o->change);
        before = wf.store().get_snapshot(cs.base);
        after = wf.store().get_snapshot(cs.result);
      } else {
        if (o->before.empty() || o->after.empty()) throw usage_error("diff needs --before and --after, or --change");
        before = load_workbook(o->before);
        after = load_workbook(o->after);
        ChangeMeta meta;
        meta.author = c.g.actor.empty() ? c.env.actor.value_or("") : c.g.actor;
        meta.timestamp = c.now();
        meta.renames = parse_renames(o->renames);
        cs = diff(before, after, meta);
      }
      auto cls = classify(cs, before, after);
      if (o->rank) {
        auto ranked = rank_by_risk(cs, before, after);
        if (c.g.json) {
          c.emit(Json{{"change", changeset_to_json(cs)},
                      {"classification", to_string(cls)},
                      {"ranked", ranked_to_json(ranked)}});
        } else {
          c.out << to_string(cls) << "\n";
          print_ranked(c, ranked);
        }
      } else if (c.g.json) {
        c.emit(changeset_to_json(cs));
      } else {
        if (!cs.empty()) c.out << to_string(cls) << "\n";
        print_changeset(c, cs);
      }
    });
  }
  {
    struct O {
      std::string in, entry, config;
    };
    auto o = std::make_shared<O>();
    auto* sub = app.add_subcommand("analyze", "Compute the metrics report of a workbook");
    auto* in = sub->add_option("--in", o->in, "Workbook file");
    auto* entry = sub->add_option("--entry", o->entry, "Analyze the entry's current snapshot");
    in->excludes(entry);
    sub->add_option("--config", o->config, "Analysis settings file");
    reg.add(sub, [o](Context& c) {
      MetricsReport r;
      if (!o->entry.empty()) {
        if (!o->config.empty()) throw usage_error("--config applies to --in only; the store's settings are used");
        r = c.workflow().metrics(o->entry);
      } else if (!o->in.empty()) {
        AnalysisConfig cfg = o->config.empty() ? AnalysisConfig{} : analysis_config_from_json(load_json(o->config));
        r = metrics_report(load_workbook(o->in), cfg);
      } else {
        throw usage_error("analyze needs --in or --entry");
      }
      if (c.g.json) {
        c.emit(metrics_to_json(r));
      } else {
        print_metrics(c, r);
      }
    });
  }
  {
    struct O {
      std::string in, entry, profile, policy, config;
      bool dry_run = false;
    };
    auto o = std::make_shared<O>();
    auto* sub = app.add_subcommand("evaluate", "Tool-assisted evaluation against the threshold profile");
    auto* in = sub->add_option("--in", o->in, "Evaluate a workbook file without recording");
    auto* entry = sub->add_option("--entry", o->entry, "Evaluate and record for an entry");
    in->excludes(entry);
    sub->add_option("--profile", o->profile, "Threshold profile (with --in)");
    sub->add_option("--policy", o->policy, "Recommendation policy (with --in)");
    sub->add_option("--config", o->config, "Analysis settings (with --in)");
    sub->add_flag("--dry-run", o->dry_run, "With --entry: report without recording");
    reg.add(sub, [o](Context& c) {
      EvaluationReport report;
      std::optional<InventoryEntry> recorded;
      if (!o->entry.empty()) {
        if (!o->profile.empty() || !o->policy.empty() || !o->config.empty()) {
          throw usage_error("--profile, --policy and --config apply to --in; entries use the store's configuration");
        }
        auto wf = c.workflow();
        report = wf.evaluate(o->entry);
        if (!o->dry_run) recorded = wf.record_evaluation(o->entry, report, c.actor(), c.now());
      } else if (!o->in.empty()) {
        AnalysisConfig cfg = o->config.empty() ? AnalysisConfig{} : analysis_config_from_json(load_json(o->config));
        ThresholdProfile prof = o->profile.empty() ? default_profile() : profile_from_json(load_json(o->profile));
        Policy pol = o->policy.empty() ? Policy{} : policy_from_file(o->policy);
        report = evaluate_workbook(metrics_report(load_workbook(o->in), cfg), prof, pol);
      } else {
        throw usage_error("evaluate needs --in or --entry");
      }
      if (c.g.json) {
        if (recorded) {
          c.emit(Json{{"report", evaluation_to_json(report)}, {"entry", entry_to_json(*recorded)}});
        } else {
          c.emit(evaluation_to_json(report));
        }
      } else {
        print_evaluation(c, report);
        if (recorded) c.out << recorded->id << " -> " << to_string(recorded->state) << "\n";
      }
    });
  }
  {
    struct O {
      std::string entry, decision, note, checklist;
      bool pass_all = false;
      std::vector<std::string> fails, nas;
    };
    auto o = std::make_shared<O>();
    auto* sub = app.add_subcommand("review", "Record a peer review of the pending version");
    sub->add_option("--entry", o->entry)->required();
    sub->add_option("--decision", o->decision, "approve or decline")->required();
    sub->add_option("--note", o->note, "Reviewer note");
    sub->add_option("--checklist", o->checklist, "Completed checklist file");
    sub->add_flag("--pass-all", o->pass_all, "Answer every checklist item Pass");
    sub->add_option("--fail", o->fails, "Mark an item Fail: ID or ID=note");
    sub->add_option("--na", o->nas, "Mark an item not applicable: ID or ID=note");
    reg.add(sub, [o](Context& c) {
      auto wf = c.workflow();
      auto entry = wf.get(o->entry);
      auto kind = entry.state == EntryState::InDepthReviewPending ? ChecklistKind::InDepth : ChecklistKind::Change;
      ReviewInput in;
      in.reviewer = c.actor();
      in.decision = decision_from_string(o->decision);
      in.note = o->note;
      in.checklist = build_checklist(wf, kind, o->checklist, o->pass_all, o->fails, o->nas);
      auto r = wf.record_review(o->entry, in, c.now());
      if (c.g.json) {
        c.emit(Json{{"review", review_to_json(r.review)}, {"entry", entry_to_json(r.entry)}});
      } else {
        print_review(c, r.review, r.entry);
      }
    });
  }
  {
    struct O {
      std::string entry, reviewer;
      std::uint64_t review = 0;
      std::vector<std::string> lines;
    };
    auto o = std::make_shared<O>();
    auto* sub = app.add_subcommand("statement", "Print an approval statement");
    sub->add_option("--entry", o->entry, "Entry of a recorded review");
    sub->add_option("--review", o->review, "Review id");
    sub->add_option("--change", o->lines, "Render a fresh statement for these change lines");
    sub->add_option("--reviewer", o->reviewer, "Reviewer for a fresh statement (default: actor)");
    reg.add(sub, [o](Context& c) {
      std::string text;
      if (!o->entry.empty()) {
        if (!o->lines.empty()) throw usage_error("--change excludes --entry");
        if (o->review == 0) throw usage_error("statement needs --review with --entry");
        auto r = c.workflow().review(o->entry, o->review);
        if (r.statement.empty()) throw validation_error("review " + std::to_string(r.id) + " was declined and has no statement");
        text = r.statement;
      } else if (!o->lines.empty()) {
        text = render_statement(o->lines, o->reviewer.empty() ? c.actor() : o->reviewer, c.now());
      } else {
        throw usage_error("statement needs --entry and --review, or --change lines");
      }
      if (c.g.json) {
        c.emit(Json{{"statement", text}});
      } else {
        c.out << text;
      }
    });
  }
  {
    struct O {
      std::string entry, until, out;
      std::optional<std::size_t> upto;
    };
    auto o = std::make_shared<O>();
    auto* sub = app.add_subcommand("replay", "Rebuild an entry's workbook from its change log");
    sub->add_option("--entry", o->entry)->required();
    auto* upto = sub->add_option("--upto", o->upto, "Number of change sets to apply");
    auto* until = sub->add_option("--until", o->until, "Apply change sets up to this instant");
    upto->excludes(until);
    sub->add_option("--out", o->out, "Write the workbook here instead of standard output");
    reg.add(sub, [o](Context& c) {
      auto h = entry_history(c.workflow(), o->entry);
      ReplayLimit limit = h.log.size();
      if (o->upto) limit = *o->upto;
      if (!o->until.empty()) limit = parse_timestamp(o->until);
      Workbook w = replay(h.base, h.log, limit);
      std::string text = serialize_workbook(w);
      if (!o->out.empty()) {
        atomic_write(o->out, text);
        if (c.g.json) {
          c.emit(Json{{"snapshot", snapshot_id(w)}, {"path", o->out}});
        } else {
          c.out << snapshot_id(w) << "\n";
        }
      } else {
        c.out << text;
      }
    });
  }
  {
    struct O {
      std::vector<std::string> corpus;
      std::string values, percentiles, config;
      bool save = false;
    };
    auto o = std::make_shared<O>();
    auto* sub = app.add_subcommand("calibrate", "Derive a threshold profile from a corpus");
    auto* corpus = sub->add_option("--corpus", o->corpus, "Workbook files");
    auto* values = sub->add_option("--values", o->values, "JSON array of metric-value records");
    corpus->excludes(values);
    sub->add_option("--percentiles", o->percentiles, "Four percentiles, e.g. 70,80,90,98");
    sub->add_option("--config", o->config, "Analysis settings for --corpus");
    sub->add_flag("--save", o->save, "Install the profile in the store");
    reg.add(sub, [o](Context& c) {
      auto pct = o->percentiles.empty() ? kDefaultPercentiles : parse_percentiles(o->percentiles);
      Calibration cal;
      if (!o->values.empty()) {
        Json j = load_json(o->values);
        if (!j.is_array()) throw validation_error("--values must hold a JSON array");
        std::vector<MetricValues> rows;
        try {
          for (const auto& row : j) rows.push_back(row.get<MetricValues>());
        } catch (const Json::exception& e) {
          throw validation_error(std::string("malformed metric values: ") + e.what());
        }
        cal = calibrate(rows, pct);
      } else if (!o->corpus.empty()) {
        AnalysisConfig cfg = o->config.empty() ? AnalysisConfig{} : analysis_config_from_json(load_json(o->config));
        std::vector<MetricsReport> reports;
        for (const auto& f : o->corpus) reports.push_back(metrics_report(load_workbook(f), cfg));
        cal = calibrate(reports, pct);
      } else {
        throw usage_error("calibrate needs --corpus or --values");
      }
      for (const auto& w : cal.warnings) c.err << "warning: " << w << "\n";
      if (o->save) Store::open(c.store_path()).write_config("profile", profile_to_json(cal.profile));
      if (c.g.json) {
        c.emit(profile_to_json(cal.profile));
      } else {
        for (const auto& [metric, b] : cal.profile.bands) {
          c.out << std::left << std::setw(22) << metric << std::right;
          for (double v : b) c.out << " " << std::setprecision(17) << v;
          c.out << "\n";
        }
      }
    });
  }
  {
    struct O {
      std::string in, rules, entry;
    };
    auto o = std::make_shared<O>();
    auto* sub = app.add_subcommand("rules-check", "Check expected-value rules; exits 1 on violations");
    auto* in = sub->add_option("--in", o->in, "Workbook file");
    auto* entry = sub->add_option("--entry", o->entry, "Check the entry's current snapshot against its rules");
    in->excludes(entry);
    sub->add_option("--rules", o->rules, "Rules file (required with --in)");
    reg.add(sub, [o](Context& c) {
      std::vector<RuleViolation> v;
      if (!o->entry.empty()) {
        auto wf = c.workflow();
        auto e = wf.get(o->entry);
        auto rules = o->rules.empty() ? e.rules : rules_from_json(load_json(o->rules));
        RuleOptions opts;
        opts.sum_tolerance = wf.analysis_config().sum_tolerance;
        v = check_rules(wf.store().get_snapshot(e.current), rules, opts);
      } else if (!o->in.empty()) {
        if (o->rules.empty()) throw usage_error("rules-check --in needs --rules");
        v = check_rules(load_workbook(o->in), rules_from_json(load_json(o->rules)));
      } else {
        throw usage_error("rules-check needs --in or --entry");
      }
      if (c.g.json) {
        c.emit(violations_to_json(v));
      } else {
        for (const auto& x : v) c.out << x.rule_id << " " << render_address(x.address) << ": " << x.message << "\n";
        if (v.empty()) c.out << "all rules hold\n";
      }
      if (!v.empty()) throw Error(ErrorClass::Domain, "violation", std::to_string(v.size()) + " rule violation(s)");
    });
  }
  {
    struct O {
      std::string tag, from, to;
      std::vector<std::string> entries;
      bool all = false;
    };
    auto o = std::make_shared<O>();
    auto* sub = app.add_subcommand("export-archive", "Write an archive bundle for a reporting cycle");
    sub->add_option("--tag", o->tag)->required();
    auto* ent = sub->add_option("--entry", o->entries, "Entries to include");
    auto* all = sub->add_flag("--all", o->all, "Include every entry");
    ent->excludes(all);
    sub->add_option("--from", o->from, "Earliest event instant");
    sub->add_option("--to", o->to, "Latest event instant");
    reg.add(sub, [o](Context& c) {
      auto wf = c.workflow();
      ArchiveFilter f;
      if (o->all) {
        for (const auto& e : wf.inventory()) f.entries.push_back(e.id);
      } else {
        f.entries = o->entries;
      }
      if (!o->from.empty()) f.from = parse_timestamp(o->from);
      if (!o->to.empty()) f.to = parse_timestamp(o->to);
      Timestamp at = c.now();
      auto s = wf.store().export_archive(o->tag, f, at);
      if (!f.entries.empty()) wf.note_archive(f.entries, o->tag, c.actor(), at);
      if (c.g.json) {
        c.emit(s.manifest);
      } else {
        c.out << "archive " << s.tag << " written to " << s.path.string() << "\n";
      }
    });
  }
  {
    auto bundle = std::make_shared<std::string>();
    auto* sub = app.add_subcommand("import-archive", "Load an archive bundle into the store");
    sub->add_option("--bundle", *bundle)->required();
    reg.add(sub, [bundle](Context& c) {
      auto store = Store::open(c.store_path());
      auto lock = store.lock();
      auto s = store.import_archive(*bundle);
      if (c.g.json) {
        c.emit(s.manifest);
      } else {
        c.out << "imported archive " << s.tag << "\n";
      }
    });
  }
  {
    struct O {
      std::string entry, in, name, owner, cls, rules;
    };
    auto o = std::make_shared<O>();
    auto* sub = app.add_subcommand("redevelop", "Register the redeveloped replacement of an entry");
    sub->add_option("--entry", o->entry, "Entry to retire")->required();
    sub->add_option("--in", o->in, "Replacement workbook")->required();
    sub->add_option("--name", o->name);
    sub->add_option("--owner", o->owner);
    sub->add_option("--class", o->cls);
    sub->add_option("--rules", o->rules, "Rules file (inherited when absent)");
    reg.add(sub, [o](Context& c) {
      RedevelopOptions opts;
      if (!o->name.empty()) opts.name = o->name;
      if (!o->owner.empty()) opts.owner = o->owner;
      if (!o->cls.empty()) opts.classification = classification_from_string(o->cls);
      if (!o->rules.empty()) opts.rules = rules_from_json(load_json(o->rules));
      auto r = c.workflow().register_redevelopment(o->entry, load_workbook(o->in), opts, c.actor(), c.now());
      if (c.g.json) {
        c.emit(Json{{"retired", entry_to_json(r.retired)}, {"replacement", entry_to_json(r.replacement)}});
      } else {
        print_entry(c, r.retired);
        print_entry(c, r.replacement);
      }
    });
  }
  {
    auto entry = std::make_shared<std::string>();
    auto* sub = app.add_subcommand("inventory", "List inventory entries, or show one");
    sub->add_option("--entry", *entry);
    reg.add(sub, [entry](Context& c) {
      auto wf = c.workflow();
      if (!entry->empty()) {
        auto e = wf.get(*entry);
        if (c.g.json) {
          c.emit(entry_to_json(e));
        } else {
          print_entry(c, e);
          c.out << "  current   " << e.current << "\n";
          if (e.approved) c.out << "  approved  " << *e.approved << "\n";
          if (e.pending_change) c.out << "  pending   " << *e.pending_change << "\n";
          if (e.predecessor) c.out << "  replaces  " << *e.predecessor << "\n";
          if (e.successor) c.out << "  replaced by " << *e.successor << "\n";
        }
        return;
      }
      auto all = wf.inventory();
      if (c.g.json) {
        Json arr = Json::array();
        for (const auto& e : all) arr.push_back(entry_to_json(e));
        c.emit(arr);
      } else {
        for (const auto& e : all) print_entry(c, e);
      }
    });
  }
  {
    struct O {
      std::string entry;
      std::uint64_t from = 1;
      std::uint64_t to = std::numeric_limits<std::uint64_t>::max();
      bool replay = false;
    };
    auto o = std::make_shared<O>();
    auto* sub = app.add_subcommand("audit", "Show an entry's audit trail");
    sub->add_option("--entry", o->entry)->required();
    sub->add_option("--from", o->from, "First sequence number");
    sub->add_option("--to", o->to, "Last sequence number");
    sub->add_flag("--replay", o->replay, "Rebuild the entry from its events and compare with the stored record");
    reg.add(sub, [o](Context& c) {
      auto wf = c.workflow();
      if (o->replay) {
        auto events = wf.audit_log(o->entry);
        auto rebuilt = replay_audit(events);
        auto stored = entry_to_json(wf.get(o->entry));
        bool match = entry_to_json(rebuilt.entry) == stored;
        Json states = Json::array();
        for (auto s : rebuilt.states) states.push_back(to_string(s));
        if (c.g.json) {
          c.emit(Json{{"states", states}, {"entry", entry_to_json(rebuilt.entry)}, {"matches_record", match}});
        } else {
          for (auto s : rebuilt.states) c.out << to_string(s) << "\n";
          c.out << (match ? "record matches replay\n" : "record differs from replay\n");
        }
        if (!match) throw integrity_error(o->entry + ": stored record differs from its audit replay");
        return;
      }
      auto events = wf.audit_log(o->entry, SeqRange{o->from, o->to});
      if (c.g.json) {
        Json arr = Json::array();
        for (const auto& e : events) arr.push_back(event_to_json(e));
        c.emit(arr);
      } else {
        for (const auto& e : events) {
          c.out << std::setw(4) << e.seq << "  " << format_timestamp(e.timestamp) << "  " << std::left << std::setw(16)
                << e.kind << std::right << "  " << e.actor << "  " << event_summary(e) << "\n";
        }
      }
    });
  }
  {
    auto kind = std::make_shared<std::string>("in-depth");
    auto* sub = app.add_subcommand("checklist", "Print the store's review checklist template");
    sub->add_option("--kind", *kind, "in-depth or change");
    reg.add(sub, [kind](Context& c) {
      ChecklistKind k;
      if (*kind == "in-depth") {
        k = ChecklistKind::InDepth;
      } else if (*kind == "change") {
        k = ChecklistKind::Change;
      } else {
        throw usage_error("--kind must be in-depth or change");
      }
      auto t = c.workflow().checklist(k);
      if (c.g.json) {
        c.emit(checklist_template_to_json(t));
      } else {
        for (const auto& i : t.items) {
          c.out << i.id << "  " << i.title << (i.automatable ? "  [machine check]" : "") << "\n";
        }
      }
    });
  }
  {
    struct O {
      std::string profile, policy, checklist, analysis;
    };
    auto o = std::make_shared<O>();
    auto* sub = app.add_subcommand("configure", "Install profile, policy, checklist or analysis settings");
    sub->add_option("--profile", o->profile);
    sub->add_option("--policy", o->policy);
    sub->add_option("--checklist", o->checklist);
    sub->add_option("--analysis", o->analysis);
    reg.add(sub, [o](Context& c) {
      auto store = Store::open(c.store_path());
      std::vector<std::pair<std::string, Json>> writes;
      if (!o->profile.empty()) writes.emplace_back("profile", profile_to_json(profile_from_json(load_json(o->profile))));
      if (!o->policy.empty()) {
        Policy p = policy_from_file(o->policy);
        writes.emplace_back("policy", Json{{"redevelop_count", p.redevelop_count}, {"restructure_floor", p.restructure_floor}});
      }
      if (!o->checklist.empty()) {
        Json j = load_json(o->checklist);
        configured_items(j, ChecklistKind::InDepth);
        configured_items(j, ChecklistKind::Change);
        writes.emplace_back("checklist", j);
      }
      if (!o->analysis.empty()) {
        writes.emplace_back("analysis", analysis_config_to_json(analysis_config_from_json(load_json(o->analysis))));
      }
      if (writes.empty()) throw usage_error("configure needs at least one of --profile, --policy, --checklist, --analysis");
      auto lock = store.lock();
      for (const auto& [name, j] : writes) store.write_config(name, j);
      if (c.g.json) {
        Json names = Json::array();
        for (const auto& w : writes) names.push_back(w.first);
        c.emit(Json{{"configured", names}});
      } else {
        for (const auto& w : writes) c.out << "configured " << w.first << "\n";
      }
    });
  }
  {
    struct O {
      std::string host = "127.0.0.1";
      int port = 8080;
    };
    auto o = std::make_shared<O>();
    auto* sub = app.add_subcommand("serve", "Run the HTTP API");
    sub->add_option("--bind", o->host, "Listen address");
    sub->add_option("--port", o->port, "Listen port (0 picks one)");
    reg.add(sub, [o](Context& c) {
      api::Server server(Store::open(c.store_path()));
      int port = server.bind(o->host, o->port);
      c.err << "listening on " << o->host << ":" << port << "\n";
      c.err.flush();
      server.listen();
    });
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const Environment& env) {
  CLI::App app("Spreadsheet change review", "scr");
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--store", g.store, "Store directory (default: $SCR_STORE)");
  app.add_flag("--json", g.json, "Machine-readable output");
  app.add_option("--at", g.at, "Use this ISO timestamp instead of the clock");
  app.add_option("--actor", g.actor, "Acting user (default: $SCR_ACTOR, then $USER)");
  Registry reg;
  add_commands(app, reg);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    for (const auto& [sub, action] : reg.commands) {
      if (sub->parsed()) {
        err << sub->help();
        break;
      }
    }
    return 2;
  }

  Context ctx{g, env, out, err};
  try {
    if (!g.at.empty()) parse_timestamp(g.at);
    for (const auto& [sub, action] : reg.commands) {
      if (sub->parsed()) {
        action(ctx);
        break;
      }
    }
    return 0;
  } catch (const Error& e) {
    err << "error[" << e.code() << "]: " << e.what() << "\n";
    return exit_code(e.error_class());
  } catch (const std::exception& e) {
    err << "error[io]: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace scr::cli
