#include "scr/workflow.hpp"

#include <algorithm>
#include <set>

#include "scr/error.hpp"

namespace scr {

namespace {

constexpr std::string_view kClassifications[] = {"Critical", "Operational", "Throwaway"};
constexpr std::string_view kStates[] = {"Registered",      "InDepthReviewPending", "InUse",
                                        "ChangeReviewPending", "ToolEvalPending",  "RestructureRequired",
                                        "RedevelopRequired", "Retired"};
constexpr std::string_view kStatuses[] = {"Pass", "Fail", "NA"};
constexpr std::string_view kDecisions[] = {"Approve", "Decline"};

template <typename E, std::size_t N>
E parse_enum(std::string_view text, const std::string_view (&names)[N], const char* what) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == text) return static_cast<E>(i);
  }
  std::string options;
  for (auto n : names) options += (options.empty() ? "" : ", ") + std::string(n);
  throw validation_error(std::string("unknown ") + what + " '" + std::string(text) + "' (expected " + options + ")");
}

Json opt(const std::optional<std::string>& s) { return s ? Json(*s) : Json(nullptr); }

std::optional<std::string> opt_from(const Json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<std::string>();
}

const std::vector<ChecklistItem>& generic_items() {
  static const std::vector<ChecklistItem> items = {
      {"version-management", "Version management",
       "Every released version of the workbook is kept and can be retrieved.", false},
      {"change-management", "Change management",
       "Each modification has a recorded author, date and reason, and was reviewed before use.", false},
      {"access-restrictions", "Access restrictions",
       "Only the people who need the workbook can open it; viewing and editing rights are distinct.", false},
      {"input-restrictions", "Input restrictions",
       "Cells holding logic or fixed data are protected so users can only type into input cells.", false},
      {"backup-procedures", "Backup procedures",
       "Backups run on a schedule that matches how often the workbook is used and edited.", false},
      {"archiving-procedures", "Archiving procedures",
       "Versions and the data they held are archived for as long as audits may ask for them.", false},
      {"separation-of-concerns", "Separation of concerns",
       "Inputs, calculations and outputs live in separate areas. Checked against block and smell metrics.", true},
      {"expected-values", "Expected values",
       "Key results carry expected-value rules (ranges, totals, signs). Checked by evaluating the attached rules.",
       true},
  };
  return items;
}

const std::set<std::string>& change_item_ids() {
  static const std::set<std::string> ids = {"change-management", "input-restrictions", "separation-of-concerns",
                                            "expected-values"};
  return ids;
}

std::string render_content(const CellContent& c) { return c.is_empty() ? "(empty)" : c.canonical_text(); }

// Operations that may be attempted from the given states.
void require_state(const InventoryEntry& e, std::initializer_list<EntryState> allowed, const char* op) {
  if (std::find(allowed.begin(), allowed.end(), e.state) != allowed.end()) return;
  throw state_error(std::string(op) + " is not allowed for " + e.id + " in state " + std::string(to_string(e.state)));
}

AuditEvent make_event(const std::string& entry, std::string kind, const std::string& actor, Timestamp at,
                      Json payload) {
  AuditEvent e;
  e.entry = entry;
  e.kind = std::move(kind);
  e.actor = actor;
  e.timestamp = at;
  e.payload = std::move(payload);
  return e;
}

AuditEvent state_change(const std::string& entry, std::optional<EntryState> from, EntryState to,
                        const std::string& actor, Timestamp at, Json extra = Json::object()) {
  Json p = Json::object();
  p["from"] = from ? Json(to_string(*from)) : Json(nullptr);
  p["to"] = to_string(to);
  for (auto& [k, v] : extra.items()) p[k] = v;
  return make_event(entry, "state-change", actor, at, std::move(p));
}

void require_actor(const std::string& actor) {
  if (actor.empty()) throw validation_error("an actor identity is required");
}

}  // namespace

std::string_view to_string(Classification c) { return kClassifications[static_cast<int>(c)]; }
Classification classification_from_string(std::string_view s) {
  return parse_enum<Classification>(s, kClassifications, "classification");
}
std::string_view to_string(EntryState s) { return kStates[static_cast<int>(s)]; }
EntryState entry_state_from_string(std::string_view s) { return parse_enum<EntryState>(s, kStates, "state"); }
std::string_view to_string(ChecklistKind k) { return k == ChecklistKind::InDepth ? "InDepth" : "Change"; }
std::string_view to_string(ItemStatus s) { return kStatuses[static_cast<int>(s)]; }
std::string_view to_string(Decision d) { return kDecisions[static_cast<int>(d)]; }
Decision decision_from_string(std::string_view s) {
  if (s == "approve") return Decision::Approve;
  if (s == "decline") return Decision::Decline;
  return parse_enum<Decision>(s, kDecisions, "decision");
}

// --- checklists ------------------------------------------------------------------

ChecklistTemplate generic_checklist(ChecklistKind kind, const std::vector<ChecklistItem>& extra) {
  ChecklistTemplate t;
  t.kind = kind;
  for (const auto& item : generic_items()) {
    if (kind == ChecklistKind::InDepth || change_item_ids().count(item.id)) t.items.push_back(item);
  }
  std::set<std::string> ids;
  for (const auto& item : t.items) ids.insert(item.id);
  for (const auto& item : extra) {
    if (item.id.empty() || !ids.insert(item.id).second) {
      throw config_error("checklist item id '" + item.id + "' is empty or duplicated");
    }
    t.items.push_back(item);
  }
  return t;
}

Json checklist_template_to_json(const ChecklistTemplate& t) {
  Json j = Json::object();
  j["kind"] = to_string(t.kind);
  j["items"] = Json::array();
  for (const auto& i : t.items) {
    j["items"].push_back(
        {{"id", i.id}, {"title", i.title}, {"guidance", i.guidance}, {"automatable", i.automatable}});
  }
  return j;
}

std::vector<ChecklistItem> configured_items(const Json& config, ChecklistKind kind) {
  const char* key = kind == ChecklistKind::InDepth ? "in_depth" : "change";
  std::vector<ChecklistItem> out;
  if (!config.is_object()) throw config_error("checklist config must be an object");
  if (!config.contains(key)) return out;
  try {
    for (const auto& i : config.at(key)) {
      out.push_back({i.at("id").get<std::string>(), i.at("title").get<std::string>(), i.value("guidance", ""),
                     i.value("automatable", false)});
    }
  } catch (const Json::exception& e) {
    throw config_error(std::string("malformed checklist config: ") + e.what());
  }
  return out;
}

Json checklist_to_json(const ChecklistInstance& c) {
  Json j = Json::object();
  j["kind"] = to_string(c.kind);
  j["items"] = Json::array();
  for (const auto& r : c.results) {
    Json o = Json::object();
    o["id"] = r.item;
    o["status"] = to_string(r.status);
    o["note"] = r.note;
    if (r.machine) o["machine_check"] = {{"passed", r.machine->passed}, {"detail", r.machine->detail}};
    j["items"].push_back(std::move(o));
  }
  return j;
}

ChecklistInstance checklist_from_json(const Json& j) {
  try {
    ChecklistInstance c;
    auto kind = j.at("kind").get<std::string>();
    if (kind == "InDepth") c.kind = ChecklistKind::InDepth;
    else if (kind == "Change") c.kind = ChecklistKind::Change;
    else throw validation_error("unknown checklist kind '" + kind + "'");
    for (const auto& o : j.at("items")) {
      ChecklistResult r;
      r.item = o.at("id").get<std::string>();
      r.status = parse_enum<ItemStatus>(o.at("status").get<std::string>(), kStatuses, "checklist status");
      r.note = o.value("note", "");
      if (o.contains("machine_check")) {
        r.machine = MachineCheck{o["machine_check"].at("passed").get<bool>(),
                                 o["machine_check"].at("detail").get<std::string>()};
      }
      c.results.push_back(std::move(r));
    }
    return c;
  } catch (const Json::exception& e) {
    throw validation_error(std::string("malformed checklist: ") + e.what());
  }
}

ChecklistInstance fill_checklist(const ChecklistTemplate& t, ItemStatus status) {
  ChecklistInstance c;
  c.kind = t.kind;
  for (const auto& i : t.items) c.results.push_back({i.id, status, "", std::nullopt});
  return c;
}

// --- statements and reviews ------------------------------------------------------

std::string render_statement(const std::vector<std::string>& changes, const std::string& reviewer, Timestamp date) {
  if (changes.empty()) throw validation_error("an approval statement needs at least one change");
  std::string out = "Changes under review:\n";
  for (const auto& c : changes) out += "- " + c + "\n";
  out += "\n";
  out += kAttestationSentence;
  out += "\n\n";
  out += kRiskSentence;
  out += "\n\nReviewer: " + reviewer + "\nDate: " + format_date(date) + "\n";
  return out;
}

Json review_to_json(const ReviewRecord& r) {
  Json j = Json::object();
  j["id"] = r.id;
  j["entry"] = r.entry;
  j["change"] = opt(r.change);
  j["reviewer"] = r.reviewer;
  j["decision"] = to_string(r.decision);
  j["note"] = r.note;
  j["statement"] = r.decision == Decision::Approve ? Json(r.statement) : Json(nullptr);
  j["timestamp"] = format_timestamp(r.timestamp);
  j["checklist"] = checklist_to_json(r.checklist);
  return j;
}

ReviewRecord review_from_json(const Json& j) {
  ReviewRecord r;
  r.id = j.at("id").get<std::uint64_t>();
  r.entry = j.at("entry").get<std::string>();
  r.change = opt_from(j, "change");
  r.reviewer = j.at("reviewer").get<std::string>();
  r.decision = parse_enum<Decision>(j.at("decision").get<std::string>(), kDecisions, "decision");
  r.note = j.at("note").get<std::string>();
  if (j.at("statement").is_string()) r.statement = j["statement"].get<std::string>();
  r.timestamp = parse_timestamp(j.at("timestamp").get<std::string>());
  r.checklist = checklist_from_json(j.at("checklist"));
  return r;
}

// --- inventory entries ------------------------------------------------------------

Json entry_to_json(const InventoryEntry& e) {
  Json j = Json::object();
  j["id"] = e.id;
  j["name"] = e.name;
  j["owner"] = e.owner;
  j["registered_by"] = e.registered_by;
  j["classification"] = to_string(e.classification);
  j["state"] = to_string(e.state);
  j["current"] = e.current;
  j["approved"] = opt(e.approved);
  j["pending_change"] = opt(e.pending_change);
  j["rules"] = rules_to_json(e.rules);
  j["predecessor"] = opt(e.predecessor);
  j["successor"] = opt(e.successor);
  j["created"] = format_timestamp(e.created);
  j["updated"] = format_timestamp(e.updated);
  return j;
}

InventoryEntry entry_from_json(const Json& j) {
  try {
    InventoryEntry e;
    e.id = j.at("id").get<std::string>();
    e.name = j.at("name").get<std::string>();
    e.owner = j.at("owner").get<std::string>();
    e.registered_by = j.at("registered_by").get<std::string>();
    e.classification = classification_from_string(j.at("classification").get<std::string>());
    e.state = entry_state_from_string(j.at("state").get<std::string>());
    e.current = j.at("current").get<std::string>();
    e.approved = opt_from(j, "approved");
    e.pending_change = opt_from(j, "pending_change");
    e.rules = rules_from_json(j.at("rules"));
    e.predecessor = opt_from(j, "predecessor");
    e.successor = opt_from(j, "successor");
    e.created = parse_timestamp(j.at("created").get<std::string>());
    e.updated = parse_timestamp(j.at("updated").get<std::string>());
    return e;
  } catch (const Json::exception& ex) {
    throw integrity_error(std::string("malformed inventory record: ") + ex.what());
  }
}

// --- audit replay -------------------------------------------------------------------

ReplayedEntry replay_audit(const std::vector<AuditEvent>& events) {
  ReplayedEntry out;
  auto& e = out.entry;
  bool registered = false;
  try {
    for (const auto& ev : events) {
      const Json& p = ev.payload;
      if (!registered && ev.kind != "registered") {
        throw integrity_error("audit log of " + ev.entry + " does not start with a registration");
      }
      if (ev.kind == "registered") {
        if (registered) throw integrity_error("audit log of " + ev.entry + " registers twice");
        registered = true;
        e.id = ev.entry;
        e.name = p.at("name").get<std::string>();
        e.owner = p.at("owner").get<std::string>();
        e.registered_by = ev.actor;
        e.classification = classification_from_string(p.at("classification").get<std::string>());
        e.rules = rules_from_json(p.at("rules"));
        e.predecessor = opt_from(p, "predecessor");
        e.created = ev.timestamp;
      } else if (ev.kind == "snapshot") {
        e.current = p.at("snapshot").get<std::string>();
      } else if (ev.kind == "change-submitted") {
        if (p.at("classification") == "Structural") e.pending_change = p.at("change").get<std::string>();
      } else if (ev.kind == "state-change") {
        auto to = entry_state_from_string(p.at("to").get<std::string>());
        auto from = p.at("from");
        if (!from.is_null() && (out.states.empty() || entry_state_from_string(from.get<std::string>()) != e.state)) {
          throw integrity_error("audit log of " + ev.entry + " has a state change from a state it was not in");
        }
        if (p.contains("classification")) {
          e.classification = classification_from_string(p["classification"].get<std::string>());
        }
        if (p.contains("successor")) e.successor = p["successor"].get<std::string>();
        e.state = to;
        out.states.push_back(to);
        if (to == EntryState::InUse) {
          e.approved = e.current;
          e.pending_change.reset();
        }
      }
      e.updated = ev.timestamp;
    }
  } catch (const Json::exception& ex) {
    throw integrity_error(std::string("malformed audit event: ") + ex.what());
  }
  if (!registered) throw integrity_error("audit log is empty");
  return out;
}

// --- workflow -------------------------------------------------------------------------

std::vector<AuditEvent> Workflow::commit(const std::string& id, std::vector<AuditEvent> events) {
  std::uint64_t seq = store_.last_sequence(id);
  for (auto& e : events) {
    e.seq = ++seq;
    store_.append_event(e);
  }
  return events;
}

InventoryEntry Workflow::rebuild(const std::string& id) {
  auto entry = replay_audit(store_.read_events(id)).entry;
  store_.put_entry(entry_to_json(entry));
  return entry;
}

InventoryEntry Workflow::get(const std::string& id) const {
  auto j = store_.get_entry(id);
  if (!j) throw lookup_error("unknown entry '" + id + "'");
  return entry_from_json(*j);
}

std::vector<InventoryEntry> Workflow::inventory() const {
  std::vector<InventoryEntry> out;
  for (const auto& j : store_.list_entries()) out.push_back(entry_from_json(j));
  return out;
}

std::vector<AuditEvent> Workflow::audit_log(const std::string& id, SeqRange range) const {
  get(id);
  return store_.read_events(id, range);
}

ReviewRecord Workflow::review(const std::string& id, std::uint64_t review_id) const {
  get(id);
  auto events = store_.read_events(id, {review_id, review_id});
  if (events.empty() || events[0].kind != "review") {
    throw lookup_error("entry " + id + " has no review " + std::to_string(review_id));
  }
  return review_from_json(events[0].payload.at("review"));
}

ChecklistTemplate Workflow::checklist(ChecklistKind kind) const {
  auto config = store_.read_config("checklist");
  return generic_checklist(kind, config ? configured_items(*config, kind) : std::vector<ChecklistItem>{});
}

AnalysisConfig Workflow::analysis_config() const {
  auto j = store_.read_config("analysis");
  return j ? analysis_config_from_json(*j) : AnalysisConfig{};
}

ThresholdProfile Workflow::profile() const {
  auto j = store_.read_config("profile");
  return j ? profile_from_json(*j) : default_profile();
}

Policy Workflow::policy() const {
  auto j = store_.read_config("policy");
  Policy p;
  if (!j) return p;
  try {
    p.redevelop_count = j->value("redevelop_count", p.redevelop_count);
    p.restructure_floor = j->value("restructure_floor", p.restructure_floor);
  } catch (const Json::exception& e) {
    throw config_error(std::string("malformed policy config: ") + e.what());
  }
  if (p.restructure_floor < 0 || p.restructure_floor > 5) throw config_error("restructure_floor must be in 0..5");
  return p;
}

MetricsReport Workflow::metrics(const std::string& id) const {
  auto e = get(id);
  return metrics_report(store_.get_snapshot(e.current), analysis_config());
}

EvaluationReport Workflow::evaluate(const std::string& id) const {
  return evaluate_workbook(metrics(id), profile(), policy());
}

InventoryEntry Workflow::register_workbook(const Workbook& w, const Registration& reg, const std::string& actor,
                                           Timestamp at) {
  require_actor(actor);
  if (reg.name.empty()) throw validation_error("a spreadsheet name is required");
  if (reg.owner.empty()) throw validation_error("an owner is required");
  auto guard = store_.lock();
  for (const auto& e : inventory()) {
    if (e.name == reg.name && e.state != EntryState::Retired) {
      throw Error(ErrorClass::Domain, "registration", "a spreadsheet named '" + reg.name + "' is already " + e.id);
    }
  }
  const std::string id = store_.next_entry_id();
  const std::string snapshot = store_.put_snapshot(w);
  const EntryState initial =
      reg.classification == Classification::Throwaway ? EntryState::Registered : EntryState::InDepthReviewPending;
  Json p = Json::object();
  p["name"] = reg.name;
  p["owner"] = reg.owner;
  p["classification"] = to_string(reg.classification);
  p["rules"] = rules_to_json(reg.rules);
  commit(id, {make_event(id, "registered", actor, at, std::move(p)),
              make_event(id, "snapshot", actor, at, {{"snapshot", snapshot}}),
              state_change(id, std::nullopt, initial, actor, at)});
  return rebuild(id);
}

InventoryEntry Workflow::promote(const std::string& id, Classification to, const std::string& actor, Timestamp at) {
  require_actor(actor);
  auto guard = store_.lock();
  auto e = get(id);
  require_state(e, {EntryState::Registered}, "promote");
  if (to == Classification::Throwaway) throw validation_error("promotion needs a Critical or Operational class");
  commit(id, {state_change(id, e.state, EntryState::InDepthReviewPending, actor, at,
                           {{"classification", to_string(to)}})});
  return rebuild(id);
}

std::vector<std::string> Workflow::change_lines(const ChangeSet& cs) const {
  std::vector<std::string> lines;
  for (const auto& op : cs.sheet_ops) {
    switch (op.kind) {
      case SheetOpKind::Added: lines.push_back("sheet " + op.sheet + " added"); break;
      case SheetOpKind::Removed: lines.push_back("sheet " + op.sheet + " removed"); break;
      case SheetOpKind::Renamed: lines.push_back("sheet " + op.sheet + " renamed to " + op.renamed_to); break;
    }
  }
  if (cs.before_layout.sheets != cs.after_layout.sheets && cs.sheet_ops.empty()) lines.push_back("sheets reordered");
  for (const auto& d : cs.deltas) {
    lines.push_back(render_address(d.address) + " " + std::string(to_string(d.kind)) + ": " +
                    render_content(d.before) + " -> " + render_content(d.after));
  }
  return lines;
}

SubmitResult Workflow::submit_change(const std::string& id, const Workbook& w, const std::string& author,
                                     const std::string& description, Timestamp at,
                                     const std::map<std::string, std::string>& renames) {
  require_actor(author);
  auto guard = store_.lock();
  auto e = get(id);
  require_state(e, {EntryState::InUse, EntryState::RestructureRequired}, "submit");
  const Workbook before = store_.get_snapshot(e.current);
  ChangeSet cs = diff(before, w, {author, at, description, renames});
  if (cs.base == cs.result && cs.empty()) {
    throw Error(ErrorClass::Domain, "no-op", "submitted workbook is identical to the current snapshot of " + id);
  }
  const ChangeClass cls = classify(cs, before, w);
  store_.put_snapshot(w);
  store_.put_changeset(cs);

  Json p = Json::object();
  p["change"] = cs.id;
  p["base"] = cs.base;
  p["result"] = cs.result;
  p["classification"] = to_string(cls);
  p["description"] = description;
  if (cls == ChangeClass::NonStructural) p["note"] = "unreviewed value edit";
  std::vector<AuditEvent> events{make_event(id, "change-submitted", author, at, std::move(p)),
                                 make_event(id, "snapshot", author, at, {{"snapshot", cs.result}})};
  if (e.state == EntryState::RestructureRequired) {
    events.push_back(state_change(id, e.state, EntryState::ToolEvalPending, author, at));
  } else if (cls == ChangeClass::Structural) {
    events.push_back(state_change(id, e.state, EntryState::ChangeReviewPending, author, at));
  }
  commit(id, std::move(events));
  return {cs, cls, rebuild(id)};
}

ReviewOutcome Workflow::record_review(const std::string& id, const ReviewInput& input, Timestamp at) {
  require_actor(input.reviewer);
  auto guard = store_.lock();
  auto e = get(id);
  require_state(e, {EntryState::InDepthReviewPending, EntryState::ChangeReviewPending}, "review");
  const bool change_review = e.state == EntryState::ChangeReviewPending;

  std::optional<ChangeSet> cs;
  if (change_review) {
    if (!e.pending_change) throw integrity_error("entry " + id + " awaits a change review but has no pending change");
    cs = store_.get_changeset(*e.pending_change);
    if (input.reviewer == cs->author) {
      throw independence_error("reviewer " + input.reviewer + " authored change " + cs->id);
    }
  } else if (input.reviewer == e.owner || input.reviewer == e.registered_by) {
    throw independence_error("reviewer " + input.reviewer + " owns or registered " + id);
  }

  const auto tmpl = checklist(change_review ? ChecklistKind::Change : ChecklistKind::InDepth);
  if (input.checklist.kind != tmpl.kind) {
    throw validation_error("a " + std::string(to_string(tmpl.kind)) + " checklist is required for this review");
  }
  std::map<std::string, const ChecklistResult*> answers;
  for (const auto& r : input.checklist.results) {
    if (!answers.emplace(r.item, &r).second) throw validation_error("checklist item " + r.item + " answered twice");
  }
  std::vector<std::string> missing;
  for (const auto& item : tmpl.items) {
    if (!answers.count(item.id)) missing.push_back(item.id);
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw validation_error("checklist is incomplete; missing " + list);
  }
  if (answers.size() != tmpl.items.size()) throw validation_error("checklist answers items outside the template");

  ReviewRecord rec;
  rec.entry = id;
  rec.change = cs ? std::optional<std::string>(cs->id) : std::nullopt;
  rec.reviewer = input.reviewer;
  rec.decision = input.decision;
  rec.note = input.note;
  rec.timestamp = at;
  rec.checklist.kind = tmpl.kind;
  std::size_t fails = 0;
  const Workbook current = store_.get_snapshot(e.current);
  std::optional<MetricsReport> report;
  for (const auto& item : tmpl.items) {
    ChecklistResult r = *answers.at(item.id);
    r.machine.reset();
    if (item.id == "expected-values") {
      try {
        auto violations = check_rules(current, e.rules, {analysis_config().sum_tolerance});
        r.machine = MachineCheck{violations.empty(), std::to_string(e.rules.size()) + " rule(s), " +
                                                         std::to_string(violations.size()) + " violation(s)"};
      } catch (const Error& err) {
        if (err.code() != "config") throw;
        r.machine = MachineCheck{false, std::string("rules cannot be checked: ") + err.what()};
      }
    } else if (item.id == "separation-of-concerns") {
      if (!report) report = metrics_report(current, analysis_config());
      r.machine = MachineCheck{report->magic_constants.empty() && report->inconsistent_cells.empty(),
                               std::to_string(report->magic_constants.size()) +
                                   " formula(s) with hard-coded constants, " +
                                   std::to_string(report->inconsistent_cells.size()) + " inconsistent cell(s)"};
    }
    if (r.status == ItemStatus::Fail) ++fails;
    rec.checklist.results.push_back(std::move(r));
  }
  if (input.decision == Decision::Approve && fails > 0) {
    throw validation_error("cannot approve with " + std::to_string(fails) + " failed checklist item(s)");
  }
  if (input.decision == Decision::Decline && fails == 0 && input.note.empty()) {
    throw validation_error("a decline needs a failed checklist item or a note");
  }
  if (input.decision == Decision::Approve) {
    auto lines = cs ? change_lines(*cs)
                    : std::vector<std::string>{"In-depth review of " + e.name + " (snapshot " + e.current + ")"};
    rec.statement = render_statement(lines, input.reviewer, at);
  }

  rec.id = store_.last_sequence(id) + 1;
  const EntryState next = input.decision == Decision::Approve ? EntryState::InUse : EntryState::ToolEvalPending;
  commit(id, {make_event(id, "review", input.reviewer, at, {{"review", review_to_json(rec)}}),
              state_change(id, e.state, next, input.reviewer, at)});
  return {rec, rebuild(id)};
}

InventoryEntry Workflow::record_evaluation(const std::string& id, const EvaluationReport& report,
                                           const std::string& actor, Timestamp at) {
  require_actor(actor);
  auto guard = store_.lock();
  auto e = get(id);
  require_state(e, {EntryState::ToolEvalPending}, "evaluation");
  if (report.snapshot != e.current) {
    throw staleness_error("evaluation is for snapshot " + report.snapshot + " but " + id + " is at " + e.current);
  }
  EntryState next = EntryState::InUse;
  if (report.recommendation == Recommendation::Restructure) next = EntryState::RestructureRequired;
  if (report.recommendation == Recommendation::Redevelop) next = EntryState::RedevelopRequired;
  commit(id, {make_event(id, "evaluation", actor, at, {{"report", evaluation_to_json(report)}}),
              state_change(id, e.state, next, actor, at)});
  return rebuild(id);
}

Redevelopment Workflow::register_redevelopment(const std::string& old_id, const Workbook& w,
                                               const RedevelopOptions& opts, const std::string& actor,
                                               Timestamp at) {
  require_actor(actor);
  auto guard = store_.lock();
  auto old = get(old_id);
  require_state(old, {EntryState::RedevelopRequired}, "redevelopment");
  Registration reg{opts.name.value_or(old.name), opts.owner.value_or(old.owner),
                   opts.classification.value_or(old.classification), opts.rules.value_or(old.rules)};
  if (reg.classification == Classification::Throwaway) {
    throw validation_error("a redeveloped spreadsheet cannot be registered as Throwaway");
  }
  for (const auto& e : inventory()) {
    if (e.id != old_id && e.name == reg.name && e.state != EntryState::Retired) {
      throw Error(ErrorClass::Domain, "registration", "a spreadsheet named '" + reg.name + "' is already " + e.id);
    }
  }
  const std::string id = store_.next_entry_id();
  commit(old_id, {state_change(old_id, old.state, EntryState::Retired, actor, at, {{"successor", id}})});
  auto retired = rebuild(old_id);

  const std::string snapshot = store_.put_snapshot(w);
  Json p = Json::object();
  p["name"] = reg.name;
  p["owner"] = reg.owner;
  p["classification"] = to_string(reg.classification);
  p["rules"] = rules_to_json(reg.rules);
  p["predecessor"] = old_id;
  commit(id, {make_event(id, "registered", actor, at, std::move(p)),
              make_event(id, "snapshot", actor, at, {{"snapshot", snapshot}}),
              state_change(id, std::nullopt, EntryState::InDepthReviewPending, actor, at)});
  return {retired, rebuild(id)};
}

void Workflow::note_archive(const std::vector<std::string>& ids, const std::string& tag, const std::string& actor,
                            Timestamp at) {
  require_actor(actor);
  auto guard = store_.lock();
  for (const auto& id : ids) {
    get(id);
    commit(id, {make_event(id, "archive", actor, at, {{"tag", tag}})});
    rebuild(id);
  }
}

}  // namespace scr
