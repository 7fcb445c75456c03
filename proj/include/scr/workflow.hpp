#pragma once

#include <optional>
#include <string>
#include <vector>

#include "scr/diff.hpp"
#include "scr/evaluator.hpp"
#include "scr/risk.hpp"
#include "scr/store.hpp"

namespace scr {

enum class Classification { Critical, Operational, Throwaway };
std::string_view to_string(Classification c);
Classification classification_from_string(std::string_view s);

enum class EntryState {
  Registered,
  InDepthReviewPending,
  InUse,
  ChangeReviewPending,
  ToolEvalPending,
  RestructureRequired,
  RedevelopRequired,
  Retired,
};
std::string_view to_string(EntryState s);
EntryState entry_state_from_string(std::string_view s);
inline constexpr EntryState kAllStates[] = {
    EntryState::Registered,      EntryState::InDepthReviewPending, EntryState::InUse,
    EntryState::ChangeReviewPending, EntryState::ToolEvalPending, EntryState::RestructureRequired,
    EntryState::RedevelopRequired, EntryState::Retired,
};

// --- checklists ------------------------------------------------------------------

enum class ChecklistKind { InDepth, Change };
std::string_view to_string(ChecklistKind k);

struct ChecklistItem {
  std::string id;
  std::string title;
  std::string guidance;
  bool automatable = false;
};

struct ChecklistTemplate {
  ChecklistKind kind = ChecklistKind::InDepth;
  std::vector<ChecklistItem> items;
};

// The generic controls followed by organization-specific items.
ChecklistTemplate generic_checklist(ChecklistKind kind, const std::vector<ChecklistItem>& extra = {});
Json checklist_template_to_json(const ChecklistTemplate& t);
// Organization items from config: {"in_depth": [items], "change": [items]}.
std::vector<ChecklistItem> configured_items(const Json& config, ChecklistKind kind);

enum class ItemStatus { Pass, Fail, NA };
std::string_view to_string(ItemStatus s);

struct MachineCheck {
  bool passed = true;
  std::string detail;
};

struct ChecklistResult {
  std::string item;
  ItemStatus status = ItemStatus::Pass;
  std::string note;
  std::optional<MachineCheck> machine;
};

struct ChecklistInstance {
  ChecklistKind kind = ChecklistKind::InDepth;
  std::vector<ChecklistResult> results;
};

Json checklist_to_json(const ChecklistInstance& c);
ChecklistInstance checklist_from_json(const Json& j);
// All items of `t` answered with `status`.
ChecklistInstance fill_checklist(const ChecklistTemplate& t, ItemStatus status);

// --- reviews and statements ------------------------------------------------------

inline constexpr std::string_view kAttestationSentence =
    "I attest to have reviewed the spreadsheet changes listed above against the defined spreadsheet controls "
    "and found no nonconformities.";
inline constexpr std::string_view kRiskSentence =
    "To the best of my knowledge the adoption of these changes does not introduce additional operational risk.";

// Throws a validation error for an empty change list.
std::string render_statement(const std::vector<std::string>& changes, const std::string& reviewer, Timestamp date);

enum class Decision { Approve, Decline };
std::string_view to_string(Decision d);
Decision decision_from_string(std::string_view s);

struct ReviewRecord {
  std::uint64_t id = 0;  // sequence number of its audit event
  std::string entry;
  std::optional<std::string> change;  // absent for in-depth reviews
  std::string reviewer;
  ChecklistInstance checklist;
  Decision decision = Decision::Approve;
  std::string note;
  std::string statement;  // Approve only
  Timestamp timestamp{};
};

Json review_to_json(const ReviewRecord& r);
ReviewRecord review_from_json(const Json& j);

struct ReviewInput {
  std::string reviewer;
  ChecklistInstance checklist;
  Decision decision = Decision::Approve;
  std::string note;
};

// --- inventory -----------------------------------------------------------------

struct InventoryEntry {
  std::string id;
  std::string name;
  std::string owner;
  std::string registered_by;
  Classification classification = Classification::Critical;
  EntryState state = EntryState::Registered;
  std::string current;                     // latest submitted snapshot
  std::optional<std::string> approved;     // latest approved snapshot
  std::optional<std::string> pending_change;
  std::vector<ExpectedValueRule> rules;
  std::optional<std::string> predecessor;  // entry this one redevelops
  std::optional<std::string> successor;
  Timestamp created{};
  Timestamp updated{};
};

Json entry_to_json(const InventoryEntry& e);
InventoryEntry entry_from_json(const Json& j);

struct Registration {
  std::string name;
  std::string owner;
  Classification classification = Classification::Critical;
  std::vector<ExpectedValueRule> rules;
};

struct SubmitResult {
  ChangeSet change;
  ChangeClass change_class = ChangeClass::Structural;
  InventoryEntry entry;
};

struct ReviewOutcome {
  ReviewRecord review;
  InventoryEntry entry;
};

struct RedevelopOptions {
  std::optional<std::string> name;
  std::optional<std::string> owner;
  std::optional<Classification> classification;
  std::optional<std::vector<ExpectedValueRule>> rules;  // inherited when absent
};

struct Redevelopment {
  InventoryEntry retired;
  InventoryEntry replacement;
};

// Rebuilds an entry from its audit events alone.
struct ReplayedEntry {
  std::vector<EntryState> states;  // every state the entry has been in
  InventoryEntry entry;
};
ReplayedEntry replay_audit(const std::vector<AuditEvent>& events);

// Store-backed lifecycle. Mutations take the store's write lock.
class Workflow {
 public:
  explicit Workflow(Store store) : store_(std::move(store)) {}

  const Store& store() const { return store_; }

  InventoryEntry register_workbook(const Workbook& w, const Registration& reg, const std::string& actor, Timestamp at);
  // Registered -> InDepthReviewPending, reclassifying a record-only entry.
  InventoryEntry promote(const std::string& id, Classification to, const std::string& actor, Timestamp at);
  SubmitResult submit_change(const std::string& id, const Workbook& w, const std::string& author,
                             const std::string& description, Timestamp at,
                             const std::map<std::string, std::string>& renames = {});
  ReviewOutcome record_review(const std::string& id, const ReviewInput& input, Timestamp at);
  InventoryEntry record_evaluation(const std::string& id, const EvaluationReport& report, const std::string& actor,
                                   Timestamp at);
  Redevelopment register_redevelopment(const std::string& old_id, const Workbook& w, const RedevelopOptions& opts,
                                       const std::string& actor, Timestamp at);
  // Appends an archive event to each listed entry.
  void note_archive(const std::vector<std::string>& ids, const std::string& tag, const std::string& actor,
                    Timestamp at);

  InventoryEntry get(const std::string& id) const;
  std::vector<InventoryEntry> inventory() const;
  std::vector<AuditEvent> audit_log(const std::string& id, SeqRange range = {}) const;
  ReviewRecord review(const std::string& id, std::uint64_t review_id) const;
  ChecklistTemplate checklist(ChecklistKind kind) const;

  // Metrics and evaluation of the current snapshot under the store's
  // configured analysis settings, profile and policy. Records nothing.
  MetricsReport metrics(const std::string& id) const;
  EvaluationReport evaluate(const std::string& id) const;

  AnalysisConfig analysis_config() const;
  ThresholdProfile profile() const;
  Policy policy() const;

 private:
  std::vector<AuditEvent> commit(const std::string& id, std::vector<AuditEvent> events);
  InventoryEntry rebuild(const std::string& id);
  std::vector<std::string> change_lines(const ChangeSet& cs) const;

  Store store_;
};

}  // namespace scr
