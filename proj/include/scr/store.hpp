#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "scr/diff.hpp"
#include "scr/grid.hpp"
#include "scr/json.hpp"
#include "scr/timestamp.hpp"

namespace scr {

inline const std::vector<std::string> kEventKinds = {
    "registered", "snapshot", "change-submitted", "review", "evaluation", "state-change", "archive",
};

struct AuditEvent {
  std::uint64_t seq = 0;
  std::string entry;
  std::string kind;
  std::string actor;
  Timestamp timestamp{};
  Json payload = Json::object();
};

Json event_to_json(const AuditEvent& e);
AuditEvent event_from_json(const Json& j);

// Advisory store-wide write lock. Released on destruction.
class StoreLock {
 public:
  StoreLock(StoreLock&& other) noexcept;
  StoreLock& operator=(StoreLock&&) = delete;
  ~StoreLock();

 private:
  friend class Store;
  explicit StoreLock(std::filesystem::path path) : path_(std::move(path)) {}
  std::filesystem::path path_;
};

struct SeqRange {
  std::uint64_t from = 1;
  std::uint64_t to = std::numeric_limits<std::uint64_t>::max();
};

struct ArchiveFilter {
  std::vector<std::string> entries;  // empty -> empty bundle
  std::optional<Timestamp> from;
  std::optional<Timestamp> to;
};

struct ArchiveSummary {
  std::string tag;
  std::filesystem::path path;
  Json manifest;
};

class Store {
 public:
  // Creates the skeleton, or accepts an existing store unchanged. Refuses a
  // non-empty directory that is not a store.
  static Store init(const std::filesystem::path& root);
  // Throws a lookup error when `root` is not an initialized store.
  static Store open(const std::filesystem::path& root);

  const std::filesystem::path& root() const { return root_; }

  // Locks older than this, or held by a dead local process, are broken.
  StoreLock lock(std::chrono::seconds stale_after = std::chrono::hours(1)) const;

  std::string put_snapshot(const Workbook& w) const;
  // Verifies the file digest against the id.
  Workbook get_snapshot(const std::string& id) const;
  bool has_snapshot(const std::string& id) const;

  std::string put_changeset(const ChangeSet& cs) const;
  ChangeSet get_changeset(const std::string& id) const;
  bool has_changeset(const std::string& id) const;

  void put_entry(const Json& record) const;  // keyed by record["id"]
  std::optional<Json> get_entry(const std::string& id) const;
  std::vector<Json> list_entries() const;  // E1, E2, ... in numeric order
  std::string next_entry_id() const;

  // The event's seq must be exactly one past the entry's last sequence.
  void append_event(const AuditEvent& e) const;
  std::vector<AuditEvent> read_events(const std::string& entry, SeqRange range = {}) const;
  std::uint64_t last_sequence(const std::string& entry) const;

  std::optional<Json> read_config(const std::string& name) const;
  void write_config(const std::string& name, const Json& value) const;

  // Writes archives/<tag>.bundle. Tags are never reused.
  ArchiveSummary export_archive(const std::string& tag, const ArchiveFilter& filter, Timestamp created) const;
  // Loads a bundle into this store; refuses entries that already exist.
  ArchiveSummary import_archive(const std::filesystem::path& bundle) const;

 private:
  explicit Store(std::filesystem::path root) : root_(std::move(root)) {}
  std::filesystem::path root_;
};

// Writes `bytes` to a sibling temp file, syncs it and renames it over `path`.
void atomic_write(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

bool is_digest(std::string_view s);
bool is_entry_id(std::string_view s);

}  // namespace scr
