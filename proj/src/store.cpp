#include "scr/store.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "scr/digest.hpp"
#include "scr/error.hpp"

namespace scr {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kStoreFormat = "scr-store/1";
constexpr std::string_view kArchiveFormat = "scr-archive/1";
const char* const kDirs[] = {"inventory", "snapshots", "changes", "events", "archives", "config"};

std::string sys_error(const std::string& what, const fs::path& p) {
  return what + " " + p.string() + ": " + std::strerror(errno);
}

bool is_tag(std::string_view s) {
  return !s.empty() && s.size() <= 128 && s.front() != '.' && std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
  });
}

bool is_config_name(std::string_view s) { return is_tag(s); }

std::uint64_t entry_number(std::string_view id) { return std::stoull(std::string(id.substr(1))); }

std::string canonical_changeset_text(const ChangeSet& cs) { return changeset_to_json(cs).dump(2) + "\n"; }

// Snapshot and change-set ids referenced from an event payload.
void collect_refs(const Json& j, std::set<std::string>& snapshots, std::set<std::string>& changes) {
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) {
      if (v.is_string()) {
        const auto& s = v.get_ref<const std::string&>();
        if ((k == "snapshot" || k == "base" || k == "result") && is_digest(s)) snapshots.insert(s);
        if (k == "change" && is_digest(s)) changes.insert(s);
      } else {
        collect_refs(v, snapshots, changes);
      }
    }
  } else if (j.is_array()) {
    for (const auto& v : j) collect_refs(v, snapshots, changes);
  }
}

std::vector<AuditEvent> parse_event_lines(const std::string& text, const std::string& entry) {
  std::vector<AuditEvent> out;
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      out.push_back(event_from_json(Json::parse(line)));
    } catch (const std::exception& e) {
      throw integrity_error("event log for " + entry + " is corrupt at line " + std::to_string(n) + ": " + e.what());
    }
    if (out.back().entry != entry) {
      throw integrity_error("event log for " + entry + " contains an event of " + out.back().entry);
    }
    if (out.size() > 1 && out.back().seq != out[out.size() - 2].seq + 1) {
      throw integrity_error("event log for " + entry + " is out of sequence at line " + std::to_string(n));
    }
  }
  return out;
}

}  // namespace

bool is_digest(std::string_view s) {
  return s.size() == 64 && std::all_of(s.begin(), s.end(), [](char c) {
           return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
         });
}

bool is_entry_id(std::string_view s) {
  return s.size() >= 2 && s.size() <= 19 && s[0] == 'E' && s[1] != '0' &&
         std::all_of(s.begin() + 1, s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

Json event_to_json(const AuditEvent& e) {
  Json j = Json::object();
  j["seq"] = e.seq;
  j["entry"] = e.entry;
  j["kind"] = e.kind;
  j["actor"] = e.actor;
  j["timestamp"] = format_timestamp(e.timestamp);
  j["payload"] = e.payload;
  return j;
}

AuditEvent event_from_json(const Json& j) {
  AuditEvent e;
  e.seq = j.at("seq").get<std::uint64_t>();
  e.entry = j.at("entry").get<std::string>();
  e.kind = j.at("kind").get<std::string>();
  e.actor = j.at("actor").get<std::string>();
  e.timestamp = parse_timestamp(j.at("timestamp").get<std::string>());
  e.payload = j.at("payload");
  if (std::find(kEventKinds.begin(), kEventKinds.end(), e.kind) == kEventKinds.end()) {
    throw integrity_error("unknown event kind '" + e.kind + "'");
  }
  return e;
}

void atomic_write(const fs::path& path, std::string_view bytes) {
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) throw io_error(sys_error("cannot create", tmp));
  std::size_t done = 0;
  while (done < bytes.size()) {
    ssize_t n = ::write(fd, bytes.data() + done, bytes.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      ::close(fd);
      ::unlink(tmp.c_str());
      throw io_error(sys_error("cannot write", tmp));
    }
    done += static_cast<std::size_t>(n);
  }
  if (::fsync(fd) != 0 || ::close(fd) != 0) {
    ::unlink(tmp.c_str());
    throw io_error(sys_error("cannot sync", tmp));
  }
  if (::rename(tmp.c_str(), path.c_str()) != 0) {
    ::unlink(tmp.c_str());
    throw io_error(sys_error("cannot rename onto", path));
  }
  int dfd = ::open(path.parent_path().c_str(), O_RDONLY | O_DIRECTORY | O_CLOEXEC);
  if (dfd >= 0) {
    ::fsync(dfd);
    ::close(dfd);
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// --- lock ---------------------------------------------------------------------

StoreLock::StoreLock(StoreLock&& other) noexcept : path_(std::move(other.path_)) { other.path_.clear(); }

StoreLock::~StoreLock() {
  if (!path_.empty()) ::unlink(path_.c_str());
}

StoreLock Store::lock(std::chrono::seconds stale_after) const {
  const fs::path path = root_ / "lock";
  for (int attempt = 0; attempt < 2; ++attempt) {
    int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_EXCL | O_CLOEXEC, 0644);
    if (fd >= 0) {
      Json info = Json::object();
      info["pid"] = ::getpid();
      info["acquired"] = format_timestamp(now_utc());
      std::string text = info.dump() + "\n";
      ssize_t n = ::write(fd, text.data(), text.size());
      ::close(fd);
      if (n != static_cast<ssize_t>(text.size())) {
        ::unlink(path.c_str());
        throw io_error(sys_error("cannot write", path));
      }
      return StoreLock(path);
    }
    if (errno != EEXIST) throw io_error(sys_error("cannot create", path));

    bool stale = false;
    std::string holder = "unknown holder";
    try {
      auto info = Json::parse(read_file(path));
      auto pid = info.at("pid").get<long>();
      auto acquired = parse_timestamp(info.at("acquired").get<std::string>());
      holder = "process " + std::to_string(pid) + " since " + format_timestamp(acquired);
      const bool dead = ::kill(static_cast<pid_t>(pid), 0) != 0 && errno == ESRCH;
      stale = dead || now_utc() - acquired > stale_after;
    } catch (const std::exception&) {
      // Half-written lock files come from crashed writers; judge them by age.
      std::error_code ec;
      auto age = fs::file_time_type::clock::now() - fs::last_write_time(path, ec);
      stale = !ec && age > stale_after;
    }
    if (!stale) throw busy_error("store is locked by " + holder);
    ::unlink(path.c_str());
  }
  throw busy_error("store lock is contended");
}

// --- layout -------------------------------------------------------------------

Store Store::init(const fs::path& root) {
  std::error_code ec;
  const fs::path marker = root / "config" / "store.json";
  if (fs::exists(marker, ec)) return open(root);
  if (fs::exists(root, ec)) {
    if (!fs::is_directory(root, ec)) throw state_error(root.string() + " exists and is not a directory");
    if (!fs::is_empty(root, ec)) throw state_error(root.string() + " is not empty and is not an SCR store");
  }
  fs::create_directories(root, ec);
  if (ec) throw io_error("cannot create " + root.string() + ": " + ec.message());
  for (const char* d : kDirs) {
    fs::create_directory(root / d, ec);
    if (ec) throw io_error("cannot create " + (root / d).string() + ": " + ec.message());
  }
  Json info = Json::object();
  info["format"] = kStoreFormat;
  atomic_write(marker, info.dump(2) + "\n");
  return Store(root);
}

Store Store::open(const fs::path& root) {
  const fs::path marker = root / "config" / "store.json";
  std::error_code ec;
  if (!fs::exists(marker, ec)) throw lookup_error(root.string() + " is not an SCR store (run init)");
  try {
    if (Json::parse(read_file(marker)).at("format") != kStoreFormat) throw std::runtime_error("format");
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    throw integrity_error("unrecognized store marker " + marker.string());
  }
  for (const char* d : kDirs) {
    if (!fs::is_directory(root / d, ec)) throw integrity_error("store is missing " + (root / d).string());
  }
  return Store(root);
}

// --- snapshots and change sets -------------------------------------------------

std::string Store::put_snapshot(const Workbook& w) const {
  const std::string text = serialize_workbook(w);
  const std::string id = sha256_hex(text);
  const fs::path path = root_ / "snapshots" / (id + ".wbk.json");
  std::error_code ec;
  if (!fs::exists(path, ec)) atomic_write(path, text);
  return id;
}

bool Store::has_snapshot(const std::string& id) const {
  std::error_code ec;
  return is_digest(id) && fs::exists(root_ / "snapshots" / (id + ".wbk.json"), ec);
}

Workbook Store::get_snapshot(const std::string& id) const {
  if (!has_snapshot(id)) throw lookup_error("unknown snapshot " + id);
  const std::string text = read_file(root_ / "snapshots" / (id + ".wbk.json"));
  if (sha256_hex(text) != id) throw integrity_error("snapshot " + id + " is corrupt (digest mismatch)");
  try {
    return parse_workbook(text);
  } catch (const Error& e) {
    throw integrity_error("snapshot " + id + " is unreadable: " + e.what());
  }
}

std::string Store::put_changeset(const ChangeSet& cs) const {
  if (changeset_digest(cs) != cs.id) throw integrity_error("change set id does not match its content");
  const fs::path path = root_ / "changes" / (cs.id + ".cs.json");
  std::error_code ec;
  if (!fs::exists(path, ec)) atomic_write(path, canonical_changeset_text(cs));
  return cs.id;
}

bool Store::has_changeset(const std::string& id) const {
  std::error_code ec;
  return is_digest(id) && fs::exists(root_ / "changes" / (id + ".cs.json"), ec);
}

ChangeSet Store::get_changeset(const std::string& id) const {
  if (!has_changeset(id)) throw lookup_error("unknown change set " + id);
  const std::string text = read_file(root_ / "changes" / (id + ".cs.json"));
  ChangeSet cs;
  try {
    cs = changeset_from_json(Json::parse(text));
  } catch (const Json::exception& e) {
    throw integrity_error("change set " + id + " is corrupt: " + e.what());
  }
  if (cs.id != id || canonical_changeset_text(cs) != text) {
    throw integrity_error("change set " + id + " is corrupt (not in canonical form)");
  }
  return cs;
}

// --- inventory ----------------------------------------------------------------

void Store::put_entry(const Json& record) const {
  const std::string id = record.at("id").get<std::string>();
  if (!is_entry_id(id)) throw validation_error("invalid entry id '" + id + "'");
  atomic_write(root_ / "inventory" / (id + ".json"), record.dump(2) + "\n");
}

std::optional<Json> Store::get_entry(const std::string& id) const {
  if (!is_entry_id(id)) return std::nullopt;
  const fs::path path = root_ / "inventory" / (id + ".json");
  std::error_code ec;
  if (!fs::exists(path, ec)) return std::nullopt;
  try {
    return Json::parse(read_file(path));
  } catch (const Json::exception& e) {
    throw integrity_error("inventory record " + id + " is corrupt: " + e.what());
  }
}

std::vector<Json> Store::list_entries() const {
  std::vector<std::string> ids;
  for (const auto& f : fs::directory_iterator(root_ / "inventory")) {
    auto name = f.path().filename().string();
    if (name.size() > 5 && name.compare(name.size() - 5, 5, ".json") == 0) {
      auto id = name.substr(0, name.size() - 5);
      if (is_entry_id(id)) ids.push_back(id);
    }
  }
  std::sort(ids.begin(), ids.end(),
            [](const std::string& a, const std::string& b) { return entry_number(a) < entry_number(b); });
  std::vector<Json> out;
  for (const auto& id : ids) out.push_back(*get_entry(id));
  return out;
}

std::string Store::next_entry_id() const {
  std::uint64_t max = 0;
  for (const auto& f : fs::directory_iterator(root_ / "inventory")) {
    auto name = f.path().filename().string();
    if (name.size() > 5 && name.compare(name.size() - 5, 5, ".json") == 0) {
      auto id = name.substr(0, name.size() - 5);
      if (is_entry_id(id)) max = std::max(max, entry_number(id));
    }
  }
  return "E" + std::to_string(max + 1);
}

// --- events -------------------------------------------------------------------

std::vector<AuditEvent> Store::read_events(const std::string& entry, SeqRange range) const {
  if (!is_entry_id(entry)) throw lookup_error("unknown entry '" + entry + "'");
  const fs::path path = root_ / "events" / (entry + ".log");
  std::error_code ec;
  if (!fs::exists(path, ec)) return {};
  auto all = parse_event_lines(read_file(path), entry);
  std::vector<AuditEvent> out;
  for (auto& e : all) {
    if (e.seq >= range.from && e.seq <= range.to) out.push_back(std::move(e));
  }
  return out;
}

std::uint64_t Store::last_sequence(const std::string& entry) const {
  auto events = read_events(entry);
  return events.empty() ? 0 : events.back().seq;
}

void Store::append_event(const AuditEvent& e) const {
  if (!is_entry_id(e.entry)) throw validation_error("invalid entry id '" + e.entry + "'");
  if (std::find(kEventKinds.begin(), kEventKinds.end(), e.kind) == kEventKinds.end()) {
    throw validation_error("unknown event kind '" + e.kind + "'");
  }
  const fs::path path = root_ / "events" / (e.entry + ".log");
  std::error_code ec;
  std::string text = fs::exists(path, ec) ? read_file(path) : std::string();
  auto existing = parse_event_lines(text, e.entry);
  const std::uint64_t expected = existing.empty() ? 1 : existing.back().seq + 1;
  if (e.seq != expected) {
    throw state_error("event sequence " + std::to_string(e.seq) + " for " + e.entry + " refused; expected " +
                      std::to_string(expected));
  }
  text += event_to_json(e).dump() + "\n";
  atomic_write(path, text);
}

// --- config -------------------------------------------------------------------

std::optional<Json> Store::read_config(const std::string& name) const {
  if (!is_config_name(name)) throw usage_error("invalid config name '" + name + "'");
  const fs::path path = root_ / "config" / (name + ".json");
  std::error_code ec;
  if (!fs::exists(path, ec)) return std::nullopt;
  try {
    return Json::parse(read_file(path));
  } catch (const Json::exception& e) {
    throw config_error("config " + name + " is not valid JSON: " + e.what());
  }
}

void Store::write_config(const std::string& name, const Json& value) const {
  if (!is_config_name(name) || name == "store") throw usage_error("invalid config name '" + name + "'");
  atomic_write(root_ / "config" / (name + ".json"), value.dump(2) + "\n");
}

// --- archives -----------------------------------------------------------------

ArchiveSummary Store::export_archive(const std::string& tag, const ArchiveFilter& filter, Timestamp created) const {
  if (!is_tag(tag)) throw usage_error("invalid archive tag '" + tag + "'");
  const fs::path path = root_ / "archives" / (tag + ".bundle");
  std::error_code ec;
  if (fs::exists(path, ec)) throw state_error("archive tag '" + tag + "' already exists; archives are immutable");
  if (filter.from && filter.to && *filter.to < *filter.from) throw usage_error("archive range ends before it starts");

  Json payload = Json::object();
  payload["inventory"] = Json::object();
  payload["events"] = Json::object();
  payload["snapshots"] = Json::object();
  payload["changes"] = Json::object();
  Json manifest_entries = Json::array();
  std::set<std::string> all_snapshots, all_changes, missing;

  std::set<std::string> seen;
  for (const auto& id : filter.entries) {
    if (!seen.insert(id).second) continue;
    auto record = get_entry(id);
    if (!record) throw lookup_error("unknown entry '" + id + "'");
    std::set<std::string> snapshots, changes;
    Json events = Json::array();
    std::optional<std::string> current_before_range;
    for (const auto& e : read_events(id)) {
      if (filter.from && e.timestamp < *filter.from) {
        if (e.kind == "snapshot" && e.payload.contains("snapshot")) {
          current_before_range = e.payload["snapshot"].get<std::string>();
        }
        continue;
      }
      if (filter.to && e.timestamp > *filter.to) break;
      collect_refs(e.payload, snapshots, changes);
      events.push_back(event_to_json(e));
    }
    // The state the range starts from must be reconstructible too.
    if (current_before_range && !events.empty()) snapshots.insert(*current_before_range);
    for (const auto& s : snapshots) {
      if (!has_snapshot(s)) missing.insert(s);
    }
    for (const auto& c : changes) {
      if (!has_changeset(c)) missing.insert(c);
    }
    Json m = Json::object();
    m["id"] = id;
    m["first_seq"] = events.empty() ? Json(nullptr) : events.front()["seq"];
    m["last_seq"] = events.empty() ? Json(nullptr) : events.back()["seq"];
    m["snapshots"] = snapshots;
    m["changes"] = changes;
    manifest_entries.push_back(std::move(m));
    payload["inventory"][id] = *record;
    payload["events"][id] = std::move(events);
    all_snapshots.insert(snapshots.begin(), snapshots.end());
    all_changes.insert(changes.begin(), changes.end());
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw integrity_error("cannot export archive: missing records " + list);
  }
  for (const auto& s : all_snapshots) {
    get_snapshot(s);  // verify before archiving
    payload["snapshots"][s] = read_file(root_ / "snapshots" / (s + ".wbk.json"));
  }
  for (const auto& c : all_changes) payload["changes"][c] = changeset_to_json(get_changeset(c));

  Json bundle = Json::object();
  bundle["format"] = kArchiveFormat;
  bundle["tag"] = tag;
  bundle["created"] = format_timestamp(created);
  bundle["range"] = Json::object();
  bundle["range"]["from"] = filter.from ? Json(format_timestamp(*filter.from)) : Json(nullptr);
  bundle["range"]["to"] = filter.to ? Json(format_timestamp(*filter.to)) : Json(nullptr);
  Json manifest = Json::object();
  manifest["entries"] = std::move(manifest_entries);
  manifest["snapshots"] = all_snapshots;
  manifest["changes"] = all_changes;
  manifest["payload_digest"] = sha256_hex(payload.dump());
  bundle["manifest"] = manifest;
  bundle["payload"] = std::move(payload);
  atomic_write(path, bundle.dump(2) + "\n");
  return {tag, path, manifest};
}

ArchiveSummary Store::import_archive(const fs::path& bundle_path) const {
  Json bundle;
  try {
    bundle = Json::parse(read_file(bundle_path));
  } catch (const Json::exception& e) {
    throw integrity_error("archive " + bundle_path.string() + " is not valid JSON: " + e.what());
  }
  try {
    if (bundle.at("format") != kArchiveFormat) throw integrity_error("unrecognized archive format");
    const Json& manifest = bundle.at("manifest");
    const Json& payload = bundle.at("payload");
    if (sha256_hex(payload.dump()) != manifest.at("payload_digest").get<std::string>()) {
      throw integrity_error("archive payload does not match its manifest digest");
    }
    // Check everything before writing anything.
    std::vector<Workbook> snapshots;
    for (const auto& id : manifest.at("snapshots")) {
      const auto& text = payload.at("snapshots").at(id.get<std::string>()).get_ref<const std::string&>();
      if (sha256_hex(text) != id) throw integrity_error("archived snapshot " + id.get<std::string>() + " is corrupt");
      snapshots.push_back(parse_workbook(text));
    }
    std::vector<ChangeSet> changes;
    for (const auto& id : manifest.at("changes")) {
      changes.push_back(changeset_from_json(payload.at("changes").at(id.get<std::string>())));
      if (changes.back().id != id) throw integrity_error("archived change set " + id.get<std::string>() + " is corrupt");
    }
    std::vector<std::pair<std::string, std::vector<AuditEvent>>> logs;
    for (const auto& m : manifest.at("entries")) {
      const std::string id = m.at("id").get<std::string>();
      if (!is_entry_id(id)) throw integrity_error("archived entry id '" + id + "' is invalid");
      if (get_entry(id)) throw state_error("entry " + id + " already exists in this store");
      std::vector<AuditEvent> events;
      for (const auto& e : payload.at("events").at(id)) events.push_back(event_from_json(e));
      for (std::size_t i = 0; i < events.size(); ++i) {
        if (events[i].entry != id || (i > 0 && events[i].seq != events[i - 1].seq + 1)) {
          throw integrity_error("archived events for " + id + " are out of sequence");
        }
      }
      logs.emplace_back(id, std::move(events));
    }
    for (const auto& w : snapshots) put_snapshot(w);
    for (const auto& cs : changes) put_changeset(cs);
    for (const auto& [id, events] : logs) {
      std::string text;
      for (const auto& e : events) text += event_to_json(e).dump() + "\n";
      atomic_write(root_ / "events" / (id + ".log"), text);
      put_entry(payload.at("inventory").at(id));
    }
    return {bundle.at("tag").get<std::string>(), bundle_path, manifest};
  } catch (const Json::exception& e) {
    throw integrity_error("archive " + bundle_path.string() + " is malformed: " + e.what());
  }
}

}  // namespace scr
