#include <doctest.h>

#include <fstream>
#include <thread>

#include "scr/digest.hpp"
#include "scr/error.hpp"
#include "scr/store.hpp"
#include "support.hpp"
#include "tempdir.hpp"

using namespace scr;
namespace fs = std::filesystem;

namespace {

const Timestamp kT = parse_timestamp("2024-05-01T12:00:00Z");

AuditEvent event(const std::string& entry, std::uint64_t seq, Json payload = Json::object(),
                 std::string kind = "snapshot") {
  AuditEvent e;
  e.seq = seq;
  e.entry = entry;
  e.kind = std::move(kind);
  e.actor = "ops";
  e.timestamp = kT + std::chrono::hours(seq);
  e.payload = std::move(payload);
  return e;
}

void flip_byte(const fs::path& p, std::size_t offset) {
  std::string bytes = read_file(p);
  REQUIRE(offset < bytes.size());
  bytes[offset] ^= 0x01;
  std::ofstream(p, std::ios::binary | std::ios::trunc) << bytes;
}

}  // namespace

TEST_CASE("init and open") {
  testsupport::TempDir tmp;
  auto root = tmp / "store";
  Store::init(root);
  for (const char* d : {"inventory", "snapshots", "changes", "events", "archives", "config"}) {
    CHECK(fs::is_directory(root / d));
  }
  auto marker = read_file(root / "config" / "store.json");
  Store::init(root);
  CHECK(read_file(root / "config" / "store.json") == marker);
  CHECK_NOTHROW(Store::open(root));

  auto foreign = tmp / "foreign";
  fs::create_directories(foreign);
  std::ofstream(foreign / "notes.txt") << "hello";
  CHECK_THROWS_AS(Store::init(foreign), Error);
  CHECK_THROWS_AS(Store::open(foreign), Error);
  CHECK_NOTHROW(Store::init(tmp / "nested" / "fresh"));
}

TEST_CASE("snapshots are content addressed and verified") {
  testsupport::TempDir tmp;
  auto store = Store::init(tmp / "s");
  auto w = testsupport::book({{"S1", {{"A1", "1"}, {"B2", "=A1*2"}}}, {"Other", {{"C3", "'007"}}}});
  auto id = store.put_snapshot(w);
  CHECK(id == snapshot_id(w));
  CHECK(store.put_snapshot(w) == id);
  std::size_t files = 0;
  for (const auto& f : fs::directory_iterator(tmp / "s" / "snapshots")) {
    (void)f;
    ++files;
  }
  CHECK(files == 1);
  CHECK(serialize_workbook(store.get_snapshot(id)) == serialize_workbook(w));
  CHECK_THROWS_AS(store.get_snapshot(std::string(64, 'a')), Error);
  CHECK_THROWS_AS(store.get_snapshot("../../etc/passwd"), Error);

  // Every single-byte corruption is caught.
  const auto path = tmp / "s" / "snapshots" / (id + ".wbk.json");
  const std::string original = read_file(path);
  for (std::size_t i = 0; i < original.size(); ++i) {
    flip_byte(path, i);
    try {
      store.get_snapshot(id);
      FAIL("corruption at byte " << i << " went unnoticed");
    } catch (const Error& e) {
      CHECK(e.error_class() == ErrorClass::Integrity);
    }
    flip_byte(path, i);
  }
  CHECK_NOTHROW(store.get_snapshot(id));
}

TEST_CASE("change sets round-trip and are verified") {
  testsupport::TempDir tmp;
  auto store = Store::init(tmp / "s");
  auto b = testsupport::sheet1({{"A1", "1"}});
  auto a = testsupport::sheet1({{"A1", "=2"}, {"A2", "x"}});
  auto cs = diff(b, a, {"amy", kT, "demo", {}});
  store.put_changeset(cs);
  CHECK(changeset_to_json(store.get_changeset(cs.id)) == changeset_to_json(cs));
  const auto path = tmp / "s" / "changes" / (cs.id + ".cs.json");
  const auto size = read_file(path).size();
  for (std::size_t i = 0; i < size; i += 7) {
    flip_byte(path, i);
    CHECK_THROWS_AS(store.get_changeset(cs.id), Error);
    flip_byte(path, i);
  }
  auto forged = cs;
  forged.author = "eve";
  CHECK_THROWS_AS(store.put_changeset(forged), Error);
}

TEST_CASE("event logs enforce sequencing") {
  testsupport::TempDir tmp;
  auto store = Store::init(tmp / "s");
  CHECK(store.read_events("E1").empty());
  store.append_event(event("E1", 1));
  store.append_event(event("E1", 2));
  CHECK_THROWS_AS(store.append_event(event("E1", 4)), Error);
  CHECK_THROWS_AS(store.append_event(event("E1", 2)), Error);
  CHECK_THROWS_AS(store.append_event(event("E2", 2)), Error);
  CHECK_THROWS_AS(store.append_event(event("E1", 3, {}, "bogus")), Error);
  store.append_event(event("E1", 3, {{"x", 1}}));
  auto all = store.read_events("E1");
  REQUIRE(all.size() == 3);
  CHECK(all[2].payload["x"] == 1);
  CHECK(store.read_events("E1", {2, 2}).size() == 1);
  CHECK(store.read_events("E1", {5, 9}).empty());
  CHECK(store.last_sequence("E1") == 3);

  std::ofstream(tmp / "s" / "events" / "E1.log", std::ios::app) << "{not json\n";
  CHECK_THROWS_AS(store.read_events("E1"), Error);
}

TEST_CASE("readers never see a partial log") {
  testsupport::TempDir tmp;
  auto store = Store::init(tmp / "s");
  std::atomic<bool> done{false};
  std::atomic<int> bad{0};
  std::thread reader([&] {
    while (!done) {
      try {
        auto events = store.read_events("E1");
        for (std::size_t i = 0; i < events.size(); ++i) {
          if (events[i].seq != i + 1) ++bad;
        }
      } catch (...) {
        ++bad;
      }
    }
  });
  for (std::uint64_t i = 1; i <= 150; ++i) store.append_event(event("E1", i, {{"pad", std::string(200, 'x')}}));
  done = true;
  reader.join();
  CHECK(bad == 0);
}

TEST_CASE("inventory records") {
  testsupport::TempDir tmp;
  auto store = Store::init(tmp / "s");
  CHECK(store.next_entry_id() == "E1");
  for (int i = 1; i <= 11; ++i) store.put_entry({{"id", "E" + std::to_string(i)}, {"n", i}});
  CHECK(store.next_entry_id() == "E12");
  auto all = store.list_entries();
  REQUIRE(all.size() == 11);
  CHECK(all[1]["id"] == "E2");
  CHECK(all[10]["id"] == "E11");
  CHECK_FALSE(store.get_entry("E99"));
  CHECK_FALSE(store.get_entry("../x"));
  CHECK_THROWS_AS(store.put_entry({{"id", "bad"}}), Error);
}

TEST_CASE("write lock") {
  testsupport::TempDir tmp;
  auto store = Store::init(tmp / "s");
  {
    auto held = store.lock();
    CHECK(fs::exists(tmp / "s" / "lock"));
    try {
      store.lock();
      FAIL("second lock succeeded");
    } catch (const Error& e) {
      CHECK(e.code() == "busy");
      CHECK(e.error_class() == ErrorClass::Integrity);
    }
  }
  CHECK_FALSE(fs::exists(tmp / "s" / "lock"));

  // A lock left by a process that no longer exists is broken.
  std::ofstream(tmp / "s" / "lock") << R"({"pid": 999999999, "acquired": "2024-01-01T00:00:00Z"})";
  CHECK_NOTHROW(store.lock());
  // So is one older than the stale limit, even from a live process.
  std::ofstream(tmp / "s" / "lock") << R"({"pid": 1, "acquired": "2000-01-01T00:00:00Z"})";
  CHECK_NOTHROW(store.lock());
}

TEST_CASE("config documents") {
  testsupport::TempDir tmp;
  auto store = Store::init(tmp / "s");
  CHECK_FALSE(store.read_config("profile"));
  store.write_config("profile", {{"bands", Json::object()}});
  CHECK(store.read_config("profile")->contains("bands"));
  CHECK_THROWS_AS(store.write_config("../evil", {}), Error);
  CHECK_THROWS_AS(store.write_config("store", {}), Error);
}

TEST_CASE("archives") {
  testsupport::TempDir tmp;
  auto src = Store::init(tmp / "src");
  auto w1 = testsupport::sheet1({{"A1", "1"}});
  auto w2 = testsupport::sheet1({{"A1", "2"}});
  auto w3 = testsupport::sheet1({{"A1", "3"}});
  auto cs = diff(w1, w2, {"amy", kT, "bump", {}});
  src.put_snapshot(w1);
  src.put_snapshot(w2);
  src.put_snapshot(w3);
  src.put_changeset(cs);
  src.put_entry({{"id", "E1"}, {"name", "book"}});
  src.append_event(event("E1", 1, {{"name", "book"}}, "registered"));
  src.append_event(event("E1", 2, {{"snapshot", cs.base}}));
  src.append_event(event("E1", 3, {{"change", cs.id}, {"base", cs.base}, {"result", cs.result}}, "change-submitted"));
  src.append_event(event("E1", 4, {{"snapshot", cs.result}}));
  src.append_event(event("E1", 5, {{"snapshot", snapshot_id(w3)}}));

  SUBCASE("full history round-trips through a second store") {
    auto summary = src.export_archive("2024-Q2", {{"E1"}, std::nullopt, std::nullopt}, kT);
    CHECK(fs::exists(tmp / "src" / "archives" / "2024-Q2.bundle"));
    CHECK(summary.manifest["snapshots"].size() == 3);
    CHECK(summary.manifest["changes"].size() == 1);
    CHECK_THROWS_AS(src.export_archive("2024-Q2", {{"E1"}, std::nullopt, std::nullopt}, kT), Error);

    auto dst = Store::init(tmp / "dst");
    dst.import_archive(summary.path);
    auto events = dst.read_events("E1");
    REQUIRE(events.size() == 5);
    CHECK(events.back().payload["snapshot"] == snapshot_id(w3));
    CHECK(serialize_workbook(dst.get_snapshot(snapshot_id(w3))) == serialize_workbook(w3));
    auto replayed = replay(dst.get_snapshot(cs.base), {dst.get_changeset(cs.id)}, std::size_t{1});
    CHECK(snapshot_id(replayed) == cs.result);
    CHECK(*dst.get_entry("E1") == *src.get_entry("E1"));
    CHECK_THROWS_AS(dst.import_archive(summary.path), Error);  // entry exists
  }
  SUBCASE("time window keeps the starting snapshot") {
    ArchiveFilter f{{"E1"}, kT + std::chrono::hours(3), kT + std::chrono::hours(4)};
    auto summary = src.export_archive("window", f, kT);
    CHECK(summary.manifest["entries"][0]["first_seq"] == 3);
    CHECK(summary.manifest["entries"][0]["last_seq"] == 4);
    CHECK(summary.manifest["snapshots"].size() == 2);
  }
  SUBCASE("empty filter gives an empty valid bundle") {
    auto summary = src.export_archive("nothing", {}, kT);
    CHECK(summary.manifest["entries"].empty());
    auto dst = Store::init(tmp / "dst");
    CHECK_NOTHROW(dst.import_archive(summary.path));
  }
  SUBCASE("tampered bundle is rejected") {
    auto summary = src.export_archive("t", {{"E1"}, std::nullopt, std::nullopt}, kT);
    auto bundle = Json::parse(read_file(summary.path));
    auto& snap = bundle["payload"]["snapshots"][snapshot_id(w3)];
    auto text = snap.get<std::string>();
    text[text.find("\"3\"") + 1] = '4';
    snap = text;
    std::ofstream(summary.path, std::ios::trunc) << bundle.dump(2);
    auto dst = Store::init(tmp / "dst");
    CHECK_THROWS_AS(dst.import_archive(summary.path), Error);
    CHECK_FALSE(dst.get_entry("E1"));
  }
  SUBCASE("dangling references fail the export") {
    fs::remove(tmp / "src" / "changes" / (cs.id + ".cs.json"));
    try {
      src.export_archive("broken", {{"E1"}, std::nullopt, std::nullopt}, kT);
      FAIL("export succeeded");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find(cs.id) != std::string::npos);
    }
  }
  SUBCASE("bad tags and unknown entries") {
    CHECK_THROWS_AS(src.export_archive("../x", {}, kT), Error);
    CHECK_THROWS_AS(src.export_archive("ok", {{"E7"}, std::nullopt, std::nullopt}, kT), Error);
  }
}
