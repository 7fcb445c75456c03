#include <doctest.h>

#include <thread>

#include <httplib.h>

#include "scr/api.hpp"
#include "support.hpp"
#include "tempdir.hpp"

using namespace scr;
using testsupport::sheet1;

namespace {

struct Fixture {
  testsupport::TempDir tmp;
  Store store = Store::init(tmp / "store");
  int minutes = 0;
  api::Api server{store, [this] { return parse_timestamp("2024-04-01T08:00:00Z") + std::chrono::minutes(minutes++); }};

  api::Response get(const std::string& path, std::map<std::string, std::string> query = {}) {
    return server.handle({"GET", path, std::move(query), "", "", ""});
  }
  api::Response post(const std::string& path, const std::string& actor, const Json& body, const std::string& key = "") {
    return server.handle({"POST", path, {}, actor, key, body.dump()});
  }

  Json workbook(const std::map<std::string, std::string>& cells) {
    return Json::parse(serialize_workbook(sheet1(cells)));
  }

  Json register_entry() {
    auto r = post("/entries", "alice",
                  {{"name", "budget"}, {"owner", "fin"}, {"classification", "Critical"},
                   {"workbook", workbook({{"A1", "1"}, {"A2", "2"}, {"A3", "=SUM(A1:A2)"}})}});
    REQUIRE(r.status == 201);
    return Json::parse(r.body);
  }

  Json checklist(const std::string& id) {
    auto t = Json::parse(get("/entries/" + id).body)["checklist"];
    Json c{{"kind", t["kind"]}, {"items", Json::array()}};
    for (const auto& item : t["items"]) c["items"].push_back({{"id", item["id"]}, {"status", "Pass"}});
    return c;
  }

  std::size_t audit_size(const std::string& id) { return Json::parse(get("/entries/" + id + "/audit").body).size(); }
};

Json error_of(const api::Response& r) { return Json::parse(r.body)["error"]; }

}  // namespace

TEST_CASE("empty inventory") {
  Fixture f;
  auto r = f.get("/inventory");
  CHECK(r.status == 200);
  CHECK(Json::parse(r.body) == Json::array());
}

TEST_CASE("registration and reads") {
  Fixture f;
  auto e = f.register_entry();
  CHECK(e["id"] == "E1");
  CHECK(e["state"] == "InDepthReviewPending");
  CHECK(e["registered_by"] == "alice");

  auto one = Json::parse(f.get("/entries/E1").body);
  CHECK(one["entry"] == e);
  CHECK(one["checklist"]["kind"] == "InDepth");

  auto inv = Json::parse(f.get("/inventory").body);
  REQUIRE(inv.size() == 1);
  CHECK(inv[0] == e);
  CHECK(Json::parse(f.get("/inventory", {{"offset", "1"}}).body).empty());
  CHECK(Json::parse(f.get("/inventory", {{"limit", "0"}}).body).empty());
  CHECK(f.get("/inventory", {{"limit", "x"}}).status == 400);

  auto metrics = Json::parse(f.get("/entries/E1/metrics").body);
  CHECK(metrics["snapshot"] == e["current"]);
  CHECK(metrics["size"]["formulas"] == 1);

  CHECK(f.audit_size("E1") == 3);
  auto tail = Json::parse(f.get("/entries/E1/audit", {{"from", "3"}}).body);
  REQUIRE(tail.size() == 1);
  CHECK(tail[0]["kind"] == "state-change");
}

TEST_CASE("error mapping") {
  Fixture f;
  f.register_entry();

  auto missing = f.get("/entries/E7");
  CHECK(missing.status == 404);
  CHECK(error_of(missing)["code"] == "lookup");
  CHECK(f.get("/nowhere").status == 404);

  auto anon = f.post("/entries", "", Json::object());
  CHECK(anon.status == 400);
  CHECK(error_of(anon)["code"] == "usage");

  auto garbage = f.server.handle({"POST", "/entries", {}, "alice", "", "{nope"});
  CHECK(garbage.status == 400);

  auto no_book = f.post("/entries", "alice", {{"name", "x"}, {"owner", "y"}});
  CHECK(no_book.status == 422);
  CHECK(error_of(no_book)["code"] == "validation");

  auto self = f.post("/entries/E1/reviews", "alice", {{"decision", "Approve"}, {"checklist", f.checklist("E1")}});
  CHECK(self.status == 403);
  CHECK(error_of(self)["code"] == "independence");
  CHECK_FALSE(error_of(self)["message"].get<std::string>().empty());

  auto wrong_state = f.post("/entries/E1/evaluations", "tom", Json::object());
  CHECK(wrong_state.status == 409);
  CHECK(error_of(wrong_state)["code"] == "state");

  CHECK(f.server.handle({"DELETE", "/entries/E1", {}, "alice", "", ""}).status == 400);
}

TEST_CASE("review loop over the API") {
  Fixture f;
  f.register_entry();
  auto ok = f.post("/entries/E1/reviews", "rita", {{"decision", "Approve"}, {"checklist", f.checklist("E1")}});
  REQUIRE(ok.status == 201);
  auto review = Json::parse(ok.body)["review"];
  CHECK(Json::parse(ok.body)["entry"]["state"] == "InUse");

  auto st = f.get("/entries/E1/statement/" + std::to_string(review["id"].get<int>()));
  CHECK(st.status == 200);
  CHECK(st.content_type.rfind("text/plain", 0) == 0);
  CHECK(st.body == review["statement"].get<std::string>());
  CHECK(f.get("/entries/E1/statement/99").status == 404);
  CHECK(f.get("/entries/E1/statement/abc").status == 404);

  auto sub = f.post("/entries/E1/changes", "alice",
                    {{"description", "rework"},
                     {"workbook", f.workbook({{"A1", "1"}, {"A2", "7"}, {"A3", "=A1+A2"}})}});
  REQUIRE(sub.status == 201);
  auto sj = Json::parse(sub.body);
  CHECK(sj["classification"] == "Structural");
  CHECK(sj["entry"]["state"] == "ChangeReviewPending");
  std::string cs = sj["change"]["id"];

  auto detail = Json::parse(f.get("/entries/E1/changes/" + cs).body);
  CHECK(detail["change"] == sj["change"]);
  REQUIRE(detail["ranked"].size() == 2);
  CHECK(detail["ranked"][0]["address"] == "S1!A3");
  CHECK(detail["ranked"][0]["score"].get<double>() >= detail["ranked"][1]["score"].get<double>());
  CHECK(f.get("/entries/E1/changes/" + std::string(64, 'a')).status == 404);

  auto checklist = f.checklist("E1");
  CHECK(checklist["kind"] == "Change");
  checklist["items"][0]["status"] = "Fail";
  auto decline = f.post("/entries/E1/reviews", "rita", {{"decision", "Decline"}, {"checklist", checklist}});
  REQUIRE(decline.status == 201);
  CHECK(Json::parse(decline.body)["entry"]["state"] == "ToolEvalPending");
  CHECK(Json::parse(f.get("/entries/E1").body)["checklist"].is_null());

  auto eval = f.post("/entries/E1/evaluations", "tom", Json::object());
  REQUIRE(eval.status == 201);
  auto ej = Json::parse(eval.body);
  CHECK(ej["report"]["recommendation"] == "Approve");
  CHECK(ej["entry"]["state"] == "InUse");
}

TEST_CASE("idempotency keys") {
  Fixture f;
  auto body = Json{{"name", "b"}, {"owner", "o"}, {"workbook", f.workbook({{"A1", "1"}})}};
  auto first = f.post("/entries", "alice", body, "k-1");
  auto again = f.post("/entries", "alice", body, "k-1");
  CHECK(first.status == 201);
  CHECK(again.status == first.status);
  CHECK(again.body == first.body);
  CHECK(Json::parse(f.get("/inventory").body).size() == 1);
  CHECK(f.audit_size("E1") == 3);

  auto review = Json{{"decision", "Approve"}, {"checklist", f.checklist("E1")}};
  auto r1 = f.post("/entries/E1/reviews", "rita", review, "k-2");
  auto r2 = f.post("/entries/E1/reviews", "rita", review, "k-2");
  CHECK(r1.body == r2.body);
  CHECK(f.audit_size("E1") == 5);

  // A refusal is final too: replaying it does not run the operation again.
  auto bad1 = f.post("/entries/E1/evaluations", "tom", Json::object(), "k-3");
  auto bad2 = f.post("/entries/E1/evaluations", "tom", Json::object(), "k-3");
  CHECK(bad1.status == 409);
  CHECK(bad2.body == bad1.body);

  body["name"] = "c";
  CHECK(f.post("/entries", "alice", body, "k-4").status == 201);
  CHECK(Json::parse(f.get("/inventory").body).size() == 2);
}

TEST_CASE("a held store lock answers 503 and is retryable") {
  Fixture f;
  auto body = Json{{"name", "b"}, {"owner", "o"}, {"workbook", f.workbook({{"A1", "1"}})}};
  {
    auto held = f.store.lock();
    auto busy = f.post("/entries", "alice", body, "k");
    CHECK(busy.status == 503);
    CHECK(error_of(busy)["code"] == "busy");
    CHECK(f.get("/inventory").status == 200);
  }
  CHECK(f.post("/entries", "alice", body, "k").status == 201);
}

TEST_CASE("HTTP server on a free port") {
  testsupport::TempDir tmp;
  api::Server server(Store::init(tmp / "store"));
  int port = server.bind("127.0.0.1", 0);
  REQUIRE(port > 0);
  std::thread t([&] { server.listen(); });
  server.wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  auto inv = client.Get("/inventory");
  REQUIRE(inv);
  CHECK(inv->status == 200);
  CHECK(Json::parse(inv->body) == Json::array());

  Json body{{"name", "b"}, {"owner", "o"}, {"workbook", Json::parse(serialize_workbook(sheet1({{"A1", "1"}})))}};
  httplib::Headers h{{"X-Actor", "alice"}, {"Idempotency-Key", "abc"}};
  auto created = client.Post("/entries", h, body.dump(), "application/json");
  REQUIRE(created);
  CHECK(created->status == 201);
  auto repeat = client.Post("/entries", h, body.dump(), "application/json");
  REQUIRE(repeat);
  CHECK(repeat->body == created->body);

  auto missing = client.Get("/entries/E9");
  REQUIRE(missing);
  CHECK(missing->status == 404);
  CHECK(Json::parse(missing->body)["error"]["code"] == "lookup");

  server.stop();
  t.join();
}
