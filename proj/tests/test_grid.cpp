#include "doctest.h"
#include "scr/error.hpp"
#include "scr/grid.hpp"
#include "scr/digest.hpp"
#include "support.hpp"

using namespace scr;

namespace {
const CellAddress kAt{"S1", 1, 1};
}

TEST_CASE("classify_cell") {
  auto n = classify_cell("3.5", kAt);
  CHECK(n.kind == CellKind::Number);
  CHECK(n.number() == 3.5);
  auto f = classify_cell("=A1+1", {"S1", 1, 2});
  CHECK(f.kind == CellKind::Formula);
  CHECK(f.ast != nullptr);
  auto t = classify_cell("Total", kAt);
  CHECK(t.kind == CellKind::Text);
  CHECK(t.text() == "Total");
  CHECK(classify_cell("true", kAt).kind == CellKind::Boolean);
  CHECK(classify_cell("FALSE", kAt).boolean() == false);
  CHECK(classify_cell("", kAt).kind == CellKind::Empty);
  auto forced = classify_cell("'123", kAt);
  CHECK(forced.kind == CellKind::Text);
  CHECK(forced.text() == "123");
  CHECK(classify_cell("inf", kAt).kind == CellKind::Text);
  CHECK(classify_cell("nan", kAt).kind == CellKind::Text);
  CHECK(classify_cell("1e400", kAt).kind == CellKind::Text);
  CHECK_THROWS_AS(classify_cell("=1+", kAt), ParseError);
}

TEST_CASE("parse_workbook") {
  auto w = parse_workbook(R"({"name":"b","sheets":[{"name":"S1","cells":{"A1":"1","A2":"=A1"}}]})");
  CHECK(w.cell_count() == 2);
  CHECK(w.at({"S1", 1, 2}).is_formula());
  CHECK(w.at({"S9", 1, 1}).is_empty());

  CHECK(parse_workbook(R"({"name":"b","sheets":[]})").sheets().empty());

  CHECK_THROWS_WITH_AS(parse_workbook(R"({"name":"b","sheets":[{"name":"S1"},{"name":"S1"}]})"),
                       doctest::Contains("duplicate sheet name"), Error);
  CHECK_THROWS_WITH_AS(parse_workbook(R"({"name":"b","sheets":[{"name":"S1","cells":{"A1":"1","A1":"2"}}]})"),
                       doctest::Contains("duplicate key"), Error);
  CHECK_THROWS_WITH_AS(parse_workbook(R"({"name":"b","sheets":[{"name":"S1","cells":{"A1":"1","a1":"2"}}]})"),
                       doctest::Contains("duplicate cell address"), Error);
  CHECK_THROWS_WITH_AS(parse_workbook(R"({"name":"b","sheets":[{"name":"S1","cells":{"A1":"=1+"}}]})"),
                       doctest::Contains("sheets[0].cells[\"A1\"]"), Error);
  CHECK_THROWS_WITH_AS(parse_workbook(R"({"name":"b","sheets":[{"name":"S1","cells":{"XFE1":"1"}}]})"),
                       doctest::Contains("XFE1"), Error);
  CHECK_THROWS_AS(parse_workbook(R"({"name":"b","sheets":[{"name":"S1","cells":{"A1":1}}]})"), Error);
  CHECK_THROWS_AS(parse_workbook(R"({"name":"b","sheets":[{"name":"S1","cells":{"S1!A1":"1"}}]})"), Error);
  CHECK_THROWS_AS(parse_workbook(R"({"name":"b"})"), Error);
  CHECK_THROWS_AS(parse_workbook("not json"), Error);
}

TEST_CASE("serialize_workbook is canonical") {
  CHECK(serialize_workbook(Workbook{}) == kEmptyWorkbookDocument);
  auto a = parse_workbook(R"({"name":"b","sheets":[{"name":"S1","cells":{"B1":"2","A2":"x","A1":"1.50"}}]})");
  auto b = parse_workbook(R"({"name":"b","sheets":[{"name":"S1","cells":{"A1":"1.5","A2":"x","B1":"2"}}]})");
  CHECK(serialize_workbook(a) == serialize_workbook(b));
  CHECK(serialize_workbook(a) ==
        "{\n  \"name\": \"b\",\n  \"sheets\": [\n    {\n      \"name\": \"S1\",\n      \"cells\": {\n"
        "        \"A1\": \"1.5\",\n        \"B1\": \"2\",\n        \"A2\": \"x\"\n      }\n    }\n  ]\n}\n");
  auto texty = parse_workbook(R"({"name":"b","sheets":[{"name":"S1","cells":{"A1":"'12","A2":"'=x","A3":"'true","A4":"= a1 + 1"}}]})");
  auto text = serialize_workbook(texty);
  CHECK(text.find("\"'12\"") != std::string::npos);
  CHECK(text.find("\"'=x\"") != std::string::npos);
  CHECK(text.find("\"'true\"") != std::string::npos);
  CHECK(text.find("\"=A1+1\"") != std::string::npos);
}

TEST_CASE("round-trip law on random workbooks") {
  testsupport::Rng rng(3);
  for (int i = 0; i < 300; ++i) {
    auto w = testsupport::random_workbook(rng, 40);
    auto once = serialize_workbook(w);
    auto twice = serialize_workbook(parse_workbook(once));
    REQUIRE(once == twice);
    REQUIRE(snapshot_id(w) == snapshot_id(parse_workbook(once)));
    for (const auto& s : w.sheets())
      for (const auto& [pos, c] : s.cells()) REQUIRE_FALSE(c.is_empty());
  }
}

TEST_CASE("snapshot_id") {
  auto w = testsupport::sheet1({{"A1", "1"}, {"A2", "=A1"}});
  auto w2 = testsupport::sheet1({{"A2", "=A1"}, {"A1", "1"}});
  auto w3 = testsupport::sheet1({{"A1", "1"}, {"A2", "=A1+0"}});
  CHECK(snapshot_id(w) == snapshot_id(w2));
  CHECK(snapshot_id(w) != snapshot_id(w3));
  CHECK(serialize_workbook(w) != serialize_workbook(w3));
  CHECK(snapshot_id(w).size() == 64);
  // Digest of the documented empty constant.
  CHECK(snapshot_id(Workbook{}) == sha256_hex(kEmptyWorkbookDocument));
}
