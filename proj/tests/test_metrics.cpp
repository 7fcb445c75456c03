#include "doctest.h"
#include "oracles.hpp"
#include "scr/metrics.hpp"
#include "support.hpp"

using namespace scr;
using testsupport::sheet1;

namespace {

CellAddress at(const char* a) { return parse_address(a, "S1"); }

const std::map<std::string, std::string> kFourCells{{"A1", "1"}, {"A2", "2"}, {"A3", "=SUM(A1:A2)"}, {"B3", "=A3*2"}};

}  // namespace

TEST_CASE("size_metrics") {
  auto empty = testsupport::book({{"S1", {}}, {"S2", {}}});
  CHECK(size_metrics(empty) == SizeMetrics{0, 0, 0, 2, 0, 0, 0});

  CHECK(size_metrics(sheet1(kFourCells)) == SizeMetrics{4, 2, 3, 1, 2, 2, 2});

  std::map<std::string, std::string> filled;
  for (int r = 2; r <= 11; ++r) filled["B" + std::to_string(r)] = "=A" + std::to_string(r - 1) + "+1";
  auto m = size_metrics(sheet1(filled));
  CHECK(m.formulas == 10);
  CHECK(m.unique_formulas == 1);

  auto labels = size_metrics(sheet1({{"A1", "Total"}, {"A2", "TRUE"}, {"A3", "4"}}));
  CHECK(labels.data_elements == 2);
  CHECK(labels.data_elements + labels.formulas == labels.cells - 1);
}

TEST_CASE("detect_blocks") {
  auto one = detect_blocks(sheet1({{"A1", "1"}}));
  REQUIRE(one.size() == 1);
  CHECK(one[0].orientation == Orientation::Square);

  std::map<std::string, std::string> two_cols;
  for (int r = 1; r <= 5; ++r) {
    two_cols["A" + std::to_string(r)] = "1";
    two_cols["B" + std::to_string(r)] = "2";
  }
  auto tall = detect_blocks(sheet1(two_cols));
  REQUIRE(tall.size() == 1);
  CHECK(tall[0].orientation == Orientation::Vertical);
  CHECK(tall[0].members.size() == 10);

  CHECK(detect_blocks(sheet1({{"A1", "1"}, {"C1", "2"}})).size() == 2);
  CHECK(detect_blocks(sheet1({{"A1", "1"}, {"B2", "2"}})).size() == 2);  // diagonal only
  auto wide = detect_blocks(sheet1({{"A1", "1"}, {"B1", "2"}, {"C1", "3"}}));
  CHECK(wide[0].orientation == Orientation::Horizontal);
}

TEST_CASE("coupling_metrics") {
  auto w = sheet1({{"A1", "1"}, {"A2", "2"}, {"A3", "=SUM(A1:A2)"}});
  auto c = coupling_metrics(w, build_graph(w));
  CHECK(c.fan_in.at(at("A3")) == 2);
  CHECK(c.fan_out.at(at("A1")) == 1);

  auto none = sheet1({{"A1", "1"}});
  auto cn = coupling_metrics(none, build_graph(none));
  CHECK(cn.fan_in.empty());
  CHECK(cn.cross_sheet_refs == 0);

  auto xs = testsupport::book({{"S1", {{"A1", "=S2!B1+S2!B2"}}}, {"S2", {{"B1", "1"}}}});
  CHECK(coupling_metrics(xs, build_graph(xs)).cross_sheet_refs == 2);
}

TEST_CASE("inconsistent_cells") {
  auto check = [](std::map<std::string, std::string> cells) {
    auto w = sheet1(cells);
    return inconsistent_cells(w, detect_blocks(w));
  };
  // Row 2 holds copies of "=<col>1*2".
  CHECK(check({{"A1", "1"}, {"B1", "2"}, {"C1", "3"}, {"A2", "=A1*2"}, {"B2", "=B1*2"}, {"C2", "=C1*2"}}).empty());
  CHECK(check({{"A1", "1"}, {"B1", "2"}, {"C1", "3"}, {"A2", "=A1*2"}, {"B2", "=B1*2"}, {"C2", "=C1*3"}}) ==
        std::set<CellAddress>{at("C2")});
  CHECK(check({{"A1", "1"}, {"B1", "2"}, {"C1", "3"}, {"A2", "=A1*2"}, {"B2", "7"}, {"C2", "=C1*2"}}) ==
        std::set<CellAddress>{at("B2")});
  // Labels between formulas are fine.
  CHECK(check({{"A1", "1"}, {"B1", "2"}, {"C1", "3"}, {"A2", "=A1*2"}, {"B2", "x"}, {"C2", "=C1*2"}}).empty());
  // Tie: the first-seen form wins, so the later one is flagged.
  CHECK(check({{"A1", "=1"}, {"B1", "=2"}}) == std::set<CellAddress>{at("B1")});
}

TEST_CASE("computation_endpoints") {
  auto w = sheet1(kFourCells);
  CHECK(computation_endpoints(w, build_graph(w)) == std::set<CellAddress>{at("B3")});
  auto none = sheet1({{"A1", "1"}});
  CHECK(computation_endpoints(none, build_graph(none)).empty());
  auto two = sheet1({{"A1", "=1"}, {"C3", "=2"}});
  CHECK(computation_endpoints(two, build_graph(two)).size() == 2);
}

TEST_CASE("metrics_report") {
  auto empty = metrics_report(Workbook{});
  CHECK(empty.blocks.empty());
  CHECK(empty.endpoints.empty());
  CHECK(empty.long_formulas.empty());

  auto w = sheet1(kFourCells);
  auto r = metrics_report(w);
  CHECK(r.size == size_metrics(w));
  CHECK(r.endpoints == computation_endpoints(w, build_graph(w)));
  CHECK(r.blocks.size() == detect_blocks(w).size());
  CHECK(r.snapshot == snapshot_id(w));

  AnalysisConfig cfg;
  cfg.long_formula_threshold = 3;
  auto smelly = metrics_report(sheet1({{"A1", "=1+2*3"}}), cfg);
  REQUIRE(smelly.long_formulas.size() == 1);
  CHECK(smelly.long_formulas[0].value == 5);
  CHECK(smelly.magic_constants.size() == 1);
  CHECK(smelly.magic_constants[0].value == 2);  // 2 and 3; 1 is whitelisted

  auto j = metrics_to_json(r);
  CHECK(j["size"]["unique_formulas"] == 2);
  CHECK(j["endpoints"] == Json::array({"S1!B3"}));
  CHECK(j["blocks"][0]["orientation"] == "Vertical");
}

TEST_CASE("metric invariants and brute-force oracle equivalence") {
  testsupport::Rng rng(1234);
  for (int iter = 0; iter < 150; ++iter) {
    auto w = testsupport::random_workbook(rng, 100);
    auto g = build_graph(w);
    auto size = size_metrics(w);
    auto naive = oracle::size(w);
    REQUIRE(size.cells == naive.cells);
    REQUIRE(size.columns == naive.columns);
    REQUIRE(size.rows == naive.rows);
    REQUIRE(size.formulas == naive.formulas);
    REQUIRE(size.unique_formulas == naive.unique_formulas);
    REQUIRE(size.data_elements == naive.data_elements);
    REQUIRE(size.unique_formulas <= size.formulas);

    auto blocks = detect_blocks(w);
    std::vector<std::set<CellAddress>> members;
    std::size_t total = 0;
    for (const auto& b : blocks) {
      members.push_back(b.members);
      total += b.members.size();
    }
    std::sort(members.begin(), members.end());
    REQUIRE(members == oracle::blocks(w));
    REQUIRE(total == size.cells);

    REQUIRE(inconsistent_cells(w, blocks) == oracle::inconsistent(w));
    auto ends = computation_endpoints(w, g);
    REQUIRE(ends == oracle::endpoints(w));

    auto coupling = coupling_metrics(w, g);
    std::size_t in = 0, out = 0;
    for (const auto& [_, n] : coupling.fan_in) in += n;
    for (const auto& [_, n] : coupling.fan_out) out += n;
    REQUIRE(in == out);
    std::set<CellAddress> referenced_formulas;
    for (const auto& [a, n] : coupling.fan_in)
      if (coupling.fan_out.contains(a)) referenced_formulas.insert(a);
    REQUIRE(ends.size() + referenced_formulas.size() == coupling.fan_in.size());
  }
}
