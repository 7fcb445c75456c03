#include <doctest.h>

#include <fstream>
#include <sstream>

#include "scr/cli.hpp"
#include "scr/workflow.hpp"
#include "support.hpp"
#include "tempdir.hpp"

using namespace scr;
using testsupport::sheet1;

namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

struct Shell {
  testsupport::TempDir tmp;
  cli::Environment env;

  Shell() {
    env.store = (tmp / "store").string();
    env.actor = "alice";
  }

  Result run(std::vector<std::string> args) {
    std::ostringstream out, err;
    Result r;
    r.code = cli::run(args, out, err, env);
    r.out = out.str();
    r.err = err.str();
    return r;
  }

  std::string write(const std::string& name, const std::string& text) {
    auto p = tmp / name;
    std::ofstream(p) << text;
    return p.string();
  }

  std::string workbook(const std::string& name, const std::map<std::string, std::string>& cells) {
    return write(name, serialize_workbook(sheet1(cells)));
  }
};

const std::map<std::string, std::string> kBook = {{"A1", "1"}, {"A2", "2"}, {"A3", "=SUM(A1:A2)"}};

}  // namespace

TEST_CASE("analyze emits the metrics report") {
  Shell sh;
  auto f = sh.workbook("a.json", kBook);
  auto r = sh.run({"analyze", "--in", f, "--json"});
  REQUIRE(r.code == 0);
  CHECK(r.out == metrics_to_json(metrics_report(sheet1(kBook))).dump(2) + "\n");
  CHECK(r.err.empty());

  auto human = sh.run({"analyze", "--in", f});
  CHECK(human.code == 0);
  CHECK(human.out.find("formulas        1 (1 unique)") != std::string::npos);
}

TEST_CASE("diff of a workbook with itself is empty") {
  Shell sh;
  auto f = sh.workbook("a.json", kBook);
  auto r = sh.run({"--at", "2024-01-01T00:00:00Z", "diff", "--before", f, "--after", f, "--json"});
  REQUIRE(r.code == 0);
  auto cs = changeset_from_json(Json::parse(r.out));
  CHECK(cs.empty());
  CHECK(sh.run({"diff", "--before", f, "--after", f}).out == "no changes\n");
}

TEST_CASE("diff ranks deltas by risk") {
  Shell sh;
  auto a = sh.workbook("a.json", kBook);
  auto b = sh.workbook("b.json", {{"A1", "5"}, {"A2", "2"}, {"A3", "=A1+A2"}, {"B7", "x"}});
  auto r = sh.run({"--at", "2024-01-01T00:00:00Z", "diff", "--before", a, "--after", b, "--rank", "--json"});
  REQUIRE(r.code == 0);
  auto j = Json::parse(r.out);
  CHECK(j["classification"] == "Structural");
  REQUIRE(j["ranked"].size() == 3);
  CHECK(j["ranked"][0]["address"] == "S1!A3");
  CHECK(j["ranked"][2]["address"] == "S1!B7");
}

TEST_CASE("exit codes follow the error class") {
  Shell sh;
  auto f = sh.workbook("a.json", kBook);

  SUBCASE("usage") {
    CHECK(sh.run({}).code == 2);
    CHECK(sh.run({"frobnicate"}).code == 2);
    CHECK(sh.run({"analyze", "--bogus"}).code == 2);
    CHECK(sh.run({"--at", "yesterday", "analyze", "--in", f}).code == 2);
    CHECK(sh.run({"analyze"}).code == 2);
    CHECK(sh.run({"calibrate", "--values", f, "--percentiles", "1,2"}).code == 2);
    sh.env.store.reset();
    auto r = sh.run({"inventory"});
    CHECK(r.code == 2);
    CHECK(r.err.find("--store") != std::string::npos);
  }
  SUBCASE("help") {
    auto r = sh.run({"--help"});
    CHECK(r.code == 0);
    CHECK(r.out.find("register") != std::string::npos);
    CHECK(sh.run({"review", "--help"}).out.find("--decision") != std::string::npos);
  }
  SUBCASE("domain") {
    CHECK(sh.run({"init"}).code == 0);
    auto r = sh.run({"inventory", "--entry", "E9"});
    CHECK(r.code == 1);
    CHECK(r.err.find("error[lookup]") != std::string::npos);
    auto bad = sh.write("bad.json", R"({"name":"b","sheets":[{"name":"S1","cells":{"A1":"=SUM("}}]})");
    CHECK(sh.run({"analyze", "--in", bad}).code == 1);
  }
  SUBCASE("integrity") {
    CHECK(sh.run({"analyze", "--in", (sh.tmp / "missing.json").string()}).code == 3);
    CHECK(sh.run({"init"}).code == 0);
    CHECK(sh.run({"register", "--in", f, "--name", "b", "--owner", "o"}).code == 0);
    auto entry = Json::parse(sh.run({"inventory", "--entry", "E1", "--json"}).out);
    auto snap = sh.tmp / "store" / "snapshots" / (entry["current"].get<std::string>() + ".wbk.json");
    REQUIRE(std::filesystem::exists(snap));
    auto bytes = read_file(snap);
    bytes[bytes.size() / 2] ^= 0x01;
    std::filesystem::permissions(snap, std::filesystem::perms::owner_write, std::filesystem::perm_options::add);
    std::ofstream(snap, std::ios::binary | std::ios::trunc) << bytes;
    auto r = sh.run({"analyze", "--entry", "E1"});
    CHECK(r.code == 3);
    CHECK(r.err.find("error[integrity]") != std::string::npos);
  }
  SUBCASE("store not initialized") { CHECK(sh.run({"inventory"}).code == 1); }
}

TEST_CASE("review through the CLI") {
  Shell sh;
  auto f = sh.workbook("a.json", kBook);
  REQUIRE(sh.run({"init"}).code == 0);
  REQUIRE(sh.run({"--at", "2024-03-01T09:00:00Z", "register", "--in", f, "--name", "budget", "--owner", "fin"}).code ==
          0);

  auto fail = sh.run({"--actor", "rita", "review", "--entry", "E1", "--decision", "approve", "--pass-all", "--fail",
                      "input-restrictions"});
  CHECK(fail.code == 1);
  CHECK(fail.err.find("error[validation]") != std::string::npos);

  auto own = sh.run({"review", "--entry", "E1", "--decision", "approve", "--pass-all"});
  CHECK(own.code == 1);
  CHECK(own.err.find("error[independence]") != std::string::npos);

  auto ok = sh.run({"--actor", "rita", "--at", "2024-03-02T09:00:00Z", "--json", "review", "--entry", "E1",
                    "--decision", "approve", "--pass-all"});
  REQUIRE(ok.code == 0);
  auto j = Json::parse(ok.out);
  CHECK(j["entry"]["state"] == "InUse");
  auto id = j["review"]["id"].get<std::uint64_t>();

  auto st = sh.run({"statement", "--entry", "E1", "--review", std::to_string(id)});
  CHECK(st.code == 0);
  CHECK(st.out == j["review"]["statement"].get<std::string>());
  CHECK(st.out.find(std::string(kAttestationSentence)) != std::string::npos);
  CHECK(st.out.find("Date: 2024-03-02\n") != std::string::npos);
}

TEST_CASE("statement renders free-standing change lines") {
  Shell sh;
  auto r = sh.run({"--at", "2024-05-06T12:00:00Z", "statement", "--change", "S1!A1 edited", "--change",
                   "sheet added: Q2", "--reviewer", "Rita Reviewer"});
  CHECK(r.code == 0);
  CHECK(r.out == render_statement({"S1!A1 edited", "sheet added: Q2"}, "Rita Reviewer",
                                  parse_timestamp("2024-05-06T00:00:00Z")));
}

TEST_CASE("rules-check fails on violations") {
  Shell sh;
  auto f = sh.workbook("a.json", kBook);
  auto ok = sh.write("ok.json", R"([{"id":"r1","target":"A3","predicate":"between","args":[0,10]}])");
  auto bad = sh.write("bad.json", R"([{"id":"r1","target":"A3","predicate":"between","args":[5,10]}])");
  CHECK(sh.run({"rules-check", "--in", f, "--rules", ok}).code == 0);
  auto r = sh.run({"rules-check", "--in", f, "--rules", bad, "--json"});
  CHECK(r.code == 1);
  auto v = Json::parse(r.out);
  REQUIRE(v.size() == 1);
  CHECK(v[0]["rule"] == "r1");
}

TEST_CASE("calibrate from metric values and install the profile") {
  Shell sh;
  REQUIRE(sh.run({"init"}).code == 0);
  Json rows = Json::array();
  for (int i = 1; i <= 10; ++i) {
    Json row;
    for (const auto& m : kRatedMetrics) row[m] = i;
    rows.push_back(row);
  }
  auto f = sh.write("values.json", rows.dump());
  auto r = sh.run({"--json", "calibrate", "--values", f, "--save"});
  REQUIRE(r.code == 0);
  auto prof = profile_from_json(Json::parse(r.out));
  CHECK(prof.bands.at("max_fan_in") == Bands{7, 8, 9, 10});
  CHECK(Workflow(Store::open(sh.tmp / "store")).profile().bands.at("endpoints") == Bands{7, 8, 9, 10});

  auto one = sh.write("one.json", Json::array({rows[0]}).dump());
  auto w = sh.run({"calibrate", "--values", one});
  CHECK(w.code == 0);
  CHECK(w.err.find("warning:") != std::string::npos);
}

TEST_CASE("identical invocations give identical JSON") {
  auto script = [](Shell& sh) {
    auto a = sh.workbook("a.json", kBook);
    auto b = sh.workbook("b.json", {{"A1", "1"}, {"A2", "2"}, {"A3", "=A1+A2"}});
    std::string out;
    auto step = [&](std::vector<std::string> args) {
      auto r = sh.run(args);
      REQUIRE(r.code == 0);
      out += r.out;
    };
    step({"init"});
    step({"--json", "--at", "2024-01-01T00:00:00Z", "register", "--in", a, "--name", "n", "--owner", "o"});
    step({"--json", "--at", "2024-01-02T00:00:00Z", "--actor", "rita", "review", "--entry", "E1", "--decision",
          "approve", "--pass-all"});
    step({"--json", "--at", "2024-01-03T00:00:00Z", "submit", "--entry", "E1", "--in", b, "--description", "d"});
    step({"--json", "audit", "--entry", "E1"});
    step({"--json", "inventory"});
    return out;
  };
  Shell one, two;
  auto a = script(one);
  auto b = script(two);
  // Paths differ between the two temp dirs; everything else must not.
  auto strip = [](std::string s, const std::string& root) {
    for (auto p = s.find(root); p != std::string::npos; p = s.find(root)) s.erase(p, root.size());
    return s;
  };
  CHECK(strip(a, one.tmp.path().string()) == strip(b, two.tmp.path().string()));
}

TEST_CASE("replay and archive round trip") {
  Shell sh;
  auto a = sh.workbook("a.json", kBook);
  auto b = sh.workbook("b.json", {{"A1", "1"}, {"A2", "2"}, {"A3", "=A1+A2"}});
  REQUIRE(sh.run({"init"}).code == 0);
  REQUIRE(sh.run({"--at", "2024-01-01T00:00:00Z", "register", "--in", a, "--name", "n", "--owner", "o"}).code == 0);
  REQUIRE(sh.run({"--at", "2024-01-02T00:00:00Z", "--actor", "rita", "review", "--entry", "E1", "--decision",
                  "approve", "--pass-all"})
              .code == 0);
  REQUIRE(sh.run({"--at", "2024-01-03T00:00:00Z", "submit", "--entry", "E1", "--in", b}).code == 0);

  CHECK(sh.run({"replay", "--entry", "E1"}).out == read_file(b));
  CHECK(sh.run({"replay", "--entry", "E1", "--upto", "0"}).out == read_file(a));
  CHECK(sh.run({"replay", "--entry", "E1", "--until", "2024-01-02"}).out == read_file(a));
  CHECK(sh.run({"replay", "--entry", "E1", "--upto", "2"}).code == 1);

  auto exp = sh.run({"--at", "2024-02-01T00:00:00Z", "export-archive", "--tag", "2024-Q1", "--all"});
  REQUIRE(exp.code == 0);
  CHECK(sh.run({"export-archive", "--tag", "2024-Q1", "--all"}).code == 1);

  auto bundle = (sh.tmp / "store" / "archives" / "2024-Q1.bundle").string();
  REQUIRE(std::filesystem::exists(bundle));
  cli::Environment fresh{(sh.tmp / "fresh").string(), "auditor"};
  std::ostringstream out, err;
  REQUIRE(cli::run({"init"}, out, err, fresh) == 0);
  REQUIRE(cli::run({"import-archive", "--bundle", bundle}, out, err, fresh) == 0);
  std::ostringstream replayed;
  REQUIRE(cli::run({"replay", "--entry", "E1"}, replayed, err, fresh) == 0);
  CHECK(replayed.str() == read_file(b));

  auto audit = Json::parse(sh.run({"--json", "audit", "--entry", "E1", "--replay"}).out);
  CHECK(audit["matches_record"] == true);
  CHECK(audit["states"].back() == "ChangeReviewPending");
}

TEST_CASE("configure validates before writing") {
  Shell sh;
  REQUIRE(sh.run({"init"}).code == 0);
  auto bad = sh.write("p.json", R"({"bands":{"endpoints":[4,3,2,1]}})");
  CHECK(sh.run({"configure", "--profile", bad}).code == 1);
  CHECK_FALSE(Store::open(sh.tmp / "store").read_config("profile"));
  auto pol = sh.write("pol.json", R"({"redevelop_count":3,"restructure_floor":1})");
  CHECK(sh.run({"configure", "--policy", pol}).code == 0);
  CHECK(Workflow(Store::open(sh.tmp / "store")).policy().redevelop_count == 3);
  CHECK(sh.run({"configure"}).code == 2);
}
