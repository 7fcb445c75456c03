#include "scr/risk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "scr/error.hpp"
#include "scr/formula.hpp"

namespace scr {

namespace {

constexpr std::string_view kRecommendations[] = {"Approve", "Restructure", "Redevelop"};

std::string fmt(double v) { return format_number(v); }

}  // namespace

ThresholdProfile default_profile() {
  ThresholdProfile p;
  p.bands["long_formula"] = {10, 15, 20, 30};
  p.bands["magic_constants"] = {0, 1, 2, 4};
  p.bands["max_fan_in"] = {10, 20, 50, 100};
  p.bands["inconsistent_cells"] = {0, 2, 5, 10};
  p.bands["endpoints"] = {5, 10, 20, 50};
  p.bands["cross_sheet_refs"] = {10, 25, 50, 100};
  p.bands["unique_formula_ratio"] = {0.3, 0.5, 0.7, 0.9};
  return p;
}

namespace {

void check_bands(const std::string& metric, const Bands& b) {
  for (double x : b) {
    if (!std::isfinite(x)) throw config_error("bands for " + metric + " must be finite");
  }
  if (b[0] < 0) throw config_error("bands for " + metric + " must be non-negative");
  for (std::size_t i = 1; i < b.size(); ++i) {
    if (!(b[i - 1] < b[i])) throw config_error("bands for " + metric + " must be strictly ascending");
  }
}

}  // namespace

void validate_profile(const ThresholdProfile& p) {
  for (const auto& m : kRatedMetrics) {
    auto it = p.bands.find(m);
    if (it == p.bands.end()) throw config_error("threshold profile has no bands for " + m);
    check_bands(m, it->second);
  }
}

ThresholdProfile profile_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("bands") || !j["bands"].is_object()) {
    throw config_error("threshold profile must be an object with a \"bands\" object");
  }
  ThresholdProfile p;
  for (const auto& [metric, arr] : j["bands"].items()) {
    if (std::find(kRatedMetrics.begin(), kRatedMetrics.end(), metric) == kRatedMetrics.end()) {
      throw config_error("unknown metric in threshold profile: " + metric);
    }
    if (!arr.is_array() || arr.size() != 4 ||
        !std::all_of(arr.begin(), arr.end(), [](const Json& x) { return x.is_number(); })) {
      throw config_error("bands for " + metric + " must be four numbers");
    }
    Bands b;
    for (std::size_t i = 0; i < 4; ++i) b[i] = arr[i].get<double>();
    p.bands[metric] = b;
  }
  validate_profile(p);
  return p;
}

Json profile_to_json(const ThresholdProfile& p) {
  Json bands = Json::object();
  for (const auto& m : kRatedMetrics) {
    auto it = p.bands.find(m);
    if (it != p.bands.end()) bands[m] = it->second;
  }
  Json j = Json::object();
  j["bands"] = std::move(bands);
  return j;
}

int rate(double value, const Bands& bands) {
  check_bands("metric", bands);
  for (std::size_t i = 0; i < bands.size(); ++i) {
    if (value <= bands[i]) return 5 - static_cast<int>(i);
  }
  return 1;
}

MetricValues metric_values(const MetricsReport& r) {
  MetricValues v;
  v["long_formula"] = static_cast<double>(r.max_formula_length);
  v["magic_constants"] = static_cast<double>(r.max_magic_constants);
  v["max_fan_in"] = static_cast<double>(r.max_fan_in);
  v["inconsistent_cells"] = static_cast<double>(r.inconsistent_cells.size());
  v["endpoints"] = static_cast<double>(r.endpoints.size());
  v["cross_sheet_refs"] = static_cast<double>(r.cross_sheet_refs);
  v["unique_formula_ratio"] = r.size.formulas < kMinFormulasForRatio ? 0.0
                                                                   : static_cast<double>(r.size.unique_formulas) /
                                                                         static_cast<double>(r.size.formulas);
  return v;
}

std::string_view to_string(Recommendation r) { return kRecommendations[static_cast<int>(r)]; }

Recommendation recommendation_from_string(std::string_view s) {
  for (int i = 0; i < 3; ++i) {
    if (kRecommendations[i] == s) return static_cast<Recommendation>(i);
  }
  throw validation_error("unknown recommendation '" + std::string(s) + "'");
}

Recommendation recommend(const std::map<std::string, int>& ratings, const Policy& policy) {
  std::size_t ones = 0;
  bool low = false;
  for (const auto& [m, r] : ratings) {
    if (r <= 1) ++ones;
    if (r <= policy.restructure_floor) low = true;
  }
  if (policy.redevelop_count > 0 && ones >= policy.redevelop_count) return Recommendation::Redevelop;
  if (low) return Recommendation::Restructure;
  return Recommendation::Approve;
}

EvaluationReport evaluate_workbook(const MetricsReport& report, const ThresholdProfile& profile,
                                   const Policy& policy) {
  validate_profile(profile);
  EvaluationReport e;
  e.snapshot = report.snapshot;
  e.values = metric_values(report);
  for (const auto& m : kRatedMetrics) e.ratings[m] = rate(e.values[m], profile.bands.at(m));

  auto add = [&](const std::string& metric, const CellAddress& at, std::string text) {
    e.issues.push_back({metric, render_address(at), std::move(text)});
  };
  for (const auto& f : report.long_formulas) {
    add("long_formula", f.address,
        "formula has " + std::to_string(f.value) + " nodes (threshold " +
            std::to_string(report.long_formula_threshold) + ")");
  }
  for (const auto& f : report.magic_constants) {
    add("magic_constants", f.address, std::to_string(f.value) + " hard-coded constant(s) in formula");
  }
  const Bands& fan_bands = profile.bands.at("max_fan_in");
  for (const auto& f : report.fan_in) {
    if (rate(static_cast<double>(f.value), fan_bands) < 5) {
      add("max_fan_in", f.address, "formula reads " + std::to_string(f.value) + " cells");
    }
  }
  for (const auto& a : report.inconsistent_cells) {
    add("inconsistent_cells", a, "cell breaks the pattern of its row or column");
  }
  if (e.ratings["endpoints"] < 5) {
    for (const auto& a : report.endpoints) add("endpoints", a, "computation endpoint");
  }
  for (const auto& f : report.cross_sheet) {
    add("cross_sheet_refs", f.address, "formula has " + std::to_string(f.value) + " cross-sheet reference(s)");
  }
  if (e.ratings["unique_formula_ratio"] < 5) {
    for (const auto& b : report.blocks) {
      e.issues.push_back({"unique_formula_ratio", render_range(b.box()),
                          "block in a workbook where " + fmt(e.values["unique_formula_ratio"]) +
                              " of formulas are distinct"});
    }
  }

  e.recommendation = recommend(e.ratings, policy);
  if (e.recommendation == Recommendation::Restructure) {
    std::set<std::string> seen;
    auto note = [&](const std::string& area) {
      if (seen.insert(area).second) e.areas_to_improve.push_back(area);
    };
    for (const auto& issue : e.issues) {
      if (e.ratings[issue.metric] > policy.restructure_floor) continue;
      bool placed = false;
      const bool is_range = issue.location.find(':') != std::string::npos;
      for (const auto& b : report.blocks) {
        auto range = render_range(b.box());
        if (is_range ? issue.location == range : b.members.count(parse_address(issue.location, "")) > 0) {
          note(range);
          placed = true;
          break;
        }
      }
      if (!placed) note(issue.location);
    }
    // A low rating without located findings still has to point somewhere.
    if (e.areas_to_improve.empty()) {
      for (const auto& b : report.blocks) note(render_range(b.box()));
    }
    if (e.areas_to_improve.empty()) note("workbook");
  }
  return e;
}

Json evaluation_to_json(const EvaluationReport& e) {
  Json j = Json::object();
  j["snapshot"] = e.snapshot;
  j["recommendation"] = to_string(e.recommendation);
  j["values"] = Json::object();
  j["ratings"] = Json::object();
  for (const auto& m : kRatedMetrics) {
    j["values"][m] = e.values.at(m);
    j["ratings"][m] = e.ratings.at(m);
  }
  j["issues"] = Json::array();
  for (const auto& i : e.issues) {
    j["issues"].push_back({{"metric", i.metric}, {"location", i.location}, {"description", i.description}});
  }
  j["areas_to_improve"] = e.areas_to_improve;
  return j;
}

EvaluationReport evaluation_from_json(const Json& j) {
  try {
    EvaluationReport e;
    e.snapshot = j.at("snapshot").get<std::string>();
    e.recommendation = recommendation_from_string(j.at("recommendation").get<std::string>());
    for (const auto& m : kRatedMetrics) {
      e.values[m] = j.at("values").at(m).get<double>();
      e.ratings[m] = j.at("ratings").at(m).get<int>();
    }
    for (const auto& i : j.at("issues")) {
      e.issues.push_back({i.at("metric").get<std::string>(), i.at("location").get<std::string>(),
                          i.at("description").get<std::string>()});
    }
    e.areas_to_improve = j.at("areas_to_improve").get<std::vector<std::string>>();
    return e;
  } catch (const Json::exception& ex) {
    throw validation_error(std::string("malformed evaluation report: ") + ex.what());
  }
}

double nearest_rank(std::vector<double> sample, double p) {
  if (sample.empty()) throw config_error("percentile of an empty sample");
  if (!(p > 0 && p <= 100)) throw config_error("percentile must be in (0, 100]");
  std::sort(sample.begin(), sample.end());
  // The epsilon keeps 70% of 100 at rank 70 despite floating-point noise.
  const double exact = p * static_cast<double>(sample.size()) / 100.0;
  auto rank = static_cast<std::size_t>(std::ceil(exact - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, sample.size());
  return sample[rank - 1];
}

Calibration calibrate(const std::vector<MetricValues>& corpus, const std::array<double, 4>& percentiles) {
  if (corpus.empty()) throw config_error("calibration corpus is empty");
  for (std::size_t i = 0; i < percentiles.size(); ++i) {
    if (!(percentiles[i] > 0 && percentiles[i] <= 100) || (i > 0 && !(percentiles[i - 1] < percentiles[i]))) {
      throw config_error("percentiles must be strictly ascending within (0, 100]");
    }
  }
  Calibration c;
  if (corpus.size() == 1) c.warnings.push_back("corpus has a single workbook; bands are collapsed");
  for (const auto& m : kRatedMetrics) {
    std::vector<double> sample;
    for (const auto& values : corpus) {
      auto it = values.find(m);
      if (it == values.end()) throw config_error("corpus entry lacks metric " + m);
      sample.push_back(it->second);
    }
    Bands b;
    for (std::size_t i = 0; i < 4; ++i) b[i] = std::max(0.0, nearest_rank(sample, percentiles[i]));
    bool collapsed = false;
    for (std::size_t i = 1; i < 4; ++i) {
      if (b[i] <= b[i - 1]) {
        b[i] = std::nextafter(b[i - 1], std::numeric_limits<double>::infinity());
        collapsed = true;
      }
    }
    if (collapsed && corpus.size() > 1) c.warnings.push_back("bands for " + m + " collapsed above tied values");
    c.profile.bands[m] = b;
  }
  return c;
}

Calibration calibrate(const std::vector<MetricsReport>& corpus, const std::array<double, 4>& percentiles) {
  std::vector<MetricValues> values;
  values.reserve(corpus.size());
  for (const auto& r : corpus) values.push_back(metric_values(r));
  return calibrate(values, percentiles);
}

}  // namespace scr
