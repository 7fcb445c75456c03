#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "scr/json.hpp"
#include "scr/metrics.hpp"

namespace scr {

// Rated metrics, in report order. Every metric is oriented so that larger
// values are worse.
inline const std::vector<std::string> kRatedMetrics = {
    "long_formula",       "magic_constants",  "max_fan_in",           "inconsistent_cells",
    "endpoints",          "cross_sheet_refs", "unique_formula_ratio",
};

// Upper boundaries of ratings 5, 4, 3 and 2; anything above the last rates 1.
using Bands = std::array<double, 4>;

struct ThresholdProfile {
  std::map<std::string, Bands> bands;
};

// Shipped defaults for use before any calibration; not derived from data.
ThresholdProfile default_profile();
// Throws a config error naming the metric when bands are not strictly
// ascending, negative, or a rated metric is missing.
void validate_profile(const ThresholdProfile& p);
ThresholdProfile profile_from_json(const Json& j);
Json profile_to_json(const ThresholdProfile& p);

int rate(double value, const Bands& bands);

// Below this many formulas the unique-formula ratio reads 0: a handful of
// distinct formulas says nothing about copy structure.
inline constexpr std::size_t kMinFormulasForRatio = 10;

using MetricValues = std::map<std::string, double>;
MetricValues metric_values(const MetricsReport& r);

enum class Recommendation { Approve, Restructure, Redevelop };
std::string_view to_string(Recommendation r);
Recommendation recommendation_from_string(std::string_view s);

struct Policy {
  std::size_t redevelop_count = 2;  // this many ratings of 1 -> Redevelop
  int restructure_floor = 2;        // any rating at or below -> Restructure
};

Recommendation recommend(const std::map<std::string, int>& ratings, const Policy& policy = {});

struct Issue {
  std::string metric;
  std::string location;  // "S1!B3" or a block range "S1!A1:C9"
  std::string description;
};

struct EvaluationReport {
  std::string snapshot;
  MetricValues values;
  std::map<std::string, int> ratings;
  std::vector<Issue> issues;
  std::vector<std::string> areas_to_improve;
  Recommendation recommendation = Recommendation::Approve;
};

EvaluationReport evaluate_workbook(const MetricsReport& report, const ThresholdProfile& profile = default_profile(),
                                   const Policy& policy = {});
Json evaluation_to_json(const EvaluationReport& e);
EvaluationReport evaluation_from_json(const Json& j);

// Nearest-rank percentile: the smallest value with at least p% of the
// sample at or below it. p in (0, 100].
double nearest_rank(std::vector<double> sample, double p);

struct Calibration {
  ThresholdProfile profile;
  std::vector<std::string> warnings;
};

inline constexpr std::array<double, 4> kDefaultPercentiles = {70, 80, 90, 98};

// Boundaries are the nearest-rank percentiles of each metric; ties are
// pushed up to the next representable value so bands stay ascending and a
// constant metric rates 5.
Calibration calibrate(const std::vector<MetricValues>& corpus,
                      const std::array<double, 4>& percentiles = kDefaultPercentiles);
Calibration calibrate(const std::vector<MetricsReport>& corpus,
                      const std::array<double, 4>& percentiles = kDefaultPercentiles);

}  // namespace scr
