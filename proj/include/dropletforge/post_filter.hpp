#pragma once

#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dropletforge {

// Per-instance measurements the filter looks at.
struct FilterItem {
  int id = 0;
  double score = 1.0;
  double size = 0.0;  // area, px
  double perimeter = 0.0;
  double eccentricity = 0.0;
};

// Inclusive [lo, hi] as multiples of the cohort average.
struct FeatureInterval {
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
};

struct FilterSpec {
  FeatureInterval size;
  FeatureInterval perimeter;
  FeatureInterval eccentricity;
  std::optional<double> min_score;

  // size [0.001, 6], perimeter [0.5, 4], eccentricity [0.2, 1.5]
  static FilterSpec defaults();
  static FilterSpec permissive() { return {}; }
  void validate() const;
};

struct CohortAverages {
  double size = 0.0;
  double perimeter = 0.0;
  double eccentricity = 0.0;
};

// Arithmetic means over all instances. Throws EmptyCohort.
CohortAverages cohort_averages(std::span<const FilterItem> items);

struct Rejection {
  FilterItem item;
  std::vector<std::string> reasons;  // "size", "perimeter", "eccentricity", "score"
};

struct FilterOutcome {
  std::vector<FilterItem> retained;
  std::vector<Rejection> discarded;
  CohortAverages averages;
};

// Averages are taken once over the whole input (or supplied frozen) and are
// never recomputed over the retained set. An empty input retains nothing.
FilterOutcome apply_filter(std::span<const FilterItem> items, const FilterSpec& spec,
                           std::optional<CohortAverages> frozen = std::nullopt);

struct FeatureStats {
  double min = 0.0;
  double mean = 0.0;
  double max = 0.0;
};

struct MorphologyReport {
  std::size_t retained = 0;
  std::size_t discarded = 0;
  std::optional<FeatureStats> size;
  std::optional<FeatureStats> perimeter;
  std::optional<FeatureStats> eccentricity;
};

MorphologyReport morphology_report(const FilterOutcome& outcome);

}  // namespace dropletforge
