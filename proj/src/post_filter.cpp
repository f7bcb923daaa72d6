#include "dropletforge/post_filter.hpp"

#include <algorithm>
#include <cmath>

#include "dropletforge/error.hpp"

namespace dropletforge {

FilterSpec FilterSpec::defaults() {
  FilterSpec s;
  s.size = {0.001, 6.0};
  s.perimeter = {0.5, 4.0};
  s.eccentricity = {0.2, 1.5};
  return s;
}

void FilterSpec::validate() const {
  for (const auto* f : {&size, &perimeter, &eccentricity}) {
    if (std::isnan(f->lo) || std::isnan(f->hi) || f->lo < 0.0 || f->lo > f->hi)
      throw Error(ErrorCode::InvalidArgument, "filter interval needs 0 <= lo <= hi");
  }
}

CohortAverages cohort_averages(std::span<const FilterItem> items) {
  if (items.empty()) throw Error(ErrorCode::EmptyCohort, "no instances to average");
  CohortAverages a;
  for (const auto& it : items) {
    a.size += it.size;
    a.perimeter += it.perimeter;
    a.eccentricity += it.eccentricity;
  }
  const double n = static_cast<double>(items.size());
  a.size /= n;
  a.perimeter /= n;
  a.eccentricity /= n;
  return a;
}

FilterOutcome apply_filter(std::span<const FilterItem> items, const FilterSpec& spec,
                           std::optional<CohortAverages> frozen) {
  spec.validate();
  FilterOutcome out;
  if (items.empty() && !frozen) return out;
  out.averages = frozen ? *frozen : cohort_averages(items);

  auto within = [](double v, const FeatureInterval& iv, double avg) { return iv.lo * avg <= v && v <= iv.hi * avg; };
  for (const auto& it : items) {
    Rejection r{it, {}};
    if (!within(it.size, spec.size, out.averages.size)) r.reasons.emplace_back("size");
    if (!within(it.perimeter, spec.perimeter, out.averages.perimeter)) r.reasons.emplace_back("perimeter");
    if (!within(it.eccentricity, spec.eccentricity, out.averages.eccentricity)) r.reasons.emplace_back("eccentricity");
    if (spec.min_score && it.score < *spec.min_score) r.reasons.emplace_back("score");
    if (r.reasons.empty()) out.retained.push_back(it);
    else out.discarded.push_back(std::move(r));
  }
  return out;
}

namespace {

template <typename Get>
std::optional<FeatureStats> stats(const std::vector<FilterItem>& items, Get get) {
  if (items.empty()) return std::nullopt;
  FeatureStats s{get(items.front()), 0.0, get(items.front())};
  for (const auto& it : items) {
    const double v = get(it);
    s.min = std::min(s.min, v);
    s.max = std::max(s.max, v);
    s.mean += v;
  }
  s.mean /= static_cast<double>(items.size());
  return s;
}

}  // namespace

MorphologyReport morphology_report(const FilterOutcome& outcome) {
  MorphologyReport r;
  r.retained = outcome.retained.size();
  r.discarded = outcome.discarded.size();
  r.size = stats(outcome.retained, [](const FilterItem& i) { return i.size; });
  r.perimeter = stats(outcome.retained, [](const FilterItem& i) { return i.perimeter; });
  r.eccentricity = stats(outcome.retained, [](const FilterItem& i) { return i.eccentricity; });
  return r;
}

}  // namespace dropletforge
