#include <doctest.h>

#include <algorithm>
#include <set>

#include "dropletforge/error.hpp"
#include "dropletforge/post_filter.hpp"
#include "dropletforge/rng.hpp"

using namespace dropletforge;

namespace {

std::set<int> retained_ids(const FilterOutcome& o) {
  std::set<int> s;
  for (const auto& r : o.retained) s.insert(r.id);
  return s;
}

std::vector<FilterItem> random_cohort(Rng& rng, int n) {
  std::vector<FilterItem> v;
  for (int i = 0; i < n; ++i)
    v.push_back({i + 1, rng.uniform(), rng.uniform(20, 2000), rng.uniform(15, 200), rng.uniform(0, 0.99)});
  return v;
}

FeatureInterval random_interval(Rng& rng) {
  const double lo = rng.uniform(0, 1), hi = lo + rng.uniform(0, 3);
  return {lo, hi};
}

}  // namespace

TEST_CASE("cohort_averages examples") {
  std::vector<FilterItem> one{{1, 1, 50, 30, 0.4}};
  const auto a = cohort_averages(one);
  CHECK(a.size == 50);
  CHECK(a.perimeter == 30);
  CHECK(a.eccentricity == 0.4);

  std::vector<FilterItem> two{{1, 1, 100, 10, 0.2}, {2, 1, 300, 10, 0.2}};
  CHECK(cohort_averages(two).size == 200);

  std::vector<FilterItem> same(5, FilterItem{0, 1, 77, 33, 0.5});
  const auto s = cohort_averages(same);
  CHECK(s.size == doctest::Approx(77));
  CHECK(s.perimeter == doctest::Approx(33));
  CHECK(s.eccentricity == doctest::Approx(0.5));

  CHECK_THROWS_AS(cohort_averages(std::vector<FilterItem>{}), Error);
}

TEST_CASE("apply_filter with the paper default multipliers") {
  // 19 instances of size 100 and one of 1900: mean 190, the outlier is 10x
  std::vector<FilterItem> items;
  for (int i = 0; i < 19; ++i) items.push_back({i + 1, 1.0, 100, 40, 0.5});
  items.push_back({20, 1.0, 1900, 40, 0.5});
  const auto out = apply_filter(items, FilterSpec::defaults());
  CHECK(out.averages.size == doctest::Approx(190));
  REQUIRE(out.discarded.size() == 1);
  CHECK(out.discarded[0].item.id == 20);
  CHECK(out.discarded[0].reasons == std::vector<std::string>{"size"});
  CHECK(out.retained.size() == 19);

  const auto rep = morphology_report(out);
  CHECK(rep.retained == 19);
  CHECK(rep.discarded == 1);
  REQUIRE(rep.size);
  CHECK(rep.size->max == 100);
}

TEST_CASE("apply_filter boundaries and permissive spec") {
  std::vector<FilterItem> items{{1, 1, 50, 10, 0.1}, {2, 1, 150, 30, 0.9}};
  CHECK(apply_filter(items, FilterSpec::permissive()).retained.size() == 2);

  // avg size 100; lo = 0.5 puts item 1 exactly on the bound
  FilterSpec s;
  s.size = {0.5, 1.5};
  const auto out = apply_filter(items, s);
  CHECK(out.retained.size() == 2);

  s.min_score = 2.0;
  const auto scored = apply_filter(items, s);
  CHECK(scored.retained.empty());
  CHECK(scored.discarded[0].reasons == std::vector<std::string>{"score"});

  FilterSpec bad;
  bad.size = {2, 1};
  CHECK_THROWS_AS(apply_filter(items, bad), Error);
}

TEST_CASE("morphology_report edge cases") {
  std::vector<FilterItem> items{{1, 1, 50, 10, 0.1}, {2, 1, 150, 30, 0.9}};
  FilterSpec none;
  none.size = {10, 20};
  const auto r = morphology_report(apply_filter(items, none));
  CHECK(r.retained == 0);
  CHECK(r.discarded == 2);
  CHECK_FALSE(r.size.has_value());
  const auto all = morphology_report(apply_filter(items, FilterSpec::permissive()));
  CHECK(all.retained == 2);
  CHECK(all.discarded == 0);
  CHECK(all.size->mean == 100);
}

TEST_CASE("property: partition, monotonicity, idempotence") {
  Rng rng(40);
  for (int t = 0; t < 100; ++t) {
    const auto items = random_cohort(rng, 1 + static_cast<int>(rng.below(30)));
    FilterSpec s;
    s.size = random_interval(rng);
    s.perimeter = random_interval(rng);
    s.eccentricity = random_interval(rng);
    if (rng.coin()) s.min_score = rng.uniform();
    const auto out = apply_filter(items, s);

    CHECK(out.retained.size() + out.discarded.size() == items.size());
    std::set<int> all = retained_ids(out);
    for (const auto& d : out.discarded) {
      CHECK_FALSE(d.reasons.empty());
      all.insert(d.item.id);
    }
    CHECK(all.size() == items.size());

    FilterSpec wide = s;
    auto widen = [&](FeatureInterval& f) {
      f.lo = std::max(0.0, f.lo - rng.uniform(0, 0.5));
      f.hi += rng.uniform(0, 0.5);
    };
    widen(wide.size);
    widen(wide.perimeter);
    widen(wide.eccentricity);
    const auto wider = retained_ids(apply_filter(items, wide));
    for (int id : retained_ids(out)) CHECK(wider.count(id) == 1);

    const auto again = apply_filter(out.retained, s, out.averages);
    CHECK(retained_ids(again) == retained_ids(out));
    CHECK(again.discarded.empty());
  }
}
