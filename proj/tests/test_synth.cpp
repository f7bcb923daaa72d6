#include <doctest.h>

#include <algorithm>

#include "dropletforge/preproc.hpp"
#include "dropletforge/synth.hpp"

using namespace dropletforge;

TEST_CASE("generate_scene examples") {
  SceneSpec one;
  one.width = one.height = 128;
  one.droplet_count = 1;
  one.clump_min = one.clump_max = 1;
  const auto s1 = generate_scene(one);
  REQUIRE(s1.truth.size() == 1);
  CHECK(compute_shape_features(s1.truth[0]).solidity > 0.95);

  SceneSpec two = one;
  two.droplet_count = 2;
  two.clump_min = two.clump_max = 2;
  two.overlap_min = two.overlap_max = 0.2;
  two.axis_ratio_min = 1.0;
  const auto s2 = generate_scene(two);
  REQUIRE(s2.truth.size() == 2);
  BinaryMask fg(128, 128);
  for (const auto& m : s2.truth) m.paint(fg);
  const auto regions = connected_components(fg);
  REQUIRE(regions.size() == 1);
  CHECK(regions[0].features.solidity < 0.95);

  const auto again = generate_scene(two);
  CHECK(again.image == s2.image);
  CHECK(again.truth == s2.truth);
}

TEST_CASE("property: ground truth is disjoint, connected and inside the canvas") {
  for (std::uint64_t seed = 1; seed <= 15; ++seed) {
    SceneSpec spec;
    spec.seed = seed;
    spec.width = spec.height = 256;
    spec.droplet_count = 10;
    spec.clump_max = 4;
    const auto s = generate_scene(spec);
    REQUIRE(s.truth.size() == 10);
    for (std::size_t i = 0; i < s.truth.size(); ++i) {
      const auto& m = s.truth[i];
      CHECK(m.id() == static_cast<int>(i) + 1);
      CHECK(is_connected8(m));
      CHECK(m.box().x >= 0);
      CHECK(m.box().y >= 0);
      CHECK(m.box().right() <= 256);
      CHECK(m.box().bottom() <= 256);
      for (std::size_t j = i + 1; j < s.truth.size(); ++j) CHECK(intersection_area(m, s.truth[j]) == 0);
    }
    const auto px = s.image.samples();
    CHECK(std::all_of(px.begin(), px.end(), [](float v) { return v >= 0.0f && v <= 1.0f; }));
  }
}

TEST_CASE("scene_to_dataset") {
  std::vector<SceneSpec> specs(10);
  for (std::size_t i = 0; i < specs.size(); ++i) {
    specs[i].seed = 100 + i;
    specs[i].width = specs[i].height = 160;
    specs[i].droplet_count = 1 + static_cast<int>(i % 4);
  }
  const auto ds = scene_to_dataset(specs);
  REQUIRE(ds.size() == 10);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(ds[i].name == "scene_" + std::to_string(i));
    CHECK(ds[i].masks.size() == static_cast<std::size_t>(specs[i].droplet_count));
  }
  CHECK(scene_to_dataset({}).empty());
}

TEST_CASE("scene spec validation") {
  SceneSpec s;
  s.overlap_max = 0.8;
  CHECK_THROWS_AS(s.validate(), Error);
  SceneSpec r;
  r.radius_min = 30;
  r.radius_max = 10;
  CHECK_THROWS_AS(r.validate(), Error);
  SceneSpec crowded;
  crowded.width = crowded.height = 64;
  crowded.droplet_count = 200;
  CHECK_THROWS_AS(generate_scene(crowded), Error);
}
