#include <doctest.h>

#include <queue>

#include "dropletforge/preproc.hpp"
#include "dropletforge/rng.hpp"
#include "shapes.hpp"

using namespace dropletforge;

namespace {

// Exhaustive scan in plain doubles over every split point.
int brute_otsu_bin(const std::array<std::int64_t, 256>& h) {
  double best = -1;
  int best_k = -1;
  for (int k = 1; k < 256; ++k) {
    double n0 = 0, n1 = 0, s0 = 0, s1 = 0;
    for (int i = 0; i < 256; ++i) (i < k ? n0 : n1) += h[i], (i < k ? s0 : s1) += static_cast<double>(h[i]) * i;
    if (n0 == 0 || n1 == 0) continue;
    const double d = s0 / n0 - s1 / n1, v = n0 * n1 * d * d;
    if (v > best * (1 + 1e-12)) {
      best = v;
      best_k = k;
    }
  }
  return best_k;
}

GrayImage two_level(int w, int h, float lo, float hi) {
  GrayImage g(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) g(x, y) = x < w / 2 ? lo : hi;
  return g;
}

// Flood fill oracle: component id per pixel, 8-connected.
std::vector<int> flood_labels(const BinaryMask& b, int& count) {
  std::vector<int> lab(static_cast<std::size_t>(b.width()) * b.height(), 0);
  count = 0;
  for (int y = 0; y < b.height(); ++y)
    for (int x = 0; x < b.width(); ++x) {
      if (!b(x, y) || lab[y * b.width() + x]) continue;
      ++count;
      std::queue<Point> q;
      q.push({x, y});
      lab[y * b.width() + x] = count;
      while (!q.empty()) {
        const Point p = q.front();
        q.pop();
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = p.x + dx, ny = p.y + dy;
            if (!b.in_bounds(nx, ny) || !b(nx, ny) || lab[ny * b.width() + nx]) continue;
            lab[ny * b.width() + nx] = count;
            q.push({nx, ny});
          }
      }
    }
  return lab;
}

Region region_of(const InstanceMask& m) { return {m, compute_shape_features(m), m.box()}; }

}  // namespace

TEST_CASE("otsu on a two-level image") {
  const auto g = two_level(20, 10, 0.2f, 0.8f);
  const auto r = otsu_threshold(g);
  CHECK(r.bin == brute_otsu_bin(histogram256(g)));
  CHECK(r.threshold > 0.2);
  CHECK(r.threshold <= 0.8);
  CHECK(r.mean_below == doctest::Approx(51.0 / 255));
  CHECK(r.mean_above == doctest::Approx(204.0 / 255));
  const auto b = binarize(g, BinarizeMethod::otsu());
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 20; ++x) CHECK(b(x, y) == (x >= 10));
}

TEST_CASE("otsu matches the exhaustive scan on random histograms") {
  Rng rng(99);
  for (int t = 0; t < 50; ++t) {
    std::array<std::int64_t, 256> h{};
    const int populated = 2 + static_cast<int>(rng.below(20));
    for (int i = 0; i < populated; ++i) h[rng.below(256)] += 1 + static_cast<std::int64_t>(rng.below(500));
    int nonzero = 0;
    for (auto v : h) nonzero += v > 0;
    if (nonzero < 2) continue;
    CHECK(otsu_threshold(h).bin == brute_otsu_bin(h));
  }
}

TEST_CASE("otsu rejects constant images") {
  CHECK_THROWS_AS(otsu_threshold(GrayImage(5, 5, 0.3f)), Error);
  try {
    otsu_threshold(GrayImage(5, 5, 0.3f));
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConstantImage);
  }
}

TEST_CASE("fixed threshold") {
  const auto g = two_level(4, 2, 0.4f, 0.6f);
  const auto b = binarize(g, BinarizeMethod::fixed(0.5));
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 4; ++x) CHECK(b(x, y) == (g(x, y) > 0.5f));
  const auto z = binarize(GrayImage(6, 6), BinarizeMethod::fixed(0.5));
  for (auto v : z.pixels()) CHECK(v == 0);
}

TEST_CASE("exclude_background examples") {
  // bright glass frame around the border plus one droplet in the middle
  BinaryMask b(100, 100);
  for (int y = 0; y < 100; ++y)
    for (int x = 0; x < 100; ++x) b(x, y) = x < 8 || y < 8 || x >= 92 || y >= 92;
  const auto droplet = shapes::disk_frame(100, 100, 50, 50, 10);
  std::int64_t frame_px = 0;
  for (auto v : b.pixels()) frame_px += v;
  CHECK(frame_px > 2500);
  CHECK(frame_px < 3500);
  const auto with = shapes::unite(b, droplet);
  CHECK(exclude_background(with) == droplet);

  CHECK(exclude_background(droplet) == droplet);

  // tiny droplet clipped by the border stays
  const auto edge = shapes::disk_frame(100, 100, 0, 50, 3);
  CHECK(exclude_background(edge) == edge);
  // the slide border can be restricted per side
  BinaryMask left_bar(100, 100);
  for (int y = 0; y < 100; ++y)
    for (int x = 0; x < 20; ++x) left_bar(x, y) = 1;
  CHECK(exclude_background(left_bar, 0.05, BorderSides::none()) == left_bar);
  BorderSides right_only = BorderSides::none();
  right_only.right = true;
  CHECK(exclude_background(left_bar, 0.05, right_only) == left_bar);
  const auto cleared = exclude_background(left_bar);
  for (auto v : cleared.pixels()) CHECK(v == 0);
}

TEST_CASE("connected components examples") {
  BinaryMask b(8, 4);
  for (auto [x, y] : {std::pair{0, 0}, {1, 0}, {0, 1}, {1, 1}, {5, 2}, {6, 2}, {5, 3}, {6, 3}}) b(x, y) = 1;
  auto regions = connected_components(b);
  REQUIRE(regions.size() == 2);
  CHECK(regions[0].mask.area() == 4);
  CHECK(regions[1].mask.area() == 4);
  CHECK(regions[0].box == Box{0, 0, 2, 2});

  BinaryMask d(3, 3);
  d(0, 0) = d(1, 1) = 1;
  CHECK(connected_components(d).size() == 1);
  CHECK(connected_components(BinaryMask(5, 5)).empty());
}

TEST_CASE("property: labelling agrees with a flood fill") {
  Rng rng(11);
  for (int t = 0; t < 30; ++t) {
    BinaryMask b(40, 30);
    const double p = rng.uniform(0.2, 0.6);
    for (auto& v : b.pixels()) v = rng.uniform() < p;
    int n = 0, m = 0;
    const auto lab = label_components(b, n);
    const auto ref = flood_labels(b, m);
    REQUIRE(n == m);
    // flood fill also numbers components by first pixel in row-major order
    for (int y = 0; y < 30; ++y)
      for (int x = 0; x < 40; ++x) CHECK(lab(x, y) == ref[y * 40 + x]);
    std::int64_t area = 0;
    for (const auto& r : connected_components(b)) {
      CHECK(is_connected8(r.mask));
      area += r.mask.area();
    }
    std::int64_t fg = 0;
    for (auto v : b.pixels()) fg += v;
    CHECK(area == fg);
  }
}

TEST_CASE("drop_small_regions") {
  std::vector<Region> rs{region_of(shapes::rect(0, 0, 3, 3)), region_of(shapes::rect(10, 0, 2, 2))};
  const auto kept = drop_small_regions(rs, 5);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].mask.area() == 9);
}

TEST_CASE("classify_candidates examples") {
  auto disk = shapes::disk(64, 64, 20);
  auto pea = shapes::peanut(20, 30).translated(200, 0);
  const auto cs = classify_candidates({region_of(disk), region_of(pea)});
  REQUIRE(cs.isolated.size() == 1);
  REQUIRE(cs.overlapped.size() == 1);
  CHECK(cs.isolated[0].mask == disk);
  CHECK(cs.overlapped[0].mask == pea);
  CHECK(intersection_area(cs.isolated[0].mask, cs.overlapped[0].mask) == 0);

  const auto empty = classify_candidates({});
  CHECK(empty.isolated.empty());
  CHECK(empty.overlapped.empty());
}
