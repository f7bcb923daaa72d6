#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>
#include <tuple>

#include "dropletforge/rng.hpp"
#include "dropletforge/splitter.hpp"
#include "shapes.hpp"

using namespace dropletforge;

namespace {

Region region_of(const InstanceMask& m) { return {m, compute_shape_features(m), m.box()}; }

GrayImage flat(int w, int h, float v = 0.9f) { return GrayImage(w, h, v); }

std::vector<PointF> ellipse_points(int n, double cx, double cy, double a, double b, double theta) {
  std::vector<PointF> pts;
  for (int i = 0; i < n; ++i) {
    const double t = 2 * std::numbers::pi * i / n;
    const double u = a * std::cos(t), v = b * std::sin(t);
    pts.push_back({cx + u * std::cos(theta) - v * std::sin(theta), cy + u * std::sin(theta) + v * std::cos(theta)});
  }
  return pts;
}

double angle_diff(double a, double b) {
  double d = std::fmod(std::abs(a - b), std::numbers::pi);
  return std::min(d, std::numbers::pi - d);
}

void check_partition(const InstanceMask& whole, const std::vector<InstanceMask>& parts) {
  std::int64_t sum = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    sum += parts[i].area();
    CHECK(is_connected8(parts[i]));
    for (const auto& p : parts[i].pixels()) CHECK(whole.contains(p.x, p.y));
    for (std::size_t j = i + 1; j < parts.size(); ++j) CHECK(intersection_area(parts[i], parts[j]) == 0);
  }
  CHECK(sum == whole.area());
}

}  // namespace

TEST_CASE("curvature_profile examples") {
  const auto circle = shapes::disk(64, 64, 30);
  const auto c = extract_contour(circle);
  const auto prof = curvature_profile(c, 3.0);
  REQUIRE(prof.curvature.size() == c.size());
  double mean = 0;
  for (double k : prof.curvature) mean += k;
  mean /= static_cast<double>(prof.curvature.size());
  CHECK(std::abs(mean - 1.0 / 30) / (1.0 / 30) < 0.15);

  const auto sq = extract_contour(shapes::rect(0, 0, 100, 100));
  const auto ps = curvature_profile(sq, 3.0);
  for (std::size_t i = 0; i < sq.size(); ++i) {
    const Point v = sq.vertices[i];
    const bool on_top_middle = v.y == 0 && v.x >= 20 && v.x <= 80;
    if (on_top_middle) CHECK(std::abs(ps.curvature[i]) < 0.01);
  }

  CHECK_THROWS_AS(curvature_profile(extract_contour(shapes::rect(0, 0, 1, 1)), 2.0), Error);
}

TEST_CASE("detect_concave_points examples") {
  SplitterConfig cfg;
  const auto ell = InstanceMask::from_frame(shapes::ellipse_frame(128, 96, 64, 48, 40, 22, 0.4)).localized();
  CHECK(analyze_region(ell, cfg).points.empty());

  // centres (49, 48) and (79, 48), r = 20: circles meet at x = 64, y = 48 +- sqrt(175);
  // pixel (x, y) has its centre at corner coordinates (x + .5, y + .5)
  const auto pea = shapes::peanut(20, 30);
  const auto ra = analyze_region(pea.localized(), cfg);
  REQUIRE(ra.points.size() == 2);
  const double h = std::sqrt(20.0 * 20.0 - 15.0 * 15.0);
  const double ox = pea.box().x, oy = pea.box().y;
  std::vector<PointF> expect{{64.5 - ox, 48.5 - h - oy}, {64.5 - ox, 48.5 + h - oy}};
  for (const auto& e : expect) {
    double best = 1e9;
    for (const auto& p : ra.points) best = std::min(best, std::hypot(p.position.x - e.x, p.position.y - e.y));
    CHECK(best <= 3.0);
  }
  for (const auto& p : ra.points) {
    CHECK(p.curvature < -cfg.kappa_min);
  }

  const auto chain = shapes::three_chain();
  CHECK(analyze_region(chain.localized(), cfg).points.size() == 4);
}

TEST_CASE("fit_ellipse examples") {
  const double theta = 30 * std::numbers::pi / 180;
  const auto pts = ellipse_points(20, 5, -3, 40, 20, theta);
  const auto e = fit_ellipse(pts);
  CHECK(std::abs(e.semi_major - 40) / 40 < 0.01);
  CHECK(std::abs(e.semi_minor - 20) / 20 < 0.01);
  CHECK(angle_diff(e.orientation, theta) < std::numbers::pi / 180);
  CHECK(e.residual < 1e-6);
  CHECK_FALSE(e.fallback);

  const auto circ = fit_ellipse(ellipse_points(6, 0, 0, 1, 1, 0));
  CHECK(std::abs(circ.center.x) < 1e-6);
  CHECK(std::abs(circ.center.y) < 1e-6);
  CHECK(std::abs(circ.semi_major - 1) < 1e-6);
  CHECK(std::abs(circ.semi_minor - 1) < 1e-6);

  Rng rng(4);
  auto noisy = pts;
  for (auto& p : noisy)
    if (rng.uniform() < 0.2) {
      p.x += rng.uniform(-2, 2);
      p.y += rng.uniform(-2, 2);
    }
  noisy[3].x += 2;  // at least one perturbed point
  CHECK(fit_ellipse(noisy).residual > e.residual);

  std::vector<PointF> five(pts.begin(), pts.begin() + 5);
  CHECK_THROWS_AS(fit_ellipse(five), Error);
  std::vector<PointF> line;
  for (int i = 0; i < 10; ++i) line.push_back({static_cast<double>(i), 2.0 * i});
  CHECK_THROWS_AS(fit_ellipse(line), Error);
}

TEST_CASE("property: fit_ellipse residual is translation and rotation invariant") {
  Rng rng(8);
  for (int t = 0; t < 20; ++t) {
    auto pts = ellipse_points(30, 0, 0, rng.uniform(10, 40), rng.uniform(5, 10), rng.uniform(0, 3));
    for (auto& p : pts) {
      p.x += rng.uniform(-1, 1);
      p.y += rng.uniform(-1, 1);
    }
    const double r = fit_ellipse(pts).residual;
    auto moved = pts;
    for (auto& p : moved) {
      p.x += 1024;
      p.y -= 512;
    }
    CHECK(fit_ellipse(moved).residual == doctest::Approx(r).epsilon(1e-9));
    const double a = rng.uniform(0, 6.28), c = std::cos(a), s = std::sin(a);
    auto rot = pts;
    for (auto& p : rot) p = {c * p.x - s * p.y, s * p.x + c * p.y};
    CHECK(std::abs(fit_ellipse(rot).residual - r) < 1e-6);
  }
}

TEST_CASE("score_pair examples") {
  SplitterConfig cfg;
  const auto pea = shapes::peanut(20, 30).localized();
  const auto ra = analyze_region(pea, cfg);
  REQUIRE(ra.points.size() == 2);
  const auto s = score_pair(ra, 0, 1, cfg);
  CHECK(s.total == doctest::Approx(0.4 * s.ellipse_fit + 0.3 * s.proximity + 0.15 * s.convexity + 0.15 * s.curvature));
  CHECK(s.total >= cfg.score_min);
  CHECK_FALSE(s.arc_too_short);
  CHECK(s.convexity == 1.0);

  // a neck point against a made-up neighbour one vertex further along
  RegionAnalysis near = ra;
  ConcavePoint q = near.points[0];
  q.index = (q.index + 1) % static_cast<int>(near.contour.size());
  q.position = {static_cast<double>(near.contour.vertices[q.index].x),
                static_cast<double>(near.contour.vertices[q.index].y)};
  near.points = {near.points[0], q};
  const auto d = score_pair(near, 0, 1, cfg);
  CHECK(d.arc_too_short);
  CHECK(d.proximity > 0.95);
  CHECK(select_pairs(near.points, {d}, cfg.score_min).empty());

  // the neck pair outscores every other pairing on the chain
  const auto chain = analyze_region(shapes::three_chain().localized(), cfg);
  REQUIRE(chain.points.size() == 4);
  std::vector<PairScore> all;
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) all.push_back(score_pair(chain, i, j, cfg));
  for (const auto& p : all) {
    const double dx = chain.points[p.first].position.x - chain.points[p.second].position.x;
    const bool neck = std::abs(dx) < 3;
    for (const auto& o : all) {
      const double odx = chain.points[o.first].position.x - chain.points[o.second].position.x;
      if (neck && std::abs(odx) >= 3) CHECK(p.total > o.total);
    }
  }
}

TEST_CASE("score_pair rejects chords through background") {
  // a thick ring with a slot cut through one side; the hole is background
  BinaryMask f(80, 80);
  for (int y = 0; y < 80; ++y)
    for (int x = 0; x < 80; ++x) {
      const double r = std::hypot(x - 40.0, y - 40.0);
      f(x, y) = r <= 30 && r > 9 && !(x > 40 && std::abs(y - 40) <= 2);
    }
  const auto m = InstanceMask::from_frame(f).localized();
  SplitterConfig cfg;
  const auto ra = analyze_region(m, cfg);
  REQUIRE(ra.points.size() >= 2);
  int outside = 0;
  for (int i = 0; i < static_cast<int>(ra.points.size()); ++i)
    for (int j = i + 1; j < static_cast<int>(ra.points.size()); ++j) {
      const auto line = bresenham_line(anchor_pixel(m, ra.points[i]), anchor_pixel(m, ra.points[j]));
      bool any_inside = line.size() <= 2;
      for (std::size_t k = 1; k + 1 < line.size(); ++k) any_inside = any_inside || m.contains(line[k].x, line[k].y);
      if (!any_inside) {
        ++outside;
        try {
          score_pair(ra, i, j, cfg);
          FAIL("expected ChordOutsideRegion");
        } catch (const Error& e) {
          CHECK(e.code() == ErrorCode::ChordOutsideRegion);
        }
      } else {
        CHECK_NOTHROW(score_pair(ra, i, j, cfg));
      }
    }
  CHECK(outside >= 1);
}

TEST_CASE("select_pairs examples") {
  std::vector<ConcavePoint> two(2);
  two[0].position = {0, 0};
  two[1].position = {0, 10};
  PairScore s;
  s.first = 0;
  s.second = 1;
  s.total = 0.8;
  CHECK(select_pairs(two, {s}, 0.5).size() == 1);
  CHECK(select_pairs(two, {s}, 0.9).empty());

  // chords (0,2) and (1,3) of a square cross; greedy keeps the better one only
  std::vector<ConcavePoint> sq(4);
  sq[0].position = {0, 0};
  sq[1].position = {10, 0};
  sq[2].position = {10, 10};
  sq[3].position = {0, 10};
  std::vector<PairScore> sc;
  for (auto [a, b, t] : {std::tuple{0, 2, 0.9}, {1, 3, 0.8}, {0, 1, 0.6}, {2, 3, 0.55}}) {
    PairScore p;
    p.first = a;
    p.second = b;
    p.total = t;
    sc.push_back(p);
  }
  const auto acc = select_pairs(sq, sc, 0.5);
  REQUIRE(acc.size() == 1);
  CHECK(acc[0].first == 0);
  CHECK(acc[0].second == 2);
  CHECK(chords_cross(sq[0].position, sq[2].position, sq[1].position, sq[3].position));
  CHECK_FALSE(chords_cross(sq[0].position, sq[1].position, sq[2].position, sq[3].position));
}

TEST_CASE("select_pairs on the chain agrees with exhaustive matching") {
  SplitterConfig cfg;
  const auto chain = analyze_region(shapes::three_chain().localized(), cfg);
  REQUIRE(chain.points.size() == 4);
  std::vector<PairScore> all;
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) all.push_back(score_pair(chain, i, j, cfg));
  const auto acc = select_pairs(chain.points, all, cfg.score_min);
  CHECK(acc.size() == 2);

  // all valid non-crossing matchings of 4 points, best total
  auto valid = [&](const PairScore& p) { return !p.arc_too_short && p.total >= cfg.score_min; };
  double best = 0;
  for (std::size_t a = 0; a < all.size(); ++a) {
    if (!valid(all[a])) continue;
    best = std::max(best, all[a].total);
    for (std::size_t b = a + 1; b < all.size(); ++b) {
      if (!valid(all[b])) continue;
      std::set<int> ends{all[a].first, all[a].second, all[b].first, all[b].second};
      if (ends.size() != 4) continue;
      if (chords_cross(chain.points[all[a].first].position, chain.points[all[a].second].position,
                       chain.points[all[b].first].position, chain.points[all[b].second].position))
        continue;
      best = std::max(best, all[a].total + all[b].total);
    }
  }
  double got = 0;
  for (const auto& p : acc) got += p.total;
  CHECK(got == doctest::Approx(best));
}

TEST_CASE("recover_dividing_curve examples") {
  SplitterConfig cfg;
  const auto box = shapes::rect(0, 0, 40, 30);
  const Point a{20, 0}, b{20, 29};

  const auto straight = recover_dividing_curve(flat(40, 30), box, a, b, cfg);
  CHECK_FALSE(straight.fallback);
  CHECK(straight.pixels == bresenham_line(a, b));

  // darker valley bowing up to 4 px off the chord, meeting it at both anchors
  GrayImage g = flat(40, 30);
  std::set<std::pair<int, int>> valley;
  for (int y = 0; y < 30; ++y) {
    const int x = 20 + static_cast<int>(std::lround(4 * std::sin(std::numbers::pi * y / 29.0)));
    g(x, y) = 0.1f;
    valley.insert({x, y});
  }
  const auto follow = recover_dividing_curve(g, box, a, b, cfg);
  CHECK_FALSE(follow.fallback);
  int on = 0;
  for (const auto& p : follow.pixels) on += valley.count({p.x, p.y}) > 0;
  CHECK(static_cast<double>(on) / static_cast<double>(follow.pixels.size()) >= 0.9);
  CHECK(follow.pixels.front() == a);
  CHECK(follow.pixels.back() == b);

  // a background slot across the whole sector
  BinaryMask holed(40, 30, 1);
  for (int y = 12; y < 18; ++y)
    for (int x = 5; x < 35; ++x) holed(x, y) = 0;
  const auto hm = InstanceMask::from_frame(holed);
  const auto fb = recover_dividing_curve(flat(40, 30), hm, a, b, cfg);
  CHECK(fb.fallback);
  for (const auto& p : fb.pixels) CHECK(hm.contains(p.x, p.y));
}

TEST_CASE("split_region examples") {
  SplitterConfig cfg;
  const auto pea = shapes::peanut(20, 30);
  const auto disk_area = shapes::disk(49, 48, 20).area();
  const auto out = split_overlapped(region_of(pea), flat(128, 96), cfg);
  REQUIRE(out.masks.size() == 2);
  for (const auto& m : out.masks) CHECK(std::abs(static_cast<double>(m.area() - disk_area)) / disk_area < 0.15);
  check_partition(pea, out.masks);

  const auto none = split_region(pea, {}, cfg);
  REQUIRE(none.size() == 1);
  CHECK(none[0] == pea);

  const auto chain = shapes::three_chain();
  const auto c3 = split_overlapped(region_of(chain), flat(160, 80), cfg);
  CHECK(c3.curves.size() == 2);
  CHECK(c3.masks.size() == 3);
  check_partition(chain, c3.masks);
}

TEST_CASE("property: splitting conserves pixels, is deterministic, leaves ellipses whole") {
  SplitterConfig cfg;
  Rng rng(31);
  for (int t = 0; t < 25; ++t) {
    const double r1 = rng.uniform(12, 24), r2 = rng.uniform(12, 24);
    const double d = (r1 + r2) * rng.uniform(0.6, 0.9), ang = rng.uniform(0, 3.14);
    BinaryMask f = shapes::unite(
        shapes::disk_frame(128, 128, 64, 64, r1),
        shapes::disk_frame(128, 128, 64 + d * std::cos(ang), 64 + d * std::sin(ang), r2));
    const auto m = InstanceMask::from_frame(f);
    GrayImage g = flat(128, 128);
    for (auto& v : g.pixels()) v = static_cast<float>(rng.uniform(0.8, 1.0));
    const auto a = split_overlapped(region_of(m), g, cfg);
    check_partition(m, a.masks);
    const auto b = split_overlapped(region_of(m), g, cfg);
    REQUIRE(a.masks.size() == b.masks.size());
    for (std::size_t i = 0; i < a.masks.size(); ++i) CHECK(a.masks[i] == b.masks[i]);
  }
  for (int t = 0; t < 10; ++t) {
    const auto e = InstanceMask::from_frame(
        shapes::ellipse_frame(100, 100, 50, 50, rng.uniform(15, 40), rng.uniform(10, 15), rng.uniform(0, 3)));
    CHECK(split_overlapped(region_of(e), flat(100, 100), cfg).masks.size() == 1);
  }
}
