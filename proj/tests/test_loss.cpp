#include <doctest.h>

#include <cmath>

#include "dropletforge/error.hpp"
#include "dropletforge/loss.hpp"
#include "dropletforge/rng.hpp"

using namespace dropletforge;
using namespace dropletforge::loss;

namespace {

SquareGrid grid(int n, double v) { return {n, std::vector<double>(static_cast<std::size_t>(n) * n, v)}; }

SquareGrid random_hard(int n, Rng& rng) {
  SquareGrid g = grid(n, 0);
  for (auto& v : g.values) v = rng.coin() ? 1.0 : 0.0;
  return g;
}

}  // namespace

TEST_CASE("classification_loss examples") {
  CHECK(classification_loss(1.0) == 0.0);
  CHECK(classification_loss(0.5) == doctest::Approx(0.693147).epsilon(1e-6));
  CHECK(classification_loss(0.0) == doctest::Approx(27.631021).epsilon(1e-6));
  CHECK(classification_loss(0.0) == doctest::Approx(-std::log(1e-12)));
}

TEST_CASE("smooth_l1 examples") {
  CHECK(smooth_l1(0.0) == 0.0);
  CHECK(smooth_l1(0.5) == 0.125);
  CHECK(smooth_l1(1.0) == 0.5);
  CHECK(0.5 * 1.0 * 1.0 == std::abs(1.0) - 0.5);
  CHECK(smooth_l1(-3.0) == 2.5);
}

TEST_CASE("bbox_loss examples") {
  const BoundingBox gt{10, 20, 5, 6};
  CHECK(bbox_loss(gt, gt) == 0.0);
  CHECK(bbox_loss({10.5, 20, 5, 6}, gt) == 0.125);
  CHECK(bbox_loss({12, 22, 7, 8}, gt) == 6.0);
  // normalisation scales the differences before the SmoothL1 terms
  CHECK(bbox_loss({12, 20, 5, 6}, gt, {4, 1, 1, 1}) == 0.125);
}

TEST_CASE("mask_loss examples") {
  Rng rng(1);
  const auto gt = random_hard(8, rng);
  CHECK(mask_loss(gt, gt) <= 1e-10);
  for (int n : {1, 3, 16}) {
    CHECK(mask_loss(grid(n, 0.5), random_hard(n, rng)) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }
  CHECK(mask_loss(grid(1, 0.9), grid(1, 1)) == doctest::Approx(0.105361).epsilon(1e-6));
  CHECK_THROWS_AS(mask_loss(grid(2, 0.5), grid(3, 1)), Error);
}

TEST_CASE("total_loss examples") {
  const auto z = total_loss(0, 0, 0);
  CHECK(z.total == 0.0);
  CHECK(total_loss(0.6931, 0.125, 0.6931).total == doctest::Approx(1.5112).epsilon(1e-3));
  const auto one = total_loss(1, 0, 0);
  CHECK(one.total == 1.0);
  CHECK(one.cls == 1.0);
}

TEST_CASE("property: smooth_l1 derivative against central differences") {
  Rng rng(77);
  const double h = 1e-6;
  for (int i = 0; i < 100; ++i) {
    const double x = rng.uniform(-3, 3);
    if (std::abs(std::abs(x) - 1.0) < 2 * h) continue;  // kink of the second derivative
    const double fd = (smooth_l1(x + h) - smooth_l1(x - h)) / (2 * h);
    CHECK(std::abs(fd - smooth_l1_grad(x)) < 1e-6);
    CHECK(std::abs(smooth_l1_grad(x)) <= 1.0);
  }
  // continuity at the branch point from both sides
  CHECK(std::abs(smooth_l1(1 - 1e-12) - smooth_l1(1 + 1e-12)) < 1e-11);
}

TEST_CASE("property: bbox_loss is even in each component difference") {
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    const BoundingBox g{rng.uniform(0, 100), rng.uniform(0, 100), rng.uniform(1, 50), rng.uniform(1, 50)};
    const double dx = rng.uniform(-3, 3), dy = rng.uniform(-3, 3), dw = rng.uniform(-3, 3), dh = rng.uniform(-3, 3);
    const double a = bbox_loss({g.x + dx, g.y + dy, g.w + dw, g.h + dh}, g);
    const double b = bbox_loss({g.x - dx, g.y + dy, g.w - dw, g.h + dh}, g);
    CHECK(a == doctest::Approx(b).epsilon(1e-12));
    CHECK(bbox_loss(g, g) == 0.0);
  }
}

TEST_CASE("property: mask_loss is non-negative and minimised at the label") {
  Rng rng(9);
  for (int t = 0; t < 20; ++t) {
    const int n = 1 + static_cast<int>(rng.below(10));
    const auto gt = random_hard(n, rng);
    auto pred = grid(n, 0);
    for (auto& v : pred.values) v = rng.uniform();
    CHECK(mask_loss(pred, gt) >= 0.0);

    const double at_label = mask_loss(gt, gt);
    const std::size_t k = rng.below(gt.values.size());
    auto bumped = gt;
    bumped.values[k] = gt.values[k] > 0.5 ? 1.0 - rng.uniform(1e-3, 1.0) : rng.uniform(1e-3, 1.0);
    CHECK(mask_loss(bumped, gt) > at_label);
  }
}
