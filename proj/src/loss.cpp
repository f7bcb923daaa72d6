#include "dropletforge/loss.hpp"

#include <algorithm>
#include <cmath>

#include "dropletforge/error.hpp"

namespace dropletforge::loss {

double classification_loss(double p) { return -std::log(std::clamp(p, kClsEpsilon, 1.0)); }

double smooth_l1(double x) {
  const double a = std::abs(x);
  return a < 1.0 ? 0.5 * x * x : a - 0.5;
}

double smooth_l1_grad(double x) {
  if (std::abs(x) < 1.0) return x;
  return x > 0.0 ? 1.0 : -1.0;
}

double bbox_loss(const BoundingBox& pred, const BoundingBox& gt, const BoxNormalization& norm) {
  return smooth_l1((pred.x - gt.x) / norm.x) + smooth_l1((pred.y - gt.y) / norm.y) +
         smooth_l1((pred.w - gt.w) / norm.w) + smooth_l1((pred.h - gt.h) / norm.h);
}

double mask_loss(const SquareGrid& pred, const SquareGrid& gt) {
  if (pred.n != gt.n || pred.n <= 0)
    throw Error(ErrorCode::DimensionMismatch, "mask grids must share a positive side length");
  const std::size_t cells = static_cast<std::size_t>(pred.n) * static_cast<std::size_t>(pred.n);
  if (pred.values.size() != cells || gt.values.size() != cells)
    throw Error(ErrorCode::DimensionMismatch, "mask grid is not N x N");
  double acc = 0.0;
  for (std::size_t i = 0; i < cells; ++i) {
    // clamp the log arguments, not p, so an exact prediction costs exactly 0
    const double p = std::clamp(pred.values[i], 0.0, 1.0);
    const double label = gt.values[i];
    acc += label * std::log(std::max(p, kMaskEpsilon)) + (1.0 - label) * std::log(std::max(1.0 - p, kMaskEpsilon));
  }
  return -acc / static_cast<double>(cells);
}

LossBreakdown total_loss(double cls, double bbx, double mask) {
  if (cls < 0.0 || bbx < 0.0 || mask < 0.0)
    throw Error(ErrorCode::InvalidArgument, "loss components must be non-negative");
  return {cls, bbx, mask, cls + bbx + mask};
}

}  // namespace dropletforge::loss
