#pragma once

#include <vector>

namespace dropletforge::loss {

/// Detection box by centre and size, pixels.
struct BoundingBox {
  double x = 0.0;
  double y = 0.0;
  double w = 1.0;
  double h = 1.0;
};

/// Square N x N grid, row-major. Soft masks hold probabilities, hard masks
/// hold labels in {0, 1}.
struct SquareGrid {
  int n = 0;
  std::vector<double> values;
};

struct LossBreakdown {
  double cls = 0.0;
  double bbx = 0.0;
  double mask = 0.0;
  double total = 0.0;
};

inline constexpr double kClsEpsilon = 1e-12;
inline constexpr double kMaskEpsilon = 1e-7;

/// -ln p with p clamped to [1e-12, 1].
double classification_loss(double p);

/// 0.5 x^2 for |x| < 1, |x| - 0.5 otherwise.
double smooth_l1(double x);

/// Derivative of smooth_l1; x for |x| < 1, sign(x) otherwise.
double smooth_l1_grad(double x);

/// Optional per-component scale applied to the raw differences before the
/// SmoothL1 terms (e.g. anchor width/height). Identity by default.
struct BoxNormalization {
  double x = 1.0;
  double y = 1.0;
  double w = 1.0;
  double h = 1.0;
};

/// Sum of SmoothL1 over the four component differences (pred - gt).
double bbox_loss(const BoundingBox& pred, const BoundingBox& gt, const BoxNormalization& norm = {});

/// Mean binary cross-entropy over the full N x N grid. Both log arguments
/// are floored at 1e-7. Throws DimensionMismatch for differing N.
double mask_loss(const SquareGrid& pred, const SquareGrid& gt);

/// Unweighted sum of the three terms.
LossBreakdown total_loss(double cls, double bbx, double mask);

}  // namespace dropletforge::loss
