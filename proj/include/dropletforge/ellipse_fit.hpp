#pragma once

#include <array>
#include <span>

#include "dropletforge/raster.hpp"

namespace dropletforge {

struct EllipseModel {
  PointF center;
  double semi_major = 0.0;  // a >= b > 0
  double semi_minor = 0.0;
  double orientation = 0.0;  // major-axis angle in [0, pi)
  // Mean squared algebraic distance of the points to the conic, evaluated in
  // normalised coordinates (centroid at origin, RMS radius sqrt(2)) and
  // divided by the rotation-invariant squared norm of the coefficients.
  double residual = 0.0;
  // Conic A x^2 + B xy + C y^2 + D x + E y + F in normalised coordinates,
  // scaled so that 4AC - B^2 = 1.
  std::array<double, 6> conic{};
  // True when the constrained fit had no elliptic solution and the model is
  // the moment (bounding) ellipse of the points instead.
  bool fallback = false;
};

// Direct constrained least squares (numerically stable variant). Throws
// DegenerateInput for fewer than 6 points or collinear input.
EllipseModel fit_ellipse(std::span<const PointF> points);

}  // namespace dropletforge
