#include "dropletforge/ellipse_fit.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

namespace dropletforge {

namespace {

// Rotation-invariant squared norm of a conic: the quadratic part enters as
// the Frobenius norm of its symmetric matrix, the linear part as a vector.
double conic_norm2(const std::array<double, 6>& c) {
  return c[0] * c[0] + 0.5 * c[1] * c[1] + c[2] * c[2] + c[3] * c[3] + c[4] * c[4] + c[5] * c[5];
}

double mean_algebraic_residual(const std::array<double, 6>& c, const std::vector<PointF>& pts) {
  double acc = 0.0;
  for (const auto& p : pts) {
    const double v = c[0] * p.x * p.x + c[1] * p.x * p.y + c[2] * p.y * p.y + c[3] * p.x + c[4] * p.y + c[5];
    acc += v * v;
  }
  return acc / static_cast<double>(pts.size()) / conic_norm2(c);
}

// Fills centre/axes/orientation from a conic in normalised coordinates.
bool conic_geometry(const std::array<double, 6>& c, PointF& center, double& a, double& b, double& theta) {
  const double A = c[0], B = c[1], C = c[2], D = c[3], E = c[4], F = c[5];
  const double det = 4.0 * A * C - B * B;
  if (det <= 0.0) return false;
  const double x0 = (B * E - 2.0 * C * D) / det;
  const double y0 = (B * D - 2.0 * A * E) / det;
  const double f0 = A * x0 * x0 + B * x0 * y0 + C * y0 * y0 + D * x0 + E * y0 + F;
  Eigen::Matrix2d q;
  q << A, 0.5 * B, 0.5 * B, C;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(q);
  const double l0 = es.eigenvalues()(0), l1 = es.eigenvalues()(1);  // ascending
  const double s0 = -f0 / l0, s1 = -f0 / l1;
  if (!(s0 > 0.0) || !(s1 > 0.0)) return false;
  // smaller eigenvalue -> longer axis
  a = std::sqrt(s0);
  b = std::sqrt(s1);
  const Eigen::Vector2d major = es.eigenvectors().col(0);
  theta = std::atan2(major(1), major(0));
  if (theta < 0.0) theta += std::numbers::pi;
  if (theta >= std::numbers::pi) theta -= std::numbers::pi;
  center = {x0, y0};
  return true;
}

}  // namespace

EllipseModel fit_ellipse(std::span<const PointF> points) {
  if (points.size() < 6) throw Error(ErrorCode::DegenerateInput, "ellipse fit needs at least 6 points");

  double mx = 0.0, my = 0.0;
  for (const auto& p : points) {
    mx += p.x;
    my += p.y;
  }
  mx /= static_cast<double>(points.size());
  my /= static_cast<double>(points.size());
  double r2 = 0.0;
  for (const auto& p : points) r2 += (p.x - mx) * (p.x - mx) + (p.y - my) * (p.y - my);
  r2 /= static_cast<double>(points.size());
  if (r2 <= 0.0) throw Error(ErrorCode::DegenerateInput, "all points coincide");
  const double scale = std::sqrt(2.0 / r2);

  std::vector<PointF> pts;
  pts.reserve(points.size());
  for (const auto& p : points) pts.push_back({(p.x - mx) * scale, (p.y - my) * scale});

  // Collinearity: smallest eigenvalue of the scatter matrix vanishes.
  Eigen::Matrix2d scatter = Eigen::Matrix2d::Zero();
  for (const auto& p : pts) {
    scatter(0, 0) += p.x * p.x;
    scatter(0, 1) += p.x * p.y;
    scatter(1, 1) += p.y * p.y;
  }
  scatter(1, 0) = scatter(0, 1);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> spread(scatter);
  if (spread.eigenvalues()(0) <= 1e-10 * spread.eigenvalues()(1))
    throw Error(ErrorCode::DegenerateInput, "points are collinear");

  const auto n = static_cast<Eigen::Index>(pts.size());
  Eigen::MatrixXd d1(n, 3), d2(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& p = pts[static_cast<std::size_t>(i)];
    d1.row(i) << p.x * p.x, p.x * p.y, p.y * p.y;
    d2.row(i) << p.x, p.y, 1.0;
  }
  const Eigen::Matrix3d s1 = d1.transpose() * d1;
  const Eigen::Matrix3d s2 = d1.transpose() * d2;
  const Eigen::Matrix3d s3 = d2.transpose() * d2;

  EllipseModel model;
  bool solved = false;
  Eigen::FullPivLU<Eigen::Matrix3d> lu(s3);
  if (lu.isInvertible()) {
    const Eigen::Matrix3d t = -lu.solve(s2.transpose());
    Eigen::Matrix3d m = s1 + s2 * t;
    // premultiply by the inverse of the constraint matrix [[0,0,2],[0,-1,0],[2,0,0]]
    Eigen::Matrix3d reduced;
    reduced.row(0) = m.row(2) / 2.0;
    reduced.row(1) = -m.row(1);
    reduced.row(2) = m.row(0) / 2.0;
    Eigen::EigenSolver<Eigen::Matrix3d> es(reduced);
    double best_eig = std::numeric_limits<double>::infinity();
    Eigen::Vector3d quad = Eigen::Vector3d::Zero();
    for (int k = 0; k < 3; ++k) {
      const Eigen::Vector3d v = es.eigenvectors().col(k).real();
      const double cond = 4.0 * v(0) * v(2) - v(1) * v(1);
      const double lambda = es.eigenvalues()(k).real();
      if (cond > 0.0 && std::abs(lambda) < best_eig) {
        best_eig = std::abs(lambda);
        quad = v;
      }
    }
    if (std::isfinite(best_eig)) {
      const Eigen::Vector3d lin = t * quad;
      std::array<double, 6> c{quad(0), quad(1), quad(2), lin(0), lin(1), lin(2)};
      const double k = 1.0 / std::sqrt(4.0 * c[0] * c[2] - c[1] * c[1]);
      for (auto& v : c) v *= k;
      PointF center;
      double a = 0, b = 0, theta = 0;
      if (conic_geometry(c, center, a, b, theta)) {
        model.conic = c;
        model.center = {center.x / scale + mx, center.y / scale + my};
        model.semi_major = a / scale;
        model.semi_minor = b / scale;
        model.orientation = theta;
        model.residual = mean_algebraic_residual(c, pts);
        solved = true;
      }
    }
  }
  if (solved) return model;

  // Moment ellipse: covariance eigen-axes, scaled by 2 so that a uniformly
  // filled ellipse maps to itself.
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> cov(scatter / static_cast<double>(n));
  const double l0 = cov.eigenvalues()(0), l1 = cov.eigenvalues()(1);
  const Eigen::Vector2d major = cov.eigenvectors().col(1);
  model.fallback = true;
  model.center = {mx, my};
  model.semi_major = 2.0 * std::sqrt(l1) / scale;
  model.semi_minor = 2.0 * std::sqrt(std::max(l0, 0.0)) / scale;
  model.orientation = std::atan2(major(1), major(0));
  if (model.orientation < 0.0) model.orientation += std::numbers::pi;
  if (model.orientation >= std::numbers::pi) model.orientation -= std::numbers::pi;
  const double ca = std::cos(model.orientation), sa = std::sin(model.orientation);
  const double ia = 1.0 / (4.0 * l1), ib = 1.0 / (4.0 * std::max(l0, 1e-300));
  // (x', y') rotated into the axes: x'^2 ia + y'^2 ib - 1
  std::array<double, 6> c{ca * ca * ia + sa * sa * ib, 2.0 * ca * sa * (ia - ib), sa * sa * ia + ca * ca * ib,
                          0.0, 0.0, -1.0};
  const double k = 1.0 / std::sqrt(std::max(4.0 * c[0] * c[2] - c[1] * c[1], 1e-300));
  for (auto& v : c) v *= k;
  model.conic = c;
  model.residual = mean_algebraic_residual(c, pts);
  return model;
}

}  // namespace dropletforge
