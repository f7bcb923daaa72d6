#include "dropletforge/raster.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <numeric>

namespace dropletforge {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::CollinearInput: return "CollinearInput";
    case ErrorCode::ConstantImage: return "ConstantImage";
    case ErrorCode::ContourTooShort: return "ContourTooShort";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::ChordOutsideRegion: return "ChordOutsideRegion";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::BothEmpty: return "BothEmpty";
    case ErrorCode::EmptyCohort: return "EmptyCohort";
    case ErrorCode::RunSumMismatch: return "RunSumMismatch";
    case ErrorCode::UnknownMaskId: return "UnknownMaskId";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::PlacementFailure: return "PlacementFailure";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

Box intersect(const Box& a, const Box& b) {
  const int x0 = std::max(a.x, b.x);
  const int y0 = std::max(a.y, b.y);
  const int x1 = std::min(a.right(), b.right());
  const int y1 = std::min(a.bottom(), b.bottom());
  if (x1 <= x0 || y1 <= y0) return Box{x0, y0, 0, 0};
  return Box{x0, y0, x1 - x0, y1 - y0};
}

// ---------------------------------------------------------------------------
// ColorImage

ColorImage::ColorImage(int width, int height, float r, float g, float b) : width_(width), height_(height) {
  if (width < 0 || height < 0) throw Error(ErrorCode::InvalidArgument, "negative image size");
  data_.resize(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3);
  for (std::size_t i = 0; i < data_.size(); i += 3) {
    data_[i] = r;
    data_[i + 1] = g;
    data_[i + 2] = b;
  }
}

void ColorImage::set(int x, int y, float r, float g, float b) {
  const std::size_t o = offset(x, y);
  data_[o] = r;
  data_[o + 1] = g;
  data_[o + 2] = b;
}

ColorImage ColorImage::crop(const Box& box) const {
  ColorImage out(box.width, box.height);
  for (int y = 0; y < box.height; ++y) {
    const float* src = &data_[offset(box.x, box.y + y)];
    std::copy(src, src + static_cast<std::size_t>(box.width) * 3, &out.data_[out.offset(0, y)]);
  }
  return out;
}

GrayImage to_grayscale(const ColorImage& img, GrayWeights weights) {
  const float wr = weights == GrayWeights::Rec601 ? 0.299f : 1.f / 3.f;
  const float wg = weights == GrayWeights::Rec601 ? 0.587f : 1.f / 3.f;
  const float wb = weights == GrayWeights::Rec601 ? 0.114f : 1.f / 3.f;
  GrayImage out(img.width(), img.height());
  auto src = img.samples();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    const float v = wr * src[3 * i] + wg * src[3 * i + 1] + wb * src[3 * i + 2];
    dst[i] = std::clamp(v, 0.f, 1.f);
  }
  return out;
}

// ---------------------------------------------------------------------------
// InstanceMask

InstanceMask::InstanceMask(Box box, BinaryMask local, int id) : box_(box), local_(std::move(local)), id_(id) {
  if (local_.width() != box_.width || local_.height() != box_.height)
    throw Error(ErrorCode::DimensionMismatch, "instance raster does not match its box");
  for (auto v : local_.pixels()) area_ += v != 0;
}

InstanceMask InstanceMask::from_pixels(std::span<const Point> pixels, int id) {
  if (pixels.empty()) return InstanceMask(Box{}, BinaryMask(), id);
  int x0 = pixels[0].x, x1 = pixels[0].x, y0 = pixels[0].y, y1 = pixels[0].y;
  for (const auto& p : pixels) {
    x0 = std::min(x0, p.x);
    x1 = std::max(x1, p.x);
    y0 = std::min(y0, p.y);
    y1 = std::max(y1, p.y);
  }
  Box box{x0, y0, x1 - x0 + 1, y1 - y0 + 1};
  BinaryMask local(box.width, box.height);
  for (const auto& p : pixels) local(p.x - x0, p.y - y0) = 1;
  return InstanceMask(box, std::move(local), id);
}

InstanceMask InstanceMask::from_frame(const BinaryMask& frame, int id) {
  int x0 = frame.width(), y0 = frame.height(), x1 = -1, y1 = -1;
  for (int y = 0; y < frame.height(); ++y)
    for (int x = 0; x < frame.width(); ++x)
      if (frame(x, y)) {
        x0 = std::min(x0, x);
        x1 = std::max(x1, x);
        y0 = std::min(y0, y);
        y1 = std::max(y1, y);
      }
  if (x1 < 0) return InstanceMask(Box{}, BinaryMask(), id);
  Box box{x0, y0, x1 - x0 + 1, y1 - y0 + 1};
  BinaryMask local(box.width, box.height);
  for (int y = 0; y < box.height; ++y)
    for (int x = 0; x < box.width; ++x) local(x, y) = frame(x0 + x, y0 + y) ? 1 : 0;
  return InstanceMask(box, std::move(local), id);
}

std::vector<Point> InstanceMask::pixels() const {
  std::vector<Point> out;
  out.reserve(static_cast<std::size_t>(area_));
  for (int y = 0; y < box_.height; ++y)
    for (int x = 0; x < box_.width; ++x)
      if (local_(x, y)) out.push_back({box_.x + x, box_.y + y});
  return out;
}

InstanceMask InstanceMask::translated(int dx, int dy) const {
  InstanceMask out = *this;
  out.box_.x += dx;
  out.box_.y += dy;
  return out;
}

void InstanceMask::paint(BinaryMask& frame, std::uint8_t value) const {
  for (int y = 0; y < box_.height; ++y)
    for (int x = 0; x < box_.width; ++x)
      if (local_(x, y) && frame.in_bounds(box_.x + x, box_.y + y)) frame(box_.x + x, box_.y + y) = value;
}

void InstanceMask::paint(LabelImage& frame, std::int32_t value) const {
  for (int y = 0; y < box_.height; ++y)
    for (int x = 0; x < box_.width; ++x)
      if (local_(x, y) && frame.in_bounds(box_.x + x, box_.y + y)) frame(box_.x + x, box_.y + y) = value;
}

bool is_connected8(const InstanceMask& m) {
  if (m.empty()) return false;
  const auto& local = m.local();
  const int w = local.width(), h = local.height();
  BinaryMask seen(w, h);
  std::vector<Point> stack;
  for (int y = 0; y < h && stack.empty(); ++y)
    for (int x = 0; x < w; ++x)
      if (local(x, y)) {
        stack.push_back({x, y});
        seen(x, y) = 1;
        break;
      }
  std::int64_t reached = 0;
  while (!stack.empty()) {
    const Point p = stack.back();
    stack.pop_back();
    ++reached;
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int nx = p.x + dx, ny = p.y + dy;
        if (local.in_bounds(nx, ny) && local(nx, ny) && !seen(nx, ny)) {
          seen(nx, ny) = 1;
          stack.push_back({nx, ny});
        }
      }
  }
  return reached == m.area();
}

std::int64_t intersection_area(const InstanceMask& a, const InstanceMask& b) {
  const Box ov = intersect(a.box(), b.box());
  std::int64_t n = 0;
  for (int y = ov.y; y < ov.bottom(); ++y)
    for (int x = ov.x; x < ov.right(); ++x) n += a.contains(x, y) && b.contains(x, y);
  return n;
}

bool touches8(const InstanceMask& a, const InstanceMask& b) {
  const Box grown{b.box().x - 1, b.box().y - 1, b.box().width + 2, b.box().height + 2};
  const Box ov = intersect(a.box(), grown);
  for (int y = ov.y; y < ov.bottom(); ++y)
    for (int x = ov.x; x < ov.right(); ++x) {
      if (!a.contains(x, y)) continue;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
          if (b.contains(x + dx, y + dy)) return true;
    }
  return false;
}

// ---------------------------------------------------------------------------
// Contours

namespace {

// Directions in counter-clockwise order: +x, +y, -x, -y.
constexpr std::array<int, 4> kDx{1, 0, -1, 0};
constexpr std::array<int, 4> kDy{0, 1, 0, -1};

}  // namespace

Contour extract_contour(const InstanceMask& m) {
  if (m.empty()) throw Error(ErrorCode::EmptyMask, "cannot trace an empty mask");
  const auto& local = m.local();
  auto fg = [&](int x, int y) { return local.in_bounds(x, y) && local(x, y) != 0; };

  int sx = -1, sy = -1;
  for (int y = 0; y < local.height() && sx < 0; ++y)
    for (int x = 0; x < local.width(); ++x)
      if (local(x, y)) {
        sx = x;
        sy = y;
        break;
      }

  // Crack following with the interior on the left. At every vertex the two
  // pixels ahead decide the turn; preferring the right turn keeps diagonally
  // touching pixels on one boundary (8-connected foreground).
  Contour c;
  int vx = sx, vy = sy, d = 0;
  do {
    c.vertices.push_back({vx + m.box().x, vy + m.box().y});
    vx += kDx[d];
    vy += kDy[d];
    int lx, ly, rx, ry;
    switch (d) {
      case 0: lx = vx;     ly = vy;     rx = vx;     ry = vy - 1; break;
      case 1: lx = vx - 1; ly = vy;     rx = vx;     ry = vy;     break;
      case 2: lx = vx - 1; ly = vy - 1; rx = vx - 1; ry = vy;     break;
      default: lx = vx;    ly = vy - 1; rx = vx - 1; ry = vy - 1; break;
    }
    if (fg(rx, ry))
      d = (d + 3) % 4;
    else if (!fg(lx, ly))
      d = (d + 1) % 4;
  } while (!(vx == sx && vy == sy && d == 0));
  return c;
}

InstanceMask fill_contour(const Contour& c, int id) {
  if (c.size() < 4) throw Error(ErrorCode::ContourTooShort, "contour needs at least 4 vertices");
  int x0 = c.vertices[0].x, x1 = x0, y0 = c.vertices[0].y, y1 = y0;
  for (const auto& v : c.vertices) {
    x0 = std::min(x0, v.x);
    x1 = std::max(x1, v.x);
    y0 = std::min(y0, v.y);
    y1 = std::max(y1, v.y);
  }
  const int w = x1 - x0, h = y1 - y0;
  // Per row: winding increments at vertical edge positions.
  Raster<std::int32_t> delta(w + 1, h);
  const std::size_t n = c.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point a = c.vertices[i];
    const Point b = c.vertices[(i + 1) % n];
    if (a.x != b.x) continue;
    if (b.y == a.y + 1) delta(a.x - x0, a.y - y0) -= 1;  // +y: interior at -x
    else if (b.y == a.y - 1) delta(a.x - x0, b.y - y0) += 1;  // -y: interior at +x
  }
  BinaryMask local(w, h);
  for (int y = 0; y < h; ++y) {
    int winding = 0;
    for (int x = 0; x < w; ++x) {
      winding += delta(x, y);
      local(x, y) = winding > 0 ? 1 : 0;
    }
  }
  return InstanceMask::from_frame(local, id).translated(x0, y0);
}

double midcrack_length(const Contour& c) {
  const std::size_t n = c.size();
  double len = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Point a = c.vertices[i], b = c.vertices[(i + 1) % n], d = c.vertices[(i + 2) % n];
    // midpoints of edges (a,b) and (b,d)
    const double mx0 = 0.5 * (a.x + b.x), my0 = 0.5 * (a.y + b.y);
    const double mx1 = 0.5 * (b.x + d.x), my1 = 0.5 * (b.y + d.y);
    len += std::hypot(mx1 - mx0, my1 - my0);
  }
  return len;
}

double chain_length(const Contour& c) {
  const std::size_t n = c.size();
  std::vector<Point> chain;
  chain.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Point a = c.vertices[i], b = c.vertices[(i + 1) % n];
    const int dx = b.x - a.x, dy = b.y - a.y;
    // interior pixel on the left of the crack edge
    const Point p{std::min(a.x, b.x) - (dy > 0 ? 1 : 0), std::min(a.y, b.y) - (dx < 0 ? 1 : 0)};
    if (chain.empty() || !(chain.back() == p)) chain.push_back(p);
  }
  while (chain.size() > 1 && chain.front() == chain.back()) chain.pop_back();
  if (chain.size() < 2) return 0.0;

  std::int64_t even = 0, odd = 0, corners = 0;
  double extra = 0.0;
  int prev_code = -1, first_code = -1;
  for (std::size_t i = 0; i < chain.size(); ++i) {
    const Point a = chain[i], b = chain[(i + 1) % chain.size()];
    const int dx = b.x - a.x, dy = b.y - a.y;
    if (std::abs(dx) > 1 || std::abs(dy) > 1) {
      extra += std::hypot(dx, dy);
      continue;
    }
    const int code = (dx + 1) * 3 + (dy + 1);
    ((dx != 0 && dy != 0) ? odd : even) += 1;
    if (prev_code >= 0 && code != prev_code) ++corners;
    if (first_code < 0) first_code = code;
    prev_code = code;
  }
  if (prev_code >= 0 && prev_code != first_code) ++corners;
  return 0.980 * static_cast<double>(even) + 1.406 * static_cast<double>(odd) - 0.091 * static_cast<double>(corners) + extra;
}

double signed_area(const Contour& c) {
  const std::size_t n = c.size();
  double twice = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Point a = c.vertices[i], b = c.vertices[(i + 1) % n];
    twice += static_cast<double>(a.x) * b.y - static_cast<double>(b.x) * a.y;
  }
  return 0.5 * twice;
}

// ---------------------------------------------------------------------------
// Hulls

namespace {

template <typename P, typename Cross>
std::vector<P> monotone_chain(std::vector<P> pts, Cross cross) {
  std::sort(pts.begin(), pts.end(), [](const P& a, const P& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<P> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

std::int64_t cross_i(const Point& o, const Point& a, const Point& b) {
  return static_cast<std::int64_t>(a.x - o.x) * (b.y - o.y) - static_cast<std::int64_t>(a.y - o.y) * (b.x - o.x);
}

double cross_f(const PointF& o, const PointF& a, const PointF& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return -floor_div(-a, b); }

}  // namespace

std::vector<PointF> convex_hull(std::span<const PointF> points) {
  auto hull = monotone_chain(std::vector<PointF>(points.begin(), points.end()), cross_f);
  if (hull.size() < 3) throw Error(ErrorCode::CollinearInput, "convex hull needs 3 non-collinear points");
  return hull;
}

std::vector<Point> convex_hull(std::span<const Point> points) {
  auto hull = monotone_chain(std::vector<Point>(points.begin(), points.end()), cross_i);
  if (hull.size() < 3) throw Error(ErrorCode::CollinearInput, "convex hull needs 3 non-collinear points");
  return hull;
}

std::int64_t rasterized_hull_area(const InstanceMask& m) {
  if (m.empty()) return 0;
  const auto& local = m.local();
  std::vector<Point> extremes;
  for (int y = 0; y < local.height(); ++y) {
    int lo = -1, hi = -1;
    for (int x = 0; x < local.width(); ++x)
      if (local(x, y)) {
        if (lo < 0) lo = x;
        hi = x;
      }
    if (lo >= 0) {
      extremes.push_back({lo, y});
      if (hi != lo) extremes.push_back({hi, y});
    }
  }
  const auto hull = monotone_chain(extremes, cross_i);
  if (hull.size() == 1) return 1;
  if (hull.size() == 2) {
    const auto g = std::gcd(std::abs(hull[1].x - hull[0].x), std::abs(hull[1].y - hull[0].y));
    return g + 1;
  }
  int ymin = hull[0].y, ymax = hull[0].y;
  for (const auto& p : hull) {
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  std::int64_t total = 0;
  const std::size_t n = hull.size();
  for (int y = ymin; y <= ymax; ++y) {
    std::int64_t lo = INT64_MAX, hi = INT64_MIN;
    for (std::size_t i = 0; i < n; ++i) {
      const Point a = hull[i], b = hull[(i + 1) % n];
      if (a.y == b.y) {
        if (a.y == y) {
          lo = std::min<std::int64_t>(lo, std::min(a.x, b.x));
          hi = std::max<std::int64_t>(hi, std::max(a.x, b.x));
        }
        continue;
      }
      if (y < std::min(a.y, b.y) || y > std::max(a.y, b.y)) continue;
      // x = a.x + (y - a.y)(b.x - a.x)/(b.y - a.y), exact rational
      std::int64_t num = static_cast<std::int64_t>(a.x) * (b.y - a.y) + static_cast<std::int64_t>(y - a.y) * (b.x - a.x);
      std::int64_t den = b.y - a.y;
      if (den < 0) {
        num = -num;
        den = -den;
      }
      lo = std::min(lo, ceil_div(num, den));
      hi = std::max(hi, floor_div(num, den));
    }
    if (hi >= lo) total += hi - lo + 1;
  }
  return total;
}

ShapeFeatures compute_shape_features(const InstanceMask& m) {
  if (m.empty()) throw Error(ErrorCode::EmptyMask, "no foreground pixels");
  ShapeFeatures f;
  const auto& local = m.local();
  double sx = 0, sy = 0;
  for (int y = 0; y < local.height(); ++y)
    for (int x = 0; x < local.width(); ++x)
      if (local(x, y)) {
        ++f.area;
        sx += x;
        sy += y;
      }
  const double cx = sx / f.area, cy = sy / f.area;
  double m20 = 0, m02 = 0, m11 = 0;
  for (int y = 0; y < local.height(); ++y)
    for (int x = 0; x < local.width(); ++x)
      if (local(x, y)) {
        const double dx = x - cx, dy = y - cy;
        m20 += dx * dx;
        m02 += dy * dy;
        m11 += dx * dy;
      }
  m20 /= f.area;
  m02 /= f.area;
  m11 /= f.area;
  f.centroid = {cx + m.box().x, cy + m.box().y};

  const double mean = 0.5 * (m20 + m02);
  const double root = std::sqrt(0.25 * (m20 - m02) * (m20 - m02) + m11 * m11);
  const double lmax = mean + root, lmin = mean - root;
  if (lmax <= 0.0 || lmin <= 1e-12 * lmax) {
    f.degenerate = true;
    f.eccentricity = kDegenerateEccentricity;
  } else {
    f.eccentricity = std::sqrt(std::max(0.0, 1.0 - lmin / lmax));
  }

  f.perimeter = static_cast<std::int64_t>(extract_contour(m).size());
  f.solidity = static_cast<double>(f.area) / static_cast<double>(rasterized_hull_area(m));
  return f;
}

std::vector<Point> bresenham_line(Point a, Point b) {
  std::vector<Point> out;
  const int dx = std::abs(b.x - a.x), dy = -std::abs(b.y - a.y);
  const int sx = a.x < b.x ? 1 : -1, sy = a.y < b.y ? 1 : -1;
  int err = dx + dy;
  Point p = a;
  for (;;) {
    out.push_back(p);
    if (p == b) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      p.x += sx;
    }
    if (e2 <= dx) {
      err += dx;
      p.y += sy;
    }
  }
  return out;
}

}  // namespace dropletforge
