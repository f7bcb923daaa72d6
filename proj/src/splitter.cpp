#include "dropletforge/splitter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <queue>
#include <tuple>

namespace dropletforge {

namespace {

std::size_t wrap(long i, std::size_t n) {
  const long m = static_cast<long>(n);
  return static_cast<std::size_t>(((i % m) + m) % m);
}

int circular_distance(int a, int b, int n) {
  const int d = std::abs(a - b) % n;
  return std::min(d, n - d);
}

}  // namespace

CurvatureProfile curvature_profile(const Contour& c, double sigma) {
  const std::size_t n = c.size();
  if (n < 8) throw Error(ErrorCode::ContourTooShort, "curvature needs a contour of at least 8 vertices");
  if (!(sigma > 0.0)) throw Error(ErrorCode::InvalidArgument, "smoothing scale must be positive");

  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double ksum = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    kernel[static_cast<std::size_t>(k + radius)] = std::exp(-0.5 * k * k / (sigma * sigma));
    ksum += kernel[static_cast<std::size_t>(k + radius)];
  }
  for (auto& w : kernel) w /= ksum;

  CurvatureProfile prof;
  prof.sigma = sigma;
  prof.smoothed.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double sx = 0.0, sy = 0.0;
    for (int k = -radius; k <= radius; ++k) {
      const Point& v = c.vertices[wrap(static_cast<long>(i) + k, n)];
      const double w = kernel[static_cast<std::size_t>(k + radius)];
      sx += w * v.x;
      sy += w * v.y;
    }
    prof.smoothed[i] = {sx, sy};
  }
  prof.tangent.resize(n);
  prof.curvature.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const PointF& a = prof.smoothed[wrap(static_cast<long>(i) - 1, n)];
    const PointF& b = prof.smoothed[i];
    const PointF& d = prof.smoothed[wrap(static_cast<long>(i) + 1, n)];
    const double dx = 0.5 * (d.x - a.x), dy = 0.5 * (d.y - a.y);
    const double ddx = d.x - 2.0 * b.x + a.x, ddy = d.y - 2.0 * b.y + a.y;
    const double speed2 = dx * dx + dy * dy;
    const double speed = std::sqrt(speed2);
    prof.tangent[i] = speed > 0.0 ? PointF{dx / speed, dy / speed} : PointF{1.0, 0.0};
    prof.curvature[i] = speed2 > 0.0 ? (dx * ddy - dy * ddx) / (speed2 * speed) : 0.0;
  }
  return prof;
}

std::vector<int> curvature_minima(const CurvatureProfile& prof, double kappa_min, int nms_window) {
  const auto& k = prof.curvature;
  const int n = static_cast<int>(k.size());
  const int half = std::max(0, nms_window / 2);
  std::vector<int> out;
  for (int i = 0; i < n; ++i) {
    if (!(k[i] < -kappa_min)) continue;
    bool is_min = true;
    for (int o = 1; o <= half && is_min; ++o) {
      // strict against earlier neighbours, non-strict against later ones: a
      // flat minimum reports its first vertex
      if (k[wrap(i - o, static_cast<std::size_t>(n))] <= k[i]) is_min = false;
      if (k[wrap(i + o, static_cast<std::size_t>(n))] < k[i]) is_min = false;
    }
    if (is_min) out.push_back(i);
  }
  return out;
}

std::vector<ConcavePoint> detect_concave_points(const Contour& c, const CurvatureProfile& prof, double kappa_min,
                                                const SplitterConfig& cfg) {
  const int n = static_cast<int>(c.size());
  if (static_cast<int>(prof.curvature.size()) != n)
    throw Error(ErrorCode::DimensionMismatch, "curvature profile does not match contour");

  // candidate vertex -> set of scales that support it
  std::vector<std::vector<int>> per_scale;
  for (double s : cfg.scales) {
    const CurvatureProfile p = s == prof.sigma ? prof : curvature_profile(c, s);
    per_scale.push_back(curvature_minima(p, kappa_min, cfg.nms_window));
  }

  std::vector<int> supported;
  for (const auto& hits : per_scale)
    for (int i : hits) {
      int votes = 0;
      for (const auto& other : per_scale)
        votes += std::any_of(other.begin(), other.end(),
                             [&](int j) { return circular_distance(i, j, n) <= cfg.vote_tolerance; });
      if (votes >= cfg.min_votes) supported.push_back(i);
    }
  std::sort(supported.begin(), supported.end());
  supported.erase(std::unique(supported.begin(), supported.end()), supported.end());

  // most concave first; suppress everything within the voting tolerance
  std::stable_sort(supported.begin(), supported.end(),
                   [&](int a, int b) { return prof.curvature[a] < prof.curvature[b]; });
  std::vector<int> chosen;
  for (int i : supported) {
    const bool near = std::any_of(chosen.begin(), chosen.end(),
                                  [&](int j) { return circular_distance(i, j, n) <= cfg.vote_tolerance; });
    if (!near) chosen.push_back(i);
  }
  std::sort(chosen.begin(), chosen.end());

  std::vector<ConcavePoint> out;
  for (int i : chosen) {
    ConcavePoint p;
    p.index = i;
    p.position = {static_cast<double>(c.vertices[i].x), static_cast<double>(c.vertices[i].y)};
    p.curvature = prof.curvature[i];
    p.inward_normal = {-prof.tangent[i].y, prof.tangent[i].x};
    out.push_back(p);
  }
  return out;
}

RegionAnalysis analyze_region(const InstanceMask& local_mask, const SplitterConfig& cfg) {
  RegionAnalysis ra;
  ra.mask = local_mask;
  ra.contour = extract_contour(local_mask);
  if (ra.contour.size() < 8) return ra;
  ra.profile = curvature_profile(ra.contour, cfg.sigma);
  ra.points = detect_concave_points(ra.contour, ra.profile, cfg.kappa_min, cfg);
  ra.too_many_points = static_cast<int>(ra.points.size()) > cfg.max_concave_points;
  for (const auto& p : ra.points) ra.max_abs_curvature = std::max(ra.max_abs_curvature, std::abs(p.curvature));

  const auto hull = [&] {
    try {
      return convex_hull(std::span<const Point>(ra.contour.vertices));
    } catch (const Error&) {
      return ra.contour.vertices;
    }
  }();
  for (std::size_t i = 0; i < hull.size(); ++i)
    for (std::size_t j = i + 1; j < hull.size(); ++j)
      ra.diameter = std::max(ra.diameter, std::hypot(static_cast<double>(hull[i].x - hull[j].x),
                                                     static_cast<double>(hull[i].y - hull[j].y)));
  return ra;
}

Point anchor_pixel(const InstanceMask& local_mask, const ConcavePoint& p) {
  const int cx = static_cast<int>(std::lround(p.position.x));
  const int cy = static_cast<int>(std::lround(p.position.y));
  const auto& m = local_mask.local();
  Point best{-1, -1};
  double best_dot = -std::numeric_limits<double>::infinity();
  for (int py = cy - 1; py <= cy; ++py)
    for (int px = cx - 1; px <= cx; ++px) {
      if (!m.in_bounds(px, py) || !m(px, py)) continue;
      const double dot = (px + 0.5 - cx) * p.inward_normal.x + (py + 0.5 - cy) * p.inward_normal.y;
      if (dot > best_dot) {
        best_dot = dot;
        best = {px, py};
      }
    }
  if (best.x < 0) throw Error(ErrorCode::InvalidArgument, "concave point is not on the region boundary");
  return best;
}

namespace {

std::vector<PointF> arc_points(const Contour& c, int from, int to) {
  const int n = static_cast<int>(c.size());
  std::vector<PointF> out;
  for (int i = from;; i = (i + 1) % n) {
    out.push_back({static_cast<double>(c.vertices[i].x), static_cast<double>(c.vertices[i].y)});
    if (i == to) break;
  }
  return out;
}

double arc_residual(const std::vector<PointF>& pts) {
  try {
    return fit_ellipse(pts).residual;
  } catch (const Error&) {
    return std::numeric_limits<double>::infinity();
  }
}

}  // namespace

PairScore score_pair(const RegionAnalysis& region, int first, int second, const SplitterConfig& cfg) {
  if (first == second) throw Error(ErrorCode::InvalidArgument, "pair endpoints must differ");
  if (first > second) std::swap(first, second);
  const ConcavePoint& p = region.points.at(static_cast<std::size_t>(first));
  const ConcavePoint& q = region.points.at(static_cast<std::size_t>(second));
  const int n = static_cast<int>(region.contour.size());

  PairScore s;
  s.first = first;
  s.second = second;

  const int arc1 = (q.index - p.index + n) % n;
  const int arc2 = n - arc1;
  s.arc_too_short = arc1 < cfg.min_arc_length || arc2 < cfg.min_arc_length;

  const double r1 = arc_residual(arc_points(region.contour, p.index, q.index));
  const double r2 = arc_residual(arc_points(region.contour, q.index, p.index));
  s.ellipse_fit = 1.0 / (1.0 + r1 + r2);

  const double d = std::hypot(p.position.x - q.position.x, p.position.y - q.position.y);
  s.proximity = region.diameter > 0.0 ? std::clamp(1.0 - d / region.diameter, 0.0, 1.0) : 0.0;

  const Point a = anchor_pixel(region.mask, p);
  const Point b = anchor_pixel(region.mask, q);
  const auto chord = bresenham_line(a, b);
  if (chord.size() <= 2) {
    s.convexity = 1.0;
  } else {
    std::size_t inside = 0;
    for (std::size_t i = 1; i + 1 < chord.size(); ++i) inside += region.mask.contains(chord[i].x, chord[i].y);
    s.convexity = static_cast<double>(inside) / static_cast<double>(chord.size() - 2);
  }
  if (s.convexity == 0.0) throw Error(ErrorCode::ChordOutsideRegion, "chord between the pair leaves the region");

  s.curvature = region.max_abs_curvature > 0.0
                    ? 0.5 * (std::abs(p.curvature) + std::abs(q.curvature)) / region.max_abs_curvature
                    : 0.0;

  const auto& w = cfg.weights;
  s.total = w.ellipse_fit * s.ellipse_fit + w.proximity * s.proximity + w.convexity * s.convexity +
            w.curvature * s.curvature;
  return s;
}

bool chords_cross(PointF a0, PointF a1, PointF b0, PointF b1) {
  auto orient = [](PointF o, PointF a, PointF b) {
    const double v = (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
    return (v > 0.0) - (v < 0.0);
  };
  const int o1 = orient(a0, a1, b0), o2 = orient(a0, a1, b1);
  const int o3 = orient(b0, b1, a0), o4 = orient(b0, b1, a1);
  return o1 * o2 < 0 && o3 * o4 < 0;
}

std::vector<PairScore> select_pairs(std::span<const ConcavePoint> points, std::vector<PairScore> scores,
                                    double score_min) {
  std::stable_sort(scores.begin(), scores.end(), [](const PairScore& a, const PairScore& b) {
    if (a.total != b.total) return a.total > b.total;
    return std::tie(a.first, a.second) < std::tie(b.first, b.second);
  });
  std::vector<char> used(points.size(), 0);
  std::vector<PairScore> accepted;
  for (const auto& s : scores) {
    if (s.arc_too_short || s.total < score_min) continue;
    if (used[static_cast<std::size_t>(s.first)] || used[static_cast<std::size_t>(s.second)]) continue;
    const PointF a0 = points[static_cast<std::size_t>(s.first)].position;
    const PointF a1 = points[static_cast<std::size_t>(s.second)].position;
    const bool crosses = std::any_of(accepted.begin(), accepted.end(), [&](const PairScore& o) {
      return chords_cross(a0, a1, points[static_cast<std::size_t>(o.first)].position,
                          points[static_cast<std::size_t>(o.second)].position);
    });
    if (crosses) continue;
    used[static_cast<std::size_t>(s.first)] = used[static_cast<std::size_t>(s.second)] = 1;
    accepted.push_back(s);
  }
  return accepted;
}

// ---------------------------------------------------------------------------
// Dividing curves

DividingCurve recover_dividing_curve(const GrayImage& local_gray, const InstanceMask& local_mask, Point from,
                                     Point to, const SplitterConfig& cfg) {
  const auto& m = local_mask.local();
  const int w = m.width(), h = m.height();
  if (local_gray.width() != w || local_gray.height() != h)
    throw Error(ErrorCode::DimensionMismatch, "gray patch does not match region");

  DividingCurve out;
  if (from == to) {
    out.pixels = {from};
    return out;
  }
  const double ax = from.x, ay = from.y, bx = to.x, by = to.y;
  const double len = std::hypot(bx - ax, by - ay);
  const double ux = (bx - ax) / len, uy = (by - ay) / len;
  const double cos_half = std::cos(cfg.sector_half_angle_deg * std::numbers::pi / 180.0);

  auto in_sector = [&](double px, double py, double ox, double oy, double dx, double dy) {
    const double vx = px - ox, vy = py - oy;
    const double r = std::hypot(vx, vy);
    if (r == 0.0) return true;
    if (r > len) return false;
    return (vx * dx + vy * dy) / r >= cos_half - 1e-12;
  };
  auto allowed = [&](int x, int y) {
    if (!m.in_bounds(x, y) || !m(x, y)) return false;
    return in_sector(x, y, ax, ay, ux, uy) || in_sector(x, y, bx, by, -ux, -uy);
  };
  auto node_cost = [&](int x, int y) {
    const double perp = std::abs((x - ax) * uy - (y - ay) * ux);
    return static_cast<double>(local_gray(x, y)) + cfg.path_lambda * perp / len;
  };

  const auto chord = bresenham_line(from, to);
  const bool chord_ok = std::all_of(chord.begin(), chord.end(), [&](Point p) { return allowed(p.x, p.y); });
  double chord_cost = node_cost(from.x, from.y);
  for (std::size_t i = 1; i < chord.size(); ++i) {
    const bool diag = chord[i].x != chord[i - 1].x && chord[i].y != chord[i - 1].y;
    chord_cost += (diag ? std::numbers::sqrt2 : 1.0) * node_cost(chord[i].x, chord[i].y);
  }

  const auto idx = [w](int x, int y) { return static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + x; };
  std::vector<double> dist(static_cast<std::size_t>(w) * h, std::numeric_limits<double>::infinity());
  std::vector<std::int64_t> prev(dist.size(), -1);
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
  if (allowed(from.x, from.y) && allowed(to.x, to.y)) {
    dist[idx(from.x, from.y)] = node_cost(from.x, from.y);
    open.push({dist[idx(from.x, from.y)], idx(from.x, from.y)});
  }
  const std::size_t goal = idx(to.x, to.y);
  while (!open.empty()) {
    const auto [d, i] = open.top();
    open.pop();
    if (d > dist[i]) continue;
    if (i == goal) break;
    const int x = static_cast<int>(i % static_cast<std::size_t>(w)), y = static_cast<int>(i / static_cast<std::size_t>(w));
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        if (!dx && !dy) continue;
        const int nx = x + dx, ny = y + dy;
        if (!allowed(nx, ny)) continue;
        const double nd = d + (dx && dy ? std::numbers::sqrt2 : 1.0) * node_cost(nx, ny);
        const std::size_t j = idx(nx, ny);
        if (nd < dist[j]) {
          dist[j] = nd;
          prev[j] = static_cast<std::int64_t>(i);
          open.push({nd, j});
        }
      }
  }

  if (!std::isfinite(dist[goal])) {
    out.fallback = true;
    for (const auto& p : chord)
      if (m.in_bounds(p.x, p.y) && m(p.x, p.y)) out.pixels.push_back(p);
    return out;
  }
  if (chord_ok && chord_cost <= dist[goal] + 1e-9 * (1.0 + dist[goal])) {
    out.pixels = chord;
    return out;
  }
  for (std::int64_t i = static_cast<std::int64_t>(goal); i >= 0; i = prev[static_cast<std::size_t>(i)])
    out.pixels.push_back({static_cast<int>(i % w), static_cast<int>(i / w)});
  std::reverse(out.pixels.begin(), out.pixels.end());
  return out;
}

// ---------------------------------------------------------------------------
// Splitting

std::vector<InstanceMask> split_region(const InstanceMask& local_mask, std::span<const DividingCurve> curves,
                                       const SplitterConfig& cfg) {
  if (curves.empty()) return {local_mask};
  const auto& m = local_mask.local();
  const int w = m.width(), h = m.height();
  const Box box = local_mask.box();

  // -1 outside, 0 cut, >0 fragment
  LabelImage lab(w, h, -1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (m(x, y)) lab(x, y) = std::numeric_limits<std::int32_t>::max();
  for (const auto& c : curves)
    for (const auto& p : c.pixels) {
      const int lx = p.x - box.x, ly = p.y - box.y;
      if (lab.in_bounds(lx, ly) && lab(lx, ly) != -1) lab(lx, ly) = 0;
    }

  // 4-connected fragments of the remainder; an 8-connected cut separates them
  int next = 0;
  std::vector<Point> stack;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (lab(x, y) != std::numeric_limits<std::int32_t>::max()) continue;
      ++next;
      lab(x, y) = next;
      stack.push_back({x, y});
      while (!stack.empty()) {
        const Point p = stack.back();
        stack.pop_back();
        constexpr int dx4[4] = {1, -1, 0, 0}, dy4[4] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
          const int nx = p.x + dx4[k], ny = p.y + dy4[k];
          if (lab.in_bounds(nx, ny) && lab(nx, ny) == std::numeric_limits<std::int32_t>::max()) {
            lab(nx, ny) = next;
            stack.push_back({nx, ny});
          }
        }
      }
    }
  if (next == 0) return {local_mask};

  std::vector<double> cx(static_cast<std::size_t>(next) + 1, 0.0), cy(cx.size(), 0.0), cnt(cx.size(), 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (lab(x, y) > 0) {
        cx[lab(x, y)] += x;
        cy[lab(x, y)] += y;
        cnt[lab(x, y)] += 1.0;
      }
  for (int l = 1; l <= next; ++l) {
    cx[l] /= cnt[l];
    cy[l] /= cnt[l];
  }

  // Cut pixels join the 8-adjacent fragment with the nearest centroid. Each
  // pass reads the previous state so the result does not depend on scan order.
  for (bool pending = true; pending;) {
    pending = false;
    LabelImage nextlab = lab;
    bool progressed = false;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        if (lab(x, y) != 0) continue;
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = x + dx, ny = y + dy;
            if (!lab.in_bounds(nx, ny)) continue;
            const int l = lab(nx, ny);
            if (l <= 0) continue;
            const double d = std::hypot(x - cx[l], y - cy[l]);
            if (d < best_d || (d == best_d && l < best)) {
              best_d = d;
              best = l;
            }
          }
        if (best > 0) {
          nextlab(x, y) = best;
          progressed = true;
        } else {
          pending = true;
        }
      }
    lab = std::move(nextlab);
    if (!progressed) break;
  }

  // Merge slivers into the neighbour they share the longest contact with.
  const double min_area = std::max<double>(cfg.min_fragment_px, cfg.min_fragment_frac * static_cast<double>(local_mask.area()));
  for (;;) {
    std::map<int, std::int64_t> area;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if (lab(x, y) > 0) ++area[lab(x, y)];
    if (area.size() < 2) break;
    int small = 0;
    std::int64_t small_area = std::numeric_limits<std::int64_t>::max();
    for (const auto& [l, a] : area)
      if (a < min_area && a < small_area) {
        small = l;
        small_area = a;
      }
    if (small == 0) break;
    std::map<int, int> contact;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        if (lab(x, y) != small) continue;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = x + dx, ny = y + dy;
            if (lab.in_bounds(nx, ny) && lab(nx, ny) > 0 && lab(nx, ny) != small) ++contact[lab(nx, ny)];
          }
      }
    if (contact.empty()) break;
    int target = 0, best_contact = -1;
    for (const auto& [l, k] : contact)
      if (k > best_contact || (k == best_contact && area[l] > area[target])) {
        best_contact = k;
        target = l;
      }
    for (auto& v : lab.pixels())
      if (v == small) v = target;
  }

  // Emit in row-major order of each fragment's first pixel.
  std::vector<int> order;
  std::map<int, std::vector<Point>> pix;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int l = lab(x, y);
      if (l <= 0) continue;
      auto& v = pix[l];
      if (v.empty()) order.push_back(l);
      v.push_back({x + box.x, y + box.y});
    }
  std::vector<InstanceMask> out;
  for (int l : order) out.push_back(InstanceMask::from_pixels(pix[l]));
  return out;
}

SplitOutcome split_overlapped(const Region& region, const GrayImage& frame_gray, const SplitterConfig& cfg) {
  SplitOutcome out;
  const Box box = region.mask.box();
  const InstanceMask local = region.mask.localized();
  const RegionAnalysis ra = analyze_region(local, cfg);
  out.too_many_points = ra.too_many_points;
  if (ra.too_many_points || ra.points.size() < 2) {
    out.masks.push_back(region.mask);
    return out;
  }

  std::vector<PairScore> scores;
  for (int i = 0; i < static_cast<int>(ra.points.size()); ++i)
    for (int j = i + 1; j < static_cast<int>(ra.points.size()); ++j) {
      try {
        scores.push_back(score_pair(ra, i, j, cfg));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::ChordOutsideRegion) throw;
      }
    }
  const auto accepted = select_pairs(ra.points, std::move(scores), cfg.score_min);
  if (accepted.empty()) {
    out.masks.push_back(region.mask);
    return out;
  }

  const GrayImage gray = crop(frame_gray, box);
  for (const auto& s : accepted) {
    const Point a = anchor_pixel(local, ra.points[static_cast<std::size_t>(s.first)]);
    const Point b = anchor_pixel(local, ra.points[static_cast<std::size_t>(s.second)]);
    out.curves.push_back(recover_dividing_curve(gray, local, a, b, cfg));
    out.fallback = out.fallback || out.curves.back().fallback;
  }
  for (auto& m : split_region(local, out.curves, cfg)) out.masks.push_back(m.translated(box.x, box.y));
  for (auto& c : out.curves)
    for (auto& p : c.pixels) {
      p.x += box.x;
      p.y += box.y;
    }
  return out;
}

}  // namespace dropletforge
