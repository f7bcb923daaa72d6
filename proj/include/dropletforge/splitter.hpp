#pragma once

#include <span>
#include <vector>

#include "dropletforge/ellipse_fit.hpp"
#include "dropletforge/preproc.hpp"
#include "dropletforge/raster.hpp"

namespace dropletforge {

struct ScoreWeights {
  double ellipse_fit = 0.4;
  double proximity = 0.3;
  double convexity = 0.15;
  double curvature = 0.15;
};

struct SplitterConfig {
  std::vector<double> scales{2.0, 3.0, 5.0};  // Gaussian sigmas, in contour vertices
  int min_votes = 2;
  double sigma = 3.0;        // scale used for reported curvature and normals
  double kappa_min = 0.08;   // 1/px
  int nms_window = 5;
  int vote_tolerance = 4;    // vertices between detections that count as the same point
  ScoreWeights weights;
  double score_min = 0.5;
  double sector_half_angle_deg = 30.0;
  double path_lambda = 0.5;
  int min_arc_length = 8;
  int max_concave_points = 20;
  double min_fragment_frac = 0.05;  // fragments below this share of the region are merged back
  int min_fragment_px = 10;
};

// Signed curvature of the Gaussian-smoothed closed contour; positive where the
// boundary is convex.
struct CurvatureProfile {
  double sigma = 0.0;
  std::vector<PointF> smoothed;
  std::vector<PointF> tangent;  // unit
  std::vector<double> curvature;
};

CurvatureProfile curvature_profile(const Contour& c, double sigma);

struct ConcavePoint {
  int index = 0;        // contour vertex
  PointF position;      // pixel-corner lattice
  double curvature = 0.0;
  PointF inward_normal;
};

// Local minima of one profile below -kappa_min with non-maximum suppression.
std::vector<int> curvature_minima(const CurvatureProfile& prof, double kappa_min, int nms_window);

// Multi-scale voting: a vertex is kept when at least cfg.min_votes of
// cfg.scales place a minimum within cfg.vote_tolerance of it. `prof` supplies
// the reported curvature and normals.
std::vector<ConcavePoint> detect_concave_points(const Contour& c, const CurvatureProfile& prof, double kappa_min,
                                                const SplitterConfig& cfg = {});

// Everything about one region that pair scoring needs, in region-local
// coordinates (box origin at 0,0).
struct RegionAnalysis {
  InstanceMask mask;
  Contour contour;
  CurvatureProfile profile;
  std::vector<ConcavePoint> points;
  double diameter = 0.0;  // longest chord between contour vertices
  double max_abs_curvature = 0.0;
  bool too_many_points = false;
};

RegionAnalysis analyze_region(const InstanceMask& local_mask, const SplitterConfig& cfg = {});

struct PairScore {
  int first = 0;  // indices into RegionAnalysis::points, first < second
  int second = 0;
  double ellipse_fit = 0.0;
  double proximity = 0.0;
  double convexity = 0.0;
  double curvature = 0.0;
  double total = 0.0;
  bool arc_too_short = false;
};

// Region pixel touching a concave corner, chosen along the inward normal.
Point anchor_pixel(const InstanceMask& local_mask, const ConcavePoint& p);

// Throws ChordOutsideRegion when no interior chord pixel lies in the region.
PairScore score_pair(const RegionAnalysis& region, int first, int second, const SplitterConfig& cfg = {});

bool chords_cross(PointF a0, PointF a1, PointF b0, PointF b1);

// Greedy by descending total; endpoints used once; no crossing chords.
std::vector<PairScore> select_pairs(std::span<const ConcavePoint> points, std::vector<PairScore> scores,
                                    double score_min);

struct DividingCurve {
  std::vector<Point> pixels;  // region-local, 8-connected, from first to second anchor
  bool fallback = false;      // sector search failed; straight chord clipped to the region
};

// Minimum-cost path between the anchors inside the union of two sectors.
DividingCurve recover_dividing_curve(const GrayImage& local_gray, const InstanceMask& local_mask, Point from,
                                     Point to, const SplitterConfig& cfg = {});

std::vector<InstanceMask> split_region(const InstanceMask& local_mask, std::span<const DividingCurve> curves,
                                       const SplitterConfig& cfg = {});

struct SplitOutcome {
  std::vector<InstanceMask> masks;  // frame coordinates
  std::vector<DividingCurve> curves;
  bool fallback = false;
  bool too_many_points = false;
};

SplitOutcome split_overlapped(const Region& region, const GrayImage& frame_gray, const SplitterConfig& cfg = {});

}  // namespace dropletforge
