#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dropletforge/error.hpp"

namespace dropletforge {

struct Point {
  int x = 0;
  int y = 0;
  friend bool operator==(const Point&, const Point&) = default;
};

struct PointF {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const PointF&, const PointF&) = default;
};

// Axis-aligned pixel rectangle: covers columns [x, x + width) and rows [y, y + height).
struct Box {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;

  int right() const { return x + width; }
  int bottom() const { return y + height; }
  bool contains(int px, int py) const { return px >= x && py >= y && px < right() && py < bottom(); }
  friend bool operator==(const Box&, const Box&) = default;
};

Box intersect(const Box& a, const Box& b);

template <typename T>
class Raster {
 public:
  Raster() = default;
  Raster(int width, int height, T fill = T{}) : width_(width), height_(height) {
    if (width < 0 || height < 0) throw Error(ErrorCode::InvalidArgument, "negative raster size");
    data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return data_.empty(); }
  bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  T& operator()(int x, int y) { return data_[index(x, y)]; }
  const T& operator()(int x, int y) const { return data_[index(x, y)]; }

  std::span<T> pixels() { return data_; }
  std::span<const T> pixels() const { return data_; }
  std::span<T> row(int y) { return std::span<T>(data_).subspan(index(0, y), width_); }
  std::span<const T> row(int y) const { return std::span<const T>(data_).subspan(index(0, y), width_); }

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using GrayImage = Raster<float>;
using BinaryMask = Raster<std::uint8_t>;
using LabelImage = Raster<std::int32_t>;

// Interleaved RGB, each sample in [0,1].
class ColorImage {
 public:
  ColorImage() = default;
  ColorImage(int width, int height, float r = 0.f, float g = 0.f, float b = 0.f);

  int width() const { return width_; }
  int height() const { return height_; }

  float& at(int x, int y, int channel) { return data_[offset(x, y) + channel]; }
  float at(int x, int y, int channel) const { return data_[offset(x, y) + channel]; }
  void set(int x, int y, float r, float g, float b);

  std::span<const float> samples() const { return data_; }
  ColorImage crop(const Box& box) const;

  friend bool operator==(const ColorImage&, const ColorImage&) = default;

 private:
  std::size_t offset(int x, int y) const {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x)) * 3;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<float> data_;
};

enum class GrayWeights { Rec601, ChannelMean };

GrayImage to_grayscale(const ColorImage& img, GrayWeights weights = GrayWeights::Rec601);

template <typename T>
Raster<T> crop(const Raster<T>& src, const Box& box) {
  Raster<T> out(box.width, box.height);
  for (int y = 0; y < box.height; ++y)
    for (int x = 0; x < box.width; ++x) out(x, y) = src(box.x + x, box.y + y);
  return out;
}

// One droplet: a tight bounding box in frame coordinates plus the local
// binary raster inside it. Foreground is expected to be non-empty and
// 8-connected; the factories below produce tight boxes.
class InstanceMask {
 public:
  InstanceMask() = default;
  InstanceMask(Box box, BinaryMask local, int id = 0);

  static InstanceMask from_pixels(std::span<const Point> pixels, int id = 0);
  static InstanceMask from_frame(const BinaryMask& frame, int id = 0);

  int id() const { return id_; }
  void set_id(int id) { id_ = id; }
  const Box& box() const { return box_; }
  const BinaryMask& local() const { return local_; }

  bool contains(int x, int y) const {
    return box_.contains(x, y) && local_(x - box_.x, y - box_.y) != 0;
  }
  bool empty() const { return area_ == 0; }
  std::int64_t area() const { return area_; }
  std::vector<Point> pixels() const;

  InstanceMask translated(int dx, int dy) const;
  // Copy with the local raster relative to (0,0); feature computations run in
  // this frame so results do not depend on where the instance sits.
  InstanceMask localized() const { return translated(-box_.x, -box_.y); }
  void paint(BinaryMask& frame, std::uint8_t value = 1) const;
  void paint(LabelImage& frame, std::int32_t value) const;

  friend bool operator==(const InstanceMask& a, const InstanceMask& b) {
    return a.box_ == b.box_ && a.local_ == b.local_;
  }

 private:
  Box box_;
  BinaryMask local_;
  std::int64_t area_ = 0;
  int id_ = 0;
};

bool is_connected8(const InstanceMask& m);
std::int64_t intersection_area(const InstanceMask& a, const InstanceMask& b);
// True when some pixel of `a` is 8-adjacent to, or coincides with, a pixel of `b`.
bool touches8(const InstanceMask& a, const InstanceMask& b);

// Outer boundary as a crack contour: vertices live on the pixel-corner
// lattice, corner (x, y) being the top-left corner of pixel (x, y). Every
// step is one pixel edge. Orientation has positive shoelace area in (x, y),
// i.e. the region interior lies on the left of the direction of travel.
struct Contour {
  std::vector<Point> vertices;

  std::size_t size() const { return vertices.size(); }
};

Contour extract_contour(const InstanceMask& m);
// Pixels enclosed by a crack contour (non-zero winding at pixel centres).
InstanceMask fill_contour(const Contour& c, int id = 0);
// Length of the polygon through the edge midpoints; approximates the
// Euclidean length of the underlying curve.
double midcrack_length(const Contour& c);
// Length of the 8-chain through the boundary pixels next to the contour,
// with the corner-count correction of Vossepoel and Smeulders. Within a few
// percent of the true length for digitised smooth curves.
double chain_length(const Contour& c);
double signed_area(const Contour& c);

struct ShapeFeatures {
  std::int64_t area = 0;
  std::int64_t perimeter = 0;  // exposed pixel edges along the outer contour
  double solidity = 1.0;
  double eccentricity = 0.0;
  PointF centroid;             // mean pixel index, frame coordinates
  bool degenerate = false;     // moment matrix singular; eccentricity is the sentinel
};

inline constexpr double kDegenerateEccentricity = 0.9999;

ShapeFeatures compute_shape_features(const InstanceMask& m);
// Count of pixel centres inside or on the convex hull of the mask's pixel centres.
std::int64_t rasterized_hull_area(const InstanceMask& m);

std::vector<PointF> convex_hull(std::span<const PointF> points);
std::vector<Point> convex_hull(std::span<const Point> points);

std::vector<Point> bresenham_line(Point a, Point b);

}  // namespace dropletforge
