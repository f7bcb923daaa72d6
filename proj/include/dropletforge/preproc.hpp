#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "dropletforge/raster.hpp"

namespace dropletforge {

// Intensities map to 256 bins by round(v * 255).
int intensity_bin(float v);
std::array<std::int64_t, 256> histogram256(const GrayImage& g);

struct OtsuResult {
  int bin = 0;             // foreground = bin(v) >= this
  double threshold = 0.0;  // (bin - 0.5) / 255, the intensity at the bin boundary
  double between_class_variance = 0.0;
  double mean_below = 0.0;  // class means in intensity units
  double mean_above = 0.0;
};

// Maximises between-class variance over split points 1..255. Ties go to the
// lowest bin. Throws ConstantImage when fewer than two bins are populated.
OtsuResult otsu_threshold(const std::array<std::int64_t, 256>& hist);
OtsuResult otsu_threshold(const GrayImage& g);

struct BinarizeMethod {
  enum class Kind { Otsu, Fixed };
  Kind kind = Kind::Otsu;
  double threshold = 0.5;  // Fixed only

  static BinarizeMethod otsu() { return {}; }
  static BinarizeMethod fixed(double t) { return {Kind::Fixed, t}; }
};

// Droplets are bright: foreground = intensity >= threshold.
BinaryMask binarize(const GrayImage& g, const BinarizeMethod& method);

// Which image borders count as the slide border for background exclusion.
struct BorderSides {
  bool left = true;
  bool top = true;
  bool right = true;
  bool bottom = true;

  static BorderSides all() { return {}; }
  static BorderSides none() { return {false, false, false, false}; }
};

// Removes 8-connected foreground components that touch a border side and
// cover more than min_area_frac of the image (non-tissue glass).
BinaryMask exclude_background(const BinaryMask& b, double min_area_frac = 0.05,
                              BorderSides sides = BorderSides::all());

struct Region {
  InstanceMask mask;
  ShapeFeatures features;
  Box box;
};

// 8-connected labelling; labels 1..n in row-major order of each component's
// first pixel, 0 for background.
LabelImage label_components(const BinaryMask& b, int& count);
std::vector<Region> connected_components(const BinaryMask& b);

std::vector<Region> drop_small_regions(std::vector<Region> regions, std::int64_t min_px);

struct CandidateSet {
  std::vector<Region> isolated;
  std::vector<Region> overlapped;
  BinaryMask tissue_mask;
};

inline constexpr double kDefaultSolidityThreshold = 0.95;

CandidateSet classify_candidates(std::vector<Region> regions, double solidity_threshold = kDefaultSolidityThreshold);

}  // namespace dropletforge
